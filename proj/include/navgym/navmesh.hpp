#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "navgym/sim.hpp"
#include "navgym/voxel.hpp"

namespace navgym {

enum class LinkAbility : uint8_t { kJump = 0, kDoubleJump = 1, kPad = 2 };

const char* ability_name(LinkAbility a);
std::optional<LinkAbility> ability_from_name(const std::string& name);

// Rectangular walkable region at one surface height. Footprint cells refer
// to the baked grid's (x, z) indices.
struct NavPolygon {
  int id = 0;
  double y = 0.0;  // surface height
  int i0 = 0, i1 = 0, k0 = 0, k1 = 0;  // inclusive cell range
  double min_x = 0, max_x = 0, min_z = 0, max_z = 0;
  Vec3 center{0, 0, 0};

  bool contains_xz(double x, double z) const {
    return x >= min_x && x <= max_x && z >= min_z && z <= max_z;
  }
};

struct NavEdge {
  enum class Kind : uint8_t { kAdjacency = 0, kLink = 1 };
  int from = 0, to = 0;
  Kind kind = Kind::kAdjacency;
  LinkAbility ability = LinkAbility::kJump;  // links only
  Vec3 takeoff{0, 0, 0};   // adjacency: shared-boundary midpoint (both legs)
  Vec3 landing{0, 0, 0};
  double heading = 0.0;    // launch yaw for link replay
  double cost = 0.0;       // adjacency: center-midpoint-center; link: |takeoff-landing|
};

struct NavGraph {
  double cell_size = 0.5;
  Vec3 origin{0, 0, 0};
  std::vector<NavPolygon> polygons;
  std::vector<NavEdge> edges;
  std::vector<std::vector<int>> outgoing;  // polygon id -> edge indices

  // Polygon containing the point: footprint covers (x, z) and the surface
  // sits within [y - below_tol, y + above_tol] of the queried y.
  int lookup(const Vec3& p, double above_tol = 0.6, double below_tol = 2.0) const;

  void add_edge(NavEdge e);
  int component_count() const;
  void rebuild_cell_index();

 private:
  std::unordered_map<uint64_t, std::vector<int>> cell_index_;
};

// Walkable-surface extraction + maximal-rectangle decomposition + adjacency.
// A cell is walkable when it is free, sits on an occupied cell (or the
// bounds floor), and the agent can stand at its center.
NavGraph generate_navmesh(const MapDef& map, const VoxelGrid& grid, const Vec3& agent_half,
                          double step_height = 0.5);

// Open-loop ability playout used for link search, link replay and the path
// follower: forward-run at full speed along `heading` with the ability's
// jump script, until landing or `max_steps`.
struct AbilityRollout {
  bool landed = false;
  Vec3 landing{0, 0, 0};
  std::vector<Vec3> track;
};
AbilityRollout simulate_ability(const MapDef& map, const SimConfig& cfg, const Vec3& takeoff,
                                double heading, LinkAbility ability, int max_steps = 120);

struct LinkSearchParams {
  int boundary_stride = 1;  // take every n-th boundary cell
  int headings = 8;
};

// Simulates trajectories from polygon-boundary takeoff points and adds a
// link wherever the rollout lands on a different polygon; keeps the shortest
// link per (from, to, ability) pair.
NavGraph auto_jump_links(NavGraph graph, const MapDef& map, const SimConfig& cfg,
                         LinkAbility ability, const LinkSearchParams& params = {});

NavGraph add_manual_link(NavGraph graph, const Vec3& takeoff, const Vec3& landing,
                         LinkAbility ability);

struct PathSegment {
  enum class Kind : uint8_t { kWalk = 0, kLink = 1 };
  Kind kind = Kind::kWalk;
  LinkAbility ability = LinkAbility::kJump;
  double heading = 0.0;
};

struct Path {
  std::vector<Vec3> waypoints;        // n+1 points for n segments
  std::vector<PathSegment> segments;  // aligned with waypoint pairs
  double cost = 0.0;
};

struct AstarResult {
  bool reachable = false;
  Path path;
  // Debug-mode admissibility audit: max of (heuristic - true remaining cost)
  // over expanded nodes; admissible searches keep this <= 0.
  double max_heuristic_excess = -std::numeric_limits<double>::infinity();
};

// A* over polygons with entry-point-accurate leg costs (adjacency legs pass
// through shared-boundary midpoints, link legs through takeoff/landing), and
// the straight-line-to-goal heuristic. Throws ValidationError when start or
// goal is off the mesh; an unreachable goal is a value.
AstarResult astar(const NavGraph& graph, const Vec3& start, const Vec3& goal);

// Greedy line-of-sight shortcutting of walk runs; link waypoints stay.
Path smooth_path(const NavGraph& graph, const Path& path);

// Proportional waypoint-following controller with ability playback on link
// segments and stuck detection.
class PathFollower {
 public:
  PathFollower(Path path, const SimConfig& cfg);

  // Next action for the current agent state; sets failed() after 100 steps
  // without progress and done() on arrival at the final waypoint.
  Action next_action(const AgentState& agent);

  bool done() const { return done_; }
  bool failed() const { return failed_; }

 private:
  Action steer_towards(const AgentState& agent, const Vec3& target, bool sprint) const;

  Path path_;
  SimConfig cfg_;
  size_t seg_ = 0;
  bool done_ = false;
  bool failed_ = false;
  int no_progress_steps_ = 0;
  double best_dist_ = std::numeric_limits<double>::infinity();
  bool in_flight_ = false;
  bool second_jump_done_ = false;
};

// JSON import/export for inspection and the compare command.
std::string navgraph_to_json_text(const NavGraph& graph);
NavGraph navgraph_from_json_text(const std::string& text);
void save_navgraph(const NavGraph& graph, const std::string& path);
NavGraph load_navgraph(const std::string& path);

struct ManualLink {
  Vec3 takeoff, landing;
  LinkAbility ability;
};
std::vector<ManualLink> load_manual_links(const std::string& path);

}  // namespace navgym
