#include "navgym/navmesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "navgym/error.hpp"
#include "navgym/world.hpp"

namespace navgym {

const char* ability_name(LinkAbility a) {
  switch (a) {
    case LinkAbility::kJump: return "jump";
    case LinkAbility::kDoubleJump: return "double_jump";
    case LinkAbility::kPad: return "pad";
  }
  return "jump";
}

std::optional<LinkAbility> ability_from_name(const std::string& name) {
  if (name == "jump") return LinkAbility::kJump;
  if (name == "double_jump") return LinkAbility::kDoubleJump;
  if (name == "pad") return LinkAbility::kPad;
  return std::nullopt;
}

namespace {

uint64_t column_key(int i, int k) {
  return (uint64_t(uint32_t(i)) << 32) | uint64_t(uint32_t(k));
}

double wrap_angle(double a) {
  while (a > M_PI) a -= 2 * M_PI;
  while (a < -M_PI) a += 2 * M_PI;
  return a;
}

}  // namespace

void NavGraph::rebuild_cell_index() {
  cell_index_.clear();
  for (const auto& poly : polygons)
    for (int k = poly.k0; k <= poly.k1; ++k)
      for (int i = poly.i0; i <= poly.i1; ++i)
        cell_index_[column_key(i, k)].push_back(poly.id);
  outgoing.assign(polygons.size(), {});
  for (size_t e = 0; e < edges.size(); ++e) outgoing[edges[e].from].push_back(int(e));
}

int NavGraph::lookup(const Vec3& p, double above_tol, double below_tol) const {
  int i = int(std::floor((p.x() - origin.x()) / cell_size));
  int k = int(std::floor((p.z() - origin.z()) / cell_size));
  int best = -1;
  double best_y = -std::numeric_limits<double>::infinity();
  for (int di = -1; di <= 0; ++di) {
    for (int dk = -1; dk <= 0; ++dk) {
      auto it = cell_index_.find(column_key(i + di, k + dk));
      if (it == cell_index_.end()) continue;
      for (int id : it->second) {
        const NavPolygon& poly = polygons[id];
        if (!poly.contains_xz(p.x(), p.z())) continue;
        if (poly.y - p.y() > above_tol || p.y() - poly.y > below_tol) continue;
        if (poly.y > best_y) {
          best_y = poly.y;
          best = id;
        }
      }
    }
  }
  return best;
}

void NavGraph::add_edge(NavEdge e) {
  if (outgoing.size() != polygons.size()) outgoing.assign(polygons.size(), {});
  outgoing[e.from].push_back(int(edges.size()));
  edges.push_back(e);
}

int NavGraph::component_count() const {
  std::vector<int> parent(polygons.size());
  for (size_t i = 0; i < parent.size(); ++i) parent[i] = int(i);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : edges) {
    int a = find(e.from), b = find(e.to);
    if (a != b) parent[a] = b;
  }
  std::set<int> roots;
  for (size_t i = 0; i < parent.size(); ++i) roots.insert(find(int(i)));
  return int(roots.size());
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

NavGraph generate_navmesh(const MapDef& map, const VoxelGrid& grid, const Vec3& agent_half,
                          double step_height) {
  NavGraph g;
  g.cell_size = grid.cell_size();
  g.origin = grid.origin();
  const auto& dims = grid.dims();
  const double cs = grid.cell_size();

  // Walkable cells: free cell on an occupied cell (or the bounds floor),
  // with the support surface inside the cell below and a standable agent box
  // at the cell center.
  struct WalkCell {
    int i, k;
    double y;
  };
  std::vector<WalkCell> cells;
  for (int k = 0; k < int(dims[2]); ++k) {
    for (int i = 0; i < int(dims[0]); ++i) {
      for (int j = 0; j < int(dims[1]); ++j) {
        if (grid.get(i, j, k)) continue;
        if (j > 0 && !grid.get(i, j - 1, k)) continue;
        double cx = g.origin.x() + (i + 0.5) * cs;
        double cz = g.origin.z() + (k + 0.5) * cs;
        double cell_bottom = g.origin.y() + j * cs;
        auto support = support_height(map, cx, cz, cell_bottom + 1e-9);
        if (!support) continue;
        if (j > 0 && *support < cell_bottom - cs - 1e-9) continue;  // hanging over a hole
        Vec3 feet(cx, *support + kContactSkin, cz);
        Box body = agent_box_at(feet, agent_half);
        if (!map.bounds.contains_box(body)) continue;
        if (box_overlap(map, body)) continue;
        cells.push_back({i, k, *support});
      }
    }
  }

  // Group by quantized surface height, then greedy row-merge into maximal
  // rectangles per layer.
  std::map<int64_t, std::map<std::pair<int, int>, bool>> layers;
  for (const auto& c : cells) layers[llround(c.y * 1e6)][{c.k, c.i}] = false;

  for (auto& [ykey, layer] : layers) {
    double y = double(ykey) * 1e-6;
    for (auto& [ki, assigned] : layer) {
      if (assigned) continue;
      int k0 = ki.first, i0 = ki.second;
      int i1 = i0;
      while (true) {
        auto it = layer.find({k0, i1 + 1});
        if (it == layer.end() || it->second) break;
        ++i1;
      }
      int k1 = k0;
      while (true) {
        bool row_ok = true;
        for (int i = i0; i <= i1; ++i) {
          auto it = layer.find({k1 + 1, i});
          if (it == layer.end() || it->second) {
            row_ok = false;
            break;
          }
        }
        if (!row_ok) break;
        ++k1;
      }
      for (int k = k0; k <= k1; ++k)
        for (int i = i0; i <= i1; ++i) layer[{k, i}] = true;

      NavPolygon poly;
      poly.id = int(g.polygons.size());
      poly.y = y;
      poly.i0 = i0;
      poly.i1 = i1;
      poly.k0 = k0;
      poly.k1 = k1;
      poly.min_x = g.origin.x() + i0 * cs;
      poly.max_x = g.origin.x() + (i1 + 1) * cs;
      poly.min_z = g.origin.z() + k0 * cs;
      poly.max_z = g.origin.z() + (k1 + 1) * cs;
      poly.center = Vec3(0.5 * (poly.min_x + poly.max_x), y, 0.5 * (poly.min_z + poly.max_z));
      g.polygons.push_back(poly);
    }
  }

  g.rebuild_cell_index();

  // Adjacency: rectangles sharing a boundary segment at compatible heights.
  std::set<std::pair<int, int>> linked;
  for (const auto& p : g.polygons) {
    for (const auto& q : g.polygons) {
      if (q.id <= p.id) continue;
      if (std::abs(p.y - q.y) > step_height + 1e-9) continue;
      bool touch_x = q.i0 == p.i1 + 1 || p.i0 == q.i1 + 1;
      bool touch_z = q.k0 == p.k1 + 1 || p.k0 == q.k1 + 1;
      double sx0, sx1, sz0, sz1;
      if (touch_x) {
        sz0 = std::max(p.min_z, q.min_z);
        sz1 = std::min(p.max_z, q.max_z);
        if (sz1 - sz0 < 1e-9) continue;
        double x = q.i0 == p.i1 + 1 ? p.max_x : p.min_x;
        sx0 = sx1 = x;
      } else if (touch_z) {
        sx0 = std::max(p.min_x, q.min_x);
        sx1 = std::min(p.max_x, q.max_x);
        if (sx1 - sx0 < 1e-9) continue;
        double z = q.k0 == p.k1 + 1 ? p.max_z : p.min_z;
        sz0 = sz1 = z;
      } else {
        continue;
      }
      if (!linked.insert({p.id, q.id}).second) continue;
      Vec3 mid(0.5 * (sx0 + sx1), std::max(p.y, q.y), 0.5 * (sz0 + sz1));
      NavEdge e;
      e.kind = NavEdge::Kind::kAdjacency;
      e.takeoff = e.landing = mid;
      e.from = p.id;
      e.to = q.id;
      e.cost = (p.center - mid).norm() + (mid - q.center).norm();
      g.add_edge(e);
      std::swap(e.from, e.to);
      g.add_edge(e);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Ability rollouts and link search
// ---------------------------------------------------------------------------

AbilityRollout simulate_ability(const MapDef& map, const SimConfig& cfg, const Vec3& takeoff,
                                double heading, LinkAbility ability, int max_steps) {
  AbilityRollout out;
  AgentState a;
  a.position = takeoff;
  a.velocity = Vec3::Zero();
  a.yaw = heading;
  a.grounded = true;
  a.jumps_used = 0;
  bool airborne_seen = false;
  for (int t = 0; t < max_steps; ++t) {
    Action act;
    act.forward = 1.0;
    if (ability != LinkAbility::kPad && t == 0) act.jump = 1.0;
    if (ability == LinkAbility::kDoubleJump && airborne_seen && !a.grounded &&
        a.jumps_used == 1 && a.velocity.y() <= 0.0)
      act.jump = 1.0;
    a = apply_kinematics(a, act, cfg, map);
    out.track.push_back(a.position);
    if (!a.grounded) airborne_seen = true;
    if (airborne_seen && a.grounded) {
      out.landed = true;
      out.landing = a.position;
      return out;
    }
  }
  return out;
}

NavGraph auto_jump_links(NavGraph graph, const MapDef& map, const SimConfig& cfg,
                         LinkAbility ability, const LinkSearchParams& params) {
  struct Candidate {
    Vec3 takeoff, landing;
    double heading;
    double cost;
  };
  std::map<std::pair<int, int>, Candidate> best;

  std::set<std::tuple<int, int, int>> existing;  // (from,to,ability)
  for (const auto& e : graph.edges)
    if (e.kind == NavEdge::Kind::kLink)
      existing.insert({e.from, e.to, int(e.ability)});

  const double cs = graph.cell_size;
  for (const auto& poly : graph.polygons) {
    std::vector<std::pair<int, int>> sample_cells;
    if (ability == LinkAbility::kPad) {
      // Takeoffs only where walking onto a trigger is possible.
      for (int k = poly.k0; k <= poly.k1; ++k)
        for (int i = poly.i0; i <= poly.i1; ++i) {
          double cx = graph.origin.x() + (i + 0.5) * cs;
          double cz = graph.origin.z() + (k + 0.5) * cs;
          for (const auto& pad : map.pads)
            if (cx >= pad.trigger.min.x() - 1.0 && cx <= pad.trigger.max.x() + 1.0 &&
                cz >= pad.trigger.min.z() - 1.0 && cz <= pad.trigger.max.z() + 1.0 &&
                std::abs(poly.y - pad.trigger.min.y()) < 2.0)
              sample_cells.push_back({i, k});
        }
    } else {
      for (int i = poly.i0; i <= poly.i1; i += params.boundary_stride) {
        sample_cells.push_back({i, poly.k0});
        if (poly.k1 != poly.k0) sample_cells.push_back({i, poly.k1});
      }
      for (int k = poly.k0; k <= poly.k1; k += params.boundary_stride) {
        sample_cells.push_back({poly.i0, k});
        if (poly.i1 != poly.i0) sample_cells.push_back({poly.i1, k});
      }
    }
    std::sort(sample_cells.begin(), sample_cells.end());
    sample_cells.erase(std::unique(sample_cells.begin(), sample_cells.end()),
                       sample_cells.end());

    for (auto [i, k] : sample_cells) {
      Vec3 takeoff(graph.origin.x() + (i + 0.5) * cs, poly.y + kContactSkin,
                   graph.origin.z() + (k + 0.5) * cs);
      if (box_overlap(map, agent_box_at(takeoff, cfg.agent_half_extents))) continue;
      for (int hi = 0; hi < params.headings; ++hi) {
        double heading = 2.0 * M_PI * hi / params.headings;
        AbilityRollout roll = simulate_ability(map, cfg, takeoff, heading, ability);
        if (!roll.landed) continue;
        int target = graph.lookup(roll.landing);
        if (target < 0 || target == poly.id) continue;
        double cost = (roll.landing - takeoff).norm();
        auto key = std::make_pair(poly.id, target);
        auto it = best.find(key);
        if (it == best.end() || cost < it->second.cost)
          best[key] = Candidate{takeoff, roll.landing, heading, cost};
      }
    }
  }

  for (const auto& [key, cand] : best) {
    if (existing.count({key.first, key.second, int(ability)})) continue;
    NavEdge e;
    e.kind = NavEdge::Kind::kLink;
    e.ability = ability;
    e.from = key.first;
    e.to = key.second;
    e.takeoff = cand.takeoff;
    e.landing = cand.landing;
    e.heading = cand.heading;
    e.cost = cand.cost;
    graph.add_edge(e);
  }
  return graph;
}

NavGraph add_manual_link(NavGraph graph, const Vec3& takeoff, const Vec3& landing,
                         LinkAbility ability) {
  int from = graph.lookup(takeoff);
  if (from < 0) {
    std::ostringstream os;
    os << "manual link takeoff off the navmesh: (" << takeoff.x() << ", " << takeoff.y() << ", "
       << takeoff.z() << ")";
    throw ValidationError(os.str());
  }
  int to = graph.lookup(landing);
  if (to < 0) {
    std::ostringstream os;
    os << "manual link landing off the navmesh: (" << landing.x() << ", " << landing.y() << ", "
       << landing.z() << ")";
    throw ValidationError(os.str());
  }
  NavEdge e;
  e.kind = NavEdge::Kind::kLink;
  e.ability = ability;
  e.from = from;
  e.to = to;
  e.takeoff = takeoff;
  e.landing = landing;
  e.heading = std::atan2(landing.x() - takeoff.x(), landing.z() - takeoff.z());
  e.cost = (landing - takeoff).norm();
  graph.add_edge(e);
  return graph;
}

// ---------------------------------------------------------------------------
// Search
// ---------------------------------------------------------------------------

AstarResult astar(const NavGraph& graph, const Vec3& start, const Vec3& goal) {
  AstarResult result;
  int sp = graph.lookup(start);
  if (sp < 0) throw ValidationError("astar start point off the navmesh");
  int gp = graph.lookup(goal);
  if (gp < 0) throw ValidationError("astar goal point off the navmesh");

  if (sp == gp) {
    result.reachable = true;
    result.path.waypoints = {start, goal};
    result.path.segments = {PathSegment{}};
    result.path.cost = (goal - start).norm();
    result.max_heuristic_excess = 0.0;
    return result;
  }

  // States live at arrival points: the start point, adjacency boundary
  // midpoints and link landings. One state per directed edge.
  struct State {
    int poly;
    Vec3 point;
    double g;
    int via_edge;  // -1 for start
    int parent;    // state index
  };
  std::vector<State> states;
  std::vector<double> best_g(graph.edges.size(), std::numeric_limits<double>::infinity());
  using QItem = std::pair<double, int>;  // (f, state index)
  std::priority_queue<QItem, std::vector<QItem>, std::greater<>> open;

  auto heuristic = [&](const Vec3& p) { return (goal - p).norm(); };
  states.push_back({sp, start, 0.0, -1, -1});
  open.push({heuristic(start), 0});

  double best_goal = std::numeric_limits<double>::infinity();
  int best_goal_state = -1;
  double max_f_expanded = -std::numeric_limits<double>::infinity();

  while (!open.empty()) {
    auto [f, si] = open.top();
    open.pop();
    State s = states[si];
    if (s.via_edge >= 0 && s.g > best_g[s.via_edge] + 1e-12) continue;  // stale entry
    if (f >= best_goal) break;  // consistent heuristic: done
    max_f_expanded = std::max(max_f_expanded, f);

    if (s.poly == gp) {
      double total = s.g + (goal - s.point).norm();
      if (total < best_goal) {
        best_goal = total;
        best_goal_state = si;
      }
      continue;
    }
    for (int ei : graph.outgoing[s.poly]) {
      const NavEdge& e = graph.edges[ei];
      double leg;
      Vec3 arrive;
      if (e.kind == NavEdge::Kind::kAdjacency) {
        arrive = e.takeoff;
        leg = (arrive - s.point).norm();
      } else {
        arrive = e.landing;
        leg = (e.takeoff - s.point).norm() + e.cost;
      }
      double ng = s.g + leg;
      if (ng >= best_g[ei] - 1e-12) continue;
      best_g[ei] = ng;
      states.push_back({e.to, arrive, ng, ei, si});
      open.push({ng + heuristic(arrive), int(states.size()) - 1});
    }
  }

  if (best_goal_state < 0) return result;  // unreachable is a value

  result.reachable = true;
  result.max_heuristic_excess = max_f_expanded - best_goal;
#ifndef NDEBUG
  if (result.max_heuristic_excess > 1e-9)
    throw std::logic_error("astar heuristic inadmissible on this graph");
#endif

  std::vector<int> chain;
  for (int si = best_goal_state; si >= 0; si = states[si].parent) chain.push_back(si);
  std::reverse(chain.begin(), chain.end());

  Path& path = result.path;
  path.waypoints.push_back(start);
  for (size_t ci = 1; ci < chain.size(); ++ci) {
    const State& s = states[chain[ci]];
    const NavEdge& e = graph.edges[s.via_edge];
    if (e.kind == NavEdge::Kind::kAdjacency) {
      path.segments.push_back(PathSegment{PathSegment::Kind::kWalk, LinkAbility::kJump, 0.0});
      path.waypoints.push_back(s.point);
    } else {
      path.segments.push_back(PathSegment{PathSegment::Kind::kWalk, LinkAbility::kJump, 0.0});
      path.waypoints.push_back(e.takeoff);
      path.segments.push_back(PathSegment{PathSegment::Kind::kLink, e.ability, e.heading});
      path.waypoints.push_back(e.landing);
    }
  }
  path.segments.push_back(PathSegment{PathSegment::Kind::kWalk, LinkAbility::kJump, 0.0});
  path.waypoints.push_back(goal);
  path.cost = best_goal;
  return result;
}

// ---------------------------------------------------------------------------
// Smoothing
// ---------------------------------------------------------------------------

namespace {

bool los_walkable(const NavGraph& graph, const Vec3& a, const Vec3& b) {
  double dist = (b - a).norm();
  int n = std::max(2, int(std::ceil(dist / 0.25)));
  for (int s = 0; s <= n; ++s) {
    double t = double(s) / n;
    Vec3 p = a + t * (b - a);
    int poly = graph.lookup(p, 0.6, 0.6);
    if (poly < 0) return false;
    if (std::abs(graph.polygons[poly].y - p.y()) > 0.55) return false;
  }
  return true;
}

}  // namespace

Path smooth_path(const NavGraph& graph, const Path& path) {
  Path out;
  if (path.waypoints.empty()) return out;
  const size_t nseg = path.segments.size();
  out.waypoints.push_back(path.waypoints.front());
  size_t i = 0;
  while (i < nseg) {
    if (path.segments[i].kind == PathSegment::Kind::kLink) {
      out.segments.push_back(path.segments[i]);
      out.waypoints.push_back(path.waypoints[i + 1]);
      ++i;
      continue;
    }
    // Maximal run of walk segments [i, run_end).
    size_t run_end = i;
    while (run_end < nseg && path.segments[run_end].kind == PathSegment::Kind::kWalk) ++run_end;
    size_t cur = i;
    while (cur < run_end) {
      size_t best = cur + 1;
      for (size_t j = run_end; j > cur + 1; --j) {
        if (los_walkable(graph, out.waypoints.back(), path.waypoints[j])) {
          best = j;
          break;
        }
      }
      out.segments.push_back(PathSegment{PathSegment::Kind::kWalk, LinkAbility::kJump, 0.0});
      out.waypoints.push_back(path.waypoints[best]);
      cur = best;
    }
    i = run_end;
  }
  out.cost = 0.0;
  for (size_t s = 0; s + 1 < out.waypoints.size(); ++s)
    out.cost += (out.waypoints[s + 1] - out.waypoints[s]).norm();
  return out;
}

// ---------------------------------------------------------------------------
// Path following
// ---------------------------------------------------------------------------

PathFollower::PathFollower(Path path, const SimConfig& cfg) : path_(std::move(path)), cfg_(cfg) {
  if (path_.segments.empty()) done_ = true;
}

Action PathFollower::steer_towards(const AgentState& agent, const Vec3& target,
                                   bool sprint) const {
  double dx = target.x() - agent.position.x();
  double dz = target.z() - agent.position.z();
  double bearing = std::atan2(dx, dz);
  double err = wrap_angle(bearing - agent.yaw);
  Action a;
  a.rotate = std::clamp(err / (cfg_.turn_rate * cfg_.dt), -1.0, 1.0);
  a.forward = (std::abs(err) <= M_PI / 12.0 && sprint) ? 1.0 : 0.0;
  return a;
}

Action PathFollower::next_action(const AgentState& agent) {
  if (done_ || failed_) return Action{};
  const Vec3& target = path_.waypoints[seg_ + 1];
  const PathSegment& seg = path_.segments[seg_];

  double progress_dist = (target - agent.position).norm();
  if (progress_dist < best_dist_ - 0.05) {
    best_dist_ = progress_dist;
    no_progress_steps_ = 0;
  } else if (++no_progress_steps_ >= 100) {
    failed_ = true;
    return Action{};
  }

  auto advance = [&]() {
    seg_ += 1;
    best_dist_ = std::numeric_limits<double>::infinity();
    no_progress_steps_ = 0;
    in_flight_ = false;
    second_jump_done_ = false;
    if (seg_ >= path_.segments.size()) done_ = true;
  };

  if (seg.kind == PathSegment::Kind::kWalk) {
    double hd = horizontal_distance(target, agent.position);
    bool next_is_link =
        seg_ + 1 < path_.segments.size() && path_.segments[seg_ + 1].kind == PathSegment::Kind::kLink;
    // Link takeoffs need a tighter approach than plain waypoints.
    double pop = next_is_link ? 0.35 : 0.75;
    if (hd <= pop && std::abs(target.y() - agent.position.y()) < 1.5) {
      advance();
      return done_ ? Action{} : next_action(agent);
    }
    return steer_towards(agent, target, true);
  }

  // Link segment: orient to the stored heading, launch, keep forward while
  // airborne; a double jump fires its second impulse at the apex.
  const Vec3& takeoff = path_.waypoints[seg_];
  if (!in_flight_) {
    if (!agent.grounded) {
      in_flight_ = true;
    } else {
      double err = wrap_angle(seg.heading - agent.yaw);
      if (std::abs(err) > M_PI / 18.0) {
        Action a;
        a.rotate = std::clamp(err / (cfg_.turn_rate * cfg_.dt), -1.0, 1.0);
        return a;
      }
      if (seg.ability == LinkAbility::kPad) {
        Action a;
        a.forward = 1.0;
        a.rotate = std::clamp(err / (cfg_.turn_rate * cfg_.dt), -1.0, 1.0);
        return a;
      }
      if (horizontal_distance(takeoff, agent.position) > 0.5) {
        return steer_towards(agent, takeoff, true);
      }
      Action a;
      a.jump = 1.0;
      a.forward = 1.0;
      in_flight_ = true;
      return a;
    }
  }

  Action a;
  a.forward = 1.0;
  a.rotate = std::clamp(wrap_angle(seg.heading - agent.yaw) / (cfg_.turn_rate * cfg_.dt), -1.0,
                        1.0);
  if (seg.ability == LinkAbility::kDoubleJump && !second_jump_done_ && !agent.grounded &&
      agent.jumps_used == 1 && agent.velocity.y() <= 0.0) {
    a.jump = 1.0;
    second_jump_done_ = true;
  }
  if (agent.grounded && in_flight_) {
    if (horizontal_distance(target, agent.position) <= 1.2 &&
        std::abs(target.y() - agent.position.y()) < 1.0) {
      advance();
      return done_ ? Action{} : next_action(agent);
    }
    // Landed short: walk back to the takeoff and retry.
    in_flight_ = false;
    second_jump_done_ = false;
  }
  return a;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from(const json& j) { return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>()); }

}  // namespace

std::string navgraph_to_json_text(const NavGraph& graph) {
  json j;
  j["cell_size"] = graph.cell_size;
  j["origin"] = vec3_json(graph.origin);
  j["polygons"] = json::array();
  for (const auto& p : graph.polygons)
    j["polygons"].push_back(json{{"id", p.id},
                                 {"y", p.y},
                                 {"cells", {p.i0, p.i1, p.k0, p.k1}},
                                 {"rect", {p.min_x, p.max_x, p.min_z, p.max_z}},
                                 {"center", vec3_json(p.center)}});
  j["edges"] = json::array();
  for (const auto& e : graph.edges) {
    json je{{"from", e.from},
            {"to", e.to},
            {"kind", e.kind == NavEdge::Kind::kAdjacency ? "adjacency" : "link"},
            {"takeoff", vec3_json(e.takeoff)},
            {"landing", vec3_json(e.landing)},
            {"cost", e.cost}};
    if (e.kind == NavEdge::Kind::kLink) {
      je["ability"] = ability_name(e.ability);
      je["heading"] = e.heading;
    }
    j["edges"].push_back(je);
  }
  return j.dump(1) + "\n";
}

NavGraph navgraph_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("navgraph parse error: ") + e.what());
  }
  NavGraph g;
  g.cell_size = j.at("cell_size").get<double>();
  g.origin = vec3_from(j.at("origin"));
  for (const auto& jp : j.at("polygons")) {
    NavPolygon p;
    p.id = jp.at("id").get<int>();
    p.y = jp.at("y").get<double>();
    p.i0 = jp.at("cells")[0].get<int>();
    p.i1 = jp.at("cells")[1].get<int>();
    p.k0 = jp.at("cells")[2].get<int>();
    p.k1 = jp.at("cells")[3].get<int>();
    p.min_x = jp.at("rect")[0].get<double>();
    p.max_x = jp.at("rect")[1].get<double>();
    p.min_z = jp.at("rect")[2].get<double>();
    p.max_z = jp.at("rect")[3].get<double>();
    p.center = vec3_from(jp.at("center"));
    g.polygons.push_back(p);
  }
  for (const auto& je : j.at("edges")) {
    NavEdge e;
    e.from = je.at("from").get<int>();
    e.to = je.at("to").get<int>();
    e.kind = je.at("kind").get<std::string>() == "link" ? NavEdge::Kind::kLink
                                                        : NavEdge::Kind::kAdjacency;
    e.takeoff = vec3_from(je.at("takeoff"));
    e.landing = vec3_from(je.at("landing"));
    e.cost = je.at("cost").get<double>();
    if (e.kind == NavEdge::Kind::kLink) {
      auto ab = ability_from_name(je.at("ability").get<std::string>());
      if (!ab) throw ParseError("unknown link ability in navgraph");
      e.ability = *ab;
      e.heading = je.at("heading").get<double>();
    }
    g.edges.push_back(e);
  }
  g.rebuild_cell_index();
  return g;
}

void save_navgraph(const NavGraph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write navgraph: " + path);
  out << navgraph_to_json_text(graph);
}

NavGraph load_navgraph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open navgraph: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return navgraph_from_json_text(ss.str());
}

std::vector<ManualLink> load_manual_links(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open manual links file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("manual links parse error: ") + e.what());
  }
  std::vector<ManualLink> out;
  for (const auto& je : j) {
    ManualLink l;
    l.takeoff = vec3_from(je.at("takeoff"));
    l.landing = vec3_from(je.at("landing"));
    auto ab = ability_from_name(je.at("ability").get<std::string>());
    if (!ab) throw ParseError("unknown ability in manual links file");
    l.ability = *ab;
    out.push_back(l);
  }
  return out;
}

}  // namespace navgym
