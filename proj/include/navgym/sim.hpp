#pragma once

#include <cstdint>
#include <vector>

#include "navgym/map.hpp"
#include "navgym/rng.hpp"
#include "navgym/world.hpp"

namespace navgym {

// Continuous controls in [-1, 1]; jump is binarized (fires when > 0).
struct Action {
  double jump = 0.0;
  double forward = 0.0;
  double strafe = 0.0;
  double rotate = 0.0;

  Action clamped() const;
};

struct AgentState {
  Vec3 position{0, 0, 0};  // feet (bottom-center of the bounding box)
  Vec3 velocity{0, 0, 0};
  double yaw = 0.0;  // radians; yaw 0 faces +z, up axis +y
  bool grounded = false;
  int jumps_used = 0;  // 0..2, reset on landing
  Action prev_action;
  Vec3 accel{0, 0, 0};  // finite difference of velocity over the last step
};

enum class EpisodeResult : uint8_t { kRunning = 0, kSuccess = 1, kTimeout = 2 };

struct EpisodeState {
  Vec3 goal{0, 0, 0};
  double best_dist = 0.0;  // min agent-goal distance over steps seen so far
  int step = 0;
  int max_steps = 0;
  EpisodeResult done = EpisodeResult::kRunning;
};

struct CurriculumState {
  double radius = 0.0;       // current spawning-cylinder radius (m)
  double radius_step = 0.0;  // added on each advancement
  double radius_max = 0.0;
  int window_size = 50;
  double threshold = 0.8;  // advance when success fraction strictly exceeds this
  std::vector<uint8_t> window;  // ring of recent outcomes
  int window_pos = 0;
  int window_count = 0;

  double success_fraction() const;
};

struct SimConfig {
  double dt = 0.1;            // s
  double move_speed = 6.0;    // m/s
  double strafe_speed = 4.0;  // m/s
  double turn_rate = M_PI;    // rad/s
  double jump_speed = 8.0;    // m/s
  double gravity = 20.0;      // m/s^2
  double step_penalty = -0.01;  // alpha, <= 0
  double goal_epsilon = 1.0;    // m
  Vec3 agent_half_extents{0.4, 0.9, 0.4};

  // Episode budget grows with the task length.
  int max_steps_for_radius(double radius) const {
    return int(std::ceil(4.0 * radius / (move_speed * dt))) + 50;
  }
};

// R_t = max(best_prev - D_t, 0) + alpha + [D_t <= epsilon]
double compute_reward(double dist, double best_prev, double alpha, double epsilon);

// One kinematics tick: rotation, horizontal velocity from the action, jump /
// double-jump impulses, gravity, per-axis move-and-slide (x, z, y) against
// solids and bounds, landing bookkeeping, jump-pad triggers.
AgentState apply_kinematics(const AgentState& agent, const Action& action, const SimConfig& cfg,
                            const MapDef& map);

struct StepOutcome {
  double reward = 0.0;
  double dist = 0.0;
  EpisodeResult done = EpisodeResult::kRunning;
};

StepOutcome step(AgentState& agent, EpisodeState& ep, const Action& action, const SimConfig& cfg,
                 const MapDef& map);

struct ResetResult {
  AgentState agent;
  EpisodeState episode;
};

// Spawns the agent on a walkable point of the spawn region and the goal on a
// walkable point inside the vertical cylinder of the curriculum radius
// centered on the spawn. Throws ValidationError when sampling keeps failing.
ResetResult reset(const MapDef& map, const CurriculumState& curriculum, const SimConfig& cfg,
                  Rng& rng);

void update_curriculum(CurriculumState& cur, bool success);

CurriculumState make_curriculum(double radius0, double radius_step, double radius_max,
                                int window_size = 50, double threshold = 0.8);

// Horizontal half-diagonal of the bounds: the radius at which the spawning
// cylinder covers the whole map.
double full_coverage_radius(const MapDef& map);

}  // namespace navgym
