#include "navgym/sim.hpp"

#include <algorithm>
#include <cmath>

#include "navgym/error.hpp"

namespace navgym {

namespace {

double clamp1(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

Action Action::clamped() const {
  return Action{clamp1(jump), clamp1(forward), clamp1(strafe), clamp1(rotate)};
}

double CurriculumState::success_fraction() const {
  if (window_count == 0) return 0.0;
  int s = 0;
  for (int i = 0; i < window_count; ++i) s += window[i];
  return double(s) / double(window_count);
}

double compute_reward(double dist, double best_prev, double alpha, double epsilon) {
  double progress = std::max(best_prev - dist, 0.0);
  return progress + alpha + (dist <= epsilon ? 1.0 : 0.0);
}

namespace {

struct AxisMove {
  bool blocked = false;
  bool landed = false;  // only meaningful for downward y motion
};

// Moves one coordinate and clamps against solids and bounds, leaving a
// kContactSkin gap. The agent box is overlap-free before the move, so any
// overlap afterwards was created along this axis.
AxisMove sweep_axis(Vec3& pos, double& vel_component, int axis, double dt, const Vec3& half,
                    const MapDef& map) {
  AxisMove result;
  if (vel_component == 0.0) return result;
  const double before = pos[axis];
  pos[axis] += vel_component * dt;

  // Box offsets along this axis relative to the feet position.
  double off_lo = axis == 1 ? 0.0 : half[axis];
  double off_hi = axis == 1 ? 2.0 * half.y() : half[axis];

  bool moving_up = vel_component > 0.0;
  for (const Box& s : map.solids) {
    if (!boxes_overlap(agent_box_at(pos, half), s)) continue;
    if (moving_up)
      pos[axis] = s.min[axis] - off_hi - kContactSkin;
    else
      pos[axis] = s.max[axis] + off_lo + kContactSkin;
    result.blocked = true;
  }
  // Wedged between solids: clamping one created overlap with another. The
  // pre-move coordinate was overlap-free; fall back to it.
  if (result.blocked && box_overlap(map, agent_box_at(pos, half))) {
    pos[axis] = before;
  }

  double lo = map.bounds.min[axis] + off_lo + kContactSkin;
  double hi = map.bounds.max[axis] - off_hi - kContactSkin;
  if (pos[axis] < lo) {
    pos[axis] = lo;
    if (!moving_up) result.blocked = true;
  } else if (pos[axis] > hi) {
    pos[axis] = hi;
    if (moving_up) result.blocked = true;
  }

  if (result.blocked) {
    if (axis == 1 && !moving_up) result.landed = true;
    vel_component = 0.0;
  }
  return result;
}

bool has_support(const MapDef& map, const Vec3& pos, const Vec3& half) {
  Vec3 probe = pos - Vec3(0.0, 2.0 * kContactSkin, 0.0);
  if (probe.y() <= map.bounds.min.y()) return true;
  return box_overlap(map, agent_box_at(probe, half));
}

}  // namespace

AgentState apply_kinematics(const AgentState& agent, const Action& action, const SimConfig& cfg,
                            const MapDef& map) {
  Action a = action.clamped();
  AgentState next = agent;
  const Vec3 vel_before = agent.velocity;

  next.yaw += a.rotate * cfg.turn_rate * cfg.dt;
  if (next.yaw > M_PI) next.yaw -= 2.0 * M_PI * std::floor((next.yaw + M_PI) / (2.0 * M_PI));
  if (next.yaw < -M_PI) next.yaw += 2.0 * M_PI * std::floor((M_PI - next.yaw) / (2.0 * M_PI));

  const double s = std::sin(next.yaw), c = std::cos(next.yaw);
  const Vec3 forward(s, 0.0, c);
  const Vec3 right(c, 0.0, -s);
  Vec3 horiz = forward * (a.forward * cfg.move_speed) + right * (a.strafe * cfg.strafe_speed);
  next.velocity.x() = horiz.x();
  next.velocity.z() = horiz.z();

  if (next.grounded)
    next.velocity.y() = 0.0;
  else
    next.velocity.y() -= cfg.gravity * cfg.dt;

  if (a.jump > 0.0 && (next.grounded || next.jumps_used < 2)) {
    next.velocity.y() = cfg.jump_speed;
    next.jumps_used += 1;
    next.grounded = false;
  }

  const Vec3& half = cfg.agent_half_extents;
  bool landed = false;
  for (int axis : {0, 2, 1}) {
    AxisMove mv = sweep_axis(next.position, next.velocity[axis], axis, cfg.dt, half, map);
    landed |= mv.landed;
  }

  if (landed) {
    next.grounded = true;
    next.jumps_used = 0;
    next.velocity.y() = 0.0;
  } else if (next.grounded) {
    // Walked off a ledge: lose support, gravity applies next tick.
    if (!has_support(map, next.position, half)) next.grounded = false;
  }

  for (const JumpPad& pad : map.pads) {
    if (boxes_overlap(agent_box_at(next.position, half), pad.trigger)) {
      next.velocity.y() = pad.launch_speed;
      next.jumps_used = 1;
      next.grounded = false;
    }
  }

  next.accel = (next.velocity - vel_before) / cfg.dt;
  next.prev_action = a;
  return next;
}

StepOutcome step(AgentState& agent, EpisodeState& ep, const Action& action, const SimConfig& cfg,
                 const MapDef& map) {
  if (ep.done != EpisodeResult::kRunning)
    throw ValidationError("step called on a finished episode");
  agent = apply_kinematics(agent, action, cfg, map);
  StepOutcome out;
  out.dist = (agent.position - ep.goal).norm();
  out.reward = compute_reward(out.dist, ep.best_dist, cfg.step_penalty, cfg.goal_epsilon);
  ep.best_dist = std::min(ep.best_dist, out.dist);
  ep.step += 1;
  if (out.dist <= cfg.goal_epsilon)
    ep.done = EpisodeResult::kSuccess;
  else if (ep.step >= ep.max_steps)
    ep.done = EpisodeResult::kTimeout;
  out.done = ep.done;
  return out;
}

ResetResult reset(const MapDef& map, const CurriculumState& curriculum, const SimConfig& cfg,
                  Rng& rng) {
  const Vec3& half = cfg.agent_half_extents;
  const double r = curriculum.radius;
  for (int attempt = 0; attempt < 10; ++attempt) {
    auto spawn = sample_walkable_point(map, map.spawn_region, half, rng);
    if (!spawn) continue;
    // Square region around the spawn, then circle rejection, keeps the goal
    // uniform over walkable surface inside the vertical cylinder.
    Box region;
    region.min = Vec3(std::max(spawn->point.x() - r, map.bounds.min.x()), map.bounds.min.y(),
                      std::max(spawn->point.z() - r, map.bounds.min.z()));
    region.max = Vec3(std::min(spawn->point.x() + r, map.bounds.max.x()), map.bounds.max.y(),
                      std::min(spawn->point.z() + r, map.bounds.max.z()));
    std::optional<WalkableSample> goal;
    for (int draw = 0; draw < 1000 && !goal; ++draw) {
      auto g = sample_walkable_point(map, region, half, rng, 1);
      if (g && horizontal_distance(g->point, spawn->point) <= r) goal = g;
    }
    if (!goal) continue;

    ResetResult out;
    out.agent.position = spawn->point;
    out.agent.velocity = Vec3::Zero();
    out.agent.yaw = rng.uniform(-M_PI, M_PI);
    out.agent.grounded = true;
    out.agent.jumps_used = 0;
    out.episode.goal = goal->point;
    out.episode.best_dist = (out.agent.position - out.episode.goal).norm();
    out.episode.step = 0;
    out.episode.max_steps = cfg.max_steps_for_radius(r);
    out.episode.done = EpisodeResult::kRunning;
    return out;
  }
  throw ValidationError("reset: no walkable goal inside the spawning cylinder");
}

void update_curriculum(CurriculumState& cur, bool success) {
  if (int(cur.window.size()) != cur.window_size) cur.window.assign(cur.window_size, 0);
  cur.window[cur.window_pos] = success ? 1 : 0;
  cur.window_pos = (cur.window_pos + 1) % cur.window_size;
  cur.window_count = std::min(cur.window_count + 1, cur.window_size);
  if (cur.window_count == cur.window_size && cur.success_fraction() > cur.threshold) {
    cur.radius = std::min(cur.radius + cur.radius_step, cur.radius_max);
    cur.window_pos = 0;
    cur.window_count = 0;
  }
}

CurriculumState make_curriculum(double radius0, double radius_step, double radius_max,
                                int window_size, double threshold) {
  CurriculumState cur;
  cur.radius = std::min(radius0, radius_max);
  cur.radius_step = radius_step;
  cur.radius_max = radius_max;
  cur.window_size = window_size;
  cur.threshold = threshold;
  cur.window.assign(window_size, 0);
  return cur;
}

double full_coverage_radius(const MapDef& map) {
  Vec3 e = map.bounds.extents();
  return 0.5 * std::hypot(e.x(), e.z());
}

}  // namespace navgym
