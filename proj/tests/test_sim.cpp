#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "navgym/error.hpp"
#include "navgym/navmesh.hpp"
#include "navgym/sim.hpp"
#include "navgym/world.hpp"

using namespace navgym;

namespace {

MapDef desk_map() { return load_map(std::string(NAVGYM_MAPS_DIR) + "/toy_desk.map.json"); }
MapDef faithful_map() {
  return load_map(std::string(NAVGYM_MAPS_DIR) + "/toy_faithful.map.json");
}

MapDef flat_map() {
  MapDef m;
  m.name = "flat";
  m.bounds = Box{Vec3(-50, -1, -50), Vec3(50, 20, 50)};
  m.solids = {Box{Vec3(-50, -1, -50), Vec3(50, 0, 50)}};
  m.spawn_region = Box{Vec3(-49, -0.5, -49), Vec3(49, 10, 49)};
  m.goal_epsilon = 1.0;
  validate_map(m);
  return m;
}

AgentState standing_at(const Vec3& p, double yaw = 0.0) {
  AgentState a;
  a.position = p;
  a.velocity = Vec3::Zero();
  a.yaw = yaw;
  a.grounded = true;
  a.jumps_used = 0;
  return a;
}

Action random_action(Rng& rng) {
  Action a;
  a.jump = rng.uniform(-1, 1);
  a.forward = rng.uniform(-1, 1);
  a.strafe = rng.uniform(-1, 1);
  a.rotate = rng.uniform(-1, 1);
  return a;
}

}  // namespace

TEST_CASE("compute_reward: formula cases") {
  CHECK(compute_reward(7.0, 8.0, -0.01, 1.0) == doctest::Approx(0.99).epsilon(1e-12));
  CHECK(compute_reward(6.0, 5.0, -0.01, 1.0) == doctest::Approx(-0.01).epsilon(1e-12));
  CHECK(compute_reward(0.8, 1.4, -0.01, 1.0) == doctest::Approx(1.59).epsilon(1e-12));
}

TEST_CASE("compute_reward: matches direct evaluation on random pairs") {
  Rng rng = Rng::seeded(9);
  for (int i = 0; i < 100000; ++i) {
    double d = rng.uniform(0, 50);
    double best = rng.uniform(0, 50);
    double alpha = -rng.uniform(0, 0.1);
    double eps = rng.uniform(0.1, 2.0);
    double expect = std::max(best - d, 0.0) + alpha + (d <= eps ? 1.0 : 0.0);
    REQUIRE(compute_reward(d, best, alpha, eps) == expect);
  }
}

TEST_CASE("apply_kinematics: jump binarization fires above zero") {
  MapDef m = flat_map();
  SimConfig cfg;
  AgentState a = standing_at(Vec3(0, kContactSkin, 0));
  Action act;
  act.jump = 0.3;
  AgentState b = apply_kinematics(a, act, cfg, m);
  CHECK(!b.grounded);
  CHECK(b.velocity.y() == doctest::Approx(cfg.jump_speed));
  CHECK(b.jumps_used == 1);

  act.jump = 0.0;
  AgentState c = apply_kinematics(a, act, cfg, m);
  CHECK(c.grounded);
  CHECK(c.jumps_used == 0);
}

TEST_CASE("apply_kinematics: double jump exhausts after two uses") {
  MapDef m = flat_map();
  SimConfig cfg;
  AgentState a = standing_at(Vec3(0, kContactSkin, 0));
  Action jump;
  jump.jump = 1.0;
  a = apply_kinematics(a, jump, cfg, m);
  CHECK(a.jumps_used == 1);
  a = apply_kinematics(a, jump, cfg, m);
  CHECK(a.jumps_used == 2);
  double vy = a.velocity.y();
  AgentState b = apply_kinematics(a, jump, cfg, m);
  CHECK(b.jumps_used == 2);
  CHECK(b.velocity.y() == doctest::Approx(vy - cfg.gravity * cfg.dt));
}

TEST_CASE("apply_kinematics: free fall for one step is explicit Euler") {
  MapDef m = flat_map();
  SimConfig cfg;
  AgentState a;
  a.position = Vec3(0, 5, 0);
  a.velocity = Vec3::Zero();
  a.grounded = false;
  a.jumps_used = 2;
  AgentState b = apply_kinematics(a, Action{}, cfg, m);
  CHECK(b.position.y() - a.position.y() ==
        doctest::Approx(-cfg.gravity * cfg.dt * cfg.dt).epsilon(1e-12));
}

TEST_CASE("apply_kinematics: single-jump apex near the closed form") {
  MapDef m = flat_map();
  SimConfig cfg;
  AgentState a = standing_at(Vec3(0, kContactSkin, 0));
  Action jump;
  jump.jump = 1.0;
  a = apply_kinematics(a, jump, cfg, m);
  double apex = a.position.y();
  Action none;
  for (int t = 0; t < 100; ++t) {
    a = apply_kinematics(a, none, cfg, m);
    apex = std::max(apex, a.position.y());
    if (a.grounded) break;
  }
  double analytic = cfg.jump_speed * cfg.jump_speed / (2.0 * cfg.gravity);
  CHECK(std::abs(apex - analytic) <= 0.5);  // one voxel of integration error
  CHECK(a.grounded);                        // landed back on the floor
}

TEST_CASE("step: success fires when inside epsilon") {
  MapDef m = flat_map();
  SimConfig cfg;
  AgentState a = standing_at(Vec3(0, kContactSkin, 0));
  EpisodeState ep;
  ep.goal = Vec3(0.5, 0, 0);
  ep.best_dist = 0.5;
  ep.max_steps = 100;
  StepOutcome so = step(a, ep, Action{}, cfg, m);
  CHECK(so.done == EpisodeResult::kSuccess);
  CHECK(so.reward >= 1.0 + cfg.step_penalty - 1e-9);
}

TEST_CASE("step: timeout accumulates only the penalty") {
  MapDef m = flat_map();
  SimConfig cfg;
  AgentState a = standing_at(Vec3(0, kContactSkin, 0));
  EpisodeState ep;
  ep.goal = Vec3(30, 0, 0);
  ep.best_dist = 30.0;
  ep.max_steps = 10;
  double total = 0;
  for (int i = 0; i < 10; ++i) {
    StepOutcome so = step(a, ep, Action{}, cfg, m);
    total += so.reward;
    if (i < 9) CHECK(so.done == EpisodeResult::kRunning);
  }
  CHECK(ep.done == EpisodeResult::kTimeout);
  CHECK(total == doctest::Approx(10 * cfg.step_penalty).epsilon(1e-9));
  CHECK_THROWS_AS(step(a, ep, Action{}, cfg, m), ValidationError);
}

TEST_CASE("step: scripted straight run's progress telescopes") {
  MapDef m = flat_map();
  SimConfig cfg;
  AgentState a = standing_at(Vec3(0, kContactSkin, 0), 0.0);
  EpisodeState ep;
  ep.goal = Vec3(0, 0, 20);
  ep.best_dist = (a.position - ep.goal).norm();
  double d0 = ep.best_dist;
  ep.max_steps = 200;
  Action fwd;
  fwd.forward = 1.0;
  double progress_sum = 0;
  double min_d = d0;
  while (ep.done == EpisodeResult::kRunning) {
    StepOutcome so = step(a, ep, fwd, cfg, m);
    progress_sum += so.reward - cfg.step_penalty - (so.dist <= cfg.goal_epsilon ? 1.0 : 0.0);
    min_d = std::min(min_d, so.dist);
  }
  CHECK(ep.done == EpisodeResult::kSuccess);
  CHECK(progress_sum == doctest::Approx(d0 - min_d).epsilon(1e-9));
}

TEST_CASE("telescoping identity over 1000 random-policy episodes") {
  MapDef m = desk_map();
  SimConfig cfg;
  Rng rng = Rng::seeded(77);
  CurriculumState cur = make_curriculum(6.0, 4.0, full_coverage_radius(m));
  for (int e = 0; e < 1000; ++e) {
    ResetResult rr = reset(m, cur, cfg, rng);
    double d0 = rr.episode.best_dist;
    double min_d = d0;
    double progress_sum = 0;
    rr.episode.max_steps = std::min(rr.episode.max_steps, 60);
    while (rr.episode.done == EpisodeResult::kRunning) {
      StepOutcome so = step(rr.agent, rr.episode, random_action(rng), cfg, m);
      progress_sum += so.reward - cfg.step_penalty - (so.dist <= cfg.goal_epsilon ? 1.0 : 0.0);
      min_d = std::min(min_d, so.dist);
    }
    REQUIRE(progress_sum == doctest::Approx(d0 - min_d).epsilon(1e-9));
  }
}

TEST_CASE("no penetration and jump count over random-action steps") {
  SimConfig cfg;
  Rng rng = Rng::seeded(123);
  for (const MapDef& m : {desk_map(), faithful_map()}) {
    CurriculumState cur = make_curriculum(8.0, 4.0, full_coverage_radius(m));
    ResetResult rr = reset(m, cur, cfg, rng);
    int jumps_since_grounded = 0;
    for (int t = 0; t < 50000; ++t) {
      int used_before = rr.agent.jumps_used;
      Action act = random_action(rng);
      rr.agent = apply_kinematics(rr.agent, act, cfg, m);
      REQUIRE(!box_overlap(m, agent_box_at(rr.agent.position, cfg.agent_half_extents)));
      REQUIRE(m.bounds.contains(rr.agent.position));
      if (rr.agent.grounded) {
        REQUIRE(rr.agent.velocity.y() == 0.0);
        REQUIRE(rr.agent.jumps_used == 0);
        jumps_since_grounded = 0;
      } else if (rr.agent.jumps_used > used_before) {
        ++jumps_since_grounded;
        REQUIRE(jumps_since_grounded <= 2);
      }
      REQUIRE(rr.agent.jumps_used <= 2);
    }
  }
}

TEST_CASE("determinism: same map, seed and actions give identical trajectories") {
  MapDef m = desk_map();
  SimConfig cfg;
  auto run = [&](uint64_t seed) {
    Rng rng = Rng::seeded(seed);
    CurriculumState cur = make_curriculum(10.0, 4.0, full_coverage_radius(m));
    ResetResult rr = reset(m, cur, cfg, rng);
    std::vector<double> trace;
    for (int t = 0; t < 500 && rr.episode.done == EpisodeResult::kRunning; ++t) {
      step(rr.agent, rr.episode, random_action(rng), cfg, m);
      trace.push_back(rr.agent.position.x());
      trace.push_back(rr.agent.position.y());
      trace.push_back(rr.agent.position.z());
      trace.push_back(rr.agent.yaw);
    }
    return trace;
  };
  auto a = run(99), b = run(99);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
}

TEST_CASE("reset: goal stays inside the spawning cylinder") {
  MapDef m = desk_map();
  SimConfig cfg;
  Rng rng = Rng::seeded(31);
  CurriculumState cur = make_curriculum(1.0, 1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    ResetResult rr = reset(m, cur, cfg, rng);
    CHECK(horizontal_distance(rr.agent.position, rr.episode.goal) <= 1.0 + 1e-9);
  }
}

TEST_CASE("reset: at full radius goals cover the walkable surface") {
  MapDef m = desk_map();
  SimConfig cfg;
  Rng rng = Rng::seeded(57);
  double rmax = full_coverage_radius(m);
  CurriculumState cur = make_curriculum(rmax, 0.0, rmax);
  VoxelGrid grid = bake_occupancy(m, 0.5);
  NavGraph g = generate_navmesh(m, grid, cfg.agent_half_extents);

  std::set<std::pair<int, int64_t>> covered;
  int64_t total_cells = 0;
  for (const auto& poly : g.polygons)
    total_cells += int64_t(poly.i1 - poly.i0 + 1) * (poly.k1 - poly.k0 + 1);
  for (int i = 0; i < 10000; ++i) {
    ResetResult rr = reset(m, cur, cfg, rng);
    int poly = g.lookup(rr.episode.goal);
    if (poly < 0) continue;
    int ci = int(std::floor((rr.episode.goal.x() - g.origin.x()) / g.cell_size));
    int ck = int(std::floor((rr.episode.goal.z() - g.origin.z()) / g.cell_size));
    covered.insert({poly, int64_t(ci) * 100000 + ck});
  }
  CHECK(double(covered.size()) >= 0.5 * double(total_cells));
  std::set<int> polys;
  for (const auto& [p, c] : covered) polys.insert(p);
  CHECK(polys.size() == g.polygons.size());  // every platform and roof receives goals
}

TEST_CASE("reset: degenerate single-cell map succeeds immediately") {
  MapDef m;
  m.name = "tiny";
  m.bounds = Box{Vec3(-1, -1, -1), Vec3(1, 3, 1)};
  m.solids = {Box{Vec3(-1, -1, -1), Vec3(1, 0, 1)}};
  m.spawn_region = Box{Vec3(-0.05, -0.5, -0.05), Vec3(0.05, 1, 0.05)};
  m.goal_epsilon = 1.0;
  validate_map(m);
  SimConfig cfg;
  Rng rng = Rng::seeded(2);
  CurriculumState cur = make_curriculum(0.2, 0.1, 0.2);
  ResetResult rr = reset(m, cur, cfg, rng);
  CHECK(rr.episode.best_dist <= cfg.goal_epsilon);
  StepOutcome so = step(rr.agent, rr.episode, Action{}, cfg, m);
  CHECK(so.done == EpisodeResult::kSuccess);
  CHECK(rr.episode.step == 1);
}

TEST_CASE("update_curriculum: strict threshold, clamp, monotonic radius") {
  CurriculumState cur = make_curriculum(4.0, 4.0, 12.0, 50, 0.8);

  // 41/50 successes: strictly above 80% advances.
  for (int i = 0; i < 50; ++i) update_curriculum(cur, i < 41);
  CHECK(cur.radius == doctest::Approx(8.0));
  CHECK(cur.window_count == 0);  // window cleared

  // Exactly 80% does not advance.
  for (int i = 0; i < 50; ++i) update_curriculum(cur, i < 40);
  CHECK(cur.radius == doctest::Approx(8.0));
  CHECK(cur.window_count == 50);

  // Sliding window: successes replace the oldest entries; the gate opens
  // once the first stored failure is overwritten (41 more pushes).
  for (int i = 0; i < 40; ++i) update_curriculum(cur, true);
  CHECK(cur.radius == doctest::Approx(8.0));
  update_curriculum(cur, true);
  CHECK(cur.radius == doctest::Approx(12.0));

  // At the cap, radius stays.
  for (int i = 0; i < 200; ++i) update_curriculum(cur, true);
  CHECK(cur.radius == doctest::Approx(12.0));

  // Radius never decreases under any outcome stream.
  Rng rng = Rng::seeded(4);
  CurriculumState c2 = make_curriculum(2.0, 3.0, 20.0, 10, 0.8);
  double prev = c2.radius;
  for (int i = 0; i < 5000; ++i) {
    update_curriculum(c2, rng.uniform() < 0.85);
    CHECK(c2.radius >= prev);
    prev = c2.radius;
  }
}

TEST_CASE("jump pad launches the agent") {
  MapDef m = desk_map();
  SimConfig cfg;
  const JumpPad& pad = m.pads[0];
  Vec3 pad_center = pad.trigger.center();
  AgentState a = standing_at(Vec3(pad_center.x(), kContactSkin, pad_center.z()));
  AgentState b = apply_kinematics(a, Action{}, cfg, m);
  CHECK(!b.grounded);
  CHECK(b.velocity.y() == doctest::Approx(pad.launch_speed));
  CHECK(b.jumps_used == 1);
}

TEST_CASE("toy_desk: pad carries the agent onto the tall roof") {
  MapDef m = desk_map();
  SimConfig cfg;
  // Walk westward across the pad next to building B (roof top at 4.4).
  Vec3 start(15.0, kContactSkin, 8.0);
  AbilityRollout roll = simulate_ability(m, cfg, start, std::atan2(-1.0, 0.0),
                                         LinkAbility::kPad, 200);
  REQUIRE(roll.landed);
  CHECK(roll.landing.y() == doctest::Approx(4.4 + kContactSkin).epsilon(1e-6));

  // A double jump from the ground cannot top 4.4 m (line clear of the pad).
  AbilityRollout dbl = simulate_ability(m, cfg, Vec3(17.5, kContactSkin, 0.0),
                                        std::atan2(-1.0, 0.0), LinkAbility::kDoubleJump, 200);
  for (const Vec3& p : dbl.track) CHECK(p.y() < 4.4);
}

TEST_CASE("rooftop reachability by ability on the faithful geometry") {
  MapDef m = faithful_map();
  SimConfig cfg;

  // Building 0 (two tiers): terrace top at 2.8, rooftop at 4.8, centered at
  // (-40, -40). Stand on the terrace ring east of the rooftop block.
  double cx = -40, cz = -40;
  double terrace_y = 2.8, roof_y = 4.9;
  Vec3 takeoff(cx + 7.0 - 0.25, terrace_y + kContactSkin, cz);
  REQUIRE(!box_overlap(m, agent_box_at(takeoff, cfg.agent_half_extents)));
  double heading = std::atan2(-1.0, 0.0);  // toward -x, over the rooftop

  AbilityRollout dbl = simulate_ability(m, cfg, takeoff, heading, LinkAbility::kDoubleJump);
  REQUIRE(dbl.landed);
  CHECK(dbl.landing.y() == doctest::Approx(roof_y + kContactSkin).epsilon(1e-6));

  // Single jumps (jump budget capped at one) never top the rooftop.
  AbilityRollout sgl = simulate_ability(m, cfg, takeoff, heading, LinkAbility::kJump);
  for (const Vec3& p : sgl.track) CHECK(p.y() < roof_y);

  // Pad route onto the tall building (building 2 at (40,-40), terrace 5.6,
  // rooftop 7.6): ride the pad mounted on its east wall.
  double cx2 = 40, cz2 = -40;
  double terrace2 = 5.6;
  Vec3 pad_start(cx2 + 8.0 + 1.1, kContactSkin, cz2);
  AbilityRollout pad = simulate_ability(m, cfg, pad_start, std::atan2(-1.0, 0.0),
                                        LinkAbility::kPad, 200);
  REQUIRE(pad.landed);
  CHECK(pad.landing.y() > terrace2 - 1e-6);

  // Without the pad the same walk stays at ground level or the first tier.
  MapDef no_pads = m;
  no_pads.pads.clear();
  AbilityRollout walk = simulate_ability(no_pads, cfg, pad_start, std::atan2(-1.0, 0.0),
                                         LinkAbility::kPad, 200);
  if (walk.landed) CHECK(walk.landing.y() < 1.5);
}
