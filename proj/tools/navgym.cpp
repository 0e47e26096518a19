// navgym: bake / train / eval / compare / stats entry points.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "navgym/config.hpp"
#include "navgym/error.hpp"
#include "navgym/navmesh.hpp"
#include "navgym/stats.hpp"
#include "navgym/trainer.hpp"

namespace fs = std::filesystem;
using namespace navgym;
using nlohmann::json;

namespace {

void require_writable(const std::string& path, bool force) {
  if (!force && fs::exists(path))
    throw ValidationError("refusing to overwrite " + path + " (use --force)");
}

std::string map_stem(const std::string& map_path) {
  return fs::path(map_path).stem().stem().string();  // strips .map.json
}

RunConfig load_config_with_overrides(const std::string& config_path, const std::string& map,
                                     uint64_t* seed, uint64_t* budget, const std::string& out,
                                     const std::vector<std::string>& ablate, bool deterministic) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  if (!map.empty()) cfg.map_path = map;
  if (seed) cfg.seed = *seed;
  if (budget) cfg.budget = *budget;
  if (!out.empty()) cfg.out_dir = out;
  for (const auto& a : ablate) cfg.ablations.push_back(a);
  if (deterministic) cfg.deterministic = true;
  cfg.validate();
  return cfg;
}

int cmd_bake(const std::string& map_path, double cell_size, const std::string& out_dir,
             const std::string& links, const std::string& manual_links_path, bool force) {
  MapDef map = load_map(map_path);
  fs::create_directories(out_dir);
  std::string stem = map_stem(map_path);
  std::string cache_path = out_dir + "/" + stem + ".occ.bin";
  std::string graph_path = out_dir + "/" + stem + ".navgraph.json";
  require_writable(cache_path, force);
  require_writable(graph_path, force);

  VoxelGrid grid = bake_occupancy(map, cell_size);
  save_voxel_grid(grid, cache_path);

  SimConfig sim_cfg;
  sim_cfg.goal_epsilon = map.goal_epsilon;
  NavGraph graph = generate_navmesh(map, grid, sim_cfg.agent_half_extents);
  if (links == "all" || links == "jump")
    graph = auto_jump_links(std::move(graph), map, sim_cfg, LinkAbility::kJump);
  if (links == "all" || links == "double_jump")
    graph = auto_jump_links(std::move(graph), map, sim_cfg, LinkAbility::kDoubleJump);
  if (links == "all" || links == "pad")
    graph = auto_jump_links(std::move(graph), map, sim_cfg, LinkAbility::kPad);
  if (!manual_links_path.empty())
    for (const auto& l : load_manual_links(manual_links_path))
      graph = add_manual_link(std::move(graph), l.takeoff, l.landing, l.ability);
  save_navgraph(graph, graph_path);

  size_t n_links = 0;
  for (const auto& e : graph.edges)
    if (e.kind == NavEdge::Kind::kLink) ++n_links;
  std::cout << "baked " << grid.cell_count() << " cells (" << grid.popcount() << " occupied), "
            << graph.polygons.size() << " polygons, " << graph.edges.size() << " edges ("
            << n_links << " links)\n"
            << "wrote " << cache_path << "\n"
            << "wrote " << graph_path << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, bool force, bool resume) {
  fs::create_directories(cfg.out_dir);
  std::string metrics_path = cfg.out_dir + "/metrics.csv";
  if (!resume) require_writable(metrics_path, force);

  RunConfig resolved = cfg;
  resolved.apply_ablations();
  MapDef map = load_map(resolved.map_path);
  save_run_config(cfg, cfg.out_dir + "/config.resolved.json");

  Trainer trainer(map, resolved.resolved_sim(map), resolved.resolved_obs(),
                  resolved.resolved_nn(), resolved.resolved_sac(), resolved.resolved_train());
  std::string ckpt = cfg.out_dir + "/checkpoint_latest.navc";
  if (resume && fs::exists(ckpt)) {
    trainer.resume_from(ckpt);
    std::cout << "resumed from " << ckpt << "\n";
  }
  TrainResult result = trainer.run();

  json summary{{"env_steps", result.env_steps},
               {"updates", result.updates},
               {"reached_target", result.reached_target},
               {"steps_to_target", result.reached_target ? result.steps_to_target : cfg.budget},
               {"final_success", result.final_success},
               {"final_radius", result.final_radius},
               {"budget", cfg.budget},
               {"seed", cfg.seed}};
  std::ofstream(cfg.out_dir + "/summary.json") << summary.dump(2) << "\n";

  if (result.reached_target)
    std::cout << "steps-to-target: " << result.steps_to_target << "\n";
  else
    std::cout << "target not reached (env steps: " << result.env_steps
              << ", final success: " << result.final_success << ")\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const RunConfig& cfg, int episodes,
             double radius, const std::string& out_dir, bool force,
             const EvalDumpOptions& dump) {
  RunConfig resolved = cfg;
  resolved.apply_ablations();
  MapDef map = load_map(resolved.map_path);
  Checkpoint ck = load_checkpoint(checkpoint_path);
  NetworkSpec want = resolved.resolved_nn();
  if (!(ck.spec == want)) {
    std::ostringstream os;
    os << "checkpoint/network spec mismatch: checkpoint occ(" << ck.spec.occ_dims[0] << "x"
       << ck.spec.occ_dims[1] << "x" << ck.spec.occ_dims[2] << ") depth("
       << ck.spec.depth_dims[0] << "x" << ck.spec.depth_dims[1] << ") lstm "
       << ck.spec.lstm_hidden << " vs config occ(" << want.occ_dims[0] << "x"
       << want.occ_dims[1] << "x" << want.occ_dims[2] << ") depth(" << want.depth_dims[0] << "x"
       << want.depth_dims[1] << ") lstm " << want.lstm_hidden;
    throw ValidationError(os.str());
  }

  fs::create_directories(out_dir);
  std::string csv_path = out_dir + "/episodes.csv";
  require_writable(csv_path, force);

  SimConfig sim_cfg = resolved.resolved_sim(map);
  ObsConfig obs_cfg = resolved.resolved_obs();
  VoxelGrid grid = bake_occupancy(map, obs_cfg.occ_cell);
  if (radius <= 0) radius = full_coverage_radius(map);

  EvalResult result = evaluate_policy(map, grid, sim_cfg, obs_cfg, ck.state.nets.trunk,
                                      ck.state.nets.pi, radius, episodes, cfg.seed, &dump);
  std::ofstream csv(csv_path);
  csv << "episode,radius,steps,success,return\n";
  for (const auto& e : result.episodes) {
    char line[160];
    std::snprintf(line, sizeof(line), "%d,%.6g,%d,%d,%.6g\n", e.episode, e.radius, e.steps,
                  e.success ? 1 : 0, e.ret);
    csv << line;
  }
  std::cout << "episodes: " << episodes << " success_rate: " << result.success_rate
            << " mean_steps: " << result.mean_steps << " mean_return: " << result.mean_return
            << "\n";
  return 0;
}

int cmd_compare(const std::string& checkpoint_path, const std::string& navgraph_path,
                const RunConfig& cfg, int pairs, const std::string& out_dir, bool force) {
  RunConfig resolved = cfg;
  resolved.apply_ablations();
  MapDef map = load_map(resolved.map_path);
  NavGraph graph = load_navgraph(navgraph_path);
  Checkpoint ck = load_checkpoint(checkpoint_path);
  SimConfig sim_cfg = resolved.resolved_sim(map);
  ObsConfig obs_cfg = resolved.resolved_obs();
  VoxelGrid grid = bake_occupancy(map, obs_cfg.occ_cell);

  fs::create_directories(out_dir);
  std::string csv_path = out_dir + "/compare.csv";
  require_writable(csv_path, force);
  std::ofstream csv(csv_path);
  csv << "pair,rl_success,rl_steps,nav_reachable,nav_success,nav_steps,rl_only\n";

  Rng rng = Rng::seeded(cfg.seed).fork(0xc0);
  Box region = map.bounds;
  int rl_wins = 0, nav_unreachable = 0;
  ObsBatch<float> ob;
  ob.resize(ck.spec, 1);
  for (int p = 0; p < pairs; ++p) {
    auto s = sample_walkable_point(map, region, sim_cfg.agent_half_extents, rng);
    auto g = sample_walkable_point(map, region, sim_cfg.agent_half_extents, rng);
    if (!s || !g) continue;

    // RL rollout, mean mode.
    AgentState agent;
    agent.position = s->point;
    agent.grounded = true;
    agent.yaw = rng.uniform(-M_PI, M_PI);
    EpisodeState ep;
    ep.goal = g->point;
    ep.best_dist = (agent.position - ep.goal).norm();
    ep.max_steps = sim_cfg.max_steps_for_radius(full_coverage_radius(map));
    MatX<float> h = ck.state.nets.trunk.zero_hidden(1), c = ck.state.nets.trunk.zero_hidden(1);
    int rl_steps = 0;
    bool rl_success = false;
    Rng noise(0);
    while (ep.done == EpisodeResult::kRunning) {
      Observation o = build_observation(agent, ep.goal, grid, map, obs_cfg);
      ob.occ.col(0) = o.occupancy;
      ob.depth.col(0) = o.depth;
      ob.scalars.col(0) = o.scalars;
      ob.abs.col(0) = o.abs_positions;
      PolicySampleOut ps =
          select_action(ck.state.nets.trunk, ck.state.nets.pi, ob, h, c, ActionMode::kMean, noise);
      Action a{ps.actions(0, 0), ps.actions(1, 0), ps.actions(2, 0), ps.actions(3, 0)};
      step(agent, ep, a, sim_cfg, map);
      ++rl_steps;
    }
    rl_success = ep.done == EpisodeResult::kSuccess;

    // NavMesh route + follower.
    bool nav_reachable = false, nav_success = false;
    int nav_steps = 0;
    try {
      AstarResult ar = astar(graph, s->point, g->point);
      nav_reachable = ar.reachable;
      if (ar.reachable) {
        Path smoothed = smooth_path(graph, ar.path);
        PathFollower follower(smoothed, sim_cfg);
        AgentState na;
        na.position = s->point;
        na.grounded = true;
        na.yaw = 0.0;
        EpisodeState nep;
        nep.goal = g->point;
        nep.best_dist = (na.position - nep.goal).norm();
        nep.max_steps = sim_cfg.max_steps_for_radius(full_coverage_radius(map));
        while (nep.done == EpisodeResult::kRunning && !follower.failed()) {
          Action a = follower.next_action(na);
          step(na, nep, a, sim_cfg, map);
          ++nav_steps;
          if (follower.done()) break;
        }
        nav_success = nep.done == EpisodeResult::kSuccess;
      }
    } catch (const ValidationError&) {
      nav_reachable = false;  // start or goal off the mesh
    }

    bool rl_only = rl_success && !nav_success;
    if (!nav_reachable) ++nav_unreachable;
    if (rl_only) ++rl_wins;
    char line[160];
    std::snprintf(line, sizeof(line), "%d,%d,%d,%d,%d,%d,%d\n", p, rl_success ? 1 : 0, rl_steps,
                  nav_reachable ? 1 : 0, nav_success ? 1 : 0, nav_steps, rl_only ? 1 : 0);
    csv << line;
  }
  std::cout << "pairs: " << pairs << " navmesh-unreachable: " << nav_unreachable
            << " rl-only-solved: " << rl_wins << "\nwrote " << csv_path << "\n";
  return 0;
}

std::vector<double> read_stats_group(const std::vector<std::string>& files) {
  std::vector<double> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw ParseError("cannot open stats input: " + f);
    if (fs::path(f).extension() == ".json") {
      json j;
      in >> j;
      out.push_back(j.at("steps_to_target").get<double>());
    } else {
      double v;
      while (in >> v) out.push_back(v);
    }
  }
  return out;
}

int cmd_stats(const std::vector<std::string>& group_a, const std::vector<std::string>& group_b) {
  std::vector<double> a = read_stats_group(group_a);
  std::vector<double> b = read_stats_group(group_b);
  if (a.size() < 2 || b.size() < 2)
    throw ValidationError("need at least 2 seeds per config for Welch's t-test");
  WelchResult r = welch_t_test(a, b);
  std::cout << "n_a: " << a.size() << " mean_a: " << r.mean1 << "\n"
            << "n_b: " << b.size() << " mean_b: " << r.mean2 << "\n"
            << "t: " << r.t << "\ndf: " << r.df << "\np: " << r.p << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"box-world navigation: RL training and NavMesh baseline"};
  app.require_subcommand(1);

  // bake
  auto* bake = app.add_subcommand("bake", "bake occupancy cache and navgraph for a map");
  std::string bake_map, bake_out = "out", bake_links = "all", bake_manual;
  double bake_cell = 0.5;
  bool bake_force = false;
  bake->add_option("--map", bake_map, "map json path")->required();
  bake->add_option("--cell", bake_cell, "voxel cell size (m)");
  bake->add_option("--out", bake_out, "output directory");
  bake->add_option("--links", bake_links, "auto link search: all|jump|double_jump|pad|none");
  bake->add_option("--manual-links", bake_manual, "manual links json to merge");
  bake->add_flag("--force", bake_force, "overwrite outputs");

  // shared run options
  std::string cfg_path, run_map, run_out;
  uint64_t opt_seed = 0, opt_budget = 0;
  bool has_seed = false, has_budget = false, deterministic = false, force = false;
  std::vector<std::string> ablate;

  auto add_run_opts = [&](CLI::App* cmd) {
    cmd->add_option("--config", cfg_path, "run config json")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    cmd->add_option("--map", run_map, "map json path (overrides config)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    cmd->add_option("--seed", opt_seed, "random seed")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)
        ->each([&](const std::string&) { has_seed = true; });
    cmd->add_option("--budget", opt_budget, "environment-step budget")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)
        ->each([&](const std::string&) { has_budget = true; });
    cmd->add_option("--out", run_out, "output directory")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    cmd->add_option("--ablate", ablate, "ablation flags (comma or repeat)")->delimiter(',');
    cmd->add_flag("--deterministic", deterministic, "single-collector deterministic mode");
    cmd->add_flag("--force", force, "overwrite outputs");
  };

  auto* train = app.add_subcommand("train", "train the navigation policy");
  add_run_opts(train);
  bool resume = false;
  train->add_flag("--resume", resume, "resume from the latest checkpoint in --out");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_run_opts(eval);
  std::string eval_ckpt, dump_traj, dump_obs;
  int eval_episodes = 100;
  double eval_radius = 0.0;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval->add_option("--episodes", eval_episodes, "number of eval episodes")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  eval->add_option("--radius", eval_radius, "spawning radius (default: full map)");
  eval->add_option("--dump-trajectories", dump_traj, "write per-step JSONL");
  eval->add_option("--dump-obs", dump_obs, "write raw f32 observation records");

  auto* compare = app.add_subcommand("compare", "RL policy vs NavMesh follower");
  add_run_opts(compare);
  std::string cmp_ckpt, cmp_graph;
  int cmp_pairs = 50;
  compare->add_option("--checkpoint", cmp_ckpt, "checkpoint path")->required();
  compare->add_option("--navgraph", cmp_graph, "navgraph json path")->required();
  compare->add_option("--pairs", cmp_pairs, "number of start/goal pairs");

  auto* stats = app.add_subcommand("stats", "Welch's t-test between two run groups");
  std::vector<std::string> group_a, group_b;
  stats->add_option("--a", group_a, "group A: summary.json or number files")
      ->delimiter(',')
      ->required();
  stats->add_option("--b", group_b, "group B: summary.json or number files")
      ->delimiter(',')
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (bake->parsed())
      return cmd_bake(bake_map, bake_cell, bake_out, bake_links, bake_manual, bake_force);

    RunConfig cfg = load_config_with_overrides(cfg_path, run_map, has_seed ? &opt_seed : nullptr,
                                               has_budget ? &opt_budget : nullptr, run_out,
                                               ablate, deterministic);
    if (train->parsed()) return cmd_train(cfg, force, resume);
    if (eval->parsed()) {
      EvalDumpOptions dump;
      dump.trajectory_jsonl = dump_traj;
      dump.observations_f32 = dump_obs;
      return cmd_eval(eval_ckpt, cfg, eval_episodes, eval_radius,
                      run_out.empty() ? cfg.out_dir : run_out, force, dump);
    }
    if (compare->parsed())
      return cmd_compare(cmp_ckpt, cmp_graph, cfg, cmp_pairs,
                         run_out.empty() ? cfg.out_dir : run_out, force);
    if (stats->parsed()) return cmd_stats(group_a, group_b);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
