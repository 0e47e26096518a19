#include "navgym/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "navgym/error.hpp"

namespace navgym {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
  std::vector<std::string> bad;
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) bad.push_back(where + it.key());
  if (!bad.empty()) {
    std::string msg = "unknown config key(s):";
    for (const auto& k : bad) msg += " " + k;
    throw ValidationError(msg);
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

bool is_known_ablation(const std::string& name) {
  static const std::set<std::string> known{"no_boxcast",      "no_raycast", "no_abs_position",
                                           "no_lstm",         "no_curriculum", "her"};
  return known.count(name) > 0;
}

void RunConfig::apply_ablations() {
  for (const auto& a : ablations) {
    if (!is_known_ablation(a)) throw ValidationError("unknown ablation flag: " + a);
    if (a == "no_boxcast") obs.zero_occupancy = true;
    if (a == "no_raycast") obs.zero_depth = true;
    if (a == "no_abs_position") obs.zero_abs_positions = true;
    if (a == "no_lstm") nn.lstm_hidden = 0;
    if (a == "no_curriculum") train.no_curriculum = true;
    if (a == "her") sac.her = true;
  }
}

void RunConfig::validate() const {
  for (const auto& a : ablations)
    if (!is_known_ablation(a)) throw ValidationError("unknown ablation flag: " + a);
  obs.validate();
  nn.validate();
  if (collectors < 1) throw ValidationError("collectors must be >= 1");
  if (sac.batch < 1 || sac.train_len < 1 || sac.burn_in < 0)
    throw ValidationError("sac batch/train_len/burn_in malformed");
  if (!(sim.dt > 0 && sim.move_speed > 0 && sim.strafe_speed > 0 && sim.jump_speed > 0 &&
        sim.gravity > 0 && sim.turn_rate > 0))
    throw ValidationError("sim constants must be positive");
  if (sim.step_penalty > 0) throw ValidationError("sim.step_penalty must be <= 0");
}

SimConfig RunConfig::resolved_sim(const MapDef& map) const {
  SimConfig s = sim;
  if (s.goal_epsilon <= 0) s.goal_epsilon = map.goal_epsilon;
  return s;
}

ObsConfig RunConfig::resolved_obs() const { return obs; }

NetworkSpec RunConfig::resolved_nn() const {
  NetworkSpec spec = nn;
  spec.occ_dims = {obs.occ_x, obs.occ_y, obs.occ_z};
  spec.depth_dims = {obs.rays_h, obs.rays_v};
  spec.scalar_dim = ObsConfig::kScalarCount;
  spec.abs_dim = ObsConfig::kAbsCount;
  return spec;
}

SacConfig RunConfig::resolved_sac() const { return sac; }

TrainSettings RunConfig::resolved_train() const {
  TrainSettings t = train;
  t.budget = budget;
  t.seed = seed;
  t.deterministic = deterministic;
  t.out_dir = out_dir;
  t.collectors = collectors;
  return t;
}

RunConfig run_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config parse error: ") + e.what());
  }
  RunConfig c;
  reject_unknown(j, {"map", "seed", "budget", "out_dir", "deterministic", "collectors",
                     "ablations", "sim", "obs", "nn", "sac", "train"},
                 "");
  get_if(j, "map", c.map_path);
  get_if(j, "seed", c.seed);
  get_if(j, "budget", c.budget);
  get_if(j, "out_dir", c.out_dir);
  get_if(j, "deterministic", c.deterministic);
  get_if(j, "collectors", c.collectors);
  get_if(j, "ablations", c.ablations);

  if (j.contains("sim")) {
    const json& s = j.at("sim");
    reject_unknown(s, {"dt", "move_speed", "strafe_speed", "turn_rate", "jump_speed", "gravity",
                       "step_penalty", "goal_epsilon", "agent_half_extents"},
                   "sim.");
    get_if(s, "dt", c.sim.dt);
    get_if(s, "move_speed", c.sim.move_speed);
    get_if(s, "strafe_speed", c.sim.strafe_speed);
    get_if(s, "turn_rate", c.sim.turn_rate);
    get_if(s, "jump_speed", c.sim.jump_speed);
    get_if(s, "gravity", c.sim.gravity);
    get_if(s, "step_penalty", c.sim.step_penalty);
    get_if(s, "goal_epsilon", c.sim.goal_epsilon);
    if (s.contains("agent_half_extents")) {
      auto v = s.at("agent_half_extents").get<std::vector<double>>();
      if (v.size() != 3) throw ValidationError("sim.agent_half_extents must have 3 entries");
      c.sim.agent_half_extents = Vec3(v[0], v[1], v[2]);
    }
  }
  if (j.contains("obs")) {
    const json& o = j.at("obs");
    reject_unknown(o, {"occ", "occ_cell", "rays", "fov_h", "fov_v", "max_range", "eye_height",
                       "velocity_scale", "accel_scale", "position_scale"},
                   "obs.");
    if (o.contains("occ")) {
      auto v = o.at("occ").get<std::vector<int>>();
      if (v.size() != 3) throw ValidationError("obs.occ must have 3 entries");
      c.obs.occ_x = v[0];
      c.obs.occ_y = v[1];
      c.obs.occ_z = v[2];
    }
    get_if(o, "occ_cell", c.obs.occ_cell);
    if (o.contains("rays")) {
      auto v = o.at("rays").get<std::vector<int>>();
      if (v.size() != 2) throw ValidationError("obs.rays must have 2 entries");
      c.obs.rays_h = v[0];
      c.obs.rays_v = v[1];
    }
    get_if(o, "fov_h", c.obs.fov_h);
    get_if(o, "fov_v", c.obs.fov_v);
    get_if(o, "max_range", c.obs.max_range);
    get_if(o, "eye_height", c.obs.eye_height);
    get_if(o, "velocity_scale", c.obs.velocity_scale);
    get_if(o, "accel_scale", c.obs.accel_scale);
    get_if(o, "position_scale", c.obs.position_scale);
  }
  if (j.contains("nn")) {
    const json& n = j.at("nn");
    reject_unknown(n, {"conv3d", "conv2d", "abs_hidden", "trunk", "lstm_hidden", "policy_hidden",
                       "q_hidden"},
                   "nn.");
    auto conv_from = [](const json& a) {
      std::vector<ConvSpec> v;
      for (const auto& cj : a) {
        reject_unknown(cj, {"channels", "kernel", "stride", "pad"}, "nn.conv.");
        ConvSpec cs;
        get_if(cj, "channels", cs.channels);
        get_if(cj, "kernel", cs.kernel);
        get_if(cj, "stride", cs.stride);
        get_if(cj, "pad", cs.pad);
        v.push_back(cs);
      }
      return v;
    };
    if (n.contains("conv3d")) c.nn.conv3d = conv_from(n.at("conv3d"));
    if (n.contains("conv2d")) c.nn.conv2d = conv_from(n.at("conv2d"));
    get_if(n, "abs_hidden", c.nn.abs_hidden);
    get_if(n, "trunk", c.nn.trunk);
    get_if(n, "lstm_hidden", c.nn.lstm_hidden);
    get_if(n, "policy_hidden", c.nn.policy_hidden);
    get_if(n, "q_hidden", c.nn.q_hidden);
  }
  if (j.contains("sac")) {
    const json& s = j.at("sac");
    reject_unknown(s, {"gamma", "tau", "lr", "init_alpha", "target_entropy", "batch", "burn_in",
                       "train_len", "replay_capacity", "train_every", "updates_per_env_step",
                       "warmup_steps", "min_replay_steps", "twin_q", "her_strategy", "her_k"},
                   "sac.");
    get_if(s, "gamma", c.sac.gamma);
    get_if(s, "tau", c.sac.tau);
    get_if(s, "lr", c.sac.lr);
    get_if(s, "init_alpha", c.sac.init_alpha);
    get_if(s, "target_entropy", c.sac.target_entropy);
    get_if(s, "batch", c.sac.batch);
    get_if(s, "burn_in", c.sac.burn_in);
    get_if(s, "train_len", c.sac.train_len);
    get_if(s, "replay_capacity", c.sac.replay_capacity);
    get_if(s, "train_every", c.sac.train_every);
    get_if(s, "updates_per_env_step", c.sac.updates_per_env_step);
    get_if(s, "warmup_steps", c.sac.warmup_steps);
    get_if(s, "min_replay_steps", c.sac.min_replay_steps);
    get_if(s, "twin_q", c.sac.twin_q);
    get_if(s, "her_strategy", c.sac.her_strategy);
    get_if(s, "her_k", c.sac.her_k);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown(t, {"metrics_interval", "checkpoint_interval", "target_success",
                       "stop_at_target", "radius0", "radius_step", "radius_max",
                       "curriculum_window", "curriculum_threshold"},
                   "train.");
    get_if(t, "metrics_interval", c.train.metrics_interval);
    get_if(t, "checkpoint_interval", c.train.checkpoint_interval);
    get_if(t, "target_success", c.train.target_success);
    get_if(t, "stop_at_target", c.train.stop_at_target);
    get_if(t, "radius0", c.train.radius0);
    get_if(t, "radius_step", c.train.radius_step);
    get_if(t, "radius_max", c.train.radius_max);
    get_if(t, "curriculum_window", c.train.curriculum_window);
    get_if(t, "curriculum_threshold", c.train.curriculum_threshold);
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return run_config_from_json_text(ss.str());
}

std::string run_config_to_json_text(const RunConfig& c) {
  json j;
  j["map"] = c.map_path;
  j["seed"] = c.seed;
  j["budget"] = c.budget;
  j["out_dir"] = c.out_dir;
  j["deterministic"] = c.deterministic;
  j["collectors"] = c.collectors;
  j["ablations"] = c.ablations;
  j["sim"] = json{{"dt", c.sim.dt},
                  {"move_speed", c.sim.move_speed},
                  {"strafe_speed", c.sim.strafe_speed},
                  {"turn_rate", c.sim.turn_rate},
                  {"jump_speed", c.sim.jump_speed},
                  {"gravity", c.sim.gravity},
                  {"step_penalty", c.sim.step_penalty},
                  {"goal_epsilon", c.sim.goal_epsilon},
                  {"agent_half_extents",
                   {c.sim.agent_half_extents.x(), c.sim.agent_half_extents.y(),
                    c.sim.agent_half_extents.z()}}};
  j["obs"] = json{{"occ", {c.obs.occ_x, c.obs.occ_y, c.obs.occ_z}},
                  {"occ_cell", c.obs.occ_cell},
                  {"rays", {c.obs.rays_h, c.obs.rays_v}},
                  {"fov_h", c.obs.fov_h},
                  {"fov_v", c.obs.fov_v},
                  {"max_range", c.obs.max_range},
                  {"eye_height", c.obs.eye_height},
                  {"velocity_scale", c.obs.velocity_scale},
                  {"accel_scale", c.obs.accel_scale},
                  {"position_scale", c.obs.position_scale}};
  auto conv_json = [](const std::vector<ConvSpec>& v) {
    json a = json::array();
    for (const auto& cs : v)
      a.push_back({{"channels", cs.channels}, {"kernel", cs.kernel}, {"stride", cs.stride},
                   {"pad", cs.pad}});
    return a;
  };
  j["nn"] = json{{"conv3d", conv_json(c.nn.conv3d)},
                 {"conv2d", conv_json(c.nn.conv2d)},
                 {"abs_hidden", c.nn.abs_hidden},
                 {"trunk", c.nn.trunk},
                 {"lstm_hidden", c.nn.lstm_hidden},
                 {"policy_hidden", c.nn.policy_hidden},
                 {"q_hidden", c.nn.q_hidden}};
  j["sac"] = json{{"gamma", c.sac.gamma},
                  {"tau", c.sac.tau},
                  {"lr", c.sac.lr},
                  {"init_alpha", c.sac.init_alpha},
                  {"target_entropy", c.sac.target_entropy},
                  {"batch", c.sac.batch},
                  {"burn_in", c.sac.burn_in},
                  {"train_len", c.sac.train_len},
                  {"replay_capacity", c.sac.replay_capacity},
                  {"train_every", c.sac.train_every},
                  {"updates_per_env_step", c.sac.updates_per_env_step},
                  {"warmup_steps", c.sac.warmup_steps},
                  {"min_replay_steps", c.sac.min_replay_steps},
                  {"twin_q", c.sac.twin_q},
                  {"her_strategy", c.sac.her_strategy},
                  {"her_k", c.sac.her_k}};
  j["train"] = json{{"metrics_interval", c.train.metrics_interval},
                    {"checkpoint_interval", c.train.checkpoint_interval},
                    {"target_success", c.train.target_success},
                    {"stop_at_target", c.train.stop_at_target},
                    {"radius0", c.train.radius0},
                    {"radius_step", c.train.radius_step},
                    {"radius_max", c.train.radius_max},
                    {"curriculum_window", c.train.curriculum_window},
                    {"curriculum_threshold", c.train.curriculum_threshold}};
  return j.dump(2) + "\n";
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write config: " + path);
  out << run_config_to_json_text(cfg);
}

}  // namespace navgym
