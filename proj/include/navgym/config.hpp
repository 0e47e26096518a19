#pragma once

#include <string>
#include <vector>

#include "navgym/net.hpp"
#include "navgym/obs.hpp"
#include "navgym/sac.hpp"
#include "navgym/trainer.hpp"

namespace navgym {

// Full run description: every field has a default, unknown keys are
// rejected, and the fully-resolved document round-trips a run exactly.
struct RunConfig {
  std::string map_path = "maps/toy_desk.map.json";
  uint64_t seed = 1;
  uint64_t budget = 300000;
  std::string out_dir = "out";
  bool deterministic = false;
  int collectors = 4;
  std::vector<std::string> ablations;  // no_boxcast no_raycast no_abs_position
                                       // no_lstm no_curriculum her
  SimConfig sim;      // sim.goal_epsilon <= 0 means "use the map's value"
  ObsConfig obs;
  NetworkSpec nn;
  SacConfig sac;
  TrainSettings train;  // budget/seed/out_dir/deterministic mirrored on resolve

  void apply_ablations();
  void validate() const;

  // Derived views with ablations and map-dependent defaults applied.
  SimConfig resolved_sim(const MapDef& map) const;
  ObsConfig resolved_obs() const;
  NetworkSpec resolved_nn() const;
  SacConfig resolved_sac() const;
  TrainSettings resolved_train() const;
};

RunConfig run_config_from_json_text(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json_text(const RunConfig& cfg);
void save_run_config(const RunConfig& cfg, const std::string& path);

bool is_known_ablation(const std::string& name);

}  // namespace navgym
