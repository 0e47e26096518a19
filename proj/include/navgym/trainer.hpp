#pragma once

#include <deque>
#include <functional>
#include <optional>

#include "navgym/sac.hpp"

namespace navgym {

struct TrainSettings {
  uint64_t budget = 300000;  // environment steps
  int collectors = 4;        // parallel simulator instances (logical, deterministic)
  uint64_t seed = 1;
  bool deterministic = false;  // single-collector reproducibility mode
  std::string out_dir = "out";
  uint64_t metrics_interval = 1000;
  uint64_t checkpoint_interval = 50000;
  double target_success = 0.9;
  bool stop_at_target = true;
  bool no_curriculum = false;
  double radius0 = 4.0;
  double radius_step = 4.0;
  double radius_max = 0.0;  // 0 = horizontal half-diagonal of the map
  int curriculum_window = 50;
  double curriculum_threshold = 0.8;
};

struct TrainResult {
  uint64_t env_steps = 0;
  uint64_t updates = 0;
  bool reached_target = false;
  uint64_t steps_to_target = 0;
  double final_success = 0.0;
  double final_radius = 0.0;
  std::string checkpoint_path;
  std::string metrics_path;
};

// Collector/trainer loop: N simulator instances stepped in lockstep feed
// episodes into replay; one trainer owns parameters and runs updates on a
// fixed env-step cadence. Fully deterministic for a given (config, seed).
class Trainer {
 public:
  Trainer(MapDef map, SimConfig sim_cfg, ObsConfig obs_cfg, NetworkSpec spec, SacConfig sac_cfg,
          TrainSettings settings);

  // Restores parameters, optimizer state, curriculum and counters.
  void resume_from(const std::string& checkpoint_path);

  TrainResult run();

  const SacState& state() const { return sac_; }
  const CurriculumState& curriculum() const { return curriculum_; }

 private:
  struct Collector {
    AgentState agent;
    EpisodeState episode;
    EpisodeSequence seq;
    MatX<float> h, c;
    Rng rng;
    double ep_return = 0.0;
  };

  void reset_collector(Collector& col);
  void finish_episode(Collector& col, bool success);
  void write_metrics_row(uint64_t at_steps);
  double rolling_success() const;

  MapDef map_;
  VoxelGrid grid_;
  SimConfig sim_cfg_;
  ObsConfig obs_cfg_;
  SacConfig sac_cfg_;
  TrainSettings settings_;
  SacState sac_;
  ReplayBuffer replay_;
  CurriculumState curriculum_;
  std::vector<Collector> collectors_;
  Rng policy_rng_, sample_rng_, her_rng_, update_rng_;
  uint64_t env_steps_ = 0;
  std::optional<uint64_t> train_base_steps_;
  std::deque<uint8_t> outcome_window_;
  std::deque<double> return_window_;
  SacDiagnostics last_diag_;
  std::ofstream* metrics_ = nullptr;
};

struct EvalEpisodeRow {
  int episode = 0;
  double radius = 0.0;
  int steps = 0;
  bool success = false;
  double ret = 0.0;
};

struct EvalResult {
  std::vector<EvalEpisodeRow> episodes;
  double success_rate = 0.0;
  double mean_steps = 0.0;
  double mean_return = 0.0;
};

struct EvalDumpOptions {
  std::string trajectory_jsonl;  // empty = no dump
  std::string observations_f32;  // empty = no dump
};

// Mean-mode policy rollout at a fixed spawning radius.
EvalResult evaluate_policy(const MapDef& map, const VoxelGrid& grid, const SimConfig& sim_cfg,
                           const ObsConfig& obs_cfg, const Trunk<float>& trunk,
                           const PolicyHead<float>& pi, double radius, int episodes,
                           uint64_t seed, const EvalDumpOptions* dump = nullptr);

// Scripted rollout helper shared by eval/compare; one action per step from
// the callback until the episode ends or `max_steps` elapses.
int collector_cap_from_env(int requested);

}  // namespace navgym
