#pragma once

#include <map>
#include <string>

#include "navgym/net.hpp"
#include "navgym/replay.hpp"

namespace navgym {

struct SacConfig {
  double gamma = 0.99;
  double tau = 0.005;
  double lr = 3e-4;
  double init_alpha = 0.05;
  double target_entropy = -4.0;  // -dim(action)
  int batch = 16;                // sequence windows per update
  int burn_in = 8;
  int train_len = 24;
  uint64_t replay_capacity = 200000;  // steps
  // Table-style "training / environment steps": by default one gradient
  // update per `train_every` environment steps; the inverse reading
  // (`train_every` updates per step) is available via updates_per_env_step.
  int train_every = 4;
  int updates_per_env_step = 0;  // 0 = use train_every
  uint64_t warmup_steps = 2000;  // uniform-random action steps before updates
  uint64_t min_replay_steps = 2000;
  bool twin_q = true;
  bool her = false;
  std::string her_strategy = "future";  // or "final"
  int her_k = 1;
};

struct SacDiagnostics {
  double critic_loss = 0.0;
  double policy_loss = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
  double mean_q = 0.0;
};

// Raised when an update produces a non-finite loss; names the term.
struct NonFiniteLossError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SacState {
  NetworkSpec spec;
  SacNets<float> nets;
  float log_alpha = 0.0f;
  float log_alpha_grad = 0.0f;
  Adam<float> adam_critic, adam_policy, adam_alpha;
  uint64_t updates = 0;

  void init(const NetworkSpec& sp, const SacConfig& cfg, Rng& rng);
  float alpha() const { return std::exp(log_alpha); }
  ParamList<float> alpha_param();
};

enum class ActionMode { kSample, kMean };

// Policy head over a batch of embeddings: squashed diagonal Gaussian with
// the tanh change-of-variables correction.
struct PolicySampleOut {
  MatX<float> actions;   // A x N
  VecX<float> log_prob;  // N
};

PolicySampleOut sample_policy(const PolicyHead<float>& pi, const MatX<float>& emb,
                              ActionMode mode, Rng& rng);

// Runs the policy one step for B parallel environments, advancing h/c.
PolicySampleOut select_action(const Trunk<float>& trunk, const PolicyHead<float>& pi,
                              const ObsBatch<float>& obs, MatX<float>& h, MatX<float>& c,
                              ActionMode mode, Rng& rng);

// Unrolls the trunk over a burn-in prefix with gradients disabled, starting
// from zero hidden state; h/c come out positioned at the training slice.
void burn_in_hidden(const Trunk<float>& trunk, const ObsBatch<float>& prefix, int batch,
                    int steps, const VecX<float>& mask, MatX<float>& h, MatX<float>& c);

// Dense training batch assembled from sampled windows: burn_in + train_len
// transitions plus one extra observation column for bootstrapping.
struct WindowBatch {
  int B = 0;
  int burn_in = 0;
  int train_len = 0;
  ObsBatch<float> obs;          // (burn_in + train_len + 1) * B columns, t-major
  VecX<float> obs_mask;         // per obs column
  MatX<float> actions;          // A x (train_len * B)
  VecX<float> rewards;          // train_len * B
  VecX<float> not_done;         // 1 - terminal
  VecX<float> step_valid;       // padding mask for transitions

  int obs_steps() const { return burn_in + train_len + 1; }
};

WindowBatch assemble_windows(const std::vector<WindowRef>& windows, int burn_in, int train_len,
                             int action_dim, const MapDef& map, const ObsConfig& obs_cfg);

// One SAC update: twin-critic Bellman regression with burned-in hidden
// states, policy and temperature updates on the training slice, Polyak
// target blend. Throws NonFiniteLossError and leaves parameters untouched
// when a loss goes non-finite.
SacDiagnostics sac_update(SacState& state, const WindowBatch& batch, const SacConfig& cfg,
                          Rng& rng);

// Hindsight goal relabeling. Returns up to k copies with goals replaced by
// achieved positions; rewards, best-distance chain and termination are
// recomputed under each new goal (episodes truncate at the first success).
std::vector<EpisodeSequence> relabel_her(const EpisodeSequence& episode,
                                         const std::string& strategy, Rng& rng,
                                         double goal_epsilon, double step_penalty, int k);

// ---------------------------------------------------------------------------
// Checkpoints: "NAVC" magic, version, JSON header (network spec, tensor
// table, counters), then little-endian f32 blobs. Save/load round-trips
// bit-exactly.
// ---------------------------------------------------------------------------

struct TrainerPersist {
  uint64_t env_steps = 0;
  CurriculumState curriculum;
  std::map<std::string, std::string> rng_states;
  double best_window_success = 0.0;
};

void save_checkpoint(const std::string& path, SacState& state, const SacConfig& cfg,
                     const TrainerPersist* trainer);

struct Checkpoint {
  NetworkSpec spec;
  SacConfig sac_cfg;
  SacState state;  // nets populated
  bool has_trainer = false;
  TrainerPersist trainer;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace navgym
