#include "navgym/trainer.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <nlohmann/json.hpp>

namespace navgym {

namespace fs = std::filesystem;

int collector_cap_from_env(int requested) {
  const char* cap = std::getenv("NAVGYM_THREADS");
  if (!cap) return requested;
  int n = std::atoi(cap);
  if (n < 1) return requested;
  return std::min(requested, n);
}

Trainer::Trainer(MapDef map, SimConfig sim_cfg, ObsConfig obs_cfg, NetworkSpec spec,
                 SacConfig sac_cfg, TrainSettings settings)
    : map_(std::move(map)),
      grid_(bake_occupancy(map_, obs_cfg.occ_cell)),
      sim_cfg_(sim_cfg),
      obs_cfg_(obs_cfg),
      sac_cfg_(sac_cfg),
      settings_(settings),
      replay_(sac_cfg.replay_capacity) {
  if (settings_.radius_max <= 0) settings_.radius_max = full_coverage_radius(map_);
  double r0 = settings_.no_curriculum ? settings_.radius_max : settings_.radius0;
  curriculum_ = make_curriculum(r0, settings_.radius_step, settings_.radius_max,
                                settings_.curriculum_window, settings_.curriculum_threshold);
  int n_collectors = settings_.deterministic ? 1 : collector_cap_from_env(settings_.collectors);
  Rng master = Rng::seeded(settings_.seed);
  Rng init_rng = master.fork(1);
  sac_.init(spec, sac_cfg_, init_rng);
  policy_rng_ = master.fork(2);
  sample_rng_ = master.fork(3);
  her_rng_ = master.fork(4);
  update_rng_ = master.fork(5);
  collectors_.resize(n_collectors);
  for (int i = 0; i < n_collectors; ++i) collectors_[i].rng = master.fork(100 + uint64_t(i));
}

void Trainer::reset_collector(Collector& col) {
  ResetResult rr = reset(map_, curriculum_, sim_cfg_, col.rng);
  col.agent = rr.agent;
  col.episode = rr.episode;
  col.h = sac_.nets.trunk.zero_hidden(1);
  col.c = sac_.nets.trunk.zero_hidden(1);
  col.seq = EpisodeSequence{};
  col.seq.goal = rr.episode.goal;
  col.seq.radius = curriculum_.radius;
  col.seq.seed = settings_.seed;
  col.seq.snapshots.push_back(make_snapshot(col.agent, grid_, map_, obs_cfg_));
  col.ep_return = 0.0;
}

void Trainer::finish_episode(Collector& col, bool success) {
  if (col.seq.length() >= 1) {
    if (sac_cfg_.her) {
      auto relabels = relabel_her(col.seq, sac_cfg_.her_strategy, her_rng_,
                                  sim_cfg_.goal_epsilon, sim_cfg_.step_penalty, sac_cfg_.her_k);
      for (auto& r : relabels) replay_.push(std::move(r));
    }
    replay_.push(std::move(col.seq));
  }
  update_curriculum(curriculum_, success);
  outcome_window_.push_back(success ? 1 : 0);
  if (int(outcome_window_.size()) > settings_.curriculum_window) outcome_window_.pop_front();
  return_window_.push_back(col.ep_return);
  if (return_window_.size() > 50) return_window_.pop_front();
}

double Trainer::rolling_success() const {
  if (outcome_window_.empty()) return 0.0;
  double s = 0;
  for (uint8_t o : outcome_window_) s += o;
  return s / double(outcome_window_.size());
}

void Trainer::write_metrics_row(uint64_t at_steps) {
  double mean_return = 0.0;
  for (double r : return_window_) mean_return += r;
  if (!return_window_.empty()) mean_return /= double(return_window_.size());
  char line[512];
  std::snprintf(line, sizeof(line),
                "%" PRIu64 ",%" PRIu64 ",%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n", at_steps,
                sac_.updates, curriculum_.radius, rolling_success(), mean_return,
                last_diag_.critic_loss, last_diag_.policy_loss, double(sac_.alpha()),
                last_diag_.mean_q);
  (*metrics_) << line;
  metrics_->flush();
}

void Trainer::resume_from(const std::string& checkpoint_path) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  if (!(ck.spec == sac_.spec))
    throw ValidationError("checkpoint network spec does not match the run config");
  // Move the restored parameter/optimizer state in; replay refills afresh.
  sac_ = std::move(ck.state);
  if (ck.has_trainer) {
    env_steps_ = ck.trainer.env_steps;
    curriculum_ = ck.trainer.curriculum;
    auto restore = [&](const char* key, Rng& rng) {
      auto it = ck.trainer.rng_states.find(key);
      if (it != ck.trainer.rng_states.end()) rng.deserialize(it->second);
    };
    restore("policy", policy_rng_);
    restore("sample", sample_rng_);
    restore("her", her_rng_);
    restore("update", update_rng_);
    for (size_t i = 0; i < collectors_.size(); ++i)
      restore(("collector" + std::to_string(i)).c_str(), collectors_[i].rng);
  }
}

TrainResult Trainer::run() {
#if defined(__GLIBC__)
  // The update loop churns multi-megabyte activation buffers; keeping them
  // on the heap instead of mmap avoids constant page-fault traffic.
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, -1);
#endif
  fs::create_directories(settings_.out_dir);
  const std::string metrics_path = settings_.out_dir + "/metrics.csv";
  const std::string ckpt_path = settings_.out_dir + "/checkpoint_latest.navc";
  std::ofstream metrics(metrics_path);
  metrics << "env_steps,updates,radius,success_rate,mean_return,critic_loss,policy_loss,alpha,"
             "mean_q\n";
  metrics_ = &metrics;

  TrainResult result;
  result.metrics_path = metrics_path;
  result.checkpoint_path = ckpt_path;

  const int M = int(collectors_.size());
  const int A = sac_.spec.action_dim;
  for (auto& col : collectors_) reset_collector(col);

  ObsBatch<float> obs_batch;
  obs_batch.resize(sac_.spec, M);
  MatX<float> h(std::max(sac_.spec.lstm_hidden, 1), M), c(h.rows(), M);

  uint64_t next_metrics = settings_.metrics_interval;
  uint64_t next_ckpt = settings_.checkpoint_interval;
  auto save_persist = [&]() {
    TrainerPersist persist;
    persist.env_steps = env_steps_;
    persist.curriculum = curriculum_;
    persist.best_window_success = rolling_success();
    persist.rng_states["policy"] = policy_rng_.serialize();
    persist.rng_states["sample"] = sample_rng_.serialize();
    persist.rng_states["her"] = her_rng_.serialize();
    persist.rng_states["update"] = update_rng_.serialize();
    for (size_t i = 0; i < collectors_.size(); ++i)
      persist.rng_states["collector" + std::to_string(i)] = collectors_[i].rng.serialize();
    save_checkpoint(ckpt_path, sac_, sac_cfg_, &persist);
  };

  const int window_len = sac_cfg_.burn_in + sac_cfg_.train_len;
  bool stop = false;
  while (env_steps_ < settings_.budget && !stop) {
    // Batched action selection across collectors.
    for (int i = 0; i < M; ++i) {
      const auto& snap = collectors_[i].seq.snapshots.back();
      fill_observation(snap, collectors_[i].episode.goal, map_, obs_cfg_,
                       {obs_batch.occ.col(i).data(), size_t(obs_batch.occ.rows())},
                       {obs_batch.depth.col(i).data(), size_t(obs_batch.depth.rows())},
                       {obs_batch.scalars.col(i).data(), size_t(obs_batch.scalars.rows())},
                       {obs_batch.abs.col(i).data(), size_t(obs_batch.abs.rows())});
      h.col(i) = collectors_[i].h.col(0);
      c.col(i) = collectors_[i].c.col(0);
    }
    PolicySampleOut acts =
        select_action(sac_.nets.trunk, sac_.nets.pi, obs_batch, h, c, ActionMode::kSample,
                      policy_rng_);
    for (int i = 0; i < M; ++i) {
      collectors_[i].h.col(0) = h.col(i);
      collectors_[i].c.col(0) = c.col(i);
    }

    for (int i = 0; i < M && env_steps_ < settings_.budget && !stop; ++i) {
      Collector& col = collectors_[i];
      Action a;
      if (env_steps_ < sac_cfg_.warmup_steps) {
        a.jump = policy_rng_.uniform(-1, 1);
        a.forward = policy_rng_.uniform(-1, 1);
        a.strafe = policy_rng_.uniform(-1, 1);
        a.rotate = policy_rng_.uniform(-1, 1);
      } else {
        a.jump = acts.actions(0, i);
        a.forward = acts.actions(1, i);
        a.strafe = acts.actions(2, i);
        a.rotate = acts.actions(3, i);
      }
      StepOutcome so = step(col.agent, col.episode, a, sim_cfg_, map_);
      env_steps_ += 1;
      col.ep_return += so.reward;
      col.seq.actions.push_back(a);
      col.seq.rewards.push_back(float(so.reward));
      col.seq.terminal.push_back(so.done == EpisodeResult::kSuccess ? 1 : 0);
      col.seq.snapshots.push_back(make_snapshot(col.agent, grid_, map_, obs_cfg_));

      if (so.done != EpisodeResult::kRunning) {
        bool success = so.done == EpisodeResult::kSuccess;
        finish_episode(col, success);
        if (settings_.stop_at_target && curriculum_.radius >= settings_.radius_max &&
            int(outcome_window_.size()) >= settings_.curriculum_window &&
            rolling_success() >= settings_.target_success) {
          result.reached_target = true;
          result.steps_to_target = env_steps_;
          stop = true;
        }
        reset_collector(col);
      }

      // Update cadence: one update per train_every steps collected after the
      // replay becomes usable (or K updates per step in the inverse reading).
      if (env_steps_ >= sac_cfg_.warmup_steps &&
          replay_.total_steps() >= std::max<uint64_t>(sac_cfg_.min_replay_steps, 1) &&
          replay_.window_count(window_len) > 0) {
        if (!train_base_steps_) train_base_steps_ = env_steps_;
        uint64_t trainable = env_steps_ - *train_base_steps_;
        uint64_t target_updates =
            sac_cfg_.updates_per_env_step > 0
                ? trainable * uint64_t(sac_cfg_.updates_per_env_step)
                : trainable / uint64_t(sac_cfg_.train_every);
        while (sac_.updates < target_updates) {
          auto windows = replay_.sample_batch(sac_cfg_.batch, sac_cfg_.burn_in,
                                              sac_cfg_.train_len, sample_rng_);
          WindowBatch wb = assemble_windows(windows, sac_cfg_.burn_in, sac_cfg_.train_len, A,
                                            map_, obs_cfg_);
          last_diag_ = sac_update(sac_, wb, sac_cfg_, update_rng_);
        }
      }

      while (next_metrics <= env_steps_) {
        write_metrics_row(next_metrics);
        next_metrics += settings_.metrics_interval;
      }
      if (env_steps_ >= next_ckpt) {
        save_persist();
        next_ckpt += settings_.checkpoint_interval;
      }
    }
  }

  save_persist();
  result.env_steps = env_steps_;
  result.updates = sac_.updates;
  result.final_success = rolling_success();
  result.final_radius = curriculum_.radius;
  metrics_ = nullptr;
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

EvalResult evaluate_policy(const MapDef& map, const VoxelGrid& grid, const SimConfig& sim_cfg,
                           const ObsConfig& obs_cfg, const Trunk<float>& trunk,
                           const PolicyHead<float>& pi, double radius, int episodes,
                           uint64_t seed, const EvalDumpOptions* dump) {
  EvalResult out;
  Rng rng = Rng::seeded(seed).fork(0xe7a1);
  Rng noise_rng = Rng::seeded(seed).fork(0xe7a2);  // unused in mean mode, kept for parity
  CurriculumState cur = make_curriculum(radius, 0.0, std::max(radius, 1e-9));

  std::ofstream traj, obsdump;
  if (dump && !dump->trajectory_jsonl.empty()) traj.open(dump->trajectory_jsonl);
  if (dump && !dump->observations_f32.empty())
    obsdump.open(dump->observations_f32, std::ios::binary);

  ObsBatch<float> ob;
  NetworkSpec spec = trunk.spec;
  ob.resize(spec, 1);
  for (int e = 0; e < episodes; ++e) {
    ResetResult rr = reset(map, cur, sim_cfg, rng);
    MatX<float> h = trunk.zero_hidden(1), c = trunk.zero_hidden(1);
    double ep_return = 0.0;
    int steps = 0;
    bool success = false;
    while (rr.episode.done == EpisodeResult::kRunning) {
      Observation obs = build_observation(rr.agent, rr.episode.goal, grid, map, obs_cfg);
      ob.occ.col(0) = obs.occupancy;
      ob.depth.col(0) = obs.depth;
      ob.scalars.col(0) = obs.scalars;
      ob.abs.col(0) = obs.abs_positions;
      if (obsdump.is_open()) write_observation_f32(obs, obsdump);
      PolicySampleOut ps = select_action(trunk, pi, ob, h, c, ActionMode::kMean, noise_rng);
      Action a{ps.actions(0, 0), ps.actions(1, 0), ps.actions(2, 0), ps.actions(3, 0)};
      StepOutcome so = step(rr.agent, rr.episode, a, sim_cfg, map);
      ep_return += so.reward;
      steps += 1;
      if (traj.is_open()) {
        nlohmann::json row{{"t", steps},
                           {"pos", {rr.agent.position.x(), rr.agent.position.y(),
                                    rr.agent.position.z()}},
                           {"vel", {rr.agent.velocity.x(), rr.agent.velocity.y(),
                                    rr.agent.velocity.z()}},
                           {"yaw", rr.agent.yaw},
                           {"action", {a.jump, a.forward, a.strafe, a.rotate}},
                           {"reward", so.reward},
                           {"D_t", so.dist},
                           {"done", so.done == EpisodeResult::kRunning
                                        ? "running"
                                        : (so.done == EpisodeResult::kSuccess ? "success"
                                                                              : "timeout")}};
        traj << row.dump() << "\n";
      }
      if (so.done == EpisodeResult::kSuccess) success = true;
    }
    out.episodes.push_back({e, radius, steps, success, ep_return});
    out.success_rate += success ? 1.0 : 0.0;
    out.mean_steps += steps;
    out.mean_return += ep_return;
  }
  if (episodes > 0) {
    out.success_rate /= episodes;
    out.mean_steps /= episodes;
    out.mean_return /= episodes;
  }
  return out;
}

}  // namespace navgym
