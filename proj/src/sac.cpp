#include "navgym/sac.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "navgym/error.hpp"

namespace navgym {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)

inline float softplus(float x) {
  return std::max(x, 0.0f) + std::log1p(std::exp(-std::abs(x)));
}

// log(1 - tanh(u)^2), evaluated stably.
inline float log1m_tanh_sq(float u) {
  return 2.0f * (float(M_LN2) - u - softplus(-2.0f * u));
}

inline float sigmoidf(float x) { return 1.0f / (1.0f + std::exp(-x)); }

void check_finite(double v, const char* term) {
  if (!std::isfinite(v)) throw NonFiniteLossError(std::string("non-finite ") + term);
}

}  // namespace

void SacState::init(const NetworkSpec& sp, const SacConfig& cfg, Rng& rng) {
  spec = sp;
  nets.init(sp, rng);
  log_alpha = float(std::log(cfg.init_alpha));
  log_alpha_grad = 0.0f;
  adam_critic.lr = cfg.lr;
  adam_policy.lr = cfg.lr;
  adam_alpha.lr = cfg.lr;
  adam_critic.attach(nets.critic_params());
  adam_policy.attach(nets.policy_params());
  adam_alpha.attach(alpha_param());
  updates = 0;
}

ParamList<float> SacState::alpha_param() {
  ParamList<float> out;
  out.push_back({"log_alpha", &log_alpha, &log_alpha_grad, 1});
  return out;
}

PolicySampleOut sample_policy(const PolicyHead<float>& pi, const MatX<float>& emb,
                              ActionMode mode, Rng& rng) {
  MatX<float> mean, logstd;
  pi.forward(emb, mean, logstd, nullptr);
  const int A = int(mean.rows()), N = int(mean.cols());
  PolicySampleOut out;
  out.actions.resize(A, N);
  out.log_prob = VecX<float>::Zero(N);
  if (mode == ActionMode::kMean) {
    out.actions = mean.array().tanh().matrix();
    return out;
  }
  for (int j = 0; j < N; ++j) {
    float lp = 0.0f;
    for (int d = 0; d < A; ++d) {
      float n = float(rng.normal());
      float ls = logstd(d, j);
      float u = mean(d, j) + std::exp(ls) * n;
      out.actions(d, j) = std::tanh(u);
      lp += -0.5f * n * n - ls - float(kHalfLog2Pi) - log1m_tanh_sq(u);
    }
    out.log_prob[j] = lp;
  }
  return out;
}

PolicySampleOut select_action(const Trunk<float>& trunk, const PolicyHead<float>& pi,
                              const ObsBatch<float>& obs, MatX<float>& h, MatX<float>& c,
                              ActionMode mode, Rng& rng) {
  VecX<float> no_mask;
  MatX<float> emb = trunk.forward(obs, obs.cols(), 1, no_mask, h, c, nullptr);
  return sample_policy(pi, emb, mode, rng);
}

void burn_in_hidden(const Trunk<float>& trunk, const ObsBatch<float>& prefix, int batch,
                    int steps, const VecX<float>& mask, MatX<float>& h, MatX<float>& c) {
  h = trunk.zero_hidden(batch);
  c = trunk.zero_hidden(batch);
  if (steps == 0 || trunk.spec.lstm_hidden == 0) return;
  trunk.forward(prefix, batch, steps, mask, h, c, nullptr);
}

WindowBatch assemble_windows(const std::vector<WindowRef>& windows, int burn_in, int train_len,
                             int action_dim, const MapDef& map, const ObsConfig& obs_cfg) {
  WindowBatch wb;
  wb.B = int(windows.size());
  wb.burn_in = burn_in;
  wb.train_len = train_len;
  const int B = wb.B;
  const int L = wb.obs_steps();
  const int occ_n = obs_cfg.occ_count();
  const int dep_n = obs_cfg.depth_count();

  wb.obs.occ.setZero(occ_n, Eigen::Index(L) * B);
  wb.obs.depth.setZero(dep_n, Eigen::Index(L) * B);
  wb.obs.scalars.setZero(ObsConfig::kScalarCount, Eigen::Index(L) * B);
  wb.obs.abs.setZero(ObsConfig::kAbsCount, Eigen::Index(L) * B);
  wb.obs_mask = VecX<float>::Zero(Eigen::Index(L) * B);
  wb.actions = MatX<float>::Zero(action_dim, Eigen::Index(train_len) * B);
  wb.rewards = VecX<float>::Zero(Eigen::Index(train_len) * B);
  wb.not_done = VecX<float>::Zero(Eigen::Index(train_len) * B);
  wb.step_valid = VecX<float>::Zero(Eigen::Index(train_len) * B);

  for (int b = 0; b < B; ++b) {
    const WindowRef& w = windows[b];
    const EpisodeSequence& ep = *w.episode;
    for (int tau = 0; tau < L; ++tau) {
      if (tau < w.pad) continue;
      int snap = w.offset + tau - w.pad;
      if (snap > ep.length()) continue;  // beyond the stored final observation
      Eigen::Index col = Eigen::Index(tau) * B + b;
      fill_observation(ep.snapshots[snap], ep.goal, map, obs_cfg,
                       {wb.obs.occ.col(col).data(), size_t(occ_n)},
                       {wb.obs.depth.col(col).data(), size_t(dep_n)},
                       {wb.obs.scalars.col(col).data(), size_t(ObsConfig::kScalarCount)},
                       {wb.obs.abs.col(col).data(), size_t(ObsConfig::kAbsCount)});
      wb.obs_mask[col] = 1.0f;
    }
    for (int s = 0; s < train_len; ++s) {
      int tau = burn_in + s;
      if (tau < w.pad) continue;
      int k = w.offset + tau - w.pad;
      if (k >= ep.length()) continue;
      Eigen::Index col = Eigen::Index(s) * B + b;
      wb.actions(0, col) = float(ep.actions[k].jump);
      wb.actions(1, col) = float(ep.actions[k].forward);
      wb.actions(2, col) = float(ep.actions[k].strafe);
      wb.actions(3, col) = float(ep.actions[k].rotate);
      wb.rewards[col] = ep.rewards[k];
      wb.not_done[col] = ep.terminal[k] ? 0.0f : 1.0f;
      wb.step_valid[col] = 1.0f;
    }
  }
  return wb;
}

SacDiagnostics sac_update(SacState& state, const WindowBatch& wb, const SacConfig& cfg,
                          Rng& rng) {
  const NetworkSpec& spec = state.spec;
  const int B = wb.B;
  const int T = wb.train_len;
  const int A = spec.action_dim;
  const int E = spec.embed_dim();
  const Eigen::Index NS = Eigen::Index(T) * B;
  const float alpha = state.alpha();

  // Split the window into the burn-in prefix and the cached training slice
  // (slice carries one extra step for bootstrap observations).
  auto take_steps = [&](const ObsBatch<float>& src, int from_step, int steps) {
    ObsBatch<float> out;
    out.occ = src.occ.middleCols(Eigen::Index(from_step) * B, Eigen::Index(steps) * B);
    out.depth = src.depth.middleCols(Eigen::Index(from_step) * B, Eigen::Index(steps) * B);
    out.scalars = src.scalars.middleCols(Eigen::Index(from_step) * B, Eigen::Index(steps) * B);
    out.abs = src.abs.middleCols(Eigen::Index(from_step) * B, Eigen::Index(steps) * B);
    return out;
  };
  ObsBatch<float> prefix = take_steps(wb.obs, 0, wb.burn_in);
  ObsBatch<float> rest = take_steps(wb.obs, wb.burn_in, T + 1);
  VecX<float> mask_prefix = wb.obs_mask.head(Eigen::Index(wb.burn_in) * B);
  VecX<float> mask_rest = wb.obs_mask.tail(Eigen::Index(T + 1) * B);

  MatX<float> h, c, th, tc;
  burn_in_hidden(state.nets.trunk, prefix, B, wb.burn_in, mask_prefix, h, c);
  burn_in_hidden(state.nets.tgt_trunk, prefix, B, wb.burn_in, mask_prefix, th, tc);

  Trunk<float>::Cache cache;
  MatX<float> emb = state.nets.trunk.forward(rest, B, T + 1, mask_rest, h, c, &cache);
  MatX<float> temb = state.nets.tgt_trunk.forward(rest, B, T + 1, mask_rest, th, tc, nullptr);

  const float nvalid = std::max(wb.step_valid.sum(), 1.0f);
  SacDiagnostics diag;
  diag.alpha = alpha;

  // --- Bellman targets ---
  MatX<float> emb_next = emb.middleCols(B, NS);
  MatX<float> temb_next = temb.middleCols(B, NS);
  PolicySampleOut next = sample_policy(state.nets.pi, emb_next, ActionMode::kSample, rng);
  MatX<float> tq1v = state.nets.tq1.forward(temb_next, next.actions, nullptr);
  MatX<float> tq2v = state.nets.tq2.forward(temb_next, next.actions, nullptr);
  VecX<float> qnext(NS);
  for (Eigen::Index j = 0; j < NS; ++j)
    qnext[j] = cfg.twin_q ? std::min(tq1v(0, j), tq2v(0, j)) : tq1v(0, j);
  VecX<float> y = wb.rewards.array() +
                  float(cfg.gamma) * wb.not_done.array() *
                      (qnext.array() - alpha * next.log_prob.array());

  // --- Critic regression ---
  ParamList<float> critic_params = state.nets.critic_params();
  zero_grads(critic_params);
  MatX<float> emb_t = emb.leftCols(NS);
  QHead<float>::Cache qc1, qc2;
  MatX<float> q1v = state.nets.q1.forward(emb_t, wb.actions, &qc1);
  MatX<float> q2v = state.nets.q2.forward(emb_t, wb.actions, &qc2);
  VecX<float> d1 = (q1v.transpose().col(0) - y).cwiseProduct(wb.step_valid);
  VecX<float> d2 = (q2v.transpose().col(0) - y).cwiseProduct(wb.step_valid);
  if (!cfg.twin_q) d2.setZero();
  diag.critic_loss = (d1.squaredNorm() + d2.squaredNorm()) / nvalid;
  diag.mean_q = double((q1v.transpose().col(0).cwiseProduct(wb.step_valid)).sum() / nvalid);
  check_finite(diag.critic_loss, "critic loss");

  MatX<float> dq1 = (2.0f / nvalid) * d1.transpose();
  MatX<float> demb1, demb2, dact_unused;
  state.nets.q1.backward(qc1, dq1, demb1, dact_unused, E);
  MatX<float> demb_total = MatX<float>::Zero(E, Eigen::Index(T + 1) * B);
  demb_total.leftCols(NS) = demb1;
  if (cfg.twin_q) {
    MatX<float> dq2 = (2.0f / nvalid) * d2.transpose();
    state.nets.q2.backward(qc2, dq2, demb2, dact_unused, E);
    demb_total.leftCols(NS) += demb2;
  }
  state.nets.trunk.backward(cache, demb_total);
  state.adam_critic.step(critic_params);

  // --- Policy update (embedding detached; only the head trains) ---
  ParamList<float> policy_params = state.nets.policy_params();
  zero_grads(policy_params);
  PolicyHead<float>::Cache pc;
  MatX<float> mean, logstd;
  state.nets.pi.forward(emb_t, mean, logstd, &pc);
  MatX<float> noise(A, NS);
  for (Eigen::Index j = 0; j < NS; ++j)
    for (int d = 0; d < A; ++d) noise(d, j) = float(rng.normal());
  ArrX<float> stdev = logstd.array().exp();
  ArrX<float> u = mean.array() + stdev * noise.array();
  ArrX<float> act = u.tanh();
  VecX<float> logp(NS);
  for (Eigen::Index j = 0; j < NS; ++j) {
    float lp = 0.0f;
    for (int d = 0; d < A; ++d)
      lp += -0.5f * noise(d, j) * noise(d, j) - logstd(d, j) - float(kHalfLog2Pi) -
            log1m_tanh_sq(u(d, j));
    logp[j] = lp;
  }
  QHead<float>::Cache qpc1, qpc2;
  MatX<float> actm = act.matrix();
  MatX<float> q1p = state.nets.q1.forward(emb_t, actm, &qpc1);
  MatX<float> q2p = cfg.twin_q ? state.nets.q2.forward(emb_t, actm, &qpc2) : q1p;
  VecX<float> qmin(NS);
  VecX<float> pick1(NS);
  for (Eigen::Index j = 0; j < NS; ++j) {
    bool first = !cfg.twin_q || q1p(0, j) <= q2p(0, j);
    pick1[j] = first ? 1.0f : 0.0f;
    qmin[j] = first ? q1p(0, j) : q2p(0, j);
  }
  diag.policy_loss =
      double(((alpha * logp.array() - qmin.array()) * wb.step_valid.array()).sum() / nvalid);
  check_finite(diag.policy_loss, "policy loss");

  // d(policy loss)/d(action) through the selected critic.
  MatX<float> dact = MatX<float>::Zero(A, NS);
  {
    MatX<float> dq = (-(wb.step_valid.cwiseProduct(pick1)) / nvalid).transpose();
    MatX<float> de, da;
    state.nets.q1.backward(qpc1, dq, de, da, E);  // grads land in q1 buffers; zeroed next update
    dact += da;
    if (cfg.twin_q) {
      MatX<float> dq2m =
          (-(wb.step_valid.cwiseProduct((VecX<float>::Ones(NS) - pick1))) / nvalid).transpose();
      state.nets.q2.backward(qpc2, dq2m, de, da, E);
      dact += da;
    }
  }
  // Expression-graph backward of logp and tanh squashing.
  ArrX<float> gpi = (float(alpha) / nvalid) * wb.step_valid.transpose().array();  // 1 x NS
  ArrX<float> dmu(A, NS), dstd(A, NS);
  for (Eigen::Index j = 0; j < NS; ++j) {
    float g = gpi(0, j);
    for (int d = 0; d < A; ++d) {
      float uu = u(d, j);
      float squash_du = 2.0f - 4.0f * sigmoidf(-2.0f * uu);
      float du = dact(d, j) * (1.0f - act(d, j) * act(d, j)) + g * squash_du;
      float dw = -g * noise(d, j);
      float sd = stdev(d, j);
      du += dw / sd;
      dmu(d, j) = -dw / sd + du;
      dstd(d, j) = -dw * noise(d, j) / sd + du * noise(d, j);
    }
  }
  MatX<float> dlogstd = (dstd * stdev).matrix();
  dlogstd.array().rowwise() -= gpi.row(0);
  state.nets.pi.backward(pc, dmu.matrix(), dlogstd);
  state.adam_policy.step(policy_params);

  // --- Temperature ---
  float ent_err = ((logp.array() + float(cfg.target_entropy)) * wb.step_valid.array()).sum() /
                  nvalid;
  diag.alpha_loss = double(-state.log_alpha * ent_err);
  check_finite(diag.alpha_loss, "alpha loss");
  state.log_alpha_grad = -ent_err;
  state.adam_alpha.step(state.alpha_param());

  state.nets.polyak(cfg.tau);
  state.updates += 1;
  return diag;
}

std::vector<EpisodeSequence> relabel_her(const EpisodeSequence& episode,
                                         const std::string& strategy, Rng& rng,
                                         double goal_epsilon, double step_penalty, int k) {
  const int n = episode.length();
  std::vector<EpisodeSequence> out;
  if (n < 1) return out;
  const int copies = strategy == "final" ? 1 : k;
  for (int ci = 0; ci < copies; ++ci) {
    Vec3 goal = strategy == "final"
                    ? episode.snapshots[n].position
                    : episode.snapshots[1 + rng.uniform_index(uint64_t(n))].position;
    EpisodeSequence r;
    r.goal = goal;
    r.radius = episode.radius;
    r.seed = episode.seed;
    double best = (episode.snapshots[0].position - goal).norm();
    r.snapshots.push_back(episode.snapshots[0]);
    for (int t = 0; t < n; ++t) {
      double d = (episode.snapshots[t + 1].position - goal).norm();
      float reward = float(compute_reward(d, best, step_penalty, goal_epsilon));
      best = std::min(best, d);
      r.actions.push_back(episode.actions[t]);
      r.rewards.push_back(reward);
      r.snapshots.push_back(episode.snapshots[t + 1]);
      if (d <= goal_epsilon) {
        r.terminal.push_back(1);
        break;
      }
      r.terminal.push_back(0);
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json sac_cfg_to_json(const SacConfig& c) {
  return json{{"gamma", c.gamma},
              {"tau", c.tau},
              {"lr", c.lr},
              {"init_alpha", c.init_alpha},
              {"target_entropy", c.target_entropy},
              {"batch", c.batch},
              {"burn_in", c.burn_in},
              {"train_len", c.train_len},
              {"replay_capacity", c.replay_capacity},
              {"train_every", c.train_every},
              {"updates_per_env_step", c.updates_per_env_step},
              {"warmup_steps", c.warmup_steps},
              {"min_replay_steps", c.min_replay_steps},
              {"twin_q", c.twin_q},
              {"her", c.her},
              {"her_strategy", c.her_strategy},
              {"her_k", c.her_k}};
}

SacConfig sac_cfg_from_json(const json& j) {
  SacConfig c;
  j.at("gamma").get_to(c.gamma);
  j.at("tau").get_to(c.tau);
  j.at("lr").get_to(c.lr);
  j.at("init_alpha").get_to(c.init_alpha);
  j.at("target_entropy").get_to(c.target_entropy);
  j.at("batch").get_to(c.batch);
  j.at("burn_in").get_to(c.burn_in);
  j.at("train_len").get_to(c.train_len);
  j.at("replay_capacity").get_to(c.replay_capacity);
  j.at("train_every").get_to(c.train_every);
  j.at("updates_per_env_step").get_to(c.updates_per_env_step);
  j.at("warmup_steps").get_to(c.warmup_steps);
  j.at("min_replay_steps").get_to(c.min_replay_steps);
  j.at("twin_q").get_to(c.twin_q);
  j.at("her").get_to(c.her);
  j.at("her_strategy").get_to(c.her_strategy);
  j.at("her_k").get_to(c.her_k);
  return c;
}

json curriculum_to_json(const CurriculumState& c) {
  return json{{"radius", c.radius},           {"radius_step", c.radius_step},
              {"radius_max", c.radius_max},   {"window_size", c.window_size},
              {"threshold", c.threshold},     {"window", c.window},
              {"window_pos", c.window_pos},   {"window_count", c.window_count}};
}

CurriculumState curriculum_from_json(const json& j) {
  CurriculumState c;
  j.at("radius").get_to(c.radius);
  j.at("radius_step").get_to(c.radius_step);
  j.at("radius_max").get_to(c.radius_max);
  j.at("window_size").get_to(c.window_size);
  j.at("threshold").get_to(c.threshold);
  j.at("window").get_to(c.window);
  j.at("window_pos").get_to(c.window_pos);
  j.at("window_count").get_to(c.window_count);
  return c;
}

void write_blob(std::ostream& out, const float* data, Eigen::Index n) {
  out.write(reinterpret_cast<const char*>(data), std::streamsize(n * sizeof(float)));
}

void read_blob(std::istream& in, float* data, Eigen::Index n) {
  in.read(reinterpret_cast<char*>(data), std::streamsize(n * sizeof(float)));
}

void write_adam(std::ostream& out, const Adam<float>& a) {
  for (const auto& m : a.m) write_blob(out, m.data(), m.size());
  for (const auto& v : a.v) write_blob(out, v.data(), v.size());
}

void read_adam(std::istream& in, Adam<float>& a) {
  for (auto& m : a.m) read_blob(in, m.data(), m.size());
  for (auto& v : a.v) read_blob(in, v.data(), v.size());
}

}  // namespace

void save_checkpoint(const std::string& path, SacState& state, const SacConfig& cfg,
                     const TrainerPersist* trainer) {
  ParamList<float> all = state.nets.all_params();
  json header;
  header["spec"] = state.spec;
  header["sac"] = sac_cfg_to_json(cfg);
  header["log_alpha"] = state.log_alpha;
  header["updates"] = state.updates;
  header["adam_t"] = json{{"critic", state.adam_critic.t},
                          {"policy", state.adam_policy.t},
                          {"alpha", state.adam_alpha.t}};
  json tensors = json::array();
  for (const auto& p : all) tensors.push_back({{"name", p.name}, {"size", p.size}});
  header["tensors"] = tensors;
  if (trainer) {
    header["trainer"] = json{{"env_steps", trainer->env_steps},
                             {"curriculum", curriculum_to_json(trainer->curriculum)},
                             {"rng_states", trainer->rng_states},
                             {"best_window_success", trainer->best_window_success}};
  }
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ValidationError("cannot write checkpoint: " + path);
    out.write("NAVC", 4);
    uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), 4);
    std::string hs = header.dump();
    uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(hs.data(), std::streamsize(hs.size()));
    for (const auto& p : all) write_blob(out, p.value, p.size);
    write_adam(out, state.adam_critic);
    write_adam(out, state.adam_policy);
    write_adam(out, state.adam_alpha);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "NAVC", 4) != 0)
    throw ParseError("bad checkpoint magic in " + path);
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != 1) throw ParseError("unsupported checkpoint version");
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 8);
  std::string hs(hlen, '\0');
  in.read(hs.data(), std::streamsize(hlen));
  json header = json::parse(hs);

  Checkpoint ck;
  ck.spec = header.at("spec").get<NetworkSpec>();
  ck.sac_cfg = sac_cfg_from_json(header.at("sac"));
  Rng init_rng = Rng::seeded(0);
  ck.state.init(ck.spec, ck.sac_cfg, init_rng);
  ck.state.log_alpha = header.at("log_alpha").get<float>();
  ck.state.updates = header.at("updates").get<uint64_t>();
  ck.state.adam_critic.t = header.at("adam_t").at("critic").get<int64_t>();
  ck.state.adam_policy.t = header.at("adam_t").at("policy").get<int64_t>();
  ck.state.adam_alpha.t = header.at("adam_t").at("alpha").get<int64_t>();

  ParamList<float> all = ck.state.nets.all_params();
  const auto& tensors = header.at("tensors");
  if (tensors.size() != all.size()) throw ParseError("checkpoint tensor table mismatch");
  for (size_t i = 0; i < all.size(); ++i) {
    if (tensors[i].at("name").get<std::string>() != all[i].name ||
        tensors[i].at("size").get<Eigen::Index>() != all[i].size)
      throw ParseError("checkpoint tensor mismatch at " + all[i].name);
    read_blob(in, all[i].value, all[i].size);
  }
  read_adam(in, ck.state.adam_critic);
  read_adam(in, ck.state.adam_policy);
  read_adam(in, ck.state.adam_alpha);
  if (!in) throw ParseError("truncated checkpoint: " + path);

  if (header.contains("trainer")) {
    ck.has_trainer = true;
    const auto& t = header.at("trainer");
    ck.trainer.env_steps = t.at("env_steps").get<uint64_t>();
    ck.trainer.curriculum = curriculum_from_json(t.at("curriculum"));
    t.at("rng_states").get_to(ck.trainer.rng_states);
    t.at("best_window_success").get_to(ck.trainer.best_window_success);
  }
  return ck;
}

}  // namespace navgym
