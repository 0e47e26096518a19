#pragma once

#include <array>
#include <nlohmann/json.hpp>

#include "navgym/nn.hpp"

namespace navgym {

struct ConvSpec {
  int channels = 0;
  int kernel = 3;
  int stride = 2;
  int pad = 0;

  bool operator==(const ConvSpec&) const = default;
};

// Shape description of the full network: per-modality feature extractors
// (3D conv for occupancy, 2D conv for depth, linear for absolute positions),
// shared linear trunk, optional LSTM, policy and twin-Q heads.
struct NetworkSpec {
  std::array<int, 3> occ_dims{16, 8, 16};
  std::vector<ConvSpec> conv3d{{8, 3, 2, 0}, {16, 3, 2, 0}};
  std::array<int, 2> depth_dims{12, 4};
  std::vector<ConvSpec> conv2d{{8, 3, 2, 1}, {16, 3, 2, 1}};
  int abs_dim = 6;
  int abs_hidden = 32;
  int scalar_dim = 13;
  std::vector<int> trunk{128, 128};
  int lstm_hidden = 128;  // 0 disables the LSTM (ablation)
  int action_dim = 4;
  int policy_hidden = 64;
  int q_hidden = 64;

  // Derived sizes; throws ValidationError when shapes do not compose.
  int conv_feature_count(bool three_d) const;
  int feature_dim() const;
  int embed_dim() const;
  void validate() const;

  bool operator==(const NetworkSpec&) const = default;
};

void to_json(nlohmann::json& j, const NetworkSpec& s);
void from_json(const nlohmann::json& j, NetworkSpec& s);

// One batch of observations, N columns (N = batch * timesteps for windows).
template <class S>
struct ObsBatch {
  MatX<S> occ, depth, scalars, abs;

  int cols() const { return int(scalars.cols()); }
  void resize(const NetworkSpec& spec, int n) {
    occ.resize(spec.occ_dims[0] * spec.occ_dims[1] * spec.occ_dims[2], n);
    depth.resize(spec.depth_dims[0] * spec.depth_dims[1], n);
    scalars.resize(spec.scalar_dim, n);
    abs.resize(spec.abs_dim, n);
  }
};

// ---------------------------------------------------------------------------
// Shared trunk: extractors -> concat -> linear stack -> LSTM -> embedding.
// Columns are ordered timestep-major: column index = t * B + b.
// ---------------------------------------------------------------------------

template <class S>
struct Trunk {
  NetworkSpec spec;
  std::vector<ConvNd<S>> c3, c2;
  Linear<S> abs_fc;
  std::vector<Linear<S>> fcs;
  Lstm<S> lstm;

  struct Cache {
    int B = 0, T = 0;
    std::vector<MatX<S>> c3_col, c3_pre, c3_act;
    std::vector<MatX<S>> c2_col, c2_pre, c2_act;
    MatX<S> abs_in, abs_pre;
    std::vector<MatX<S>> fc_in, fc_pre;
    typename Lstm<S>::SeqCache lstm_seq;
    VecX<S> mask;  // per column; empty = all valid
  };

  Trunk() = default;
  Trunk(const NetworkSpec& sp, Rng& rng) { init(sp, rng); }

  void init(const NetworkSpec& sp, Rng& rng) {
    sp.validate();
    spec = sp;
    c3.clear();
    c2.clear();
    fcs.clear();
    int cin = 1;
    std::vector<int> shape3{spec.occ_dims[0], spec.occ_dims[1], spec.occ_dims[2]};
    for (const auto& cs : spec.conv3d) {
      ConvNd<S> layer;
      layer.init(cin, cs.channels, cs.kernel, cs.stride, cs.pad, shape3, rng);
      shape3 = layer.out_shape;
      cin = cs.channels;
      c3.push_back(std::move(layer));
    }
    cin = 1;
    std::vector<int> shape2{spec.depth_dims[0], spec.depth_dims[1]};
    for (const auto& cs : spec.conv2d) {
      ConvNd<S> layer;
      layer.init(cin, cs.channels, cs.kernel, cs.stride, cs.pad, shape2, rng);
      shape2 = layer.out_shape;
      cin = cs.channels;
      c2.push_back(std::move(layer));
    }
    abs_fc.init(spec.abs_dim, spec.abs_hidden, rng);
    int width = spec.feature_dim();
    for (int w : spec.trunk) {
      Linear<S> fc;
      fc.init(width, w, rng);
      fcs.push_back(std::move(fc));
      width = w;
    }
    if (spec.lstm_hidden > 0) lstm.init(width, spec.lstm_hidden, rng);
  }

  int embed_dim() const { return spec.embed_dim(); }

  MatX<S> zero_hidden(int batch) const {
    return MatX<S>::Zero(std::max(spec.lstm_hidden, 1), batch);
  }

  // Forward over a window of T steps with B sequences. h/c are (H x B) and
  // advance across the call. Masked columns (mask 0) keep h/c at zero so a
  // front-padded window matches an unpadded one exactly.
  MatX<S> forward(const ObsBatch<S>& in, int B, int T, const VecX<S>& mask, MatX<S>& h,
                  MatX<S>& c, Cache* cache) const {
    const int N = B * T;
    Cache scratch;
    Cache& cc = cache ? *cache : scratch;
    cc.B = B;
    cc.T = T;
    cc.mask = mask;

    MatX<S> x = in.occ;
    cc.c3_col.resize(c3.size());
    cc.c3_pre.resize(c3.size());
    cc.c3_act.resize(c3.size());
    for (size_t li = 0; li < c3.size(); ++li) {
      cc.c3_pre[li] = c3[li].forward(x, cc.c3_col[li]);
      cc.c3_act[li] = relu(cc.c3_pre[li]);
      x = cc.c3_act[li];
    }
    MatX<S> occ_feat = x;

    x = in.depth;
    cc.c2_col.resize(c2.size());
    cc.c2_pre.resize(c2.size());
    cc.c2_act.resize(c2.size());
    for (size_t li = 0; li < c2.size(); ++li) {
      cc.c2_pre[li] = c2[li].forward(x, cc.c2_col[li]);
      cc.c2_act[li] = relu(cc.c2_pre[li]);
      x = cc.c2_act[li];
    }
    MatX<S> depth_feat = x;

    cc.abs_in = in.abs;
    cc.abs_pre = abs_fc.forward(in.abs);
    MatX<S> abs_feat = relu(cc.abs_pre);

    MatX<S> feat(spec.feature_dim(), N);
    feat.topRows(occ_feat.rows()) = occ_feat;
    feat.middleRows(occ_feat.rows(), depth_feat.rows()) = depth_feat;
    feat.middleRows(occ_feat.rows() + depth_feat.rows(), abs_feat.rows()) = abs_feat;
    feat.bottomRows(in.scalars.rows()) = in.scalars;

    cc.fc_in.resize(fcs.size());
    cc.fc_pre.resize(fcs.size());
    x = std::move(feat);
    for (size_t li = 0; li < fcs.size(); ++li) {
      cc.fc_in[li] = std::move(x);
      cc.fc_pre[li] = fcs[li].forward(cc.fc_in[li]);
      x = relu(cc.fc_pre[li]);
    }

    if (spec.lstm_hidden == 0) {
      if (mask.size() > 0) x.array().rowwise() *= mask.transpose().array();
      return x;
    }
    return lstm.forward_seq(x, B, T, mask, h, c, cache ? &cc.lstm_seq : nullptr);
  }

  // Accumulates parameter gradients. demb is (E x N); gradients do not flow
  // into the initial hidden state.
  void backward(Cache& cc, const MatX<S>& demb) {
    MatX<S> dx;  // gradient w.r.t. trunk-linear output
    if (spec.lstm_hidden > 0) {
      dx = lstm.backward_seq(cc.lstm_seq, demb, cc.mask);
    } else {
      dx = demb;
      if (cc.mask.size() > 0) dx.array().rowwise() *= cc.mask.transpose().array();
    }

    for (int li = int(fcs.size()) - 1; li >= 0; --li) {
      dx = relu_backward(cc.fc_pre[li], dx);
      dx = fcs[li].backward(cc.fc_in[li], dx);
    }

    Eigen::Index row = 0;
    Eigen::Index occ_rows = c3.empty() ? spec.occ_dims[0] * spec.occ_dims[1] * spec.occ_dims[2]
                                       : c3.back().out_dim_total();
    MatX<S> d_occ = dx.middleRows(row, occ_rows);
    row += occ_rows;
    Eigen::Index depth_rows = c2.empty() ? spec.depth_dims[0] * spec.depth_dims[1]
                                         : c2.back().out_dim_total();
    MatX<S> d_depth = dx.middleRows(row, depth_rows);
    row += depth_rows;
    MatX<S> d_abs = dx.middleRows(row, spec.abs_hidden);

    for (int li = int(c3.size()) - 1; li >= 0; --li) {
      d_occ = relu_backward(cc.c3_pre[li], d_occ);
      d_occ = c3[li].backward(cc.c3_col[li], d_occ);
    }
    for (int li = int(c2.size()) - 1; li >= 0; --li) {
      d_depth = relu_backward(cc.c2_pre[li], d_depth);
      d_depth = c2[li].backward(cc.c2_col[li], d_depth);
    }
    d_abs = relu_backward(cc.abs_pre, d_abs);
    abs_fc.backward(cc.abs_in, d_abs);
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    for (size_t i = 0; i < c3.size(); ++i) c3[i].collect(prefix + ".c3." + std::to_string(i), out);
    for (size_t i = 0; i < c2.size(); ++i) c2[i].collect(prefix + ".c2." + std::to_string(i), out);
    abs_fc.collect(prefix + ".abs", out);
    for (size_t i = 0; i < fcs.size(); ++i) fcs[i].collect(prefix + ".fc." + std::to_string(i), out);
    if (spec.lstm_hidden > 0) lstm.collect(prefix + ".lstm", out);
  }
};

// ---------------------------------------------------------------------------
// Heads
// ---------------------------------------------------------------------------

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

template <class S>
struct PolicyHead {
  Linear<S> l1, l2;

  struct Cache {
    MatX<S> in, pre1, act1, raw;  // raw: unclamped (mean; logstd) stack
  };

  void init(int embed, int hidden, int action_dim, Rng& rng) {
    l1.init(embed, hidden, rng);
    l2.init(hidden, 2 * action_dim, rng);
    l2.W *= S(0.01);  // start near a centered, unit-ish policy
  }

  // Returns mean (A x N) and clamped logstd (A x N).
  void forward(const MatX<S>& emb, MatX<S>& mean, MatX<S>& logstd, Cache* cache) const {
    Cache scratch;
    Cache& cc = cache ? *cache : scratch;
    cc.in = emb;
    cc.pre1 = l1.forward(emb);
    cc.act1 = relu(cc.pre1);
    cc.raw = l2.forward(cc.act1);
    const int A = int(cc.raw.rows()) / 2;
    mean = cc.raw.topRows(A);
    logstd = cc.raw.bottomRows(A).cwiseMax(S(kLogStdMin)).cwiseMin(S(kLogStdMax));
  }

  // Gradient w.r.t. the embedding; clamped logstd entries pass no gradient.
  MatX<S> backward(Cache& cc, const MatX<S>& dmean, const MatX<S>& dlogstd) {
    const int A = int(cc.raw.rows()) / 2;
    MatX<S> draw(cc.raw.rows(), cc.raw.cols());
    draw.topRows(A) = dmean;
    auto rawls = cc.raw.bottomRows(A).array();
    draw.bottomRows(A) =
        (dlogstd.array() * ((rawls >= S(kLogStdMin)) && (rawls <= S(kLogStdMax))).template cast<S>())
            .matrix();
    MatX<S> d1 = l2.backward(cc.act1, draw);
    d1 = relu_backward(cc.pre1, d1);
    return l1.backward(cc.in, d1);
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    l1.collect(prefix + ".l1", out);
    l2.collect(prefix + ".l2", out);
  }
};

template <class S>
struct QHead {
  Linear<S> l1, l2;

  struct Cache {
    MatX<S> in, pre1, act1;
  };

  void init(int embed, int hidden, int action_dim, Rng& rng) {
    l1.init(embed + action_dim, hidden, rng);
    l2.init(hidden, 1, rng);
  }

  // emb (E x N), act (A x N) -> q (1 x N).
  MatX<S> forward(const MatX<S>& emb, const MatX<S>& act, Cache* cache) const {
    Cache scratch;
    Cache& cc = cache ? *cache : scratch;
    cc.in.resize(emb.rows() + act.rows(), emb.cols());
    cc.in.topRows(emb.rows()) = emb;
    cc.in.bottomRows(act.rows()) = act;
    cc.pre1 = l1.forward(cc.in);
    cc.act1 = relu(cc.pre1);
    return l2.forward(cc.act1);
  }

  // Returns gradients w.r.t. embedding and action.
  void backward(Cache& cc, const MatX<S>& dq, MatX<S>& demb, MatX<S>& dact, int embed_dim) {
    MatX<S> d1 = l2.backward(cc.act1, dq);
    d1 = relu_backward(cc.pre1, d1);
    MatX<S> din = l1.backward(cc.in, d1);
    demb = din.topRows(embed_dim);
    dact = din.bottomRows(din.rows() - embed_dim);
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    l1.collect(prefix + ".l1", out);
    l2.collect(prefix + ".l2", out);
  }
};

// ---------------------------------------------------------------------------
// Full parameter set: shared online trunk with policy and twin-Q heads, plus
// a target copy of the trunk and Q heads for Bellman backups.
// ---------------------------------------------------------------------------

template <class S>
struct SacNets {
  Trunk<S> trunk, tgt_trunk;
  PolicyHead<S> pi;
  QHead<S> q1, q2, tq1, tq2;

  void init(const NetworkSpec& spec, Rng& rng) {
    trunk.init(spec, rng);
    pi.init(spec.embed_dim(), spec.policy_hidden, spec.action_dim, rng);
    q1.init(spec.embed_dim(), spec.q_hidden, spec.action_dim, rng);
    q2.init(spec.embed_dim(), spec.q_hidden, spec.action_dim, rng);
    // Targets start as exact copies.
    tgt_trunk = trunk;
    tq1 = q1;
    tq2 = q2;
  }

  ParamList<S> critic_params() {
    ParamList<S> out;
    trunk.collect("trunk", out);
    q1.collect("q1", out);
    q2.collect("q2", out);
    return out;
  }
  ParamList<S> policy_params() {
    ParamList<S> out;
    pi.collect("pi", out);
    return out;
  }
  ParamList<S> target_params() {
    ParamList<S> out;
    tgt_trunk.collect("trunk", out);
    tq1.collect("q1", out);
    tq2.collect("q2", out);
    return out;
  }
  ParamList<S> all_params() {
    ParamList<S> out;
    trunk.collect("trunk", out);
    pi.collect("pi", out);
    q1.collect("q1", out);
    q2.collect("q2", out);
    tgt_trunk.collect("tgt_trunk", out);
    tq1.collect("tq1", out);
    tq2.collect("tq2", out);
    return out;
  }

  // target <- (1 - tau) * target + tau * online
  void polyak(double tau) {
    ParamList<S> online = critic_params();
    ParamList<S> target = target_params();
    for (size_t i = 0; i < online.size(); ++i) {
      Eigen::Map<VecX<S>> t(target[i].value, target[i].size);
      Eigen::Map<const VecX<S>> o(online[i].value, online[i].size);
      t = (S(1) - S(tau)) * t + S(tau) * o;
    }
  }
};

}  // namespace navgym
