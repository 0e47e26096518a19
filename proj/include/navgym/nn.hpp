#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "navgym/error.hpp"
#include "navgym/rng.hpp"

namespace navgym {

template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using ArrX = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic>;

// Minimal dense tensor: shape plus a contiguous buffer, row-major strides.
// The batched layer code below works on matrices directly (columns = batch
// items); this type carries shaped data across module boundaries and in
// reference implementations.
template <class S>
struct Tensor {
  std::vector<int> dims;
  VecX<S> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> d) : dims(std::move(d)) {
    Eigen::Index n = 1;
    for (int k : dims) n *= k;
    data = VecX<S>::Zero(n);
  }
  Eigen::Index size() const { return data.size(); }
};

// Flat view of one parameter plus its gradient accumulator.
template <class S>
struct ParamRef {
  std::string name;
  S* value = nullptr;
  S* grad = nullptr;
  Eigen::Index size = 0;
};

template <class S>
using ParamList = std::vector<ParamRef<S>>;

// ---------------------------------------------------------------------------
// Initializers
// ---------------------------------------------------------------------------

template <class S>
MatX<S> orthogonal_init(int rows, int cols, Rng& rng, double gain = 1.0) {
  int big = std::max(rows, cols), small = std::min(rows, cols);
  MatX<double> g(big, small);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
  Eigen::HouseholderQR<MatX<double>> qr(g);
  MatX<double> q = qr.householderQ() * MatX<double>::Identity(big, small);
  // Sign correction so the decomposition is unique.
  MatX<double> r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (int j = 0; j < small; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  MatX<double> w = rows >= cols ? q : MatX<double>(q.transpose());
  return (gain * w).template cast<S>();
}

template <class S>
MatX<S> kaiming_uniform_init(int rows, int cols, int fan_in, Rng& rng) {
  double bound = std::sqrt(6.0 / double(fan_in));
  MatX<S> w(rows, cols);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = S(rng.uniform(-bound, bound));
  return w;
}

// ---------------------------------------------------------------------------
// Layers. Convention: activations are matrices (features x batch); forward
// caches live with the caller so one layer can serve many unrolled steps.
// ---------------------------------------------------------------------------

template <class S>
struct Linear {
  MatX<S> W;
  VecX<S> b;
  MatX<S> gW;
  VecX<S> gb;

  void init(int in, int out, Rng& rng) {
    W = orthogonal_init<S>(out, in, rng);
    b = VecX<S>::Zero(out);
    zero_grad();
  }
  void zero_grad() {
    gW = MatX<S>::Zero(W.rows(), W.cols());
    gb = VecX<S>::Zero(b.size());
  }
  int in_dim() const { return int(W.cols()); }
  int out_dim() const { return int(W.rows()); }

  MatX<S> forward(const MatX<S>& x) const { return (W * x).colwise() + b; }

  // Accumulates parameter gradients, returns input gradient.
  MatX<S> backward(const MatX<S>& x, const MatX<S>& dy) {
    gW.noalias() += dy * x.transpose();
    gb.noalias() += dy.rowwise().sum();
    return W.transpose() * dy;
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    out.push_back({prefix + ".W", W.data(), gW.data(), W.size()});
    out.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
  }
};

template <class S>
MatX<S> relu(const MatX<S>& x) {
  return x.cwiseMax(S(0));
}

template <class S>
MatX<S> relu_backward(const MatX<S>& x, const MatX<S>& dy) {
  return (x.array() > S(0)).template cast<S>() * dy.array();
}

// ---------------------------------------------------------------------------
// Convolutions over fixed input geometry, valid or zero-padded, implemented
// as gather (im2col) + GEMM. The gather table is built once per layer.
// Input layout per batch column: channel-major, then x-fastest spatial order
// (index = c*XYZ + x + X*(y + Y*z)); 2D uses index = c*XY + x + X*y.
// ---------------------------------------------------------------------------

template <class S>
struct ConvNd {
  int in_channels = 0, out_channels = 0, kernel = 0, stride = 0, pad = 0;
  std::vector<int> in_shape;   // spatial dims
  std::vector<int> out_shape;  // spatial dims
  int in_cells = 0, out_cells = 0, patch = 0;
  std::vector<int32_t> gather;  // (patch) x (out_cells), -1 = zero pad

  MatX<S> W;  // out_channels x patch
  VecX<S> b;
  MatX<S> gW;
  VecX<S> gb;

  static int out_dim(int in, int k, int s, int p) {
    int span = in + 2 * p - k;
    if (span < 0) return -1;
    return span / s + 1;
  }

  void init(int cin, int cout, int k, int s, int p, std::vector<int> shape, Rng& rng) {
    in_channels = cin;
    out_channels = cout;
    kernel = k;
    stride = s;
    pad = p;
    in_shape = std::move(shape);
    const int nd = int(in_shape.size());
    out_shape.resize(nd);
    in_cells = 1;
    out_cells = 1;
    for (int d = 0; d < nd; ++d) {
      out_shape[d] = out_dim(in_shape[d], k, s, p);
      if (out_shape[d] < 1) throw ValidationError("conv kernel does not fit input");
      in_cells *= in_shape[d];
      out_cells *= out_shape[d];
    }
    int kvol = 1;
    for (int d = 0; d < nd; ++d) kvol *= k;
    patch = cin * kvol;
    build_gather();
    W = kaiming_uniform_init<S>(cout, patch, patch, rng);
    b = VecX<S>::Zero(cout);
    zero_grad();
  }

  void zero_grad() {
    gW = MatX<S>::Zero(W.rows(), W.cols());
    gb = VecX<S>::Zero(b.size());
  }

  int in_dim() const { return in_channels * in_cells; }
  int out_dim_total() const { return out_channels * out_cells; }

  void build_gather() {
    const int nd = int(in_shape.size());
    // Laid out [cell][patch-row] so both the table read and the column write
    // in im2col are contiguous.
    gather.assign(size_t(patch) * out_cells, -1);
    std::vector<int> oc(nd, 0);
    for (int s_idx = 0; s_idx < out_cells; ++s_idx) {
      // Decode output cell (x-fastest).
      int rem = s_idx;
      for (int d = 0; d < nd; ++d) {
        oc[d] = rem % out_shape[d];
        rem /= out_shape[d];
      }
      std::vector<int> kc(nd, 0);
      int kvol = patch / in_channels;
      for (int kv = 0; kv < kvol; ++kv) {
        int krem = kv;
        for (int d = 0; d < nd; ++d) {
          kc[d] = krem % kernel;
          krem /= kernel;
        }
        bool ok = true;
        int spatial = 0, mul = 1;
        for (int d = 0; d < nd; ++d) {
          int pos = oc[d] * stride + kc[d] - pad;
          if (pos < 0 || pos >= in_shape[d]) {
            ok = false;
            break;
          }
          spatial += pos * mul;
          mul *= in_shape[d];
        }
        if (!ok) continue;
        for (int c = 0; c < in_channels; ++c)
          gather[size_t(s_idx) * patch + (c * kvol + kv)] = int32_t(c * in_cells + spatial);
      }
    }
  }

  // x: (in_channels*in_cells) x B. col out: patch x (out_cells*B).
  void im2col(const MatX<S>& x, MatX<S>& col) const {
    const int B = int(x.cols());
    col.resize(patch, Eigen::Index(out_cells) * B);
    for (int bi = 0; bi < B; ++bi) {
      const S* xp = x.col(bi).data();
      S* cp = col.data() + size_t(bi) * out_cells * patch;
      const int32_t* g = gather.data();
      for (size_t n = 0; n < size_t(out_cells) * patch; ++n) {
        int32_t src = g[n];
        cp[n] = src < 0 ? S(0) : xp[src];
      }
    }
  }

  // y: (out_channels*out_cells) x B, channel-major layout.
  MatX<S> forward(const MatX<S>& x, MatX<S>& col_cache) const {
    const int B = int(x.cols());
    im2col(x, col_cache);
    MatX<S> prod = W * col_cache;  // out_channels x (out_cells*B)
    prod.colwise() += b;
    MatX<S> y(Eigen::Index(out_dim_total()), B);
    for (int bi = 0; bi < B; ++bi) {
      Eigen::Map<MatX<S>> ym(y.col(bi).data(), out_cells, out_channels);
      ym = prod.middleCols(Eigen::Index(bi) * out_cells, out_cells).transpose();
    }
    return y;
  }

  MatX<S> backward(const MatX<S>& col_cache, const MatX<S>& dy) {
    const int B = int(dy.cols());
    MatX<S> dprod(out_channels, Eigen::Index(out_cells) * B);
    for (int bi = 0; bi < B; ++bi) {
      Eigen::Map<const MatX<S>> dym(dy.col(bi).data(), out_cells, out_channels);
      dprod.middleCols(Eigen::Index(bi) * out_cells, out_cells) = dym.transpose();
    }
    gW.noalias() += dprod * col_cache.transpose();
    gb.noalias() += dprod.rowwise().sum();
    MatX<S> dcol = W.transpose() * dprod;  // patch x (out_cells*B)
    MatX<S> dx = MatX<S>::Zero(Eigen::Index(in_dim()), B);
    for (int bi = 0; bi < B; ++bi) {
      S* dxp = dx.col(bi).data();
      const S* dcp = dcol.data() + size_t(bi) * out_cells * patch;
      const int32_t* g = gather.data();
      for (size_t n = 0; n < size_t(out_cells) * patch; ++n) {
        int32_t dst = g[n];
        if (dst >= 0) dxp[dst] += dcp[n];
      }
    }
    return dx;
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    out.push_back({prefix + ".W", W.data(), gW.data(), W.size()});
    out.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
  }
};

// ---------------------------------------------------------------------------
// LSTM, gate order (i, f, g, o). One layer, batch-major columns.
// ---------------------------------------------------------------------------

template <class S>
struct Lstm {
  int in = 0, hidden = 0;
  MatX<S> Wx, Wh;  // (4H x in), (4H x H)
  VecX<S> b;       // 4H
  MatX<S> gWx, gWh;
  VecX<S> gb;

  struct StepCache {
    MatX<S> x, h_prev, c_prev;
    ArrX<S> i, f, g, o, c, tanh_c;
  };

  // Whole-window cache: the input-to-gate product is one batched GEMM, only
  // the recurrent path runs per step. h_prev/c_prev hold the (masked) state
  // each step consumed.
  struct SeqCache {
    MatX<S> x_all;                   // in x (T*B)
    MatX<S> h_prev_all, c_prev_all;  // H x (T*B)
    ArrX<S> i, f, g, o, tanh_c;      // H x (T*B)
    int B = 0, T = 0;
  };

  void init(int in_dim, int hidden_dim, Rng& rng) {
    in = in_dim;
    hidden = hidden_dim;
    Wx = orthogonal_init<S>(4 * hidden, in, rng);
    Wh = orthogonal_init<S>(4 * hidden, hidden, rng);
    b = VecX<S>::Zero(4 * hidden);
    zero_grad();
  }
  void zero_grad() {
    gWx = MatX<S>::Zero(Wx.rows(), Wx.cols());
    gWh = MatX<S>::Zero(Wh.rows(), Wh.cols());
    gb = VecX<S>::Zero(b.size());
  }

  static ArrX<S> sigmoid(const ArrX<S>& x) { return S(1) / (S(1) + (-x).exp()); }

  // Advances h, c in place; returns the step cache when `cache` is non-null.
  void forward_step(const MatX<S>& x, MatX<S>& h, MatX<S>& c, StepCache* cache) const {
    MatX<S> gates = Wx * x + Wh * h;
    gates.colwise() += b;
    const int H = hidden;
    ArrX<S> zi = gates.topRows(H).array();
    ArrX<S> zf = gates.middleRows(H, H).array();
    ArrX<S> zg = gates.middleRows(2 * H, H).array();
    ArrX<S> zo = gates.bottomRows(H).array();
    ArrX<S> ai = sigmoid(zi), af = sigmoid(zf), ag = zg.tanh(), ao = sigmoid(zo);
    ArrX<S> cn = af * c.array() + ai * ag;
    ArrX<S> tc = cn.tanh();
    if (cache) {
      cache->x = x;
      cache->h_prev = h;
      cache->c_prev = c;
      cache->i = ai;
      cache->f = af;
      cache->g = ag;
      cache->o = ao;
      cache->c = cn;
      cache->tanh_c = tc;
    }
    c = cn.matrix();
    h = (ao * tc).matrix();
  }

  // Unrolls T steps over x_all (timestep-major columns), advancing h and c.
  // Masked columns (mask 0) pin h/c to zero. Returns all hidden states as
  // an H x (T*B) matrix.
  MatX<S> forward_seq(const MatX<S>& x_all, int B, int T, const VecX<S>& mask, MatX<S>& h,
                      MatX<S>& c, SeqCache* cache) const {
    const int H = hidden;
    MatX<S> gates_x = Wx * x_all;  // one batched GEMM across all steps
    gates_x.colwise() += b;
    MatX<S> out(H, Eigen::Index(T) * B);
    if (cache) {
      cache->x_all = x_all;
      cache->B = B;
      cache->T = T;
      cache->h_prev_all.resize(H, Eigen::Index(T) * B);
      cache->c_prev_all.resize(H, Eigen::Index(T) * B);
      cache->i.resize(H, Eigen::Index(T) * B);
      cache->f.resize(H, Eigen::Index(T) * B);
      cache->g.resize(H, Eigen::Index(T) * B);
      cache->o.resize(H, Eigen::Index(T) * B);
      cache->tanh_c.resize(H, Eigen::Index(T) * B);
    }
    MatX<S> gates(4 * H, B);
    for (int t = 0; t < T; ++t) {
      const Eigen::Index col0 = Eigen::Index(t) * B;
      gates.noalias() = Wh * h;
      gates += gates_x.middleCols(col0, B);
      ArrX<S> ai = sigmoid(gates.topRows(H).array());
      ArrX<S> af = sigmoid(gates.middleRows(H, H).array());
      ArrX<S> ag = gates.middleRows(2 * H, H).array().tanh();
      ArrX<S> ao = sigmoid(gates.bottomRows(H).array());
      ArrX<S> cn = af * c.array() + ai * ag;
      ArrX<S> tc = cn.tanh();
      if (cache) {
        cache->h_prev_all.middleCols(col0, B) = h;
        cache->c_prev_all.middleCols(col0, B) = c;
        cache->i.middleCols(col0, B) = ai;
        cache->f.middleCols(col0, B) = af;
        cache->g.middleCols(col0, B) = ag;
        cache->o.middleCols(col0, B) = ao;
        cache->tanh_c.middleCols(col0, B) = tc;
      }
      c = cn.matrix();
      h = (ao * tc).matrix();
      if (mask.size() > 0) {
        auto m = mask.segment(col0, B).transpose().array();
        h.array().rowwise() *= m;
        c.array().rowwise() *= m;
      }
      out.middleCols(col0, B) = h;
    }
    return out;
  }

  // BPTT over a cached window; demb carries dL/dh per step's masked output.
  // Gradients never flow into the initial hidden state. Returns dL/dx_all.
  MatX<S> backward_seq(const SeqCache& cc, const MatX<S>& demb, const VecX<S>& mask) {
    const int H = hidden, B = cc.B, T = cc.T;
    MatX<S> dgates_all(4 * H, Eigen::Index(T) * B);
    MatX<S> dh = MatX<S>::Zero(H, B), dc = MatX<S>::Zero(H, B);
    for (int t = T - 1; t >= 0; --t) {
      const Eigen::Index col0 = Eigen::Index(t) * B;
      dh += demb.middleCols(col0, B);
      if (mask.size() > 0) {
        auto m = mask.segment(col0, B).transpose().array();
        dh.array().rowwise() *= m;
        dc.array().rowwise() *= m;
      }
      auto ai = cc.i.middleCols(col0, B);
      auto af = cc.f.middleCols(col0, B);
      auto ag = cc.g.middleCols(col0, B);
      auto ao = cc.o.middleCols(col0, B);
      auto tc = cc.tanh_c.middleCols(col0, B);
      ArrX<S> do_ = dh.array() * tc;
      ArrX<S> dcn = dc.array() + dh.array() * ao * (S(1) - tc.square());
      auto dg_block = dgates_all.middleCols(col0, B);
      dg_block.topRows(H) = (dcn * ag * ai * (S(1) - ai)).matrix();
      dg_block.middleRows(H, H) =
          (dcn * cc.c_prev_all.middleCols(col0, B).array() * af * (S(1) - af)).matrix();
      dg_block.middleRows(2 * H, H) = (dcn * ai * (S(1) - ag.square())).matrix();
      dg_block.bottomRows(H) = (do_ * ao * (S(1) - ao)).matrix();
      dc = (dcn * af).matrix();
      dh.noalias() = Wh.transpose() * dg_block;
    }
    gWx.noalias() += dgates_all * cc.x_all.transpose();
    gWh.noalias() += dgates_all * cc.h_prev_all.transpose();
    gb.noalias() += dgates_all.rowwise().sum();
    return Wx.transpose() * dgates_all;
  }

  // dh, dc: gradients flowing into this step's outputs. Returns dx and
  // updates dh, dc to the gradients w.r.t. the previous step's h, c.
  MatX<S> backward_step(const StepCache& cc, MatX<S>& dh, MatX<S>& dc) {
    const int H = hidden;
    ArrX<S> do_ = dh.array() * cc.tanh_c;
    ArrX<S> dcn = dc.array() + dh.array() * cc.o * (S(1) - cc.tanh_c.square());
    ArrX<S> di = dcn * cc.g;
    ArrX<S> df = dcn * cc.c_prev.array();
    ArrX<S> dg = dcn * cc.i;
    ArrX<S> dc_prev = dcn * cc.f;
    MatX<S> dgates(4 * H, dh.cols());
    dgates.topRows(H) = (di * cc.i * (S(1) - cc.i)).matrix();
    dgates.middleRows(H, H) = (df * cc.f * (S(1) - cc.f)).matrix();
    dgates.middleRows(2 * H, H) = (dg * (S(1) - cc.g.square())).matrix();
    dgates.bottomRows(H) = (do_ * cc.o * (S(1) - cc.o)).matrix();
    gWx.noalias() += dgates * cc.x.transpose();
    gWh.noalias() += dgates * cc.h_prev.transpose();
    gb.noalias() += dgates.rowwise().sum();
    dh = Wh.transpose() * dgates;
    dc = dc_prev.matrix();
    return Wx.transpose() * dgates;
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    out.push_back({prefix + ".Wx", Wx.data(), gWx.data(), Wx.size()});
    out.push_back({prefix + ".Wh", Wh.data(), gWh.data(), Wh.size()});
    out.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
  }
};

// ---------------------------------------------------------------------------
// Adam with bias correction over a flat parameter list.
// ---------------------------------------------------------------------------

template <class S>
struct Adam {
  double lr = 3e-4, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t t = 0;
  std::vector<VecX<S>> m, v;

  void attach(const ParamList<S>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.push_back(VecX<S>::Zero(p.size));
      v.push_back(VecX<S>::Zero(p.size));
    }
    t = 0;
  }

  void step(const ParamList<S>& params) {
    ++t;
    const S bc1 = S(1) - S(std::pow(beta1, double(t)));
    const S bc2 = S(1) - S(std::pow(beta2, double(t)));
    for (size_t i = 0; i < params.size(); ++i) {
      Eigen::Map<VecX<S>> w(params[i].value, params[i].size);
      Eigen::Map<const VecX<S>> g(params[i].grad, params[i].size);
      m[i] = S(beta1) * m[i] + (S(1) - S(beta1)) * g;
      v[i].array() = S(beta2) * v[i].array() + (S(1) - S(beta2)) * g.array().square();
      w.array() -= S(lr) * (m[i].array() / bc1) / ((v[i].array() / bc2).sqrt() + S(eps));
    }
  }
};

template <class S>
void zero_grads(const ParamList<S>& params) {
  for (const auto& p : params) Eigen::Map<VecX<S>>(p.grad, p.size).setZero();
}

}  // namespace navgym
