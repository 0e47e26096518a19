#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "navgym/net.hpp"

using namespace navgym;

namespace {

using Mat = MatX<double>;
using Vec = VecX<double>;

Mat random_mat(int r, int c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

// Relative error with an absolute floor, the usual gradcheck metric.
double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

// Central finite differences of loss() w.r.t. every (or sampled) coordinate
// of the listed parameters, against the analytic gradients already stored in
// the grad buffers.
template <typename LossFn>
double fd_check(const ParamList<double>& params, LossFn&& loss, int sample_per_tensor = 0,
                Rng* sample_rng = nullptr) {
  const double h = 1e-5;
  double worst = 0.0;
  for (const auto& p : params) {
    std::vector<Eigen::Index> coords;
    if (sample_per_tensor > 0 && p.size > sample_per_tensor) {
      for (int s = 0; s < sample_per_tensor; ++s)
        coords.push_back(Eigen::Index(sample_rng->uniform_index(uint64_t(p.size))));
    } else {
      for (Eigen::Index i = 0; i < p.size; ++i) coords.push_back(i);
    }
    for (Eigen::Index i : coords) {
      double saved = p.value[i];
      p.value[i] = saved + h;
      double lp = loss();
      p.value[i] = saved - h;
      double lm = loss();
      p.value[i] = saved;
      double numeric = (lp - lm) / (2 * h);
      worst = std::max(worst, rel_err(p.grad[i], numeric));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("linear: zero and identity behaviour") {
  Rng rng = Rng::seeded(1);
  Linear<double> l;
  l.init(4, 4, rng);
  l.W.setZero();
  l.b.setZero();
  Mat x = random_mat(4, 3, rng);
  CHECK(l.forward(x).cwiseAbs().maxCoeff() == 0.0);
  l.W.setIdentity();
  CHECK((l.forward(x) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("linear: forward matches a naive loop and sum-loss grads are input sums") {
  Rng rng = Rng::seeded(2);
  Linear<double> l;
  l.init(5, 3, rng);
  Mat x = random_mat(5, 4, rng);
  Mat y = l.forward(x);
  for (int b = 0; b < 4; ++b)
    for (int o = 0; o < 3; ++o) {
      double acc = l.b[o];
      for (int i = 0; i < 5; ++i) acc += l.W(o, i) * x(i, b);
      REQUIRE(rel_err(y(o, b), acc) < 1e-12);
    }
  // loss = sum(outputs): dW = ones * x^T -> each row equals input sums.
  l.zero_grad();
  Mat dy = Mat::Ones(3, 4);
  l.backward(x, dy);
  Vec row_sums = x.rowwise().sum();
  for (int o = 0; o < 3; ++o)
    for (int i = 0; i < 5; ++i) REQUIRE(rel_err(l.gW(o, i), row_sums[i]) < 1e-12);
  for (int o = 0; o < 3; ++o) REQUIRE(l.gb[o] == 4.0);
}

TEST_CASE("conv3d: forward matches a naive loop reference") {
  Rng rng = Rng::seeded(3);
  ConvNd<double> conv;
  conv.init(2, 3, 3, 2, 1, {5, 4, 6}, rng);
  const int B = 2;
  Mat x = random_mat(conv.in_dim(), B, rng);
  Mat col;
  Mat y = conv.forward(x, col);
  auto in_at = [&](int b, int c, int xx, int yy, int zz) -> double {
    if (xx < 0 || xx >= 5 || yy < 0 || yy >= 4 || zz < 0 || zz >= 6) return 0.0;
    return x(c * (5 * 4 * 6) + xx + 5 * (yy + 4 * zz), b);
  };
  const auto& os = conv.out_shape;
  for (int b = 0; b < B; ++b)
    for (int co = 0; co < 3; ++co)
      for (int oz = 0; oz < os[2]; ++oz)
        for (int oy = 0; oy < os[1]; ++oy)
          for (int ox = 0; ox < os[0]; ++ox) {
            double acc = conv.b[co];
            for (int ci = 0; ci < 2; ++ci)
              for (int kz = 0; kz < 3; ++kz)
                for (int ky = 0; ky < 3; ++ky)
                  for (int kx = 0; kx < 3; ++kx) {
                    int patch = ci * 27 + kx + 3 * (ky + 3 * kz);
                    acc += conv.W(co, patch) * in_at(b, ci, ox * 2 + kx - 1, oy * 2 + ky - 1,
                                                     oz * 2 + kz - 1);
                  }
            int out_idx = co * (os[0] * os[1] * os[2]) + ox + os[0] * (oy + os[1] * oz);
            REQUIRE(rel_err(y(out_idx, b), acc) < 1e-10);
          }
}

TEST_CASE("conv2d: gradients match central finite differences") {
  Rng rng = Rng::seeded(4);
  ConvNd<double> conv;
  conv.init(2, 4, 3, 2, 1, {6, 5}, rng);
  const int B = 2;
  Mat x = random_mat(conv.in_dim(), B, rng);
  Mat w = random_mat(conv.out_dim_total(), B, rng);
  ParamList<double> params;
  conv.collect("conv", params);
  auto loss = [&]() {
    Mat col;
    return (conv.forward(x, col).array() * w.array()).sum();
  };
  conv.zero_grad();
  Mat col;
  Mat y = conv.forward(x, col);
  Mat dx = conv.backward(col, w);
  CHECK(fd_check(params, loss) < 1e-5);
  // Input gradient too.
  const double h = 1e-5;
  Rng pick = Rng::seeded(5);
  for (int s = 0; s < 30; ++s) {
    Eigen::Index i = Eigen::Index(pick.uniform_index(uint64_t(x.size())));
    double saved = x.data()[i];
    x.data()[i] = saved + h;
    double lp = loss();
    x.data()[i] = saved - h;
    double lm = loss();
    x.data()[i] = saved;
    REQUIRE(rel_err(dx.data()[i], (lp - lm) / (2 * h)) < 1e-5);
  }
}

TEST_CASE("conv3d: gradients match central finite differences") {
  Rng rng = Rng::seeded(6);
  ConvNd<double> conv;
  conv.init(1, 3, 3, 2, 0, {6, 5, 4}, rng);
  Mat x = random_mat(conv.in_dim(), 2, rng);
  Mat w = random_mat(conv.out_dim_total(), 2, rng);
  ParamList<double> params;
  conv.collect("conv", params);
  auto loss = [&]() {
    Mat col;
    return (conv.forward(x, col).array() * w.array()).sum();
  };
  conv.zero_grad();
  Mat col;
  conv.forward(x, col);
  conv.backward(col, w);
  CHECK(fd_check(params, loss) < 1e-5);
}

TEST_CASE("lstm: statefulness, naive reference, and BPTT finite differences") {
  Rng rng = Rng::seeded(7);
  Lstm<double> lstm;
  lstm.init(4, 6, rng);
  const int B = 3, T = 5;
  std::vector<Mat> xs;
  for (int t = 0; t < T; ++t) xs.push_back(random_mat(4, B, rng, 0.8));

  // Naive per-gate reference for one step.
  {
    Mat h = Mat::Zero(6, B), c = Mat::Zero(6, B);
    typename Lstm<double>::StepCache cache;
    Mat h2 = h, c2 = c;
    lstm.forward_step(xs[0], h2, c2, &cache);
    for (int b = 0; b < B; ++b)
      for (int j = 0; j < 6; ++j) {
        auto gate = [&](int g) {
          double acc = lstm.b[g * 6 + j];
          for (int i = 0; i < 4; ++i) acc += lstm.Wx(g * 6 + j, i) * xs[0](i, b);
          for (int i = 0; i < 6; ++i) acc += lstm.Wh(g * 6 + j, i) * h(i, b);
          return acc;
        };
        double ig = 1.0 / (1.0 + std::exp(-gate(0)));
        double fg = 1.0 / (1.0 + std::exp(-gate(1)));
        double gg = std::tanh(gate(2));
        double og = 1.0 / (1.0 + std::exp(-gate(3)));
        double cn = fg * c(j, b) + ig * gg;
        REQUIRE(rel_err(c2(j, b), cn) < 1e-12);
        REQUIRE(rel_err(h2(j, b), og * std::tanh(cn)) < 1e-12);
      }
  }

  // Step-by-step equals one carried pass (trivially the same loop here, so
  // check against fresh state reuse).
  {
    Mat h1 = Mat::Zero(6, B), c1 = Mat::Zero(6, B);
    for (int t = 0; t < T; ++t) lstm.forward_step(xs[t], h1, c1, nullptr);
    Mat h2 = Mat::Zero(6, B), c2 = Mat::Zero(6, B);
    for (int t = 0; t < T; ++t) {
      Mat hx = h2, cx = c2;
      lstm.forward_step(xs[t], hx, cx, nullptr);
      h2 = hx;
      c2 = cx;
    }
    REQUIRE((h1 - h2).cwiseAbs().maxCoeff() < 1e-9);
  }

  // BPTT over T steps: loss reads h at the last step only; gradients flow to
  // the t=0 input and all parameters.
  Mat w = random_mat(6, B, rng);
  ParamList<double> params;
  lstm.collect("lstm", params);
  auto loss = [&]() {
    Mat h = Mat::Zero(6, B), c = Mat::Zero(6, B);
    for (int t = 0; t < T; ++t) lstm.forward_step(xs[t], h, c, nullptr);
    return (h.array() * w.array()).sum();
  };
  lstm.zero_grad();
  std::vector<typename Lstm<double>::StepCache> caches(T);
  Mat h = Mat::Zero(6, B), c = Mat::Zero(6, B);
  for (int t = 0; t < T; ++t) lstm.forward_step(xs[t], h, c, &caches[t]);
  Mat dh = w, dc = Mat::Zero(6, B);
  std::vector<Mat> dxs(T);
  for (int t = T - 1; t >= 0; --t) dxs[t] = lstm.backward_step(caches[t], dh, dc);
  CHECK(fd_check(params, loss) < 1e-5);

  // d loss / d x_0 is nonzero and matches finite differences.
  CHECK(dxs[0].cwiseAbs().maxCoeff() > 1e-8);
  const double h_fd = 1e-5;
  Rng pick = Rng::seeded(8);
  for (int s = 0; s < 20; ++s) {
    Eigen::Index i = Eigen::Index(pick.uniform_index(uint64_t(xs[0].size())));
    double saved = xs[0].data()[i];
    xs[0].data()[i] = saved + h_fd;
    double lp = loss();
    xs[0].data()[i] = saved - h_fd;
    double lm = loss();
    xs[0].data()[i] = saved;
    REQUIRE(rel_err(dxs[0].data()[i], (lp - lm) / (2 * h_fd)) < 1e-5);
  }
}

TEST_CASE("trunk: zero parameters give zero outputs and hidden state") {
  Rng rng = Rng::seeded(9);
  NetworkSpec spec;
  spec.occ_dims = {6, 4, 6};
  spec.conv3d = {{4, 3, 2, 0}};
  spec.depth_dims = {6, 3};
  spec.conv2d = {{4, 3, 2, 1}};
  spec.abs_hidden = 8;
  spec.trunk = {16};
  spec.lstm_hidden = 8;
  Trunk<double> trunk(spec, rng);
  for (auto& p : [&] {
         ParamList<double> out;
         trunk.collect("t", out);
         return out;
       }())
    Eigen::Map<Vec>(p.value, p.size).setZero();
  ObsBatch<double> in;
  in.resize(spec, 3);
  in.occ = random_mat(in.occ.rows(), 3, rng);
  in.depth = random_mat(in.depth.rows(), 3, rng);
  in.scalars = random_mat(in.scalars.rows(), 3, rng);
  in.abs = random_mat(in.abs.rows(), 3, rng);
  Mat h = trunk.zero_hidden(3), c = trunk.zero_hidden(3);
  VecX<double> mask;
  Mat emb = trunk.forward(in, 3, 1, mask, h, c, nullptr);
  CHECK(emb.cwiseAbs().maxCoeff() == 0.0);
  CHECK(h.cwiseAbs().maxCoeff() == 0.0);
  CHECK(c.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("full composite: finite differences at desk scale") {
  Rng rng = Rng::seeded(10);
  NetworkSpec spec;  // the desk-scale defaults
  Trunk<double> trunk(spec, rng);
  PolicyHead<double> pi;
  pi.init(spec.embed_dim(), spec.policy_hidden, spec.action_dim, rng);
  QHead<double> q;
  q.init(spec.embed_dim(), spec.q_hidden, spec.action_dim, rng);

  const int B = 2, T = 3;
  const int N = B * T;
  ObsBatch<double> in;
  in.resize(spec, N);
  in.occ = random_mat(in.occ.rows(), N, rng, 0.5);
  in.depth = random_mat(in.depth.rows(), N, rng, 0.5);
  in.scalars = random_mat(in.scalars.rows(), N, rng, 0.5);
  in.abs = random_mat(in.abs.rows(), N, rng, 0.5);
  Mat act = random_mat(spec.action_dim, N, rng, 0.5);
  Mat w_emb = random_mat(spec.embed_dim(), N, rng);
  Mat w_pi = random_mat(2 * spec.action_dim, N, rng);
  Mat w_q = random_mat(1, N, rng);
  VecX<double> mask = VecX<double>::Ones(N);

  auto loss = [&]() {
    Mat h = trunk.zero_hidden(B), c = trunk.zero_hidden(B);
    Mat emb = trunk.forward(in, B, T, mask, h, c, nullptr);
    Mat mean, logstd;
    pi.forward(emb, mean, logstd, nullptr);
    Mat qv = q.forward(emb, act, nullptr);
    double l = (emb.array() * w_emb.array()).sum();
    l += (mean.array() * w_pi.topRows(spec.action_dim).array()).sum();
    l += (logstd.array() * w_pi.bottomRows(spec.action_dim).array()).sum();
    l += (qv.array() * w_q.array()).sum();
    return l;
  };

  ParamList<double> params;
  trunk.collect("trunk", params);
  pi.collect("pi", params);
  q.collect("q", params);
  zero_grads(params);

  Trunk<double>::Cache cache;
  Mat h = trunk.zero_hidden(B), c = trunk.zero_hidden(B);
  Mat emb = trunk.forward(in, B, T, mask, h, c, &cache);
  PolicyHead<double>::Cache pc;
  Mat mean, logstd;
  pi.forward(emb, mean, logstd, &pc);
  QHead<double>::Cache qc;
  q.forward(emb, act, &qc);

  Mat demb = w_emb;
  demb += pi.backward(pc, w_pi.topRows(spec.action_dim), w_pi.bottomRows(spec.action_dim));
  Mat de, da;
  q.backward(qc, w_q, de, da, spec.embed_dim());
  demb += de;
  trunk.backward(cache, demb);

  Rng pick = Rng::seeded(11);
  double worst = fd_check(params, loss, 12, &pick);
  CHECK(worst < 1e-5);
}

TEST_CASE("network spec validation rejects non-composing shapes") {
  NetworkSpec bad;
  bad.occ_dims = {4, 4, 4};
  bad.conv3d = {{8, 3, 2, 0}, {16, 3, 2, 0}};  // second conv cannot fit 1x1x1
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  NetworkSpec bad2;
  bad2.trunk = {};
  CHECK_THROWS_AS(bad2.validate(), ValidationError);
  NetworkSpec ok;
  ok.validate();
  CHECK(ok.embed_dim() == 128);
  NetworkSpec no_lstm = ok;
  no_lstm.lstm_hidden = 0;
  no_lstm.validate();
  CHECK(no_lstm.embed_dim() == 128);  // falls back to the trunk width
}

TEST_CASE("adam: zero gradient leaves parameters, step count advances") {
  Rng rng = Rng::seeded(12);
  Linear<double> l;
  l.init(3, 3, rng);
  Mat w_before = l.W;
  ParamList<double> params;
  l.collect("l", params);
  Adam<double> adam;
  adam.attach(params);
  l.zero_grad();
  adam.step(params);
  CHECK(adam.t == 1);
  CHECK((l.W - w_before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam: constant gradient approaches lr * sign(g)") {
  Rng rng = Rng::seeded(13);
  Linear<double> l;
  l.init(2, 2, rng);
  ParamList<double> params;
  l.collect("l", params);
  Adam<double> adam;
  adam.lr = 1e-3;
  adam.attach(params);
  Mat g(2, 2);
  g << 3.0, -0.5, 0.25, -7.0;
  for (int it = 0; it < 400; ++it) {
    l.zero_grad();
    l.gW = g;
    Mat before = l.W;
    adam.step(params);
    if (it > 300) {
      Mat delta = before - l.W;
      for (int i = 0; i < 4; ++i)
        REQUIRE(rel_err(delta.data()[i], adam.lr * (g.data()[i] > 0 ? 1.0 : -1.0)) < 1e-3);
    }
  }
}

TEST_CASE("adam: 100 random steps match a scalar reference") {
  Rng rng = Rng::seeded(14);
  Linear<double> l;
  l.init(4, 2, rng);
  ParamList<double> params;
  l.collect("l", params);
  Adam<double> adam;
  adam.attach(params);

  // Scalar reference state per coordinate.
  std::vector<double> theta, m, v;
  for (const auto& p : params)
    for (Eigen::Index i = 0; i < p.size; ++i) {
      theta.push_back(p.value[i]);
      m.push_back(0);
      v.push_back(0);
    }
  Rng grads = Rng::seeded(15);
  for (int t = 1; t <= 100; ++t) {
    std::vector<double> g;
    size_t gi = 0;
    for (const auto& p : params)
      for (Eigen::Index i = 0; i < p.size; ++i) g.push_back(grads.normal());
    // reference update
    for (size_t i = 0; i < theta.size(); ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      double mhat = m[i] / (1 - std::pow(0.9, t));
      double vhat = v[i] / (1 - std::pow(0.999, t));
      theta[i] -= adam.lr * mhat / (std::sqrt(vhat) + adam.eps);
    }
    // library update
    gi = 0;
    for (const auto& p : params)
      for (Eigen::Index i = 0; i < p.size; ++i) p.grad[i] = g[gi++];
    adam.step(params);
    gi = 0;
    for (const auto& p : params)
      for (Eigen::Index i = 0; i < p.size; ++i) {
        REQUIRE(std::abs(p.value[i] - theta[gi]) < 1e-12);
        ++gi;
      }
  }
}

TEST_CASE("orthogonal init produces orthonormal columns") {
  Rng rng = Rng::seeded(16);
  Mat w = orthogonal_init<double>(8, 5, rng);
  Mat gram = w.transpose() * w;
  CHECK((gram - Mat::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-10);
  Mat w2 = orthogonal_init<double>(5, 8, rng);
  Mat gram2 = w2 * w2.transpose();
  CHECK((gram2 - Mat::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("deterministic init: same seed, same parameters") {
  NetworkSpec spec;
  Rng r1 = Rng::seeded(123), r2 = Rng::seeded(123);
  Trunk<float> t1(spec, r1), t2(spec, r2);
  ParamList<float> p1, p2;
  t1.collect("a", p1);
  t2.collect("a", p2);
  REQUIRE(p1.size() == p2.size());
  for (size_t i = 0; i < p1.size(); ++i)
    for (Eigen::Index j = 0; j < p1[i].size; ++j) REQUIRE(p1[i].value[j] == p2[i].value[j]);
}

TEST_CASE("tensor shape bookkeeping") {
  Tensor<float> t({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(t.data.size() == 24);
}
