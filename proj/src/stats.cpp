#include "navgym/stats.hpp"

#include <cmath>
#include <limits>

#include "navgym/error.hpp"

namespace navgym {

namespace {

// Lentz's continued fraction for the incomplete beta.
double betacf(double a, double b, double x) {
  const int kMaxIter = 300;
  const double kEps = 3e-16, kFpMin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
              b * std::log(1.0 - x);
  double front = std::exp(ln);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  double x = df / (df + t * t);
  double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
  return t >= 0 ? 1.0 - tail : tail;
}

WelchResult welch_t_test(std::span<const double> g1, std::span<const double> g2) {
  const size_t n1 = g1.size(), n2 = g2.size();
  if (n1 < 2 || n2 < 2)
    throw ValidationError("welch t-test needs at least 2 samples per group");
  WelchResult r;
  double m1 = 0, m2 = 0;
  for (double v : g1) m1 += v;
  for (double v : g2) m2 += v;
  m1 /= double(n1);
  m2 /= double(n2);
  double s1 = 0, s2 = 0;
  for (double v : g1) s1 += (v - m1) * (v - m1);
  for (double v : g2) s2 += (v - m2) * (v - m2);
  s1 /= double(n1 - 1);
  s2 /= double(n2 - 1);
  r.mean1 = m1;
  r.mean2 = m2;
  double se2 = s1 / double(n1) + s2 / double(n2);
  if (se2 == 0.0) {
    // Zero variance in both groups: identical means give t = 0, p = 1.
    r.t = m1 == m2 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), m1 - m2);
    r.df = double(n1 + n2 - 2);
    r.p = m1 == m2 ? 1.0 : 0.0;
    return r;
  }
  r.t = (m1 - m2) / std::sqrt(se2);
  double num = se2 * se2;
  double den = (s1 / n1) * (s1 / n1) / double(n1 - 1) + (s2 / n2) * (s2 / n2) / double(n2 - 1);
  r.df = den == 0.0 ? double(n1 + n2 - 2) : num / den;
  r.p = 2.0 * (1.0 - student_t_cdf(std::abs(r.t), r.df));
  if (r.p < 0.0) r.p = 0.0;
  if (r.p > 1.0) r.p = 1.0;
  return r;
}

}  // namespace navgym
