#pragma once

#include <span>

namespace navgym {

// Regularized incomplete beta I_x(a, b) via continued fraction.
double incomplete_beta(double a, double b, double x);

// CDF of Student's t distribution with `df` degrees of freedom.
double student_t_cdf(double t, double df);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
  double mean1 = 0.0, mean2 = 0.0;
};

// Welch's unequal-variance two-sample t-test with Welch-Satterthwaite
// degrees of freedom. Each group needs >= 2 samples.
WelchResult welch_t_test(std::span<const double> group1, std::span<const double> group2);

}  // namespace navgym
