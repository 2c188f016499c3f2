#pragma once

#include <vector>

#include "slmc/targets.hpp"
#include "slmc/types.hpp"

namespace slmc {

// Streaming per-dimension mean and second moment.
struct RunningMoments {
  long count = 0;
  Vector mean;
  Vector second_moment;

  void update(const Vector& x);
  Vector variance() const;  // population variance from the two moments
};

// sqrt((1/D) sum_d (mean_d - true_d)^2)
double rmse(const Vector& chain_mean, const Vector& true_mean);

// sum_d |mean_d - true_d| / sum_d |true_d|; throws on a zero denominator.
double rem(const Vector& chain_mean, const Vector& true_mean);

// Normalized autocorrelations rho_1..rho_max_lag of a scalar series.
std::vector<double> autocorrelations(const std::vector<double>& series, long max_lag);

// Normalized ESS of a scalar series in (0, 1]: 1 / (1 + 2 sum rho_t) with the
// sum truncated at the first non-positive adjacent-pair sum; clamped to 1.
double ess_scalar(const std::vector<double>& series);

struct EssReport {
  // fractions[s][d]: statistic s (0: x, 1: x^2), dimension d; NaN if skipped.
  Matrix fractions;
  double min_ess = 1.0;
  bool clamped = false;              // some series hit the upper clamp
  std::vector<Index> skipped_dims;   // zero-variance dimensions
};

EssReport ess_report(const Samples& samples);
// Minimum normalized ESS across dimensions and 1st/2nd moments.
double ess(const Samples& samples);

// Fraction of samples within `radius` of each center; the residual fraction
// is appended last. Centers must be pairwise separated by > 2 * radius.
std::vector<double> mode_occupancy(const Samples& samples,
                                   const std::vector<Vector>& centers, double radius);

// |mean over samples of f(x) - f(x*)| for a target with known optima.
double optimization_rmse(const Samples& samples, const Target& target);

}  // namespace slmc
