#include "slmc/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace slmc {

void RunningMoments::update(const Vector& x) {
  if (count == 0) {
    mean = Vector::Zero(x.size());
    second_moment = Vector::Zero(x.size());
  } else if (x.size() != mean.size()) {
    throw std::invalid_argument("RunningMoments: dimension changed mid-stream");
  }
  count += 1;
  const double w = 1.0 / static_cast<double>(count);
  mean += w * (x - mean);
  second_moment += w * (x.cwiseProduct(x) - second_moment);
}

Vector RunningMoments::variance() const {
  return second_moment - mean.cwiseProduct(mean);
}

double rmse(const Vector& chain_mean, const Vector& true_mean) {
  if (chain_mean.size() != true_mean.size())
    throw std::invalid_argument("rmse: dimension mismatch");
  return std::sqrt((chain_mean - true_mean).squaredNorm() /
                   static_cast<double>(chain_mean.size()));
}

double rem(const Vector& chain_mean, const Vector& true_mean) {
  if (chain_mean.size() != true_mean.size())
    throw std::invalid_argument("rem: dimension mismatch");
  const double denom = true_mean.cwiseAbs().sum();
  if (!(denom > 0))
    throw std::invalid_argument("rem: true mean has zero L1 norm; use rmse instead");
  return (chain_mean - true_mean).cwiseAbs().sum() / denom;
}

std::vector<double> autocorrelations(const std::vector<double>& series, long max_lag) {
  const long n = static_cast<long>(series.size());
  if (n < 2) throw std::invalid_argument("autocorrelations: series too short");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);

  double c0 = 0.0;
  for (double v : series) c0 += (v - mean) * (v - mean);
  c0 /= static_cast<double>(n);

  std::vector<double> rho;
  rho.reserve(max_lag);
  for (long t = 1; t <= max_lag && t < n; ++t) {
    double c = 0.0;
    for (long i = 0; i + t < n; ++i) c += (series[i] - mean) * (series[i + t] - mean);
    c /= static_cast<double>(n);
    rho.push_back(c / c0);
  }
  return rho;
}

namespace {

// Non-negative: c0 == 0 means a constant series.
double lag0_variance(const std::vector<double>& series) {
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(series.size());
  double c0 = 0.0;
  for (double v : series) c0 += (v - mean) * (v - mean);
  return c0 / static_cast<double>(series.size());
}

double lag_autocov(const std::vector<double>& series, double mean, long t) {
  const long n = static_cast<long>(series.size());
  double c = 0.0;
  for (long i = 0; i + t < n; ++i) c += (series[i] - mean) * (series[i + t] - mean);
  return c / static_cast<double>(n);
}

}  // namespace

double ess_scalar(const std::vector<double>& series) {
  const long n = static_cast<long>(series.size());
  if (n < 100) throw std::invalid_argument("ess: need at least 100 samples");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  const double c0 = lag0_variance(series);
  if (!(c0 > 0)) throw std::invalid_argument("ess: zero-variance series");

  // Initial-positive-sequence truncation over adjacent lag pairs.
  double sum = 0.0;
  for (long t = 1; t + 1 < n; t += 2) {
    const double r1 = lag_autocov(series, mean, t) / c0;
    const double r2 = lag_autocov(series, mean, t + 1) / c0;
    if (r1 + r2 <= 0.0) break;
    sum += r1 + r2;
  }
  const double tau = 1.0 + 2.0 * sum;
  const double frac = 1.0 / tau;
  return frac > 1.0 ? 1.0 : frac;
}

EssReport ess_report(const Samples& samples) {
  if (samples.size() < 100)
    throw std::invalid_argument("ess: need at least 100 samples");
  const Index dim = samples.front().size();
  EssReport report;
  report.fractions = Matrix::Constant(2, dim, std::nan(""));
  report.min_ess = 1.0;
  bool any = false;

  std::vector<double> series(samples.size());
  for (Index d = 0; d < dim; ++d) {
    for (int stat = 0; stat < 2; ++stat) {
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const double v = samples[i][d];
        series[i] = stat == 0 ? v : v * v;
      }
      if (!(lag0_variance(series) > 0)) {
        if (stat == 0) report.skipped_dims.push_back(d);
        continue;
      }
      const double frac = ess_scalar(series);
      if (frac >= 1.0) report.clamped = true;
      report.fractions(stat, d) = frac;
      report.min_ess = any ? std::min(report.min_ess, frac) : frac;
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("ess: all dimensions have zero variance");
  return report;
}

double ess(const Samples& samples) { return ess_report(samples).min_ess; }

std::vector<double> mode_occupancy(const Samples& samples,
                                   const std::vector<Vector>& centers, double radius) {
  if (!(radius > 0)) throw std::invalid_argument("mode_occupancy: radius must be positive");
  for (std::size_t i = 0; i < centers.size(); ++i)
    for (std::size_t j = i + 1; j < centers.size(); ++j)
      if ((centers[i] - centers[j]).norm() <= 2.0 * radius)
        throw std::invalid_argument("mode_occupancy: balls overlap at this radius");

  std::vector<double> fractions(centers.size() + 1, 0.0);
  for (const auto& x : samples) {
    bool assigned = false;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if ((x - centers[c]).norm() <= radius) {
        fractions[c] += 1.0;
        assigned = true;
        break;
      }
    }
    if (!assigned) fractions.back() += 1.0;
  }
  for (auto& f : fractions) f /= static_cast<double>(samples.size());
  return fractions;
}

double optimization_rmse(const Samples& samples, const Target& target) {
  if (target.optima.empty())
    throw std::invalid_argument("optimization_rmse: target has no known optima");
  if (samples.empty()) throw std::invalid_argument("optimization_rmse: no samples");
  double mean_cost = 0.0;
  for (const auto& x : samples) mean_cost += target.cost(x);
  mean_cost /= static_cast<double>(samples.size());
  return std::abs(mean_cost - target.optimum_cost());
}

}  // namespace slmc
