#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "slmc/rng.hpp"
#include "slmc/types.hpp"

namespace slmc {

struct Box {
  Vector lo, hi;
  bool contains(const Vector& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }
  Vector center() const { return 0.5 * (lo + hi); }
};

// An unnormalized tempered log-density log p~(x; beta) = beta * log p~(x).
// Evaluation outside the declared support is -inf at every beta; gradients
// are the smooth extension of the in-support expression.
struct Target {
  std::string name;
  Index dim = 0;
  double beta = 1.0;
  std::function<double(const Vector&)> log_unnorm_base;
  std::function<Vector(const Vector&)> grad_base;  // empty when unavailable
  // Exact sampler from the beta = 1 distribution, when one exists.
  std::function<Vector(RngStream&)> direct_sampler;
  std::optional<Vector> true_mean;
  std::vector<Vector> optima;        // known global optima (optimization targets)
  std::vector<Vector> mode_centers;  // known mode locations (occupancy metrics)
  double mode_radius = 0.0;
  std::optional<Box> support;

  bool has_gradient() const { return static_cast<bool>(grad_base); }
  bool has_direct_sampler() const { return static_cast<bool>(direct_sampler); }
  bool in_support(const Vector& x) const { return !support || support->contains(x); }

  double log_unnorm(const Vector& x) const {
    if (!in_support(x)) return kNegInf;
    const double l = log_unnorm_base(x);
    if (l == kNegInf) return kNegInf;
    return beta * l;
  }

  Vector grad_log_unnorm(const Vector& x) const { return beta * grad_base(x); }

  // Cost-function view used by the optimization targets (beta-independent).
  double cost(const Vector& x) const { return -log_unnorm_base(x); }
  double optimum_cost() const { return cost(optima.at(0)); }

  Target tempered(double beta_factor) const;
};

// Equal-weight isotropic mixture with variance 0.5 * sqrt(D / 100) and the
// standard center ladders for 2..5 clusters; overall mean is zero.
Target gaussian_mixture(int clusters, Index dim);

struct IcgData {
  Index dim = 100;
  std::uint64_t seed = 7;
  Matrix basis;        // orthonormal columns
  Vector eigenvalues;  // covariance eigenvalues, log-spaced 1e-2..1e2
};
IcgData make_icg_data(Index dim = 100, std::uint64_t seed = 7);
Target ill_conditioned_gaussian(const IcgData& data);

// Diagonal 2-D Gaussian with variances [1e2, 1e-2] rotated by pi/4.
Target strongly_correlated_gaussian();

// x1 ~ N(0, 10); x2 | x1 ~ N(0.03 (x1^2 - 100), 1).
Target banana();

// log p~(x) = -0.5 x.x + eta * sum_i cos(x_i / eta).
Target rough_well(Index dim = 2, double eta = 0.01);

struct SpectralConfig {
  int n_freq = 8;
  int n_obs = 50;
  double period = 1.0;
  double noise_std = 0.1;
  std::uint64_t seed = 1;
};
struct SpectralData {
  SpectralConfig cfg;
  Vector true_freq;     // (0.1, 0.4, ...) pattern
  Vector observations;  // y(kT), k = 0..n_obs-1
};
SpectralData make_spectral_data(const SpectralConfig& cfg);
// Posterior over frequencies on [0, 0.5]^N with A0 = 0, A_i = 1, phases 0.
Target spectral_posterior(const SpectralData& data);

struct SensorConfig {
  int n_unknown = 8;
  int n_known = 3;
  double radius = 0.3;     // R/L
  double noise_std = 0.02; // sigma_eps/L
  double side = 1.0;       // L
  std::uint64_t seed = 1;
};
struct SensorPair {
  int a = 0, b = 0;  // indices into [unknown..., known...] ordering
  bool observed = false;
  double distance = 0.0;  // noisy measurement when observed
};
struct SensorData {
  SensorConfig cfg;
  Matrix unknown_true;  // 2 x n_unknown
  Matrix known;         // 2 x n_known
  std::vector<SensorPair> pairs;  // all pairs touching an unknown sensor
};
SensorData make_sensor_data(const SensorConfig& cfg);
// 2N-dimensional posterior over unknown positions: Gaussian distance terms
// for observed pairs, non-observation terms for the rest, uniform box prior.
Target sensor_posterior(const SensorData& data);

Target himmelblau();
Target rastrigin(Index dim);
Target styblinski_tang(Index dim);

}  // namespace slmc
