#include "slmc/targets.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace slmc {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double log_sum_exp(const Array& v) {
  const double m = v.maxCoeff();
  if (m == kNegInf) return kNegInf;
  return m + std::log((v - m).exp().sum());
}

// log(1 - exp(-a)) for a >= 0.
double log1mexp(double a) {
  if (a <= 0) return kNegInf;
  if (a > M_LN2) return std::log1p(-std::exp(-a));
  return std::log(-std::expm1(-a));
}

Box cube(Index dim, double lo, double hi) {
  return Box{Vector::Constant(dim, lo), Vector::Constant(dim, hi)};
}

}  // namespace

Target Target::tempered(double beta_factor) const {
  if (!(beta_factor >= 0))
    throw std::invalid_argument("tempered: beta must be non-negative");
  Target t = *this;
  t.beta = beta * beta_factor;
  return t;
}

Target gaussian_mixture(int clusters, Index dim) {
  if (clusters < 2 || clusters > 5)
    throw std::invalid_argument("gaussian_mixture: clusters must be in {2,3,4,5}");
  if (dim < 1) throw std::invalid_argument("gaussian_mixture: dim must be >= 1");

  static const std::vector<std::vector<double>> kCenters = {
      {-1, 1}, {-1, 0, 1}, {-3, -1, 1, 3}, {-4, -2, 0, 2, 4}};
  const std::vector<double> centers = kCenters[clusters - 2];
  const double var = 0.5 * std::sqrt(static_cast<double>(dim) / 100.0);
  const double d = static_cast<double>(dim);
  const double log_norm =
      -std::log(static_cast<double>(clusters)) - 0.5 * d * std::log(kTwoPi * var);

  Target t;
  t.name = "gmm-" + std::to_string(clusters);
  t.dim = dim;
  t.true_mean = Vector::Zero(dim);
  for (double c : centers) t.mode_centers.push_back(Vector::Constant(dim, c));
  // Centers are equally spaced along the diagonal.
  t.mode_radius = 0.45 * (centers[1] - centers[0]) * std::sqrt(d);

  t.log_unnorm_base = [centers, var, log_norm](const Vector& x) {
    Array ex(centers.size());
    for (std::size_t c = 0; c < centers.size(); ++c)
      ex[static_cast<Index>(c)] =
          -(x.array() - centers[c]).matrix().squaredNorm() / (2.0 * var);
    return log_sum_exp(ex) + log_norm;
  };
  t.grad_base = [centers, var](const Vector& x) {
    Array ex(centers.size());
    for (std::size_t c = 0; c < centers.size(); ++c)
      ex[static_cast<Index>(c)] =
          -(x.array() - centers[c]).matrix().squaredNorm() / (2.0 * var);
    const double m = ex.maxCoeff();
    Array w = (ex - m).exp();
    w /= w.sum();
    Vector g = Vector::Zero(x.size());
    for (std::size_t c = 0; c < centers.size(); ++c)
      g += w[static_cast<Index>(c)] *
           (Vector::Constant(x.size(), centers[c]) - x) / var;
    return g;
  };
  const double sd = std::sqrt(var);
  t.direct_sampler = [centers, sd, dim](RngStream& rng) {
    const double c = centers[rng.uniform_index(centers.size())];
    return Vector(Vector::Constant(dim, c) + sd * rng.normal_vector(dim));
  };
  return t;
}

IcgData make_icg_data(Index dim, std::uint64_t seed) {
  IcgData data;
  data.dim = dim;
  data.seed = seed;
  RngStream rng = RngStream::from_seed(seed).fork("icg-basis");
  Matrix g(dim, dim);
  for (Index j = 0; j < dim; ++j)
    for (Index i = 0; i < dim; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < dim; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  data.basis = q;
  data.eigenvalues = Vector(dim);
  for (Index i = 0; i < dim; ++i) {
    const double frac = dim == 1 ? 0.0 : static_cast<double>(i) / (dim - 1);
    data.eigenvalues[i] = std::pow(10.0, -2.0 + 4.0 * frac);
  }
  return data;
}

namespace {

// Zero-mean Gaussian from Sigma = basis * diag(vars) * basis^T.
Target gaussian_from_eigendecomp(std::string name, const Matrix& basis,
                                 const Vector& vars) {
  auto precision = std::make_shared<Matrix>(basis * vars.cwiseInverse().asDiagonal() *
                                            basis.transpose());
  auto sqrt_cov = std::make_shared<Matrix>(
      basis * vars.cwiseSqrt().asDiagonal());
  Target t;
  t.name = std::move(name);
  t.dim = precision->rows();
  t.true_mean = Vector::Zero(t.dim);
  const double c = -0.5 * (vars.array().log().sum() +
                           static_cast<double>(t.dim) * std::log(kTwoPi));
  t.log_unnorm_base = [precision, c](const Vector& x) {
    return -0.5 * x.dot(*precision * x) + c;
  };
  t.grad_base = [precision](const Vector& x) { return Vector(-(*precision * x)); };
  t.direct_sampler = [sqrt_cov](RngStream& rng) {
    return Vector(*sqrt_cov * rng.normal_vector(sqrt_cov->cols()));
  };
  return t;
}

}  // namespace

Target ill_conditioned_gaussian(const IcgData& data) {
  return gaussian_from_eigendecomp("icg", data.basis, data.eigenvalues);
}

Target strongly_correlated_gaussian() {
  const double c = std::cos(M_PI / 4.0), s = std::sin(M_PI / 4.0);
  Matrix rot(2, 2);
  rot << c, -s, s, c;
  Vector vars(2);
  vars << 1e2, 1e-2;
  return gaussian_from_eigendecomp("scg", rot, vars);
}

Target banana() {
  Target t;
  t.name = "banana";
  t.dim = 2;
  const double var1 = 10.0;
  t.true_mean = Vector(2);
  (*t.true_mean) << 0.0, 0.03 * (var1 - 100.0);
  t.log_unnorm_base = [var1](const Vector& x) {
    const double m = 0.03 * (x[0] * x[0] - 100.0);
    return -x[0] * x[0] / (2.0 * var1) - 0.5 * (x[1] - m) * (x[1] - m);
  };
  t.grad_base = [var1](const Vector& x) {
    const double m = 0.03 * (x[0] * x[0] - 100.0);
    Vector g(2);
    g[0] = -x[0] / var1 + (x[1] - m) * 0.06 * x[0];
    g[1] = -(x[1] - m);
    return g;
  };
  t.direct_sampler = [var1](RngStream& rng) {
    Vector x(2);
    x[0] = std::sqrt(var1) * rng.normal();
    x[1] = 0.03 * (x[0] * x[0] - 100.0) + rng.normal();
    return x;
  };
  return t;
}

Target rough_well(Index dim, double eta) {
  Target t;
  t.name = "rough-well";
  t.dim = dim;
  t.true_mean = Vector::Zero(dim);
  t.log_unnorm_base = [eta](const Vector& x) {
    return -0.5 * x.squaredNorm() + eta * (x.array() / eta).cos().sum();
  };
  t.grad_base = [eta](const Vector& x) {
    return Vector(-x.array() - (x.array() / eta).sin());
  };
  // Rejection from N(0, I): the cosine perturbation is bounded by eta per dim.
  t.direct_sampler = [eta, dim](RngStream& rng) {
    for (;;) {
      Vector x = rng.normal_vector(dim);
      const double log_accept =
          eta * ((x.array() / eta).cos().sum() - static_cast<double>(dim));
      if (std::log(rng.uniform_pos()) < log_accept) return x;
    }
  };
  return t;
}

SpectralData make_spectral_data(const SpectralConfig& cfg) {
  if (cfg.n_freq < 1 || cfg.n_obs < 1)
    throw std::invalid_argument("spectral: need n_freq >= 1 and n_obs >= 1");
  SpectralData data;
  data.cfg = cfg;
  data.true_freq = Vector(cfg.n_freq);
  for (int i = 0; i < cfg.n_freq; ++i) data.true_freq[i] = (i % 2 == 0) ? 0.1 : 0.4;
  RngStream rng = RngStream::from_seed(cfg.seed).fork("spectral-noise");
  data.observations = Vector(cfg.n_obs);
  for (int k = 0; k < cfg.n_obs; ++k) {
    double clean = 0.0;
    for (int i = 0; i < cfg.n_freq; ++i)
      clean += std::cos(kTwoPi * data.true_freq[i] * k * cfg.period);
    data.observations[k] = clean + cfg.noise_std * rng.normal();
  }
  return data;
}

Target spectral_posterior(const SpectralData& data) {
  const auto cfg = data.cfg;
  const Vector y = data.observations;
  Target t;
  t.name = "spectral";
  t.dim = cfg.n_freq;
  t.support = cube(cfg.n_freq, 0.0, 0.5);
  t.true_mean = Vector::Constant(cfg.n_freq, data.true_freq.mean());
  t.log_unnorm_base = [cfg, y](const Vector& f) {
    double q = 0.0;
    for (int k = 0; k < cfg.n_obs; ++k) {
      double m = 0.0;
      for (Index i = 0; i < f.size(); ++i)
        m += std::cos(kTwoPi * f[i] * k * cfg.period);
      const double r = y[k] - m;
      q += r * r;
    }
    return -q / (2.0 * cfg.noise_std * cfg.noise_std);
  };
  t.grad_base = [cfg, y](const Vector& f) {
    Vector g = Vector::Zero(f.size());
    for (int k = 0; k < cfg.n_obs; ++k) {
      double m = 0.0;
      for (Index i = 0; i < f.size(); ++i)
        m += std::cos(kTwoPi * f[i] * k * cfg.period);
      const double r = y[k] - m;
      for (Index i = 0; i < f.size(); ++i)
        g[i] -= r * kTwoPi * k * cfg.period * std::sin(kTwoPi * f[i] * k * cfg.period) /
                (cfg.noise_std * cfg.noise_std);
    }
    return g;
  };
  return t;
}

SensorData make_sensor_data(const SensorConfig& cfg) {
  SensorData data;
  data.cfg = cfg;
  RngStream rng = RngStream::from_seed(cfg.seed).fork("sensor-instance");
  const int n_total = cfg.n_unknown + cfg.n_known;
  Matrix all(2, n_total);
  for (int s = 0; s < n_total; ++s) {
    all(0, s) = rng.uniform_range(0.0, cfg.side);
    all(1, s) = rng.uniform_range(0.0, cfg.side);
  }
  data.unknown_true = all.leftCols(cfg.n_unknown);
  data.known = all.rightCols(cfg.n_known);
  for (int a = 0; a < n_total; ++a) {
    for (int b = a + 1; b < n_total; ++b) {
      if (a >= cfg.n_unknown && b >= cfg.n_unknown) continue;  // both known
      const double d = (all.col(a) - all.col(b)).norm();
      const double p_obs = std::exp(-0.5 * d * d / (cfg.radius * cfg.radius));
      SensorPair pair;
      pair.a = a;
      pair.b = b;
      pair.observed = rng.uniform() < p_obs;
      pair.distance = pair.observed ? d + cfg.noise_std * rng.normal() : 0.0;
      data.pairs.push_back(pair);
    }
  }
  return data;
}

Target sensor_posterior(const SensorData& data) {
  const auto cfg = data.cfg;
  const auto pairs = data.pairs;
  const Matrix known = data.known;
  const int n_unknown = cfg.n_unknown;
  Target t;
  t.name = "sensor";
  t.dim = 2 * n_unknown;
  t.support = cube(t.dim, 0.0, cfg.side);
  Vector truth(t.dim);
  for (int s = 0; s < n_unknown; ++s) {
    truth[2 * s] = data.unknown_true(0, s);
    truth[2 * s + 1] = data.unknown_true(1, s);
  }
  // Reference point for error metrics; the exact posterior mean is unknown.
  t.true_mean = truth;
  t.log_unnorm_base = [cfg, pairs, known, n_unknown](const Vector& x) {
    auto position = [&](int s) -> Eigen::Vector2d {
      if (s < n_unknown) return {x[2 * s], x[2 * s + 1]};
      return known.col(s - n_unknown);
    };
    const double r2 = cfg.radius * cfg.radius;
    const double s2 = cfg.noise_std * cfg.noise_std;
    double lp = 0.0;
    for (const auto& pair : pairs) {
      const double d = (position(pair.a) - position(pair.b)).norm();
      if (pair.observed) {
        const double r = pair.distance - d;
        lp += -0.5 * r * r / s2 - 0.5 * d * d / r2;
      } else {
        lp += log1mexp(0.5 * d * d / r2);
      }
    }
    return lp;
  };
  return t;
}

Target himmelblau() {
  Target t;
  t.name = "himmelblau";
  t.dim = 2;
  t.support = cube(2, -6.0, 6.0);
  const std::vector<std::pair<double, double>> opts = {
      {3.0, 2.0},
      {-2.805118, 3.131312},
      {-3.779310, -3.283186},
      {3.584428, -1.848126}};
  for (auto [a, b] : opts) {
    Vector v(2);
    v << a, b;
    t.optima.push_back(v);
    t.mode_centers.push_back(v);
  }
  t.mode_radius = 1.0;
  t.log_unnorm_base = [](const Vector& x) {
    const double a = x[0] * x[0] + x[1] - 11.0;
    const double b = x[0] + x[1] * x[1] - 7.0;
    return -(a * a + b * b);
  };
  t.grad_base = [](const Vector& x) {
    const double a = x[0] * x[0] + x[1] - 11.0;
    const double b = x[0] + x[1] * x[1] - 7.0;
    Vector g(2);
    g[0] = -(4.0 * a * x[0] + 2.0 * b);
    g[1] = -(2.0 * a + 4.0 * b * x[1]);
    return g;
  };
  return t;
}

Target rastrigin(Index dim) {
  if (dim < 1) throw std::invalid_argument("rastrigin: dim must be >= 1");
  Target t;
  t.name = "rastrigin";
  t.dim = dim;
  t.support = cube(dim, -5.12, 5.12);
  t.optima.push_back(Vector::Zero(dim));
  t.mode_centers.push_back(Vector::Zero(dim));
  t.mode_radius = 0.4;
  t.log_unnorm_base = [dim](const Vector& x) {
    const double f = 10.0 * static_cast<double>(dim) +
                     (x.array().square() - 10.0 * (kTwoPi * x.array()).cos()).sum();
    return -f;
  };
  t.grad_base = [](const Vector& x) {
    return Vector(-(2.0 * x.array() + 10.0 * kTwoPi * (kTwoPi * x.array()).sin()));
  };
  return t;
}

Target styblinski_tang(Index dim) {
  if (dim < 1) throw std::invalid_argument("styblinski_tang: dim must be >= 1");
  Target t;
  t.name = "styblinski-tang";
  t.dim = dim;
  t.support = cube(dim, -5.0, 5.0);
  t.optima.push_back(Vector::Constant(dim, -2.90353401818596));
  t.mode_centers = t.optima;
  t.mode_radius = 1.0;
  t.log_unnorm_base = [](const Vector& x) {
    const double f =
        0.5 * (x.array().pow(4) - 16.0 * x.array().square() + 5.0 * x.array()).sum();
    return -f;
  };
  t.grad_base = [](const Vector& x) {
    return Vector(-0.5 * (4.0 * x.array().pow(3) - 32.0 * x.array() + 5.0));
  };
  return t;
}

}  // namespace slmc
