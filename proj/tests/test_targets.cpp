#include <cmath>

#include "doctest.h"
#include "slmc/targets.hpp"

using namespace slmc;

namespace {

// Dense-formula oracle for an equal-weight isotropic mixture.
double mixture_log_density(const Vector& x, const std::vector<Vector>& centers,
                           double var) {
  const double d = static_cast<double>(x.size());
  double acc = 0.0;
  for (const auto& c : centers)
    acc += std::exp(-(x - c).squaredNorm() / (2.0 * var)) /
           (centers.size() * std::pow(2.0 * M_PI * var, d / 2.0));
  return std::log(acc);
}

void check_gradient(const Target& t, const Vector& x, double tol = 1e-5) {
  const double h = 1e-6;
  Vector g = t.grad_log_unnorm(x);
  for (Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (t.log_unnorm(xp) - t.log_unnorm(xm)) / (2 * h);
    const double scale = std::max({1.0, std::abs(fd), std::abs(g[i])});
    CHECK(std::abs(fd - g[i]) / scale < tol);
  }
}

}  // namespace

TEST_CASE("gmm: centers, variance and the overall zero mean") {
  Target t3 = gaussian_mixture(3, 7);
  REQUIRE(t3.true_mean.has_value());
  CHECK(t3.true_mean->isZero(0.0));
  CHECK(t3.mode_centers.size() == 3);

  // D = 100 puts the cluster variance at exactly 0.5.
  Target t2 = gaussian_mixture(2, 100);
  Vector x = Vector::Constant(100, 0.2);
  std::vector<Vector> centers = {Vector::Constant(100, -1.0),
                                 Vector::Constant(100, 1.0)};
  CHECK(t2.log_unnorm(x) ==
        doctest::Approx(mixture_log_density(x, centers, 0.5)).epsilon(1e-12));
}

TEST_CASE("gmm: two-cluster hand evaluation at (1,1)") {
  Target t = gaussian_mixture(2, 2);
  Vector x(2);
  x << 1.0, 1.0;
  const double var = 0.5 * std::sqrt(2.0 / 100.0);
  std::vector<Vector> centers = {Vector::Constant(2, -1.0), Vector::Constant(2, 1.0)};
  CHECK(t.log_unnorm(x) ==
        doctest::Approx(mixture_log_density(x, centers, var)).epsilon(1e-12));
}

TEST_CASE("gmm: symmetric center sets give an even density") {
  RngStream rng = RngStream::from_seed(4);
  for (int clusters : {2, 3, 4, 5}) {
    Target t = gaussian_mixture(clusters, 3);
    for (int trial = 0; trial < 10; ++trial) {
      Vector x = rng.normal_vector(3);
      CHECK(t.log_unnorm(x) == doctest::Approx(t.log_unnorm(-x)).epsilon(1e-12));
    }
  }
}

TEST_CASE("gmm: unsupported cluster counts are rejected") {
  CHECK_THROWS_AS(gaussian_mixture(1, 2), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_mixture(6, 2), std::invalid_argument);
}

TEST_CASE("scg: mode at the origin with zero gradient") {
  Target t = strongly_correlated_gaussian();
  CHECK(t.grad_log_unnorm(Vector::Zero(2)).isZero(1e-14));
  RngStream rng = RngStream::from_seed(5);
  for (int i = 0; i < 10; ++i) {
    Vector x = rng.normal_vector(2);
    CHECK(t.log_unnorm(Vector::Zero(2)) >= t.log_unnorm(x));
  }
}

TEST_CASE("banana: conditional structure and mean") {
  Target t = banana();
  // At x1 = 10 the conditional mean of x2 is 0.03 (100 - 100) = 0.
  Vector x(2);
  x << 10.0, 0.0;
  CHECK(t.grad_log_unnorm(x)[1] == doctest::Approx(0.0).epsilon(1e-14));
  REQUIRE(t.true_mean.has_value());
  CHECK((*t.true_mean)[0] == 0.0);
  CHECK((*t.true_mean)[1] == doctest::Approx(-2.7).epsilon(1e-12));
}

TEST_CASE("rough well: value at the origin is 2 eta") {
  Target t = rough_well(2, 0.01);
  CHECK(t.log_unnorm(Vector::Zero(2)) == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("spectral: permutation symmetry and box support") {
  SpectralData data = make_spectral_data({});
  Target t = spectral_posterior(data);
  RngStream rng = RngStream::from_seed(6);
  Vector f(8);
  for (Index i = 0; i < 8; ++i) f[i] = 0.5 * rng.uniform();
  Vector perm(8);
  perm << f[3], f[0], f[7], f[1], f[2], f[6], f[4], f[5];
  CHECK(t.log_unnorm(f) == doctest::Approx(t.log_unnorm(perm)).epsilon(1e-9));

  Vector outside = f;
  outside[2] = 0.7;
  CHECK(t.log_unnorm(outside) == kNegInf);
}

TEST_CASE("spectral: log-density differences scale as 1/sigma^2") {
  SpectralData data = make_spectral_data({});
  Target t1 = spectral_posterior(data);
  SpectralData wide = data;
  wide.cfg.noise_std *= 2.0;
  Target t2 = spectral_posterior(wide);
  RngStream rng = RngStream::from_seed(7);
  Vector f1(8), f2(8);
  for (Index i = 0; i < 8; ++i) {
    f1[i] = 0.5 * rng.uniform();
    f2[i] = 0.5 * rng.uniform();
  }
  const double d1 = t1.log_unnorm(f1) - t1.log_unnorm(f2);
  const double d2 = t2.log_unnorm(f1) - t2.log_unnorm(f2);
  CHECK(d1 == doctest::Approx(4.0 * d2).epsilon(1e-9));
}

TEST_CASE("sensor: no pairs means a flat posterior on the box") {
  SensorData data = make_sensor_data({});
  data.pairs.clear();
  Target t = sensor_posterior(data);
  RngStream rng = RngStream::from_seed(8);
  Vector a(16), b(16);
  for (Index i = 0; i < 16; ++i) {
    a[i] = rng.uniform();
    b[i] = rng.uniform();
  }
  CHECK(t.log_unnorm(a) == t.log_unnorm(b));
  CHECK(t.log_unnorm(a) == 0.0);
}

TEST_CASE("sensor: an exact observation peaks at the true distance") {
  SensorData data = make_sensor_data({});
  data.pairs.clear();
  SensorPair pair;
  pair.a = 0;
  pair.b = 1;
  pair.observed = true;
  pair.distance = 0.4;
  data.pairs.push_back(pair);
  Target t = sensor_posterior(data);
  auto lp_at_gap = [&](double gap) {
    Vector x = Vector::Constant(16, 0.5);
    x[0] = 0.5 - gap / 2;
    x[2] = 0.5 + gap / 2;
    return t.log_unnorm(x);
  };
  CHECK(lp_at_gap(0.4) > lp_at_gap(0.35));
  CHECK(lp_at_gap(0.4) > lp_at_gap(0.45));
}

TEST_CASE("sensor: the generated truth scores above random layouts") {
  SensorData data = make_sensor_data({});
  Target t = sensor_posterior(data);
  REQUIRE(t.true_mean.has_value());
  const double truth_lp = t.log_unnorm(*t.true_mean);
  RngStream rng = RngStream::from_seed(9);
  int wins = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Vector x(16);
    for (Index i = 0; i < 16; ++i) x[i] = rng.uniform();
    if (truth_lp > t.log_unnorm(x)) wins += 1;
  }
  CHECK(wins >= 99);
}

TEST_CASE("optimization targets: known optima and boxes") {
  Target h = himmelblau();
  Vector star(2);
  star << 3.0, 2.0;
  CHECK(h.cost(star) == 0.0);
  for (const auto& opt : h.optima) CHECK(h.cost(opt) < 1e-7);
  CHECK(h.optima.size() == 4);
  CHECK_FALSE(h.in_support(Vector::Constant(2, 6.5)));

  Target r = rastrigin(4);
  CHECK(r.cost(Vector::Zero(4)) == 0.0);

  Target s = styblinski_tang(2);
  CHECK(s.cost(s.optima[0]) == doctest::Approx(-39.16616 * 2).epsilon(1e-5));
}

TEST_CASE("tempering: exact scaling, uniform limit, and guards") {
  Target base = gaussian_mixture(2, 3);
  RngStream rng = RngStream::from_seed(10);
  Vector x = rng.normal_vector(3);

  CHECK(base.tempered(1.0).log_unnorm(x) == base.log_unnorm(x));
  CHECK(base.tempered(0.5).log_unnorm(x) == 0.5 * base.log_unnorm(x));
  CHECK(base.tempered(0.0).log_unnorm(x) == 0.0);
  CHECK_THROWS_AS(base.tempered(-0.1), std::invalid_argument);

  Target boxed = himmelblau();
  Vector outside = Vector::Constant(2, 7.0);
  CHECK(boxed.tempered(0.0).log_unnorm(outside) == kNegInf);
  CHECK(boxed.tempered(0.5).log_unnorm(outside) == kNegInf);
  // Gradients scale with beta as well.
  Vector inside(2);
  inside << 1.0, -2.0;
  CHECK(boxed.tempered(0.5).grad_log_unnorm(inside) ==
        0.5 * boxed.grad_log_unnorm(inside));
}

TEST_CASE("analytic gradients agree with finite differences") {
  RngStream rng = RngStream::from_seed(11);
  std::vector<Target> targets;
  targets.push_back(gaussian_mixture(3, 3));
  targets.push_back(ill_conditioned_gaussian(make_icg_data(5, 3)));
  targets.push_back(strongly_correlated_gaussian());
  targets.push_back(banana());
  targets.push_back(rough_well(2, 0.01));
  targets.push_back(spectral_posterior(make_spectral_data({})));
  targets.push_back(himmelblau());
  targets.push_back(rastrigin(3));
  targets.push_back(styblinski_tang(3));
  for (const auto& t : targets) {
    for (int trial = 0; trial < 5; ++trial) {
      Vector x(t.dim);
      if (t.support) {
        for (Index i = 0; i < t.dim; ++i)
          x[i] = t.support->lo[i] +
                 0.8 * (t.support->hi[i] - t.support->lo[i]) * (0.1 + rng.uniform());
        x = x.cwiseMin(t.support->hi * 0.9).cwiseMax(t.support->lo * 0.9);
      } else {
        x = rng.normal_vector(t.dim);
      }
      check_gradient(t, x);
    }
  }
}

TEST_CASE("direct samplers match their targets' first moments") {
  RngStream rng = RngStream::from_seed(12);
  Target t = gaussian_mixture(3, 2);
  const int n = 50000;
  Vector mean = Vector::Zero(2);
  for (int i = 0; i < n; ++i) mean += t.direct_sampler(rng);
  mean /= n;
  CHECK(mean.cwiseAbs().maxCoeff() < 0.03);

  Target b = banana();
  Vector bmean = Vector::Zero(2);
  for (int i = 0; i < n; ++i) bmean += b.direct_sampler(rng);
  bmean /= n;
  CHECK(std::abs(bmean[1] + 2.7) < 0.05);
}
