#include <cmath>

#include "doctest.h"
#include "slmc/metrics.hpp"
#include "slmc/rng.hpp"

using namespace slmc;

TEST_CASE("rmse: hand values") {
  Vector a(2), b(2);
  a << 1, 1;
  b << 0, 0;
  CHECK(rmse(a, a) == 0.0);
  CHECK(rmse(Vector::Constant(1, 1.0), Vector::Zero(1)) == 1.0);
  CHECK(rmse(a, b) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(rmse(a, Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("rem: hand values and the zero-denominator guard") {
  Vector star(2), est(2);
  star << 0.1, 0.4;
  est << 0.2, 0.4;
  CHECK(rem(star, star) == 0.0);
  CHECK(rem(2 * star, star) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rem(est, star) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK_THROWS_AS(rem(est, Vector::Zero(2)), std::invalid_argument);
}

TEST_CASE("rmse and rem are invariant under joint dimension permutation") {
  RngStream rng = RngStream::from_seed(1);
  Vector a = rng.normal_vector(4), b = rng.normal_vector(4);
  b.array() += 1.5;  // keep the denominator away from zero
  Vector ap(4), bp(4);
  ap << a[2], a[0], a[3], a[1];
  bp << b[2], b[0], b[3], b[1];
  CHECK(rmse(a, b) == doctest::Approx(rmse(ap, bp)).epsilon(1e-12));
  CHECK(rem(a, b) == doctest::Approx(rem(ap, bp)).epsilon(1e-12));
}

TEST_CASE("running moments equal batch recomputation") {
  RngStream rng = RngStream::from_seed(2);
  RunningMoments m;
  Vector sum = Vector::Zero(3), sumsq = Vector::Zero(3);
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    Vector x = rng.normal_vector(3);
    m.update(x);
    sum += x;
    sumsq += x.cwiseProduct(x);
  }
  CHECK(m.count == n);
  CHECK((m.mean - sum / n).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((m.second_moment - sumsq / n).cwiseAbs().maxCoeff() < 1e-12);

  RunningMoments one;
  Vector x0 = rng.normal_vector(3);
  one.update(x0);
  CHECK(one.mean == x0);
}

TEST_CASE("ess: iid stream is close to one") {
  RngStream rng = RngStream::from_seed(3);
  Samples samples;
  for (int i = 0; i < 10000; ++i) samples.push_back(rng.normal_vector(2));
  const double e = ess(samples);
  CHECK(e > 0.9);
  CHECK(e <= 1.0);
}

TEST_CASE("ess: AR(1) with phi = 0.5 has a third of the nominal samples") {
  RngStream rng = RngStream::from_seed(4);
  const double phi = 0.5;
  std::vector<double> series(100000);
  double x = 0.0;
  for (auto& v : series) {
    x = phi * x + rng.normal();
    v = x;
  }
  const double e = ess_scalar(series);
  CHECK(std::abs(e - 1.0 / 3.0) / (1.0 / 3.0) < 0.15);
}

TEST_CASE("ess: antithetic alternation clamps to one") {
  std::vector<double> series(1000);
  for (std::size_t i = 0; i < series.size(); ++i) series[i] = i % 2 == 0 ? 1.0 : -1.0;
  CHECK(ess_scalar(series) == 1.0);
}

TEST_CASE("ess: zero-variance dimensions are skipped with a warning flag") {
  RngStream rng = RngStream::from_seed(5);
  Samples samples;
  for (int i = 0; i < 500; ++i) {
    Vector x(2);
    x[0] = rng.normal();
    x[1] = 3.0;  // constant dimension
    samples.push_back(x);
  }
  EssReport report = ess_report(samples);
  REQUIRE(report.skipped_dims.size() == 1);
  CHECK(report.skipped_dims[0] == 1);
  CHECK(report.min_ess > 0.0);
}

TEST_CASE("ess: needs at least 100 samples") {
  Samples samples(50, Vector::Zero(1));
  CHECK_THROWS_AS(ess(samples), std::invalid_argument);
}

TEST_CASE("mode occupancy: assignment, residual, and the overlap guard") {
  std::vector<Vector> centers = {Vector::Zero(2), Vector::Constant(2, 5.0)};
  Samples at_zero(100, Vector::Zero(2));
  auto occ = mode_occupancy(at_zero, centers, 1.0);
  CHECK(occ[0] == 1.0);
  CHECK(occ[1] == 0.0);
  CHECK(occ[2] == 0.0);

  RngStream rng = RngStream::from_seed(6);
  Samples mixed;
  for (int i = 0; i < 20000; ++i) {
    Vector x = 0.3 * rng.normal_vector(2);
    if (i % 2 == 1) x.array() += 5.0;
    mixed.push_back(x);
  }
  occ = mode_occupancy(mixed, centers, 1.5);
  CHECK(std::abs(occ[0] - 0.5) < 0.02);
  CHECK(std::abs(occ[1] - 0.5) < 0.02);

  CHECK_THROWS_AS(mode_occupancy(at_zero, centers, 3.0), std::invalid_argument);
}

TEST_CASE("optimization rmse: exact optimum and a shifted sample") {
  Target h = himmelblau();
  Samples at_opt(10, h.optima[0]);
  CHECK(optimization_rmse(at_opt, h) == 0.0);

  Vector x(2);
  x << 3.1, 2.0;
  Samples one(1, x);
  CHECK(optimization_rmse(one, h) ==
        doctest::Approx(h.cost(x) - h.optimum_cost()).epsilon(1e-12));
}
