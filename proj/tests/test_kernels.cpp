#include <cmath>

#include "doctest.h"
#include "slmc/kernels.hpp"

using namespace slmc;

namespace {

// A discrete target on lattice points {0, 1, ..., n-1} embedded in 1-D.
Target lattice_target(const std::vector<double>& probs) {
  Target t;
  t.name = "lattice";
  t.dim = 1;
  auto p = probs;
  t.log_unnorm_base = [p](const Vector& x) {
    const long i = std::lround(x[0]);
    if (i < 0 || i >= static_cast<long>(p.size()) || x[0] != double(i))
      return kNegInf;
    return std::log(p[i]);
  };
  return t;
}

IndependenceProposal uniform_lattice_proposal(int n) {
  IndependenceProposal prop;
  prop.sample = [n](RngStream& rng) {
    return Vector::Constant(1, static_cast<double>(rng.uniform_index(n)));
  };
  prop.log_density = [](const Vector&) { return 0.0; };
  return prop;
}

Target standard_normal(Index dim) {
  Target t;
  t.name = "std-normal";
  t.dim = dim;
  t.true_mean = Vector::Zero(dim);
  t.log_unnorm_base = [](const Vector& x) { return -0.5 * x.squaredNorm(); };
  t.grad_base = [](const Vector& x) { return Vector(-x); };
  return t;
}

}  // namespace

TEST_CASE("metropolis_accept: uphill always, -inf never") {
  RngStream rng = RngStream::from_seed(1);
  for (int i = 0; i < 1000; ++i) {
    CHECK(metropolis_accept(0.0, rng));
    CHECK(metropolis_accept(2.5, rng));
    CHECK_FALSE(metropolis_accept(kNegInf, rng));
    CHECK_FALSE(metropolis_accept(std::nan(""), rng));
  }
}

TEST_CASE("mh_step: out-of-support proposals auto-reject and counters stay sane") {
  Target t = himmelblau();
  ChainState chain;
  chain.x = Vector::Zero(2);
  chain.rng = RngStream::from_seed(2);
  for (int i = 0; i < 500; ++i) mh_step(chain, t, 0.5);
  CHECK(chain.proposal_count == 500);
  CHECK(chain.accept_count <= chain.proposal_count);
  CHECK(chain.t == 500);
  CHECK(t.in_support(chain.x));
}

TEST_CASE("discrete 3-state adapter matches the brute-force stationary law") {
  // Metropolis on {0,1,2} with a symmetric uniform proposal; the explicit
  // transition matrix is the oracle.
  const std::vector<double> probs = {0.5, 0.3, 0.2};
  Target t = lattice_target(probs);
  const int n = 3;

  Matrix p_matrix = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      p_matrix(i, j) = (1.0 / n) * std::min(1.0, probs[j] / probs[i]);
    }
    p_matrix(i, i) = 1.0 - p_matrix.row(i).sum();
  }
  // Detailed balance of the oracle itself.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      CHECK(std::abs(probs[i] * p_matrix(i, j) - probs[j] * p_matrix(j, i)) < 1e-12);

  ChainState chain;
  chain.x = Vector::Zero(1);
  chain.rng = RngStream::from_seed(3);
  IndependenceProposal prop = uniform_lattice_proposal(n);
  std::vector<long> counts(n, 0);
  const long steps = 1000000;
  for (long s = 0; s < steps; ++s) {
    slmc_step(chain, t, prop);
    counts[std::lround(chain.x[0])] += 1;
  }
  for (int i = 0; i < n; ++i)
    CHECK(std::abs(counts[i] / double(steps) - probs[i]) < 0.01);
}

TEST_CASE("leapfrog: reversible to 1e-10 and exact in the zero-step limit") {
  Target t = standard_normal(3);
  RngStream rng = RngStream::from_seed(4);
  Vector x0 = rng.normal_vector(3);
  Vector p0 = rng.normal_vector(3);

  Vector x = x0, p = p0;
  leapfrog(t, x, p, 0.1, 25);
  p = -p;
  leapfrog(t, x, p, 0.1, 25);
  p = -p;
  CHECK((x - x0).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((p - p0).cwiseAbs().maxCoeff() < 1e-10);

  x = x0;
  p = p0;
  leapfrog(t, x, p, 1e-9, 5);
  const double h0 = -t.log_unnorm(x0) + 0.5 * p0.squaredNorm();
  const double h1 = -t.log_unnorm(x) + 0.5 * p.squaredNorm();
  CHECK(std::abs(h1 - h0) < 1e-12);
  RngStream accept_rng = RngStream::from_seed(5);
  CHECK(metropolis_accept(h0 - h1, accept_rng));
}

TEST_CASE("hmc: 1-D standard normal variance within 3%") {
  Target t = standard_normal(1);
  ChainState chain;
  chain.x = Vector::Zero(1);
  chain.rng = RngStream::from_seed(6);
  const long steps = 100000;
  double sum = 0, sumsq = 0;
  for (long s = 0; s < steps; ++s) {
    hmc_step(chain, t, 0.4, 10);
    sum += chain.x[0];
    sumsq += chain.x[0] * chain.x[0];
  }
  const double var = sumsq / steps - (sum / steps) * (sum / steps);
  CHECK(std::abs(var - 1.0) < 0.03);
  CHECK(chain.acceptance_rate() > 0.8);
}

TEST_CASE("hmc: gradient-free targets are rejected") {
  Target t = lattice_target({0.5, 0.5});
  ChainState chain;
  chain.x = Vector::Zero(1);
  chain.rng = RngStream::from_seed(7);
  CHECK_THROWS_AS(hmc_step(chain, t, 0.1, 5), std::invalid_argument);
}

TEST_CASE("slmc: self-proposal is always accepted") {
  Vector c = Vector::Constant(2, 1.5);
  Target t = standard_normal(2);
  IndependenceProposal prop;
  prop.sample = [c](RngStream&) { return c; };
  prop.log_density = [](const Vector&) { return 0.0; };
  ChainState chain;
  chain.x = c;
  chain.rng = RngStream::from_seed(8);
  for (int i = 0; i < 1000; ++i) slmc_step(chain, t, prop);
  CHECK(chain.accept_count == 1000);
}

TEST_CASE("slmc: a perfect proposal density accepts every move") {
  Target t = standard_normal(3);
  IndependenceProposal prop;
  prop.sample = [](RngStream& rng) { return rng.normal_vector(3); };
  prop.log_density = [](const Vector& x) { return -0.5 * x.squaredNorm(); };
  ChainState chain;
  chain.x = Vector::Zero(3);
  chain.rng = RngStream::from_seed(9);
  const long steps = 10000;
  for (long s = 0; s < steps; ++s) slmc_step(chain, t, prop);
  CHECK(chain.accept_count == steps);
}

TEST_CASE("slmc: proposal value is independent of the current state") {
  Target t = standard_normal(2);
  IndependenceProposal prop;
  prop.sample = [](RngStream& rng) { return rng.normal_vector(2); };
  prop.log_density = [](const Vector& x) { return -0.5 * x.squaredNorm(); };
  ChainState a, b;
  a.x = Vector::Zero(2);
  b.x = Vector::Constant(2, 40.0);
  a.rng = RngStream::from_seed(10).fork("s");
  b.rng = RngStream::from_seed(10).fork("s");
  slmc_step(a, t, prop);
  slmc_step(b, t, prop);
  // Perfect density: both moves accepted, so both states equal the shared
  // proposal drawn from the identical stream position.
  CHECK(a.x == b.x);
}

TEST_CASE("exchange: equal temperatures or equal states always swap") {
  Target t = standard_normal(1);
  RngStream rng = RngStream::from_seed(11);
  for (int i = 0; i < 1000; ++i) {
    ChainState a, b;
    a.x = Vector::Constant(1, 0.3 * i);
    b.x = Vector::Constant(1, -0.7 * i);
    CHECK(exchange_step(a, 0.5, b, 0.5, t, rng));
    ChainState c, d;
    c.x = Vector::Constant(1, 1.0);
    d.x = Vector::Constant(1, 1.0);
    CHECK(exchange_step(c, 0.2, d, 1.0, t, rng));
  }
}

TEST_CASE("exchange: preserves per-temperature marginals on a tempered Gaussian") {
  Target t = standard_normal(1);
  const double beta_hot = 0.5, beta_cold = 1.0;
  ChainState hot, cold;
  hot.x = Vector::Zero(1);
  cold.x = Vector::Zero(1);
  hot.rng = RngStream::from_seed(12).fork("hot");
  cold.rng = RngStream::from_seed(12).fork("cold");
  RngStream swap_rng = RngStream::from_seed(12).fork("swap");
  const long steps = 100000;
  double hot_sq = 0, cold_sq = 0;
  for (long s = 0; s < steps; ++s) {
    mh_step(hot, t.tempered(beta_hot), 2.0);
    mh_step(cold, t.tempered(beta_cold), 1.5);
    if (s % 2 == 0) exchange_step(hot, beta_hot, cold, beta_cold, t, swap_rng);
    hot_sq += hot.x[0] * hot.x[0];
    cold_sq += cold.x[0] * cold.x[0];
  }
  CHECK(std::abs(hot_sq / steps - 1.0 / beta_hot) / (1.0 / beta_hot) < 0.05);
  CHECK(std::abs(cold_sq / steps - 1.0 / beta_cold) / (1.0 / beta_cold) < 0.05);
}

TEST_CASE("estimate_acceptance_rate: perfect and impossible proposals") {
  Target t = standard_normal(2);
  IndependenceProposal perfect;
  perfect.sample = [](RngStream& rng) { return rng.normal_vector(2); };
  perfect.log_density = [](const Vector& x) { return -0.5 * x.squaredNorm(); };
  CHECK(estimate_acceptance_rate(perfect, t, 2000, RngStream::from_seed(13)) == 1.0);

  Target boxed = himmelblau();
  IndependenceProposal outside;
  outside.sample = [](RngStream&) { return Vector::Constant(2, 100.0); };
  outside.log_density = [](const Vector&) { return 0.0; };
  CHECK(estimate_acceptance_rate(outside, boxed, 500, RngStream::from_seed(14)) ==
        0.0);
}

TEST_CASE("calibration: RW sigma lands in the target acceptance band") {
  Target t = standard_normal(2);
  const double sigma =
      calibrate_rw_sigma(t, Vector::Zero(2), RngStream::from_seed(15));
  ChainState chain;
  chain.x = Vector::Zero(2);
  chain.rng = RngStream::from_seed(16);
  for (int i = 0; i < 4000; ++i) mh_step(chain, t, sigma);
  CHECK(chain.acceptance_rate() > 0.10);
  CHECK(chain.acceptance_rate() < 0.30);
}

TEST_CASE("calibration: HMC step size lands in the target band") {
  Target t = standard_normal(2);
  const double eps =
      calibrate_hmc_step_size(t, Vector::Zero(2), RngStream::from_seed(17), 10);
  ChainState chain;
  chain.x = Vector::Zero(2);
  chain.rng = RngStream::from_seed(18);
  for (int i = 0; i < 1000; ++i) hmc_step(chain, t, eps, 10);
  CHECK(chain.acceptance_rate() > 0.3);
  CHECK(chain.acceptance_rate() < 0.75);
}
