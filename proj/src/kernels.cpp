#include "slmc/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace slmc {

bool metropolis_accept(double log_ratio, RngStream& rng) {
  const double u = rng.uniform_pos();
  if (std::isnan(log_ratio)) return false;
  const double log_alpha = std::min(0.0, log_ratio);
  return std::log(u) < log_alpha;
}

bool mh_step(ChainState& state, const Target& target, double sigma) {
  if (!(sigma > 0)) throw std::invalid_argument("mh_step: sigma must be positive");
  Vector proposal = state.x + sigma * state.rng.normal_vector(state.x.size());
  state.proposal_count += 1;
  state.t += 1;
  const double log_ratio = target.log_unnorm(proposal) - target.log_unnorm(state.x);
  if (metropolis_accept(log_ratio, state.rng)) {
    state.x = std::move(proposal);
    state.accept_count += 1;
    return true;
  }
  return false;
}

void leapfrog(const Target& target, Vector& x, Vector& p, double step_size, int steps) {
  p += 0.5 * step_size * target.grad_log_unnorm(x);
  for (int i = 0; i < steps; ++i) {
    x += step_size * p;
    const double scale = (i + 1 == steps) ? 0.5 : 1.0;
    p += scale * step_size * target.grad_log_unnorm(x);
  }
}

bool hmc_step(ChainState& state, const Target& target, double step_size,
              int leapfrog_steps) {
  if (!target.has_gradient())
    throw std::invalid_argument("hmc_step: target has no gradient");
  if (leapfrog_steps < 1) throw std::invalid_argument("hmc_step: need L >= 1");

  Vector p0 = state.rng.normal_vector(state.x.size());
  state.proposal_count += 1;
  state.t += 1;

  Vector x = state.x;
  Vector p = p0;
  leapfrog(target, x, p, step_size, leapfrog_steps);

  double log_ratio;
  if (!x.allFinite() || !p.allFinite()) {
    log_ratio = kNegInf;  // diverged trajectory; auto-reject
  } else {
    const double h0 = -target.log_unnorm(state.x) + 0.5 * p0.squaredNorm();
    const double h1 = -target.log_unnorm(x) + 0.5 * p.squaredNorm();
    log_ratio = h0 - h1;
  }
  if (metropolis_accept(log_ratio, state.rng)) {
    state.x = std::move(x);
    state.accept_count += 1;
    return true;
  }
  return false;
}

IndependenceProposal model_proposal(const VaeModel& model) {
  IndependenceProposal p;
  p.sample = [&model](RngStream& rng) { return model.sample_proposal(rng); };
  p.log_density = [&model](const Vector& x) { return model.log_gamma(x); };
  return p;
}

bool slmc_step(ChainState& state, const Target& target,
               const IndependenceProposal& proposal) {
  Vector candidate = proposal.sample(state.rng);
  state.proposal_count += 1;
  state.t += 1;

  const double lp_new = target.log_unnorm(candidate);
  double log_ratio;
  if (lp_new == kNegInf) {
    log_ratio = kNegInf;
  } else {
    const double lg_new = proposal.log_density(candidate);
    const double lg_old = proposal.log_density(state.x);
    if (!std::isfinite(lg_new) || !std::isfinite(lg_old)) {
      log_ratio = kNegInf;  // defensive; Gamma is clamped finite by construction
    } else {
      log_ratio = lp_new + lg_old - target.log_unnorm(state.x) - lg_new;
    }
  }
  if (metropolis_accept(log_ratio, state.rng)) {
    state.x = std::move(candidate);
    state.accept_count += 1;
    return true;
  }
  return false;
}

bool exchange_step(ChainState& a, double beta_a, ChainState& b, double beta_b,
                   const Target& base, RngStream& rng) {
  const double la = base.log_unnorm(a.x);
  const double lb = base.log_unnorm(b.x);
  const double log_ratio = (beta_a - beta_b) * (lb - la);
  if (metropolis_accept(log_ratio, rng)) {
    std::swap(a.x, b.x);
    return true;
  }
  return false;
}

double estimate_acceptance_rate(const IndependenceProposal& proposal,
                                const Target& target, long t_check, RngStream rng) {
  if (t_check < 1) throw std::invalid_argument("estimate_acceptance_rate: T_check >= 1");
  ChainState chain;
  chain.rng = rng;
  bool placed = false;
  for (int tries = 0; tries < 1000; ++tries) {
    chain.x = proposal.sample(chain.rng);
    if (target.log_unnorm(chain.x) > kNegInf) {
      placed = true;
      break;
    }
  }
  if (!placed) return 0.0;  // proposals never land in support
  for (long t = 0; t < t_check; ++t) slmc_step(chain, target, proposal);
  return chain.acceptance_rate();
}

double estimate_acceptance_rate(const VaeModel& model, const Target& target,
                                long t_check, RngStream rng) {
  return estimate_acceptance_rate(model_proposal(model), target, t_check, std::move(rng));
}

namespace {

double probe_rw_ar(const Target& target, Vector x, double sigma, long steps,
                   RngStream rng) {
  ChainState chain;
  chain.x = std::move(x);
  chain.rng = std::move(rng);
  for (long t = 0; t < steps; ++t) mh_step(chain, target, sigma);
  return chain.acceptance_rate();
}

double probe_hmc_ar(const Target& target, Vector x, double eps, int leap, long steps,
                    RngStream rng) {
  ChainState chain;
  chain.x = std::move(x);
  chain.rng = std::move(rng);
  for (long t = 0; t < steps; ++t) hmc_step(chain, target, eps, leap);
  return chain.acceptance_rate();
}

// Scale search: AR decreases as the scale grows. Doubling/halving until the
// band brackets, then bisection.
template <typename ProbeFn>
double tune_scale(ProbeFn&& probe, double initial, double ar_lo, double ar_hi,
                  int max_rounds) {
  double scale = initial;
  double lo = 0.0, hi = 0.0;  // lo: AR too high (scale too small); hi: AR too low
  for (int round = 0; round < max_rounds; ++round) {
    const double ar = probe(scale);
    if (ar > ar_hi) {
      lo = scale;
      scale = hi > 0.0 ? 0.5 * (lo + hi) : scale * 2.0;
    } else if (ar < ar_lo) {
      hi = scale;
      scale = lo > 0.0 ? 0.5 * (lo + hi) : scale * 0.5;
    } else {
      return scale;
    }
  }
  return scale;
}

}  // namespace

double calibrate_rw_sigma(const Target& target, const Vector& x0, RngStream rng,
                          double ar_lo, double ar_hi, long probe_steps,
                          int max_rounds) {
  int round = 0;
  return tune_scale(
      [&](double sigma) {
        return probe_rw_ar(target, x0, sigma, probe_steps,
                           rng.fork("probe", static_cast<std::uint64_t>(round++)));
      },
      1.0, ar_lo, ar_hi, max_rounds);
}

double calibrate_hmc_step_size(const Target& target, const Vector& x0, RngStream rng,
                               int leapfrog_steps, double ar_lo, double ar_hi,
                               long probe_steps, int max_rounds) {
  int round = 0;
  return tune_scale(
      [&](double eps) {
        return probe_hmc_ar(target, x0, eps, leapfrog_steps, probe_steps,
                            rng.fork("probe", static_cast<std::uint64_t>(round++)));
      },
      0.1, ar_lo, ar_hi, max_rounds);
}

std::vector<double> calibrate_exchange_ladder(const Target& target, const Vector& x0,
                                              RngStream rng, double beta_min,
                                              double ar_target, long probe_steps,
                                              int max_replicas) {
  if (!(beta_min > 0.0 && beta_min < 1.0))
    throw std::invalid_argument("calibrate_exchange_ladder: need 0 < beta_min < 1");

  auto mean_exchange_ar = [&](int n_replicas, RngStream probe_rng) {
    std::vector<double> betas(n_replicas);
    const double ratio = std::pow(1.0 / beta_min, 1.0 / (n_replicas - 1));
    for (int j = 0; j < n_replicas; ++j) betas[j] = beta_min * std::pow(ratio, j);
    betas.back() = 1.0;

    std::vector<ChainState> chains(n_replicas);
    std::vector<double> sigmas(n_replicas);
    for (int j = 0; j < n_replicas; ++j) {
      chains[j].x = x0;
      chains[j].rng = probe_rng.fork("chain", j);
      sigmas[j] = calibrate_rw_sigma(target.tempered(betas[j]), x0,
                                     probe_rng.fork("sigma", j), 0.15, 0.25, 500, 20);
    }
    RngStream swap_rng = probe_rng.fork("swap");
    long attempts = 0, swaps = 0;
    for (long t = 0; t < probe_steps; ++t) {
      for (int j = 0; j < n_replicas; ++j)
        mh_step(chains[j], target.tempered(betas[j]), sigmas[j]);
      for (int j = static_cast<int>(t) % 2; j + 1 < n_replicas; j += 2) {
        attempts += 1;
        swaps += exchange_step(chains[j], betas[j], chains[j + 1], betas[j + 1],
                               target, swap_rng);
      }
    }
    return attempts == 0 ? 1.0 : static_cast<double>(swaps) / attempts;
  };

  int n = 2;
  for (int round = 0; n < max_replicas; ++round) {
    const double ar = mean_exchange_ar(n, rng.fork("ladder", round));
    if (ar >= ar_target - 0.1) break;
    n += 1;
  }
  std::vector<double> betas(n);
  const double ratio = std::pow(1.0 / beta_min, 1.0 / (n - 1));
  for (int j = 0; j < n; ++j) betas[j] = beta_min * std::pow(ratio, j);
  betas.back() = 1.0;
  return betas;
}

}  // namespace slmc
