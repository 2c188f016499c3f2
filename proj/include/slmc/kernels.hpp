#pragma once

#include <functional>

#include "slmc/rng.hpp"
#include "slmc/targets.hpp"
#include "slmc/types.hpp"
#include "slmc/vae.hpp"

namespace slmc {

struct ChainState {
  Vector x;
  long t = 0;
  long accept_count = 0;
  long proposal_count = 0;
  RngStream rng;

  double acceptance_rate() const {
    return proposal_count == 0
               ? 0.0
               : static_cast<double>(accept_count) / static_cast<double>(proposal_count);
  }
};

struct KernelConfig {
  double rw_sigma = 1.0;
  double hmc_step_size = 0.1;
  int hmc_leapfrog_steps = 10;
};

// Log-space Metropolis test: accept iff log U < min(0, log_ratio). Always
// consumes exactly one uniform so callers keep a fixed draw count per step.
bool metropolis_accept(double log_ratio, RngStream& rng);

// Random-walk proposal N(x, sigma^2 I). Returns whether the move was accepted.
bool mh_step(ChainState& state, const Target& target, double sigma);

// Leapfrog integration of H(x, p) = -log p~(x) + 0.5 |p|^2.
void leapfrog(const Target& target, Vector& x, Vector& p, double step_size, int steps);

bool hmc_step(ChainState& state, const Target& target, double step_size,
              int leapfrog_steps);

// A state-independent proposal: a sampler plus the (unnormalized) log-density
// used in the correction ratio. For a VAE this is (decoder pushforward, Gamma).
struct IndependenceProposal {
  std::function<Vector(RngStream&)> sample;
  std::function<double(const Vector&)> log_density;
};

IndependenceProposal model_proposal(const VaeModel& model);

// Accept x' with min(1, p~(x') Gamma(x) / (p~(x) Gamma(x'))), computed in
// log space. The proposal draw happens before the accept draw, so the
// proposed value is a pure function of the stream position.
bool slmc_step(ChainState& state, const Target& target,
               const IndependenceProposal& proposal);

// Swaps the two states with probability
// min(1, exp[(beta_a - beta_b) (log p~(x_b) - log p~(x_a))]).
bool exchange_step(ChainState& a, double beta_a, ChainState& b, double beta_b,
                   const Target& base, RngStream& rng);

// Small SLMC simulation started from the first in-support proposal.
double estimate_acceptance_rate(const IndependenceProposal& proposal,
                                const Target& target, long t_check, RngStream rng);
double estimate_acceptance_rate(const VaeModel& model, const Target& target,
                                long t_check, RngStream rng);

// Doubling/halving searches that freeze kernel scales before measurement.
double calibrate_rw_sigma(const Target& target, const Vector& x0, RngStream rng,
                          double ar_lo = 0.15, double ar_hi = 0.25,
                          long probe_steps = 2000, int max_rounds = 40);
double calibrate_hmc_step_size(const Target& target, const Vector& x0, RngStream rng,
                               int leapfrog_steps, double ar_lo = 0.4,
                               double ar_hi = 0.6, long probe_steps = 500,
                               int max_rounds = 40);
// Geometric ladder from beta_min to 1 sized so adjacent exchange rates land
// near 0.3; returns betas in increasing order.
std::vector<double> calibrate_exchange_ladder(const Target& target, const Vector& x0,
                                              RngStream rng, double beta_min,
                                              double ar_target = 0.3,
                                              long probe_steps = 2000,
                                              int max_replicas = 24);

}  // namespace slmc
