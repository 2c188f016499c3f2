#pragma once

#include <functional>
#include <vector>

#include "slmc/kernels.hpp"
#include "slmc/targets.hpp"
#include "slmc/types.hpp"
#include "slmc/vae.hpp"

namespace slmc {

struct AnnealConfig {
  enum class Mode { constant, adaptive };
  enum class Search { sequential, parallel };
  enum class Grid { linear, geometric };

  double beta0 = 0.1;
  double beta_final = 1.0;
  double ar_min = 0.2;
  double ar_max = 1.0;
  double epsilon = 0.01;
  long t_check = 2000;
  long steps_per_anneal = 0;  // T; 0 derives stride * n_train / 0.9
  int n_train = 15000;
  int thinning_stride = 2;
  int max_anneal_steps = 200;
  Mode mode = Mode::adaptive;
  std::vector<double> schedule;         // constant mode; starts at beta0
  Search search = Search::sequential;
  Grid grid = Grid::linear;
  int t_max = 0;                        // search iteration cap; 0 derives from epsilon
  std::vector<double> beta_candidates;  // parallel search seed set
  bool pick_largest = true;             // candidate tie-break
  long final_steps = 0;                 // measurement run length; 0 -> steps_per_anneal
  TrainConfig train;
  Vector init_x;                        // pi_0, reused at every anneal step

  // Test hook: replaces estimate_acceptance_rate during beta search.
  std::function<double(double, const VaeModel&, RngStream&)> ar_estimator;

  long derived_steps_per_anneal() const;
  void validate(Index dim) const;
};

struct AnnealStepRecord {
  int k = 0;
  double beta = 0.0;
  double acceptance_rate = 0.0;  // measured over the sampling run at beta_k
  // Estimate that committed beta_k during adaptive search (NaN for constant
  // schedules; below ar_min only on retrain or clamped-final steps).
  double search_ar = std::numeric_limits<double>::quiet_NaN();
  int epochs_trained = 0;
  double seconds = 0.0;
};

struct AnnealTrace {
  std::vector<AnnealStepRecord> steps;
};

struct AnnealAbort : std::runtime_error {
  AnnealTrace trace;
  AnnealAbort(const std::string& msg, AnnealTrace t)
      : std::runtime_error(msg), trace(std::move(t)) {}
};

struct AnnealResult {
  Samples samples;  // measurement run at beta_final
  VaeModel model;
  AnnealTrace trace;
  double final_acceptance_rate = 0.0;
};

struct SlmcRun {
  Samples samples;
  double acceptance_rate = 0.0;
};

// Plain VAE-SLMC chain: x0, then `steps` proposals from the model.
SlmcRun run_vae_slmc(const Target& tempered_target, const VaeModel& model,
                     const Vector& x0, long steps, RngStream rng);

// VAE-SLMC with the retrain step: every `every` steps the chain history is
// thinned, appended to the accumulated dataset and the model is retrained.
struct RetrainOptions {
  long every = 0;  // 0 disables
  TrainConfig train;
  int thinning_stride = 2;
  int n_train = 1000;
};
struct SlmcRetrainRun {
  Samples samples;
  double acceptance_rate = 0.0;
  int retrains = 0;
};
SlmcRetrainRun run_vae_slmc_retrain(const Target& tempered_target, VaeModel& model,
                                    const Vector& x0, long steps, RngStream rng,
                                    const RetrainOptions& opts,
                                    Samples accumulated_data = {});

// Burn-in discard (default first 10%), stride-thinning, exactly n_train points.
Samples make_training_data(const Samples& samples, int stride, int n_train,
                           double burn_fraction = 0.1);

// Next inverse temperature with AR within [ar_min, ar_max], estimated with
// T_check-step simulations; returns beta_current when the search exhausts
// (the caller retrains at the same beta).
double beta_search(double beta_current, const VaeModel& model, const Target& base,
                   const AnnealConfig& cfg, RngStream rng);

struct BetaSearchResult {
  double beta = 0.0;
  double accepted_ar = std::numeric_limits<double>::quiet_NaN();
  bool exhausted = false;
};
BetaSearchResult beta_search_detail(double beta_current, const VaeModel& model,
                                    const Target& base, const AnnealConfig& cfg,
                                    RngStream rng);

AnnealResult run_constant_annealing(const Target& base, const AnnealConfig& cfg,
                                    const Samples& init_data, RngStream rng);
AnnealResult run_adaptive_annealing(const Target& base, const AnnealConfig& cfg,
                                    const Samples& init_data, RngStream rng);

struct ParallelAnnealConfig {
  std::vector<double> chain_betas0;  // monotone in j; one entry per chain
  AnnealConfig base;
  // Constant mode: one schedule per chain (same length), starting at
  // chain_betas0[j]. Adaptive mode leaves this empty.
  std::vector<std::vector<double>> schedules;

  void validate(Index dim) const;
};

struct ParallelAnnealResult {
  std::vector<Samples> samples;  // measurement run per chain
  std::vector<VaeModel> models;
  std::vector<AnnealTrace> traces;
  double exchange_acceptance_rate = 0.0;
  int measure_chain = 0;  // chain that ends at beta_final
};

ParallelAnnealResult run_parallel_annealing(const Target& base,
                                            const ParallelAnnealConfig& cfg,
                                            const std::vector<Samples>& init_data,
                                            RngStream rng);

}  // namespace slmc
