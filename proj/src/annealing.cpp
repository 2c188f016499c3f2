#include "slmc/annealing.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "slmc/parallel.hpp"

namespace slmc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_init_point(const Target& target, const Vector& x0) {
  if (x0.size() != target.dim)
    throw std::invalid_argument("annealing: init point dimension mismatch");
  if (!target.in_support(x0))
    throw std::invalid_argument("annealing: init point outside target support");
}

double real_ar_estimate(const VaeModel& model, const Target& base, double beta,
                        long t_check, RngStream& rng) {
  return estimate_acceptance_rate(model, base.tempered(beta), t_check, rng);
}

}  // namespace

long AnnealConfig::derived_steps_per_anneal() const {
  if (steps_per_anneal > 0) return steps_per_anneal;
  const double raw = static_cast<double>(thinning_stride) * n_train / 0.9;
  return static_cast<long>(std::ceil(raw));
}

void AnnealConfig::validate(Index dim) const {
  if (!(beta0 > 0) || !(beta0 <= beta_final))
    throw std::invalid_argument("anneal: need 0 < beta0 <= beta_final");
  if (!(ar_min < ar_max) || !(ar_min > 0) || !(ar_max <= 1.0))
    throw std::invalid_argument("anneal: need 0 < ar_min < ar_max <= 1");
  if (!(epsilon > 0)) throw std::invalid_argument("anneal: epsilon must be positive");
  if (t_check < 1) throw std::invalid_argument("anneal: t_check must be >= 1");
  if (n_train < 1 || thinning_stride < 1)
    throw std::invalid_argument("anneal: n_train and thinning_stride must be >= 1");
  if (init_x.size() != dim)
    throw std::invalid_argument("anneal: init_x dimension mismatch");
  if (mode == Mode::constant) {
    if (schedule.size() < 1) throw std::invalid_argument("anneal: empty schedule");
    for (std::size_t i = 1; i < schedule.size(); ++i)
      if (schedule[i] < schedule[i - 1])
        throw std::invalid_argument("anneal: schedule must be non-decreasing");
  }
}

SlmcRun run_vae_slmc(const Target& tempered_target, const VaeModel& model,
                     const Vector& x0, long steps, RngStream rng) {
  check_init_point(tempered_target, x0);
  const IndependenceProposal proposal = model_proposal(model);
  ChainState chain;
  chain.x = x0;
  chain.rng = std::move(rng);
  SlmcRun run;
  run.samples.reserve(steps);
  for (long t = 0; t < steps; ++t) {
    slmc_step(chain, tempered_target, proposal);
    run.samples.push_back(chain.x);
  }
  run.acceptance_rate = chain.acceptance_rate();
  return run;
}

SlmcRetrainRun run_vae_slmc_retrain(const Target& tempered_target, VaeModel& model,
                                    const Vector& x0, long steps, RngStream rng,
                                    const RetrainOptions& opts,
                                    Samples accumulated_data) {
  check_init_point(tempered_target, x0);
  ChainState chain;
  chain.x = x0;
  chain.rng = rng.fork("chain");
  SlmcRetrainRun run;
  run.samples.reserve(steps);
  for (long t = 1; t <= steps; ++t) {
    {
      const IndependenceProposal proposal = model_proposal(model);
      slmc_step(chain, tempered_target, proposal);
    }
    run.samples.push_back(chain.x);
    if (opts.every > 0 && t % opts.every == 0 && t < steps) {
      // Thin what the chain has produced so far into nearly independent
      // points, capped by what is actually available.
      const long burn = static_cast<long>(run.samples.size() / 10);
      const long avail = static_cast<long>(run.samples.size()) - burn;
      const int feasible =
          static_cast<int>(std::min<long>(opts.n_train, avail / opts.thinning_stride));
      if (feasible >= 1) {
        Samples fresh =
            make_training_data(run.samples, opts.thinning_stride, feasible);
        accumulated_data.insert(accumulated_data.end(), fresh.begin(), fresh.end());
        train_vae(model, accumulated_data, opts.train,
                  rng.fork("retrain", static_cast<std::uint64_t>(run.retrains)));
        run.retrains += 1;
      }
    }
  }
  run.acceptance_rate = chain.acceptance_rate();
  return run;
}

Samples make_training_data(const Samples& samples, int stride, int n_train,
                           double burn_fraction) {
  if (stride < 1 || n_train < 1)
    throw std::invalid_argument("make_training_data: stride and n_train must be >= 1");
  if (!(burn_fraction >= 0.0 && burn_fraction < 1.0))
    throw std::invalid_argument("make_training_data: burn_fraction in [0, 1)");
  const long n = static_cast<long>(samples.size());
  const long burn = static_cast<long>(std::floor(burn_fraction * n));
  const long avail = n - burn;
  if (avail < static_cast<long>(stride) * n_train)
    throw std::runtime_error(
        "make_training_data: insufficient samples (have " + std::to_string(avail) +
        " after burn-in, need " + std::to_string(static_cast<long>(stride) * n_train) +
        "); extend T");
  Samples out;
  out.reserve(n_train);
  for (int i = 0; i < n_train; ++i) out.push_back(samples[burn + i * stride]);
  return out;
}

double beta_search(double beta_current, const VaeModel& model, const Target& base,
                   const AnnealConfig& cfg, RngStream rng) {
  return beta_search_detail(beta_current, model, base, cfg, std::move(rng)).beta;
}

BetaSearchResult beta_search_detail(double beta_current, const VaeModel& model,
                                    const Target& base, const AnnealConfig& cfg,
                                    RngStream rng) {
  auto estimate = [&](double beta, RngStream& r) {
    if (cfg.ar_estimator) return cfg.ar_estimator(beta, model, r);
    return real_ar_estimate(model, base, beta, cfg.t_check, r);
  };
  const double span = cfg.beta_final - beta_current;
  if (span <= 0) return {beta_current, std::numeric_limits<double>::quiet_NaN(), true};

  if (cfg.search == AnnealConfig::Search::sequential) {
    long t_max = cfg.t_max;
    if (t_max <= 0)
      t_max = cfg.grid == AnnealConfig::Grid::linear
                  ? static_cast<long>(std::ceil(span / cfg.epsilon))
                  : 48;
    const double ratio =
        cfg.grid == AnnealConfig::Grid::geometric
            ? std::pow(cfg.beta_final / beta_current, 1.0 / static_cast<double>(t_max))
            : 1.0;
    double beta = cfg.beta_final;
    for (long t = 0; t < t_max; ++t) {
      if (beta <= beta_current)
        return {beta_current, std::numeric_limits<double>::quiet_NaN(), true};
      if (beta > cfg.beta_final) beta = cfg.beta_final;
      RngStream r = rng.fork("seq", static_cast<std::uint64_t>(t));
      const double ar = estimate(beta, r);
      if (ar >= cfg.ar_min && ar <= cfg.ar_max) return {beta, ar, false};
      if (ar >= cfg.ar_max) {
        beta = cfg.grid == AnnealConfig::Grid::linear ? beta + cfg.epsilon : beta * ratio;
      } else {
        beta = cfg.grid == AnnealConfig::Grid::linear ? beta - cfg.epsilon : beta / ratio;
      }
    }
    return {beta_current, std::numeric_limits<double>::quiet_NaN(), true};
  }

  // Parallel search over a candidate set, shifted together on failure.
  std::vector<double> candidates = cfg.beta_candidates;
  if (candidates.empty()) {
    const int s_count = 8;
    candidates.resize(s_count);
    for (int s = 0; s < s_count; ++s) {
      const double frac = static_cast<double>(s + 1) / s_count;
      candidates[s] =
          cfg.grid == AnnealConfig::Grid::geometric
              ? beta_current * std::pow(cfg.beta_final / beta_current, frac)
              : beta_current + frac * span;
    }
  }
  long t_max = cfg.t_max > 0 ? cfg.t_max
                             : static_cast<long>(std::ceil(span / cfg.epsilon));
  for (long t = 0; t < t_max; ++t) {
    std::vector<double> ars(candidates.size());
    RngStream round_rng = rng.fork("round", static_cast<std::uint64_t>(t));
    parallel_for(candidates.size(), [&](std::size_t s) {
      RngStream r = round_rng.fork("cand", static_cast<std::uint64_t>(s));
      ars[s] = estimate(candidates[s], r);
    });
    double best = -1.0;
    double best_ar = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t s = 0; s < candidates.size(); ++s) {
      if (ars[s] >= cfg.ar_min && ars[s] <= cfg.ar_max) {
        if (best < 0 ||
            (cfg.pick_largest ? candidates[s] > best : candidates[s] < best)) {
          best = candidates[s];
          best_ar = ars[s];
        }
      }
    }
    if (best > 0) return {best, best_ar, false};
    const bool all_low = [&] {
      for (double ar : ars)
        if (ar > cfg.ar_min) return false;
      return true;
    }();
    for (auto& c : candidates) {
      c = all_low ? c - cfg.epsilon : c + cfg.epsilon;
      c = std::min(c, cfg.beta_final);
    }
    bool any_above = false;
    for (double c : candidates) any_above |= c > beta_current;
    if (!any_above)
      return {beta_current, std::numeric_limits<double>::quiet_NaN(), true};
  }
  return {beta_current, std::numeric_limits<double>::quiet_NaN(), true};
}

namespace {

struct AnnealLoop {
  const Target& base;
  const AnnealConfig& cfg;
  RngStream rng;
  AnnealTrace trace;

  VaeModel initial_model(const Samples& init_data) {
    RngStream model_rng = rng.fork("model-init");
    VaeModel model = make_vae(base.dim, base.dim, cfg.train.beta_vae, model_rng);
    const auto t0 = Clock::now();
    train_vae(model, init_data, cfg.train, rng.fork("train", 0));
    double ar0;
    {
      RngStream r = rng.fork("ar0");
      ar0 = cfg.ar_estimator ? cfg.ar_estimator(cfg.beta0, model, r)
                             : real_ar_estimate(model, base, cfg.beta0, cfg.t_check, r);
    }
    trace.steps.push_back({0, cfg.beta0, ar0,
                           std::numeric_limits<double>::quiet_NaN(),
                           cfg.train.epochs, seconds_since(t0)});
    return model;
  }

  // One anneal step: sample at beta_k with the previous model, thin, retrain.
  double step(int k, double beta_k, VaeModel& model,
              double search_ar = std::numeric_limits<double>::quiet_NaN()) {
    const auto t0 = Clock::now();
    const long steps = cfg.derived_steps_per_anneal();
    SlmcRun run;
    try {
      run = run_vae_slmc(base.tempered(beta_k), model, cfg.init_x, steps,
                         rng.fork("sample", static_cast<std::uint64_t>(k)));
      Samples data = make_training_data(run.samples, cfg.thinning_stride, cfg.n_train);
      train_vae(model, data, cfg.train,
                rng.fork("train", static_cast<std::uint64_t>(k)));
    } catch (const TrainingError& e) {
      trace.steps.push_back(
          {k, beta_k, run.acceptance_rate, search_ar, 0, seconds_since(t0)});
      throw AnnealAbort(std::string("training diverged at anneal step ") +
                            std::to_string(k) + ": " + e.what(),
                        trace);
    }
    trace.steps.push_back({k, beta_k, run.acceptance_rate, search_ar,
                           cfg.train.epochs, seconds_since(t0)});
    return run.acceptance_rate;
  }

  AnnealResult finish(VaeModel model) {
    AnnealResult result;
    const long steps =
        cfg.final_steps > 0 ? cfg.final_steps : cfg.derived_steps_per_anneal();
    SlmcRun run = run_vae_slmc(base.tempered(cfg.beta_final), model, cfg.init_x,
                               steps, rng.fork("final"));
    result.samples = std::move(run.samples);
    result.final_acceptance_rate = run.acceptance_rate;
    result.model = std::move(model);
    result.trace = std::move(trace);
    return result;
  }
};

}  // namespace

AnnealResult run_constant_annealing(const Target& base, const AnnealConfig& cfg,
                                    const Samples& init_data, RngStream rng) {
  AnnealConfig local = cfg;
  local.mode = AnnealConfig::Mode::constant;
  if (local.schedule.empty()) {
    // 20 uniform values from beta0 to beta_final.
    const int k_steps = 20;
    local.schedule.resize(k_steps);
    for (int k = 0; k < k_steps; ++k)
      local.schedule[k] =
          local.beta0 + (local.beta_final - local.beta0) * k / (k_steps - 1.0);
  }
  local.validate(base.dim);
  check_init_point(base, local.init_x);
  if (std::abs(local.schedule.front() - local.beta0) > 1e-12)
    throw std::invalid_argument("constant annealing: schedule must start at beta0");

  AnnealLoop loop{base, local, rng.fork("anneal"), {}};
  VaeModel model = loop.initial_model(init_data);
  for (std::size_t k = 1; k < local.schedule.size(); ++k)
    loop.step(static_cast<int>(k), local.schedule[k], model);
  return loop.finish(std::move(model));
}

AnnealResult run_adaptive_annealing(const Target& base, const AnnealConfig& cfg,
                                    const Samples& init_data, RngStream rng) {
  AnnealConfig local = cfg;
  local.mode = AnnealConfig::Mode::adaptive;
  local.validate(base.dim);
  check_init_point(base, local.init_x);

  AnnealLoop loop{base, local, rng.fork("anneal"), {}};
  VaeModel model = loop.initial_model(init_data);
  double beta = local.beta0;
  for (int k = 1;; ++k) {
    if (k > local.max_anneal_steps)
      throw AnnealAbort("adaptive annealing exceeded max_anneal_steps", loop.trace);
    const BetaSearchResult found = beta_search_detail(
        beta, model, base, local, loop.rng.fork("search", static_cast<std::uint64_t>(k)));
    // The committed schedule never decreases; overshoot clamps to the final beta.
    const double committed = std::min(local.beta_final, std::max(beta, found.beta));
    loop.step(k, committed, model, found.accepted_ar);
    beta = committed;
    if (beta >= local.beta_final) break;
  }
  return loop.finish(std::move(model));
}

void ParallelAnnealConfig::validate(Index dim) const {
  base.validate(dim);
  if (chain_betas0.empty())
    throw std::invalid_argument("parallel anneal: need at least one chain");
  const auto& b = chain_betas0;
  bool ascending = true, descending = true;
  for (std::size_t j = 1; j < b.size(); ++j) {
    ascending &= b[j] >= b[j - 1];
    descending &= b[j] <= b[j - 1];
  }
  if (!ascending && !descending)
    throw std::invalid_argument("parallel anneal: chain betas must be monotone");
  if (base.mode == AnnealConfig::Mode::constant) {
    if (schedules.size() != b.size())
      throw std::invalid_argument("parallel anneal: one schedule per chain required");
    for (std::size_t j = 1; j < schedules.size(); ++j)
      if (schedules[j].size() != schedules[0].size())
        throw std::invalid_argument("parallel anneal: schedules must share a length");
  }
}

ParallelAnnealResult run_parallel_annealing(const Target& base,
                                            const ParallelAnnealConfig& cfg,
                                            const std::vector<Samples>& init_data,
                                            RngStream rng) {
  const std::size_t n_chains = cfg.chain_betas0.size();
  if (init_data.size() != n_chains)
    throw std::invalid_argument("parallel anneal: init data per chain required");

  // J = 0 degenerates to the single-chain process, streams included.
  if (n_chains == 1) {
    AnnealConfig single = cfg.base;
    single.beta0 = cfg.chain_betas0[0];
    if (single.mode == AnnealConfig::Mode::constant) single.schedule = cfg.schedules[0];
    AnnealResult r = single.mode == AnnealConfig::Mode::constant
                         ? run_constant_annealing(base, single, init_data[0], rng)
                         : run_adaptive_annealing(base, single, init_data[0], rng);
    ParallelAnnealResult out;
    out.samples.push_back(std::move(r.samples));
    out.models.push_back(std::move(r.model));
    out.traces.push_back(std::move(r.trace));
    out.exchange_acceptance_rate = 1.0;
    out.measure_chain = 0;
    return out;
  }

  ParallelAnnealConfig local = cfg;
  local.validate(base.dim);
  const AnnealConfig& knobs = local.base;
  RngStream root = rng.fork("parallel-anneal");

  // Which chain carries the final measurement: the one whose beta reaches
  // beta_final (largest starting beta).
  std::size_t top = 0;
  for (std::size_t j = 1; j < n_chains; ++j)
    if (local.chain_betas0[j] > local.chain_betas0[top]) top = j;

  // Initial models, trained in chain order with warm handoff.
  std::vector<VaeModel> models;
  std::vector<AnnealTrace> traces(n_chains);
  std::vector<double> betas = local.chain_betas0;
  for (std::size_t j = 0; j < n_chains; ++j) {
    const auto t0 = Clock::now();
    VaeModel model = j == 0 ? [&] {
      RngStream mr = root.fork("model-init");
      return make_vae(base.dim, base.dim, knobs.train.beta_vae, mr);
    }()
                            : models[j - 1];
    train_vae(model, init_data[j], knobs.train, root.fork("init-train", j));
    RngStream ar_rng = root.fork("ar0", j);
    const double ar0 =
        knobs.ar_estimator
            ? knobs.ar_estimator(betas[j], model, ar_rng)
            : real_ar_estimate(model, base, betas[j], knobs.t_check, ar_rng);
    traces[j].steps.push_back({0, betas[j], ar0,
                               std::numeric_limits<double>::quiet_NaN(),
                               knobs.train.epochs, seconds_since(t0)});
    models.push_back(std::move(model));
  }

  const long steps = knobs.derived_steps_per_anneal();
  long exchange_attempts = 0, exchange_accepts = 0;

  auto run_eslmc_sweeps = [&](std::vector<double>& chain_beta, long n_steps,
                              RngStream sweep_rng, std::vector<Samples>& out,
                              std::vector<double>& ar_out) {
    std::vector<ChainState> chains(n_chains);
    std::vector<IndependenceProposal> proposals;
    std::vector<Target> tempered;
    proposals.reserve(n_chains);
    tempered.reserve(n_chains);
    for (std::size_t j = 0; j < n_chains; ++j) {
      chains[j].x = knobs.init_x;
      chains[j].rng = sweep_rng.fork("chain", j);
      proposals.push_back(model_proposal(models[j]));
      tempered.push_back(base.tempered(chain_beta[j]));
      out[j].clear();
      out[j].reserve(n_steps);
    }
    RngStream swap_rng = sweep_rng.fork("exchange");
    for (long t = 0; t < n_steps; ++t) {
      parallel_for(n_chains, [&](std::size_t j) {
        slmc_step(chains[j], tempered[j], proposals[j]);
      });
      // Alternating adjacent pairs; adjacency follows the configured order.
      for (std::size_t j = t % 2; j + 1 < n_chains; j += 2) {
        exchange_attempts += 1;
        exchange_accepts += exchange_step(chains[j], chain_beta[j], chains[j + 1],
                                          chain_beta[j + 1], base, swap_rng);
      }
      for (std::size_t j = 0; j < n_chains; ++j) out[j].push_back(chains[j].x);
    }
    for (std::size_t j = 0; j < n_chains; ++j)
      ar_out[j] = chains[j].acceptance_rate();
  };

  const std::size_t schedule_len =
      knobs.mode == AnnealConfig::Mode::constant ? local.schedules[0].size() : 0;
  std::vector<Samples> sweep_samples(n_chains);
  std::vector<double> sweep_ar(n_chains);

  for (int k = 1;; ++k) {
    if (k > knobs.max_anneal_steps) {
      AnnealTrace merged;
      for (auto& t : traces)
        merged.steps.insert(merged.steps.end(), t.steps.begin(), t.steps.end());
      throw AnnealAbort("parallel annealing exceeded max_anneal_steps", merged);
    }
    if (knobs.mode == AnnealConfig::Mode::constant &&
        static_cast<std::size_t>(k) >= schedule_len)
      break;

    // Advance each chain's temperature.
    std::vector<double> search_ars(n_chains,
                                   std::numeric_limits<double>::quiet_NaN());
    if (knobs.mode == AnnealConfig::Mode::constant) {
      for (std::size_t j = 0; j < n_chains; ++j) betas[j] = local.schedules[j][k];
    } else {
      std::vector<double> next(n_chains);
      RngStream search_rng = root.fork("search", static_cast<std::uint64_t>(k));
      parallel_for(n_chains, [&](std::size_t j) {
        AnnealConfig per_chain = knobs;
        per_chain.beta0 = local.chain_betas0[j];
        const BetaSearchResult found = beta_search_detail(
            betas[j], models[j], base, per_chain, search_rng.fork("chain", j));
        next[j] = std::min(knobs.beta_final, std::max(betas[j], found.beta));
        search_ars[j] = found.accepted_ar;
      });
      betas = std::move(next);
    }

    const auto t0 = Clock::now();
    run_eslmc_sweeps(betas, steps, root.fork("sweep", static_cast<std::uint64_t>(k)),
                     sweep_samples, sweep_ar);

    // Warm handoff: chain 0 keeps its own weights, chain j starts from the
    // freshly trained chain j-1 model.
    RngStream train_rng = root.fork("train", static_cast<std::uint64_t>(k));
    for (std::size_t j = 0; j < n_chains; ++j) {
      Samples data =
          make_training_data(sweep_samples[j], knobs.thinning_stride, knobs.n_train);
      if (j > 0) models[j] = models[j - 1];
      try {
        train_vae(models[j], data, knobs.train, train_rng.fork("chain", j));
      } catch (const TrainingError& e) {
        AnnealTrace merged;
        for (auto& t : traces)
          merged.steps.insert(merged.steps.end(), t.steps.begin(), t.steps.end());
        throw AnnealAbort(std::string("training diverged in parallel anneal step ") +
                              std::to_string(k) + ": " + e.what(),
                          merged);
      }
      traces[j].steps.push_back({k, betas[j], sweep_ar[j], search_ars[j],
                                 knobs.train.epochs, seconds_since(t0)});
    }

    if (knobs.mode == AnnealConfig::Mode::adaptive && betas[top] >= knobs.beta_final)
      break;
  }

  // Final measurement sweeps with the trained models at the final ladder.
  ParallelAnnealResult result;
  result.models = models;
  result.traces = std::move(traces);
  result.measure_chain = static_cast<int>(top);
  result.samples.assign(n_chains, {});
  const long final_steps = knobs.final_steps > 0 ? knobs.final_steps : steps;
  std::vector<double> final_ar(n_chains);
  run_eslmc_sweeps(betas, final_steps, root.fork("final"), result.samples, final_ar);
  result.exchange_acceptance_rate =
      exchange_attempts == 0
          ? 1.0
          : static_cast<double>(exchange_accepts) / static_cast<double>(exchange_attempts);
  return result;
}

}  // namespace slmc
