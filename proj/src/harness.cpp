#include "slmc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "slmc/errors.hpp"
#include "slmc/metrics.hpp"
#include "slmc/parallel.hpp"

namespace slmc {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Config parsing with JSON-path-aware errors.

class Cursor {
 public:
  Cursor(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    if (!j_.contains(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  template <typename T>
  T require(const std::string& key) const {
    if (!j_.contains(key)) throw ConfigError(path_ + "." + key + ": missing");
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  Cursor section(const std::string& key) const {
    if (!j_.contains(key)) {
      static const json empty = json::object();
      return Cursor(empty, path_ + "." + key);
    }
    return Cursor(j_.at(key), path_ + "." + key);
  }

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
};

json vec_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace

Method method_from_string(const std::string& name) {
  if (name == "MH") return Method::MH;
  if (name == "HMC") return Method::HMC;
  if (name == "MH-EMC") return Method::MH_EMC;
  if (name == "HMC-EMC") return Method::HMC_EMC;
  if (name == "VAE-SLMC") return Method::VAE_SLMC;
  if (name == "CA-VAE-SLMC") return Method::CA_VAE_SLMC;
  if (name == "AA-VAE-SLMC") return Method::AA_VAE_SLMC;
  if (name == "CA-VAE-ESLMC") return Method::CA_VAE_ESLMC;
  if (name == "AA-VAE-ESLMC") return Method::AA_VAE_ESLMC;
  throw ConfigError("method: unknown method '" + name + "'");
}

std::string method_to_string(Method m) {
  switch (m) {
    case Method::MH: return "MH";
    case Method::HMC: return "HMC";
    case Method::MH_EMC: return "MH-EMC";
    case Method::HMC_EMC: return "HMC-EMC";
    case Method::VAE_SLMC: return "VAE-SLMC";
    case Method::CA_VAE_SLMC: return "CA-VAE-SLMC";
    case Method::AA_VAE_SLMC: return "AA-VAE-SLMC";
    case Method::CA_VAE_ESLMC: return "CA-VAE-ESLMC";
    case Method::AA_VAE_ESLMC: return "AA-VAE-ESLMC";
  }
  throw std::logic_error("unreachable");
}

bool method_uses_annealing(Method m) {
  return m == Method::CA_VAE_SLMC || m == Method::AA_VAE_SLMC ||
         m == Method::CA_VAE_ESLMC || m == Method::AA_VAE_ESLMC;
}

bool method_is_parallel(Method m) {
  return m == Method::CA_VAE_ESLMC || m == Method::AA_VAE_ESLMC;
}

RunConfig RunConfig::parse(const json& j) {
  Cursor root(j, "$");
  RunConfig cfg;
  cfg.version = root.get<int>("version", 1);
  if (cfg.version != 1) throw ConfigError("$.version: unsupported version");
  cfg.seed = root.get<std::uint64_t>("seed", 42);
  cfg.method = method_from_string(root.require<std::string>("method"));
  cfg.output_dir = root.require<std::string>("output_dir");
  if (!root.has("target")) throw ConfigError("$.target: missing");
  cfg.target_spec = j.at("target");

  cfg.steps = root.get<long>("steps", 50000);
  cfg.chains = root.get<int>("chains", 1);
  cfg.burn_in_fraction = root.get<double>("burn_in_fraction", 0.1);
  cfg.metrics_stride = root.get<long>("metrics_stride", 100);
  cfg.sample_stride = root.get<long>("sample_stride", 1);
  if (cfg.steps < 1) throw ConfigError("$.steps: must be >= 1");
  if (cfg.chains < 1) throw ConfigError("$.chains: must be >= 1");
  if (!(cfg.burn_in_fraction >= 0.0 && cfg.burn_in_fraction < 1.0))
    throw ConfigError("$.burn_in_fraction: must lie in [0, 1)");
  if (cfg.metrics_stride < 1 || cfg.sample_stride < 1)
    throw ConfigError("$.metrics_stride/sample_stride: must be >= 1");

  Cursor kernel = root.section("kernel");
  cfg.kernel.rw_sigma = kernel.get<double>("rw_sigma", 0.0);
  cfg.kernel.hmc_step_size = kernel.get<double>("hmc_step_size", 0.0);
  cfg.kernel.hmc_leapfrog_steps = kernel.get<int>("hmc_leapfrog_steps", 10);
  if (cfg.kernel.hmc_leapfrog_steps < 1)
    throw ConfigError("$.kernel.hmc_leapfrog_steps: must be >= 1");

  Cursor train = root.section("train");
  cfg.train.epochs = train.get<int>("epochs", 150);
  cfg.train.batch_size = train.get<int>("batch_size", 516);
  cfg.train.learning_rate = train.get<double>("learning_rate", 1e-3);
  cfg.train.beta_vae = train.get<double>("beta_vae", 1.0 / 120.0);
  if (train.has("logsigma_clamp")) {
    auto clamp = train.require<std::vector<double>>("logsigma_clamp");
    if (clamp.size() != 2 || !(clamp[0] < clamp[1]))
      throw ConfigError("$.train.logsigma_clamp: expected [lo, hi] with lo < hi");
    cfg.train.logsig_lo = clamp[0];
    cfg.train.logsig_hi = clamp[1];
  }
  if (cfg.train.epochs < 1 || cfg.train.batch_size < 1)
    throw ConfigError("$.train.epochs/batch_size: must be >= 1");
  if (!(cfg.train.beta_vae > 0)) throw ConfigError("$.train.beta_vae: must be > 0");

  Cursor td = root.section("train_data");
  cfg.train_data_source = td.get<std::string>("source", "direct");
  cfg.train_data_n = td.get<long>("n", 20000);
  cfg.train_data_stride = td.get<int>("stride", 5);
  if (cfg.train_data_source != "direct" && cfg.train_data_source != "mh" &&
      cfg.train_data_source != "hmc")
    throw ConfigError("$.train_data.source: expected direct|mh|hmc");

  Cursor anneal = root.section("anneal");
  cfg.anneal.beta0 = anneal.get<double>("beta0", 0.1);
  cfg.anneal.beta_final = anneal.get<double>("beta_final", 1.0);
  cfg.anneal.ar_min = anneal.get<double>("ar_min", 0.2);
  cfg.anneal.ar_max = anneal.get<double>("ar_max", 1.0);
  cfg.anneal.epsilon = anneal.get<double>("epsilon", 0.01);
  cfg.anneal.t_check = anneal.get<long>("t_check", 2000);
  cfg.anneal.steps_per_anneal = anneal.get<long>("steps_per_anneal", 0);
  cfg.anneal.n_train = anneal.get<int>("n_train", 15000);
  cfg.anneal.thinning_stride = anneal.get<int>("thinning_stride", 2);
  cfg.anneal.max_anneal_steps = anneal.get<int>("max_anneal_steps", 200);
  cfg.anneal.schedule = anneal.get<std::vector<double>>("schedule", {});
  cfg.anneal.beta_candidates = anneal.get<std::vector<double>>("beta_candidates", {});
  cfg.anneal.t_max = anneal.get<int>("t_max", 0);
  cfg.anneal.pick_largest = anneal.get<bool>("pick_largest", true);
  const std::string search = anneal.get<std::string>("search", "sequential");
  if (search == "sequential") cfg.anneal.search = AnnealConfig::Search::sequential;
  else if (search == "parallel") cfg.anneal.search = AnnealConfig::Search::parallel;
  else throw ConfigError("$.anneal.search: expected sequential|parallel");
  const std::string grid = anneal.get<std::string>("grid", "linear");
  if (grid == "linear") cfg.anneal.grid = AnnealConfig::Grid::linear;
  else if (grid == "geometric") cfg.anneal.grid = AnnealConfig::Grid::geometric;
  else throw ConfigError("$.anneal.grid: expected linear|geometric");
  cfg.init_data = anneal.get<long>("init_data", 40000);
  cfg.init_stride = anneal.get<int>("init_stride", 5);
  if (cfg.init_data < 1 || cfg.init_stride < 1)
    throw ConfigError("$.anneal.init_data/init_stride: must be >= 1");

  Cursor par = root.section("parallel");
  cfg.chain_betas0 = par.get<std::vector<double>>("chain_betas0", {});
  if (par.has("schedules")) {
    cfg.parallel_schedules =
        par.require<std::vector<std::vector<double>>>("schedules");
  }

  Cursor emc = root.section("emc");
  cfg.emc_ladder = emc.get<std::vector<double>>("ladder", {});
  cfg.emc_beta_min = emc.get<double>("beta_min", 0.1);

  cfg.init_point = root.get<std::vector<double>>("init_point", {});

  if (method_is_parallel(cfg.method) && cfg.chain_betas0.size() < 2)
    throw ConfigError("$.parallel.chain_betas0: parallel methods need >= 2 chains");
  return cfg;
}

json RunConfig::echo() const {
  json j;
  j["version"] = version;
  j["seed"] = seed;
  j["method"] = method_to_string(method);
  j["output_dir"] = output_dir;
  j["target"] = target_spec;
  j["steps"] = steps;
  j["chains"] = chains;
  j["burn_in_fraction"] = burn_in_fraction;
  j["metrics_stride"] = metrics_stride;
  j["sample_stride"] = sample_stride;
  j["kernel"] = {{"rw_sigma", kernel.rw_sigma},
                 {"hmc_step_size", kernel.hmc_step_size},
                 {"hmc_leapfrog_steps", kernel.hmc_leapfrog_steps}};
  j["train"] = {{"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"learning_rate", train.learning_rate},
                {"beta_vae", train.beta_vae},
                {"logsigma_clamp", {train.logsig_lo, train.logsig_hi}}};
  j["train_data"] = {{"source", train_data_source},
                     {"n", train_data_n},
                     {"stride", train_data_stride}};
  j["anneal"] = {{"beta0", anneal.beta0},
                 {"beta_final", anneal.beta_final},
                 {"ar_min", anneal.ar_min},
                 {"ar_max", anneal.ar_max},
                 {"epsilon", anneal.epsilon},
                 {"t_check", anneal.t_check},
                 {"steps_per_anneal", anneal.steps_per_anneal},
                 {"n_train", anneal.n_train},
                 {"thinning_stride", anneal.thinning_stride},
                 {"max_anneal_steps", anneal.max_anneal_steps},
                 {"schedule", anneal.schedule},
                 {"beta_candidates", anneal.beta_candidates},
                 {"t_max", anneal.t_max},
                 {"pick_largest", anneal.pick_largest},
                 {"search", anneal.search == AnnealConfig::Search::sequential
                                ? "sequential"
                                : "parallel"},
                 {"grid", anneal.grid == AnnealConfig::Grid::linear ? "linear"
                                                                    : "geometric"},
                 {"init_data", init_data},
                 {"init_stride", init_stride}};
  j["parallel"] = {{"chain_betas0", chain_betas0}};
  if (!parallel_schedules.empty()) j["parallel"]["schedules"] = parallel_schedules;
  j["emc"] = {{"ladder", emc_ladder}, {"beta_min", emc_beta_min}};
  j["init_point"] = init_point;
  return j;
}

TargetBundle make_target(const json& spec, std::uint64_t seed) {
  Cursor c(spec, "$.target");
  const std::string name = c.require<std::string>("name");
  TargetBundle bundle;
  if (name == "gmm") {
    bundle.target =
        gaussian_mixture(c.get<int>("clusters", 3), c.get<Index>("dim", 2));
  } else if (name == "icg") {
    IcgData data = make_icg_data(c.get<Index>("dim", 100),
                                 c.get<std::uint64_t>("seed", seed));
    bundle.target = ill_conditioned_gaussian(data);
    bundle.dataset = to_json(data);
  } else if (name == "scg") {
    bundle.target = strongly_correlated_gaussian();
  } else if (name == "banana") {
    bundle.target = banana();
  } else if (name == "rough-well") {
    bundle.target = rough_well(c.get<Index>("dim", 2), c.get<double>("eta", 0.01));
  } else if (name == "spectral") {
    SpectralConfig sc;
    sc.n_freq = c.get<int>("n_freq", 8);
    sc.n_obs = c.get<int>("n_obs", 50);
    sc.period = c.get<double>("period", 1.0);
    sc.noise_std = c.get<double>("noise_std", 0.1);
    sc.seed = c.get<std::uint64_t>("seed", seed);
    SpectralData data = make_spectral_data(sc);
    bundle.target = spectral_posterior(data);
    bundle.dataset = to_json(data);
  } else if (name == "sensor") {
    SensorConfig sc;
    sc.n_unknown = c.get<int>("n_unknown", 8);
    sc.n_known = c.get<int>("n_known", 3);
    sc.radius = c.get<double>("radius", 0.3);
    sc.noise_std = c.get<double>("noise_std", 0.02);
    sc.side = c.get<double>("side", 1.0);
    sc.seed = c.get<std::uint64_t>("seed", seed);
    SensorData data = make_sensor_data(sc);
    bundle.target = sensor_posterior(data);
    bundle.dataset = to_json(data);
  } else if (name == "himmelblau") {
    bundle.target = himmelblau();
  } else if (name == "rastrigin") {
    bundle.target = rastrigin(c.get<Index>("dim", 2));
  } else if (name == "styblinski-tang") {
    bundle.target = styblinski_tang(c.get<Index>("dim", 2));
  } else {
    throw ConfigError("$.target.name: unknown target '" + name + "'");
  }
  return bundle;
}

Vector default_init_point(const Target& target) {
  if (target.support) return target.support->center();
  return Vector::Constant(target.dim, 5.0);
}

// ---------------------------------------------------------------------------
// Measurement machinery shared by every method.

namespace {

struct ChainRun {
  Samples samples;
  std::vector<std::uint8_t> accepted;
  double acceptance_rate = 0.0;
};

// Per-chain files plus the summary block for one measurement chain.
struct MeasuredChain {
  ChainRun run;
  json stats;
};

long burn_count(std::size_t n, double fraction) {
  return static_cast<long>(std::floor(fraction * static_cast<double>(n)));
}

json chain_statistics(const ChainRun& run, const Target& base,
                      double burn_fraction) {
  json stats;
  stats["acceptance_rate"] = run.acceptance_rate;
  const long burn = burn_count(run.samples.size(), burn_fraction);
  RunningMoments moments;
  Samples post;
  post.reserve(run.samples.size() - burn);
  for (std::size_t t = burn; t < run.samples.size(); ++t) {
    moments.update(run.samples[t]);
    post.push_back(run.samples[t]);
  }
  if (base.true_mean) {
    stats["rmse"] = rmse(moments.mean, *base.true_mean);
    if (base.true_mean->cwiseAbs().sum() > 0)
      stats["rem"] = rem(moments.mean, *base.true_mean);
  }
  if (!base.optima.empty())
    stats["rmse_opt"] = optimization_rmse(post, base);
  if (!base.mode_centers.empty() && base.mode_radius > 0) {
    auto occ = mode_occupancy(post, base.mode_centers, base.mode_radius);
    stats["mode_occupancy"] = occ;
    const double residual = occ.back();
    if (residual < 1.0) {
      std::vector<double> normalized(occ.begin(), occ.end() - 1);
      for (auto& f : normalized) f /= (1.0 - residual);
      stats["mode_occupancy_normalized"] = normalized;
    }
  }
  if (post.size() >= 100) {
    try {
      EssReport ess_rep = ess_report(post);
      stats["min_ess"] = ess_rep.min_ess;
      stats["ess_clamped"] = ess_rep.clamped;
      json table = json::array();
      for (Index d = 0; d < ess_rep.fractions.cols(); ++d)
        table.push_back({{"dim", d},
                         {"ess_x", ess_rep.fractions(0, d)},
                         {"ess_x2", ess_rep.fractions(1, d)}});
      stats["ess_table"] = std::move(table);
    } catch (const std::invalid_argument&) {
      stats["min_ess"] = nullptr;  // degenerate chain (e.g. zero variance)
    }
  }
  return stats;
}

void write_chain_files(const fs::path& dir, int chain_index, const ChainRun& run,
                       const Target& base, const RunConfig& cfg,
                       std::vector<std::string>& files) {
  const Index dim = base.dim;
  std::vector<std::string> header = {"chain", "step"};
  for (Index d = 0; d < dim; ++d) header.push_back("x_" + std::to_string(d + 1));
  header.push_back("log_ptilde");
  const std::string sample_name = "samples_chain" + std::to_string(chain_index) + ".csv";
  CsvWriter samples_csv(dir / sample_name, header);
  for (std::size_t t = 0; t < run.samples.size(); t += cfg.sample_stride) {
    std::vector<std::string> cells;
    cells.reserve(dim + 3);
    cells.push_back(std::to_string(chain_index));
    cells.push_back(std::to_string(t + 1));
    for (Index d = 0; d < dim; ++d)
      cells.push_back(format_double(run.samples[t][d]));
    cells.push_back(format_double(base.log_unnorm(run.samples[t])));
    samples_csv.write_cells(cells);
  }
  files.push_back(sample_name);

  const std::string metrics_name = "metrics_chain" + std::to_string(chain_index) + ".csv";
  CsvWriter metrics_csv(dir / metrics_name, {"step", "rmse", "rem", "ar"});
  const long burn = burn_count(run.samples.size(), cfg.burn_in_fraction);
  RunningMoments moments;
  long accepted = 0;
  for (std::size_t t = 0; t < run.samples.size(); ++t) {
    if (!run.accepted.empty() && run.accepted[t]) accepted += 1;
    if (static_cast<long>(t) >= burn) moments.update(run.samples[t]);
    if ((t + 1) % cfg.metrics_stride == 0 && moments.count > 0) {
      double rmse_v = std::nan("");
      double rem_v = std::nan("");
      if (base.true_mean) {
        rmse_v = rmse(moments.mean, *base.true_mean);
        if (base.true_mean->cwiseAbs().sum() > 0)
          rem_v = rem(moments.mean, *base.true_mean);
      }
      const double ar =
          static_cast<double>(accepted) / static_cast<double>(t + 1);
      metrics_csv.row(static_cast<long>(t + 1), rmse_v, rem_v, ar);
    }
  }
  files.push_back(metrics_name);
}

std::vector<std::uint8_t> infer_moves(const Samples& samples) {
  std::vector<std::uint8_t> moved(samples.size(), 0);
  for (std::size_t t = 1; t < samples.size(); ++t)
    moved[t] = samples[t] != samples[t - 1] ? 1 : 0;
  if (!samples.empty()) moved[0] = 1;
  return moved;
}

// Local-update data gathering for initial model training: tuned RW-MH at the
// tempered target, burn-in discard and stride thinning.
struct InitRun {
  Samples data;
  double sigma = 0.0;
  double acceptance_rate = 0.0;
  long raw_steps = 0;
};

InitRun gather_local_data(const Target& tempered, const Vector& x0, long n_points,
                          int stride, RngStream rng) {
  InitRun out;
  out.sigma = calibrate_rw_sigma(tempered, x0, rng.fork("calibrate"));
  const long raw = static_cast<long>(
      std::ceil(static_cast<double>(stride) * static_cast<double>(n_points) / 0.9));
  out.raw_steps = raw;
  ChainState chain;
  chain.x = x0;
  chain.rng = rng.fork("chain");
  Samples history;
  history.reserve(raw);
  for (long t = 0; t < raw; ++t) {
    mh_step(chain, tempered, out.sigma);
    history.push_back(chain.x);
  }
  out.acceptance_rate = chain.acceptance_rate();
  out.data = make_training_data(history, stride, static_cast<int>(n_points));
  return out;
}

// Local-update EMC over a beta ladder; returns thinned per-replica data.
struct EmcInitRun {
  std::vector<Samples> data;
  std::vector<double> sigmas;
  double exchange_acceptance = 0.0;
};

EmcInitRun gather_emc_data(const Target& base, const std::vector<double>& betas,
                           const Vector& x0, long n_points, int stride,
                           RngStream rng) {
  const std::size_t n_chains = betas.size();
  EmcInitRun out;
  out.sigmas.resize(n_chains);
  std::vector<Target> tempered;
  for (std::size_t j = 0; j < n_chains; ++j) {
    tempered.push_back(base.tempered(betas[j]));
    out.sigmas[j] = calibrate_rw_sigma(tempered[j], x0, rng.fork("calibrate", j));
  }
  const long raw = static_cast<long>(
      std::ceil(static_cast<double>(stride) * static_cast<double>(n_points) / 0.9));
  std::vector<ChainState> chains(n_chains);
  std::vector<Samples> history(n_chains);
  for (std::size_t j = 0; j < n_chains; ++j) {
    chains[j].x = x0;
    chains[j].rng = rng.fork("chain", j);
    history[j].reserve(raw);
  }
  RngStream swap_rng = rng.fork("exchange");
  long attempts = 0, swaps = 0;
  for (long t = 0; t < raw; ++t) {
    for (std::size_t j = 0; j < n_chains; ++j)
      mh_step(chains[j], tempered[j], out.sigmas[j]);
    for (std::size_t j = t % 2; j + 1 < n_chains; j += 2) {
      attempts += 1;
      swaps += exchange_step(chains[j], betas[j], chains[j + 1], betas[j + 1], base,
                             swap_rng);
    }
    for (std::size_t j = 0; j < n_chains; ++j) history[j].push_back(chains[j].x);
  }
  out.exchange_acceptance =
      attempts == 0 ? 1.0 : static_cast<double>(swaps) / static_cast<double>(attempts);
  for (std::size_t j = 0; j < n_chains; ++j)
    out.data.push_back(
        make_training_data(history[j], stride, static_cast<int>(n_points)));
  return out;
}

ChainRun run_slmc_measurement(const Target& tempered, const VaeModel& model,
                              const Vector& x0, long steps, RngStream rng) {
  const IndependenceProposal proposal = model_proposal(model);
  ChainState chain;
  chain.x = x0;
  chain.rng = std::move(rng);
  ChainRun run;
  run.samples.reserve(steps);
  run.accepted.reserve(steps);
  for (long t = 0; t < steps; ++t) {
    run.accepted.push_back(slmc_step(chain, tempered, proposal) ? 1 : 0);
    run.samples.push_back(chain.x);
  }
  run.acceptance_rate = chain.acceptance_rate();
  return run;
}

Samples build_training_data(const RunConfig& cfg, const Target& base,
                            const Vector& x0, RngStream rng, json& info) {
  info["source"] = cfg.train_data_source;
  info["n"] = cfg.train_data_n;
  if (cfg.train_data_source == "direct") {
    if (!base.has_direct_sampler())
      throw ConfigError("$.train_data.source: target '" + base.name +
                        "' has no direct sampler");
    Samples data;
    data.reserve(cfg.train_data_n);
    RngStream r = rng.fork("direct");
    for (long i = 0; i < cfg.train_data_n; ++i) data.push_back(base.direct_sampler(r));
    return data;
  }
  if (cfg.train_data_source == "mh") {
    InitRun run = gather_local_data(base, x0, cfg.train_data_n, cfg.train_data_stride,
                                    rng.fork("mh"));
    info["rw_sigma"] = run.sigma;
    info["acceptance_rate"] = run.acceptance_rate;
    return std::move(run.data);
  }
  // hmc
  if (!base.has_gradient())
    throw ConfigError("$.train_data.source: hmc needs a gradient");
  RngStream r = rng.fork("hmc");
  const double eps =
      cfg.kernel.hmc_step_size > 0
          ? cfg.kernel.hmc_step_size
          : calibrate_hmc_step_size(base, x0, r.fork("calibrate"),
                                    cfg.kernel.hmc_leapfrog_steps);
  info["hmc_step_size"] = eps;
  const long raw = static_cast<long>(std::ceil(
      static_cast<double>(cfg.train_data_stride) * cfg.train_data_n / 0.9));
  ChainState chain;
  chain.x = x0;
  chain.rng = r.fork("chain");
  Samples history;
  history.reserve(raw);
  for (long t = 0; t < raw; ++t) {
    hmc_step(chain, base, eps, cfg.kernel.hmc_leapfrog_steps);
    history.push_back(chain.x);
  }
  info["acceptance_rate"] = chain.acceptance_rate();
  return make_training_data(history, cfg.train_data_stride,
                            static_cast<int>(cfg.train_data_n));
}

void write_trace(const fs::path& dir, const std::string& name,
                 const AnnealTrace& trace, std::vector<std::string>& files) {
  CsvWriter csv(dir / name,
                {"k", "beta", "acceptance_rate", "search_ar", "epochs", "seconds"});
  for (const auto& s : trace.steps)
    csv.row(s.k, s.beta, s.acceptance_rate, s.search_ar, s.epochs_trained, s.seconds);
  files.push_back(name);
}

}  // namespace

RunReport run_experiment(const RunConfig& cfg) {
  const auto t_start = Clock::now();
  RunReport report;
  report.dir = fs::path(cfg.output_dir);
  fs::create_directories(report.dir);

  TargetBundle bundle = make_target(cfg.target_spec, cfg.seed);
  Target& base = bundle.target;
  if (!bundle.dataset.is_null()) {
    write_json_file(report.dir / "dataset.json", bundle.dataset);
    report.files.push_back("dataset.json");
  }

  write_json_file(report.dir / "config_echo.json", cfg.echo());
  report.files.push_back("config_echo.json");

  Vector x0 = cfg.init_point.empty()
                  ? default_init_point(base)
                  : Eigen::Map<const Vector>(cfg.init_point.data(),
                                             static_cast<Index>(cfg.init_point.size()));
  if (x0.size() != base.dim) throw ConfigError("$.init_point: dimension mismatch");
  if (!base.in_support(x0)) throw ConfigError("$.init_point: outside target support");

  RngStream root = RngStream::from_seed(cfg.seed);
  json summary;
  summary["seed"] = cfg.seed;
  summary["method"] = method_to_string(cfg.method);
  summary["target"] = cfg.target_spec;
  summary["init_point"] = vec_json(x0);

  std::vector<ChainRun> runs(cfg.chains);

  switch (cfg.method) {
    case Method::MH: {
      const double sigma =
          cfg.kernel.rw_sigma > 0
              ? cfg.kernel.rw_sigma
              : calibrate_rw_sigma(base, x0, root.fork("calibrate"));
      summary["rw_sigma"] = sigma;
      RngStream chains_rng = root.fork("chains");
      parallel_for(cfg.chains, [&](std::size_t i) {
        ChainState chain;
        chain.x = x0;
        chain.rng = chains_rng.fork("chain", i);
        ChainRun& run = runs[i];
        run.samples.reserve(cfg.steps);
        run.accepted.reserve(cfg.steps);
        for (long t = 0; t < cfg.steps; ++t) {
          run.accepted.push_back(mh_step(chain, base, sigma) ? 1 : 0);
          run.samples.push_back(chain.x);
        }
        run.acceptance_rate = chain.acceptance_rate();
      });
      break;
    }

    case Method::HMC: {
      if (!base.has_gradient())
        throw ConfigError("$.method: HMC requires a target gradient");
      const double eps =
          cfg.kernel.hmc_step_size > 0
              ? cfg.kernel.hmc_step_size
              : calibrate_hmc_step_size(base, x0, root.fork("calibrate"),
                                        cfg.kernel.hmc_leapfrog_steps);
      summary["hmc_step_size"] = eps;
      summary["hmc_leapfrog_steps"] = cfg.kernel.hmc_leapfrog_steps;
      RngStream chains_rng = root.fork("chains");
      parallel_for(cfg.chains, [&](std::size_t i) {
        ChainState chain;
        chain.x = x0;
        chain.rng = chains_rng.fork("chain", i);
        ChainRun& run = runs[i];
        run.samples.reserve(cfg.steps);
        run.accepted.reserve(cfg.steps);
        for (long t = 0; t < cfg.steps; ++t) {
          run.accepted.push_back(
              hmc_step(chain, base, eps, cfg.kernel.hmc_leapfrog_steps) ? 1 : 0);
          run.samples.push_back(chain.x);
        }
        run.acceptance_rate = chain.acceptance_rate();
      });
      break;
    }

    case Method::MH_EMC:
    case Method::HMC_EMC: {
      const bool use_hmc = cfg.method == Method::HMC_EMC;
      if (use_hmc && !base.has_gradient())
        throw ConfigError("$.method: HMC-EMC requires a target gradient");
      std::vector<double> ladder = cfg.emc_ladder;
      if (ladder.empty())
        ladder = calibrate_exchange_ladder(base, x0, root.fork("ladder"),
                                           cfg.emc_beta_min);
      summary["emc_ladder"] = ladder;
      const std::size_t n_replicas = ladder.size();
      std::vector<Target> tempered;
      for (double b : ladder) tempered.push_back(base.tempered(b));
      std::vector<double> scales(n_replicas);
      for (std::size_t j = 0; j < n_replicas; ++j) {
        scales[j] =
            use_hmc ? calibrate_hmc_step_size(tempered[j], x0,
                                              root.fork("calibrate", j),
                                              cfg.kernel.hmc_leapfrog_steps)
                    : calibrate_rw_sigma(tempered[j], x0, root.fork("calibrate", j));
      }
      summary["replica_scales"] = scales;
      std::vector<double> exchange_ars(cfg.chains, 0.0);
      RngStream chains_rng = root.fork("chains");
      parallel_for(cfg.chains, [&](std::size_t i) {
        RngStream ens_rng = chains_rng.fork("ensemble", i);
        std::vector<ChainState> replicas(n_replicas);
        for (std::size_t j = 0; j < n_replicas; ++j) {
          replicas[j].x = x0;
          replicas[j].rng = ens_rng.fork("replica", j);
        }
        RngStream swap_rng = ens_rng.fork("exchange");
        ChainRun& run = runs[i];
        run.samples.reserve(cfg.steps);
        run.accepted.reserve(cfg.steps);
        long attempts = 0, swaps = 0;
        const std::size_t top = n_replicas - 1;  // beta = 1 replica
        for (long t = 0; t < cfg.steps; ++t) {
          Vector before = replicas[top].x;
          for (std::size_t j = 0; j < n_replicas; ++j) {
            if (use_hmc)
              hmc_step(replicas[j], tempered[j], scales[j],
                       cfg.kernel.hmc_leapfrog_steps);
            else
              mh_step(replicas[j], tempered[j], scales[j]);
          }
          for (std::size_t j = t % 2; j + 1 < n_replicas; j += 2) {
            attempts += 1;
            swaps += exchange_step(replicas[j], ladder[j], replicas[j + 1],
                                   ladder[j + 1], base, swap_rng);
          }
          run.accepted.push_back(replicas[top].x != before ? 1 : 0);
          run.samples.push_back(replicas[top].x);
        }
        run.acceptance_rate = replicas[top].acceptance_rate();
        exchange_ars[i] =
            attempts == 0 ? 1.0
                          : static_cast<double>(swaps) / static_cast<double>(attempts);
      });
      summary["exchange_acceptance_rates"] = exchange_ars;
      break;
    }

    case Method::VAE_SLMC: {
      json data_info;
      Samples data = build_training_data(cfg, base, x0, root.fork("train-data"),
                                         data_info);
      summary["train_data"] = data_info;
      RngStream model_rng = root.fork("model-init");
      VaeModel model = make_vae(base.dim, base.dim, cfg.train.beta_vae, model_rng);
      train_vae(model, data, cfg.train, root.fork("train"));
      VaeProvenance prov{base.name, 1.0, cfg.train.epochs, cfg.seed};
      save_vae(model, (report.dir / "model").string(), prov);
      report.files.insert(report.files.end(),
                          {"model.enc.bin", "model.dec.bin", "model.json"});
      RngStream measure_rng = root.fork("measure");
      parallel_for(cfg.chains, [&](std::size_t i) {
        runs[i] = run_slmc_measurement(base, model, x0, cfg.steps,
                                       measure_rng.fork("chain", i));
      });
      break;
    }

    case Method::CA_VAE_SLMC:
    case Method::AA_VAE_SLMC: {
      InitRun init = gather_local_data(base.tempered(cfg.anneal.beta0), x0,
                                       cfg.init_data, cfg.init_stride,
                                       root.fork("init-data"));
      summary["init_run"] = {{"rw_sigma", init.sigma},
                             {"acceptance_rate", init.acceptance_rate},
                             {"raw_steps", init.raw_steps},
                             {"n", init.data.size()}};
      AnnealConfig anneal = cfg.anneal;
      anneal.train = cfg.train;
      anneal.init_x = x0;
      anneal.final_steps = cfg.steps;
      AnnealResult result =
          cfg.method == Method::CA_VAE_SLMC
              ? run_constant_annealing(base, anneal, init.data, root.fork("anneal"))
              : run_adaptive_annealing(base, anneal, init.data, root.fork("anneal"));
      write_trace(report.dir, "anneal_trace.csv", result.trace, report.files);
      VaeProvenance prov{base.name, anneal.beta_final, cfg.train.epochs, cfg.seed};
      save_vae(result.model, (report.dir / "model").string(), prov);
      report.files.insert(report.files.end(),
                          {"model.enc.bin", "model.dec.bin", "model.json"});
      summary["anneal_steps"] = result.trace.steps.size() - 1;
      summary["final_acceptance_rate"] = result.final_acceptance_rate;

      runs[0].samples = std::move(result.samples);
      runs[0].accepted = infer_moves(runs[0].samples);
      runs[0].acceptance_rate = result.final_acceptance_rate;
      RngStream measure_rng = root.fork("measure");
      const Target measured = base.tempered(cfg.anneal.beta_final);
      parallel_for(cfg.chains, [&](std::size_t i) {
        if (i == 0) return;
        runs[i] = run_slmc_measurement(measured, result.model, x0, cfg.steps,
                                       measure_rng.fork("chain", i));
      });
      break;
    }

    case Method::CA_VAE_ESLMC:
    case Method::AA_VAE_ESLMC: {
      EmcInitRun init = gather_emc_data(base, cfg.chain_betas0, x0, cfg.init_data,
                                        cfg.init_stride, root.fork("init-data"));
      summary["init_run"] = {{"rw_sigmas", init.sigmas},
                             {"exchange_acceptance", init.exchange_acceptance}};
      ParallelAnnealConfig pcfg;
      pcfg.chain_betas0 = cfg.chain_betas0;
      pcfg.base = cfg.anneal;
      pcfg.base.train = cfg.train;
      pcfg.base.init_x = x0;
      pcfg.base.final_steps = cfg.steps;
      pcfg.base.mode = cfg.method == Method::CA_VAE_ESLMC
                           ? AnnealConfig::Mode::constant
                           : AnnealConfig::Mode::adaptive;
      if (pcfg.base.mode == AnnealConfig::Mode::constant) {
        pcfg.schedules = cfg.parallel_schedules;
        if (pcfg.schedules.empty()) {
          // Uniform per-chain grids sharing one length; chain j ends at
          // beta_final - (max beta0 - beta0_j).
          const int k_steps = 10;
          const double top = *std::max_element(cfg.chain_betas0.begin(),
                                               cfg.chain_betas0.end());
          for (double b0 : cfg.chain_betas0) {
            const double end = cfg.anneal.beta_final - (top - b0);
            std::vector<double> sched(k_steps);
            for (int k = 0; k < k_steps; ++k)
              sched[k] = b0 + (end - b0) * k / (k_steps - 1.0);
            pcfg.schedules.push_back(std::move(sched));
          }
        }
      }
      ParallelAnnealResult result =
          run_parallel_annealing(base, pcfg, init.data, root.fork("anneal"));
      for (std::size_t j = 0; j < result.traces.size(); ++j)
        write_trace(report.dir, "anneal_trace_chain" + std::to_string(j) + ".csv",
                    result.traces[j], report.files);
      for (std::size_t j = 0; j < result.models.size(); ++j) {
        VaeProvenance prov{base.name, cfg.anneal.beta_final, cfg.train.epochs,
                           cfg.seed};
        const std::string stem = "model_chain" + std::to_string(j);
        save_vae(result.models[j], (report.dir / stem).string(), prov);
        report.files.insert(report.files.end(),
                            {stem + ".enc.bin", stem + ".dec.bin", stem + ".json"});
      }
      summary["exchange_acceptance_rate"] = result.exchange_acceptance_rate;
      summary["measure_chain"] = result.measure_chain;

      runs.resize(1);
      runs[0].samples = std::move(result.samples[result.measure_chain]);
      runs[0].accepted = infer_moves(runs[0].samples);
      runs[0].acceptance_rate = 0.0;
      for (std::size_t t = 0; t < runs[0].accepted.size(); ++t)
        runs[0].acceptance_rate += runs[0].accepted[t];
      if (!runs[0].accepted.empty())
        runs[0].acceptance_rate /= static_cast<double>(runs[0].accepted.size());
      break;
    }
  }

  // Fixed-order persistence and per-chain statistics.
  json chain_stats = json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    write_chain_files(report.dir, static_cast<int>(i), runs[i], base, cfg,
                      report.files);
    chain_stats.push_back(chain_statistics(runs[i], base, cfg.burn_in_fraction));
  }
  summary["chains"] = std::move(chain_stats);

  // Aggregate mean/std for the headline metrics.
  auto aggregate = [&](const std::string& key) {
    std::vector<double> values;
    for (const auto& c : summary["chains"])
      if (c.contains(key) && c[key].is_number()) values.push_back(c[key]);
    if (values.empty()) return;
    double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= values.size();
    summary["aggregate"][key] = {{"mean", mean}, {"std", std::sqrt(var)}};
  };
  aggregate("rmse");
  aggregate("rem");
  aggregate("rmse_opt");
  aggregate("min_ess");
  aggregate("acceptance_rate");

  summary["wall_seconds"] = seconds_since(t_start);
  summary["files"] = report.files;
  write_json_file(report.dir / "summary.json", summary);
  report.files.push_back("summary.json");
  report.summary = std::move(summary);
  return report;
}

}  // namespace slmc
