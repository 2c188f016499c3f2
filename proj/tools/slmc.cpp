#include <algorithm>
#include <iostream>
#include <numeric>

#include "CLI11.hpp"
#include "slmc/harness.hpp"
#include "slmc/metrics.hpp"
#include "slmc/parallel.hpp"

namespace {

using namespace slmc;

int cmd_run(const std::string& config_path, const std::string& output_dir,
            long seed_override) {
  json j = read_json_file(config_path);
  if (!output_dir.empty()) j["output_dir"] = output_dir;
  if (seed_override >= 0) j["seed"] = static_cast<std::uint64_t>(seed_override);
  RunConfig cfg = RunConfig::parse(j);
  RunReport report = run_experiment(cfg);
  std::cout << "run complete: " << report.dir.string() << "\n";
  if (report.summary.contains("aggregate"))
    std::cout << report.summary["aggregate"].dump(2) << "\n";
  return 0;
}

int cmd_verify_iso(const std::string& model_stem, long n_samples, double delta) {
  VaeModel model = load_vae(model_stem);
  RngStream rng = RngStream::from_seed(0).fork("verify-iso");
  Samples samples;
  samples.reserve(n_samples);
  for (long i = 0; i < n_samples; ++i) samples.push_back(model.sample_proposal(rng));
  Vector iso = isometric_factor(model, samples, delta);
  Vector kappa = latent_importance(model, samples);

  std::vector<Index> order(model.latent_dim);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return kappa[a] > kappa[b]; });

  std::cout << "latent_dim\tiso_factor\timportance\n";
  for (Index m : order)
    std::cout << m + 1 << "\t" << format_double(iso[m]) << "\t"
              << format_double(kappa[m]) << "\n";
  const double worst = (iso.array() - 1.0).abs().maxCoeff();
  std::cout << "max |iso - 1| = " << format_double(worst) << "\n";
  return 0;
}

int cmd_train_init(const std::string& config_path, const std::string& out_stem,
                   bool at_beta0) {
  json j = read_json_file(config_path);
  if (!j.contains("output_dir")) j["output_dir"] = "train-init-out";
  if (!j.contains("method")) j["method"] = "VAE-SLMC";
  RunConfig cfg = RunConfig::parse(j);
  TargetBundle bundle = make_target(cfg.target_spec, cfg.seed);
  RngStream root = RngStream::from_seed(cfg.seed);
  Vector x0 = cfg.init_point.empty()
                  ? default_init_point(bundle.target)
                  : Eigen::Map<const Vector>(cfg.init_point.data(),
                                             static_cast<Index>(cfg.init_point.size()));

  Samples data;
  double trained_beta = 1.0;
  if (at_beta0) {
    trained_beta = cfg.anneal.beta0;
    const Target tempered = bundle.target.tempered(trained_beta);
    const double sigma =
        calibrate_rw_sigma(tempered, x0, root.fork("init-data").fork("calibrate"));
    ChainState chain;
    chain.x = x0;
    chain.rng = root.fork("init-data").fork("chain");
    const long raw = static_cast<long>(
        std::ceil(cfg.init_stride * static_cast<double>(cfg.init_data) / 0.9));
    Samples history;
    history.reserve(raw);
    for (long t = 0; t < raw; ++t) {
      mh_step(chain, tempered, sigma);
      history.push_back(chain.x);
    }
    data = make_training_data(history, cfg.init_stride,
                              static_cast<int>(cfg.init_data));
    std::cout << "local-update data at beta0=" << trained_beta << ", sigma=" << sigma
              << ", acceptance=" << chain.acceptance_rate() << "\n";
  } else {
    if (!bundle.target.has_direct_sampler())
      throw ConfigError("train-init: target has no direct sampler; use --beta0");
    RngStream r = root.fork("train-data").fork("direct");
    data.reserve(cfg.train_data_n);
    for (long i = 0; i < cfg.train_data_n; ++i)
      data.push_back(bundle.target.direct_sampler(r));
  }

  RngStream model_rng = root.fork("model-init");
  VaeModel model =
      make_vae(bundle.target.dim, bundle.target.dim, cfg.train.beta_vae, model_rng);
  TrainReport report = train_vae(model, data, cfg.train, root.fork("train"));
  VaeProvenance prov{bundle.target.name, trained_beta, cfg.train.epochs, cfg.seed};
  save_vae(model, out_stem, prov);
  std::cout << "saved " << out_stem << ".{enc.bin,dec.bin,json}; first/last loss "
            << format_double(report.epoch_loss.front()) << " / "
            << format_double(report.epoch_loss.back()) << "\n";
  return 0;
}

int cmd_calibrate(const std::string& config_path, const std::string& kind) {
  json j = read_json_file(config_path);
  if (!j.contains("output_dir")) j["output_dir"] = "calibrate-out";
  if (!j.contains("method")) j["method"] = "MH";
  RunConfig cfg = RunConfig::parse(j);
  TargetBundle bundle = make_target(cfg.target_spec, cfg.seed);
  RngStream root = RngStream::from_seed(cfg.seed);
  Vector x0 = cfg.init_point.empty()
                  ? default_init_point(bundle.target)
                  : Eigen::Map<const Vector>(cfg.init_point.data(),
                                             static_cast<Index>(cfg.init_point.size()));
  if (kind == "rw") {
    std::cout << "rw_sigma = "
              << format_double(calibrate_rw_sigma(bundle.target, x0,
                                                  root.fork("calibrate")))
              << "\n";
  } else if (kind == "hmc") {
    std::cout << "hmc_step_size = "
              << format_double(calibrate_hmc_step_size(
                     bundle.target, x0, root.fork("calibrate"),
                     cfg.kernel.hmc_leapfrog_steps))
              << "\n";
  } else if (kind == "ladder") {
    auto ladder = calibrate_exchange_ladder(bundle.target, x0, root.fork("ladder"),
                                            cfg.emc_beta_min);
    std::cout << "emc_ladder = [";
    for (std::size_t i = 0; i < ladder.size(); ++i)
      std::cout << (i ? ", " : "") << format_double(ladder[i]);
    std::cout << "]\n";
  } else {
    throw ConfigError("calibrate: unknown kind '" + kind + "'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-learning Monte Carlo toolkit: VAE proposals, adaptive "
               "annealing, replica exchange"};
  app.require_subcommand(1);

  std::string config_path, output_dir;
  long seed_override = -1;
  auto* run = app.add_subcommand("run", "Execute an experiment from a JSON config");
  run->add_option("--config", config_path, "JSON config path")->required();
  run->add_option("--output-dir", output_dir, "Override output directory");
  run->add_option("--seed", seed_override, "Override the run seed");

  std::string model_stem;
  long iso_samples = 10000;
  double iso_delta = 1e-3;
  auto* iso = app.add_subcommand(
      "verify-iso", "Isometric factors and latent importances of a checkpoint");
  iso->add_option("--model", model_stem, "Checkpoint stem (without .json)")->required();
  iso->add_option("--samples", iso_samples, "Generated sample count");
  iso->add_option("--delta", iso_delta, "Finite-difference step");

  std::string suite;
  slmc::BenchOptions bench_opts;
  std::string bench_out = "bench-out";
  auto* bench = app.add_subcommand("bench", "Aggregate benchmark tables");
  bench->add_option("--suite", suite,
                    "naive-ess|gmm-rmse|optimization|spectral|sensor")
      ->required();
  bench->add_option("--chains", bench_opts.chains, "Independent chains per cell");
  bench->add_option("--scale", bench_opts.scale, "Budget scale factor");
  bench->add_option("--seed", bench_opts.seed, "Suite seed");
  bench->add_option("--out", bench_out, "Output directory");

  std::string ti_config, ti_out = "model";
  bool ti_beta0 = false;
  auto* ti = app.add_subcommand("train-init", "Train and checkpoint a proposal model");
  ti->add_option("--config", ti_config, "JSON config path")->required();
  ti->add_option("--out", ti_out, "Checkpoint stem");
  ti->add_flag("--beta0", ti_beta0, "Gather data with local MH at anneal.beta0");

  std::string cal_config, cal_kind = "rw";
  auto* cal = app.add_subcommand("calibrate", "Tune kernel scales for a target");
  cal->add_option("--config", cal_config, "JSON config path")->required();
  cal->add_option("--kind", cal_kind, "rw|hmc|ladder");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, output_dir, seed_override);
    if (*iso) return cmd_verify_iso(model_stem, iso_samples, iso_delta);
    if (*bench) {
      bench_opts.out_dir = bench_out;
      slmc::run_bench_suite(suite, bench_opts);
      return 0;
    }
    if (*ti) return cmd_train_init(ti_config, ti_out, ti_beta0);
    if (*cal) return cmd_calibrate(cal_config, cal_kind);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
