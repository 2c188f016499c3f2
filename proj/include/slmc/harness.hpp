#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "slmc/annealing.hpp"
#include "slmc/io.hpp"
#include "slmc/kernels.hpp"
#include "slmc/targets.hpp"
#include "slmc/vae.hpp"

namespace slmc {

// Experimental conditions: local-update baselines, exchange baselines, the
// plain VAE-SLMC, and the four annealed variants.
enum class Method {
  MH,
  HMC,
  MH_EMC,
  HMC_EMC,
  VAE_SLMC,
  CA_VAE_SLMC,
  AA_VAE_SLMC,
  CA_VAE_ESLMC,
  AA_VAE_ESLMC,
};

Method method_from_string(const std::string& name);
std::string method_to_string(Method m);
bool method_uses_annealing(Method m);
bool method_is_parallel(Method m);

struct RunConfig {
  int version = 1;
  std::uint64_t seed = 42;
  Method method = Method::MH;
  std::string output_dir;
  json target_spec;

  long steps = 50000;
  int chains = 1;
  double burn_in_fraction = 0.1;
  long metrics_stride = 100;
  long sample_stride = 1;

  KernelConfig kernel;        // zero scale => calibrate and persist
  TrainConfig train;

  // Plain VAE-SLMC training data.
  std::string train_data_source = "direct";  // direct | mh | hmc
  long train_data_n = 20000;
  int train_data_stride = 5;

  AnnealConfig anneal;
  long init_data = 40000;  // local-update points for the initial model
  int init_stride = 5;

  std::vector<double> chain_betas0;                 // ESLMC ladder
  std::vector<std::vector<double>> parallel_schedules;  // constant ESLMC
  std::vector<double> emc_ladder;  // EMC baselines; empty => calibrate
  double emc_beta_min = 0.1;

  std::vector<double> init_point;  // empty => target default

  json echo() const;
  static RunConfig parse(const json& j);
};

struct TargetBundle {
  Target target;
  json dataset;  // synthetic-instance description; null when not applicable
};

// Builds a catalog target from {"name": ..., params}; synthetic instances
// (spectral, sensor, icg) come out reproducibly seeded and described in
// `dataset` for persistence next to run outputs.
TargetBundle make_target(const json& spec, std::uint64_t seed);

Vector default_init_point(const Target& target);

struct RunReport {
  std::filesystem::path dir;
  json summary;
  std::vector<std::string> files;
};

// Executes the configured experiment and writes samples, metrics, traces,
// checkpoints, the config echo and a summary under cfg.output_dir.
RunReport run_experiment(const RunConfig& cfg);

struct BenchOptions {
  int chains = 10;
  double scale = 1.0;  // shrinks steps/datasets/epochs for smoke runs
  std::uint64_t seed = 42;
  std::filesystem::path out_dir = "bench-out";
};

// Suites: naive-ess, gmm-rmse, optimization, spectral, sensor.
void run_bench_suite(const std::string& suite, const BenchOptions& opts);

}  // namespace slmc
