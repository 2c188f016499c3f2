#include <cmath>
#include <iostream>

#include "slmc/harness.hpp"

namespace slmc {

namespace {

namespace fs = std::filesystem;

long scaled(long v, double scale, long floor_value) {
  return std::max(floor_value, static_cast<long>(std::llround(v * scale)));
}

int scaled(int v, double scale, int floor_value) {
  return std::max(floor_value, static_cast<int>(std::lround(v * scale)));
}

json base_config(const BenchOptions& opts, const std::string& run_name) {
  json j;
  j["seed"] = opts.seed;
  j["output_dir"] = (opts.out_dir / run_name).string();
  j["chains"] = opts.chains;
  return j;
}

struct TableRow {
  std::vector<std::string> cells;
};

void emit_table(const fs::path& path, const std::vector<std::string>& header,
                const std::vector<TableRow>& rows) {
  CsvWriter csv(path, header);
  for (const auto& r : rows) csv.write_cells(r.cells);
  std::cout << path.string() << "\n";
  for (const auto& h : header) std::cout << h << "\t";
  std::cout << "\n";
  for (const auto& r : rows) {
    for (const auto& c : r.cells) std::cout << c << "\t";
    std::cout << "\n";
  }
}

std::pair<double, double> mean_std(const json& summary, const std::string& key) {
  if (!summary.contains("aggregate") || !summary["aggregate"].contains(key))
    return {std::nan(""), std::nan("")};
  return {summary["aggregate"][key]["mean"].get<double>(),
          summary["aggregate"][key]["std"].get<double>()};
}

void bench_naive_ess(const BenchOptions& opts) {
  struct Row {
    json target;
    double beta_vae;
  };
  const std::vector<Row> targets = {
      {{{"name", "icg"}, {"dim", 100}}, 6.0},
      {{{"name", "scg"}}, 6.0},
      {{{"name", "banana"}}, 1.0 / 20.0},
      {{{"name", "rough-well"}, {"dim", 2}}, 1.0 / 20.0},
  };
  std::vector<TableRow> rows;
  for (const auto& row : targets) {
    const std::string tname = row.target.at("name").get<std::string>();
    for (const std::string method : {"HMC", "VAE-SLMC"}) {
      json cfg_json = base_config(opts, "naive-ess/" + tname + "-" + method);
      cfg_json["method"] = method;
      cfg_json["target"] = row.target;
      cfg_json["steps"] = scaled(20000, opts.scale, 500);
      cfg_json["kernel"] = {{"hmc_leapfrog_steps", 10}};
      if (method == "VAE-SLMC") {
        cfg_json["train"] = {{"epochs", scaled(100, opts.scale, 2)},
                             {"beta_vae", row.beta_vae}};
        cfg_json["train_data"] = {{"source", "direct"},
                                  {"n", scaled(20000, opts.scale, 500)}};
      }
      // Start baselines from the mode neighbourhood rather than (5, ..., 5).
      cfg_json["init_point"] = std::vector<double>(
          row.target.value("dim", 2), 0.0);
      RunReport report = run_experiment(RunConfig::parse(cfg_json));
      auto [mean, std_dev] = mean_std(report.summary, "min_ess");
      rows.push_back({{tname, method, format_double(mean), format_double(std_dev)}});
    }
  }
  emit_table(opts.out_dir / "naive-ess.csv",
             {"target", "method", "min_ess_mean", "min_ess_std"}, rows);
}

json desk_anneal(const BenchOptions& opts, double beta0, double ar_min,
                 double beta_final = 1.0) {
  return json{{"beta0", beta0},
              {"beta_final", beta_final},
              {"ar_min", ar_min},
              {"ar_max", 1.0},
              {"epsilon", 0.01},
              {"t_check", scaled(2000, opts.scale, 100)},
              {"n_train", scaled(8000, opts.scale, 200)},
              {"thinning_stride", 2},
              {"init_data", scaled(20000, opts.scale, 500)},
              {"init_stride", 5}};
}

void bench_gmm_rmse(const BenchOptions& opts) {
  std::vector<TableRow> rows;
  for (Index dim : {2, 10}) {
    for (const std::string method : {"MH", "AA-VAE-SLMC"}) {
      json cfg_json =
          base_config(opts, "gmm-rmse/d" + std::to_string(dim) + "-" + method);
      cfg_json["method"] = method;
      cfg_json["target"] = {{"name", "gmm"}, {"clusters", 3}, {"dim", dim}};
      cfg_json["steps"] = scaled(50000, opts.scale, 1000);
      if (method == "AA-VAE-SLMC") {
        cfg_json["anneal"] = desk_anneal(opts, 0.1, 0.2);
        cfg_json["train"] = {{"epochs", scaled(60, opts.scale, 2)},
                             {"beta_vae", 1.0 / 120.0}};
      }
      RunReport report = run_experiment(RunConfig::parse(cfg_json));
      auto [mean, std_dev] = mean_std(report.summary, "rmse");
      rows.push_back({{"gmm-3", std::to_string(dim), method, format_double(mean),
                       format_double(std_dev)}});
    }
  }
  emit_table(opts.out_dir / "gmm-rmse.csv",
             {"target", "dim", "method", "rmse_mean", "rmse_std"}, rows);
}

void bench_optimization(const BenchOptions& opts) {
  struct Row {
    std::string name;
    Index dim;
    double beta_vae;
    int batch;
    double ar_min;
  };
  const std::vector<Row> problems = {
      {"himmelblau", 2, 1.0 / 200.0, 516, 0.25},
      {"rastrigin", 2, 1.0 / 300.0, 1024, 0.2},
      {"rastrigin", 10, 1.0 / 300.0, 1024, 0.2},
      {"styblinski-tang", 2, 1.0 / 200.0, 516, 0.2},
      {"styblinski-tang", 10, 1.0 / 30.0, 516, 0.2},
  };
  std::vector<TableRow> rows;
  for (const auto& p : problems) {
    json cfg_json = base_config(
        opts, "optimization/" + p.name + "-d" + std::to_string(p.dim));
    cfg_json["method"] = "AA-VAE-SLMC";
    cfg_json["target"] = {{"name", p.name}, {"dim", p.dim}};
    cfg_json["steps"] = scaled(50000, opts.scale, 1000);
    cfg_json["anneal"] = desk_anneal(opts, 0.1, p.ar_min, 50.0);
    cfg_json["anneal"]["grid"] = "geometric";
    cfg_json["anneal"]["t_max"] = 48;
    cfg_json["train"] = {{"epochs", scaled(60, opts.scale, 2)},
                         {"beta_vae", p.beta_vae},
                         {"batch_size", p.batch}};
    RunReport report = run_experiment(RunConfig::parse(cfg_json));
    auto [mean, std_dev] = mean_std(report.summary, "rmse_opt");
    rows.push_back({{p.name, std::to_string(p.dim), format_double(mean),
                     format_double(std_dev),
                     std::to_string(report.summary["anneal_steps"].get<long>())}});
  }
  emit_table(opts.out_dir / "optimization.csv",
             {"target", "dim", "rmse_opt_mean", "rmse_opt_std", "anneal_steps"},
             rows);
}

void bench_spectral(const BenchOptions& opts) {
  json cfg_json = base_config(opts, "spectral/aa-vae-slmc");
  cfg_json["method"] = "AA-VAE-SLMC";
  cfg_json["target"] = {{"name", "spectral"}};
  cfg_json["steps"] = scaled(50000, opts.scale, 1000);
  cfg_json["anneal"] = desk_anneal(opts, 0.1, 0.15);
  cfg_json["train"] = {{"epochs", scaled(60, opts.scale, 2)},
                       {"beta_vae", 1.0 / 1000.0}};
  RunReport report = run_experiment(RunConfig::parse(cfg_json));
  auto [mean, std_dev] = mean_std(report.summary, "rem");
  emit_table(opts.out_dir / "spectral.csv",
             {"target", "method", "rem_mean", "rem_std"},
             {{{"spectral", "AA-VAE-SLMC", format_double(mean),
                format_double(std_dev)}}});
}

void bench_sensor(const BenchOptions& opts) {
  json cfg_json = base_config(opts, "sensor/aa-vae-slmc");
  cfg_json["method"] = "AA-VAE-SLMC";
  cfg_json["target"] = {{"name", "sensor"}};
  cfg_json["steps"] = scaled(50000, opts.scale, 1000);
  cfg_json["anneal"] = desk_anneal(opts, 0.05, 0.15);
  cfg_json["train"] = {{"epochs", scaled(60, opts.scale, 2)},
                       {"beta_vae", 1.0 / 600.0}};
  RunReport report = run_experiment(RunConfig::parse(cfg_json));
  auto [mean, std_dev] = mean_std(report.summary, "rem");
  emit_table(opts.out_dir / "sensor.csv",
             {"target", "method", "rem_mean", "rem_std"},
             {{{"sensor", "AA-VAE-SLMC", format_double(mean),
                format_double(std_dev)}}});
}

}  // namespace

void run_bench_suite(const std::string& suite, const BenchOptions& opts) {
  fs::create_directories(opts.out_dir);
  if (suite == "naive-ess") return bench_naive_ess(opts);
  if (suite == "gmm-rmse") return bench_gmm_rmse(opts);
  if (suite == "optimization") return bench_optimization(opts);
  if (suite == "spectral") return bench_spectral(opts);
  if (suite == "sensor") return bench_sensor(opts);
  throw ConfigError("bench: unknown suite '" + suite +
                    "' (expected naive-ess|gmm-rmse|optimization|spectral|sensor)");
}

}  // namespace slmc
