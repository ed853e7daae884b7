// pertbench: sweeps of the perturbed-geometry solver against a rebuilt HBS
// solver. Exit codes: 0 ok, 1 bad config or arguments, 2 E above threshold.

#include "pertsolve/bench.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace pertsolve;

namespace {

constexpr int kConfigError = 1;
constexpr int kAccuracyError = 2;

void write_svgs(const std::vector<ExperimentRow>& rows, const fs::path& stem) {
  for (auto [phase, suffix] : {std::pair{PlotPhase::precompute, "_precompute.svg"},
                               std::pair{PlotPhase::solve, "_solve.svg"}}) {
    const fs::path p = stem.string() + suffix;
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    write_svg(os, rows, phase);
  }
}

void print_fit(const std::vector<ExperimentRow>& rows) {
  if (rows.size() < 4) return;
  std::cout << '\n';
  write_scaling_csv(std::cout, fit_scaling(rows));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perturbed-geometry solver benchmarks"};
  app.require_subcommand(1);

  std::string experiment, sweep, config_path, out_dir = ".", format = "csv";
  double eps = 1e-10, max_error = -1.0;
  std::uint64_t seed = 1;
  int repeats = 3;
  bool dense_oracle = false, parallel = false;

  auto* run = app.add_subcommand("run", "run one experiment sweep");
  run->add_option("--config", config_path, "key = value config file");
  run->add_option("--experiment", experiment,
                  "nose-thinning, nose-fixed, bump-shrinking, bump-fixed, star-refine, identity");
  run->add_option("--eps", eps, "compression tolerance");
  run->add_option("--sweep", sweep, "comma-separated N_o values (N_p for star-refine)");
  run->add_option("--seed", seed, "seed for the charges and targets");
  run->add_option("--repeats", repeats, "timed repeats per phase (at least 3)");
  run->add_option("--out-dir", out_dir, "output directory");
  run->add_option("--max-error", max_error, "E threshold for exit code 2");
  run->add_flag("--dense-oracle", dense_oracle, "add dense oracle columns under the cap");
  run->add_flag("--parallel", parallel, "run sweep points concurrently");
  run->add_option("--format", format, "csv or svg (svg also writes the csv)")
      ->check(CLI::IsMember({"csv", "svg"}));

  std::string in_path, out_path, phase = "precompute";
  auto* table = app.add_subcommand("table", "print a results csv with scaling slopes");
  table->add_option("input", in_path, "csv written by run")->required();
  auto* plot = app.add_subcommand("plot", "log-log svg from a results csv");
  plot->add_option("input", in_path, "csv written by run")->required();
  plot->add_option("-o,--output", out_path, "svg path")->required();
  plot->add_option("--phase", phase, "precompute or solve")
      ->check(CLI::IsMember({"precompute", "solve"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*table) {
      const auto rows = read_rows_csv(in_path);
      write_rows_table(std::cout, rows);
      print_fit(rows);
      return 0;
    }
    if (*plot) {
      const auto rows = read_rows_csv(in_path);
      std::ofstream os(out_path);
      if (!os) throw std::runtime_error("cannot write " + out_path);
      write_svg(os, rows, phase == "solve" ? PlotPhase::solve : PlotPhase::precompute);
      return 0;
    }

    ExperimentConfig cfg;
    try {
      if (!config_path.empty()) cfg = load_experiment_config(config_path);
      // Command-line flags win over the config file.
      if (run->count("--experiment")) cfg.experiment = parse_experiment(experiment);
      if (run->count("--sweep")) cfg.sweep = parse_sweep(sweep);
      if (run->count("--eps")) cfg.eps = eps;
      if (run->count("--seed")) cfg.seed = seed;
      if (run->count("--repeats")) cfg.repeats = repeats;
      if (run->count("--max-error")) cfg.max_error = max_error;
      if (dense_oracle) cfg.dense_oracle = true;
      if (parallel) cfg.parallel = true;
      if (config_path.empty() && !run->count("--experiment")) {
        throw ConfigError("no experiment given", 0);
      }
      if (cfg.repeats < 3) throw ConfigError("repeats must be at least 3", 0);
      if (!(cfg.eps > 0.0 && cfg.eps < 1.0)) throw ConfigError("eps must lie in (0, 1)", 0);
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return kConfigError;
    }

    fs::create_directories(out_dir);
    const std::string name = experiment_name(cfg.experiment);
    if (cfg.parallel) {
      std::cerr << "note: sweep points timed concurrently; timings are not isolated\n";
    }
    const auto rows = run_experiment(cfg);
    const fs::path stem = fs::path(out_dir) / name;
    write_rows_csv(stem.string() + ".csv", rows);
    if (format == "svg") write_svgs(rows, stem);
    write_rows_table(std::cout, rows);
    print_fit(rows);

    int bad = 0;
    for (const auto& r : rows) {
      if (!(r.E <= cfg.max_error)) {
        std::cerr << name << " N_o=" << r.N_o << " N_p=" << r.N_p << ": E = " << r.E
                  << " exceeds " << cfg.max_error << '\n';
        ++bad;
      }
    }
    return bad ? kAccuracyError : 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
}
