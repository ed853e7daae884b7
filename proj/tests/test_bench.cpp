#include "pertsolve/bench.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace pertsolve;

namespace {

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

ExperimentRow synthetic_row(Index n, double c) {
  ExperimentRow r;
  r.geometry = "bump-shrinking";
  r.N_o = n;
  r.N_p = 199;
  r.N_c = 199;
  r.T_new_p = c * static_cast<double>(n);
  r.T_hbs_p = 2 * c * static_cast<double>(n);
  r.r_p = 0.5;
  r.T_new_s = 1e-3 * c * static_cast<double>(n);
  r.T_hbs_s = 1e-3 * c * static_cast<double>(n) * static_cast<double>(n) / 1000.0;
  r.r_s = r.T_new_s / r.T_hbs_s;
  r.E = 1.25e-10;
  r.k = 1;
  r.k0 = 204;
  r.rank_Q = 230;
  r.break_even = 12.5;
  return r;
}

}  // namespace

TEST_CASE("csv header follows the row field order") {
  const std::vector<std::string> f = row_fields();
  const std::vector<std::string> expect = {
      "geometry", "N_o",  "N_p",      "N_c",   "T_new_p",    "T_hbs_p",     "r_p",
      "T_new_s",  "T_hbs_s", "r_s",   "E",     "k",          "k0",          "k_opt",
      "break_even", "rank_Q", "E_dense", "oracle_diff", "concurrent"};
  CHECK(f == expect);
  std::ostringstream os;
  write_rows_csv(os, {});
  std::string header;
  for (size_t i = 0; i < f.size(); ++i) header += (i ? "," : "") + f[i];
  CHECK(os.str() == header + "\n");
}

TEST_CASE("csv round trip keeps values and missing entries") {
  std::vector<ExperimentRow> rows = {synthetic_row(2000, 1e-5), synthetic_row(4000, 1e-5)};
  rows[1].k_opt = 15;
  rows[1].E_dense = 3e-11;
  std::stringstream ss;
  write_rows_csv(ss, rows);
  const auto back = read_rows_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].geometry == "bump-shrinking");
  CHECK(back[1].N_o == 4000);
  CHECK(back[1].T_new_p == doctest::Approx(rows[1].T_new_p).epsilon(1e-6));
  CHECK(back[0].k_opt == -1);
  CHECK(std::isnan(back[0].E_dense));
  CHECK(back[1].k_opt == 15);
  CHECK(back[1].E_dense == doctest::Approx(3e-11).epsilon(1e-6));

  // Column subsets are accepted; bad values, counts and names are not.
  std::istringstream subset("geometry,N_o\nx,1\n");
  CHECK(read_rows_csv(subset).front().N_o == 1);
  std::istringstream bad_value("geometry,N_o\nx,many\n");
  CHECK_THROWS(read_rows_csv(bad_value));
  std::istringstream bad_count("geometry,N_o\nx,1,2\n");
  CHECK_THROWS(read_rows_csv(bad_count));
  std::istringstream bad_name("geometry,N_x\nx,1\n");
  CHECK_THROWS(read_rows_csv(bad_name));
}

TEST_CASE("log-log slope of exact power laws") {
  std::vector<ExperimentRow> rows;
  for (Index n : {2000, 4000, 8000, 16000, 32000}) rows.push_back(synthetic_row(n, 3e-6));
  const ScalingFit fit = fit_scaling(rows);
  CHECK(std::abs(fit.T_new_p - 1.0) <= 1e-6);
  CHECK(std::abs(fit.T_hbs_p - 1.0) <= 1e-6);
  CHECK(std::abs(fit.T_hbs_s - 2.0) <= 1e-6);
  CHECK(log_log_slope({1.0, 10.0}, {5.0, 0.5}) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK_THROWS(log_log_slope({1.0}, {1.0}));
  rows.resize(3);
  CHECK_THROWS_AS(fit_scaling(rows), std::invalid_argument);

  std::ostringstream os;
  write_scaling_csv(os, fit);
  CHECK(first_line(os.str()) == "column,slope");
}

TEST_CASE("star-refine slopes are taken against N_p") {
  std::vector<ExperimentRow> rows;
  for (Index np : {96, 192, 384, 768}) {
    ExperimentRow r = synthetic_row(3200, 1.0);
    r.geometry = "star-refine";
    r.N_p = np;
    r.T_new_p = 1e-4 * static_cast<double>(np * np);
    r.T_hbs_p = r.T_new_s = r.T_hbs_s = 1.0;
    rows.push_back(r);
  }
  CHECK(fit_scaling(rows).T_new_p == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("break-even solve count") {
  CHECK(break_even_solves(1.0, 3.0, 0.02, 0.01) == doctest::Approx(200.0).epsilon(1e-12));
  CHECK(std::isnan(break_even_solves(3.0, 1.0, 0.02, 0.01)));
  CHECK(std::isnan(break_even_solves(1.0, 3.0, 0.01, 0.02)));
}

TEST_CASE("experiment names and config parsing") {
  for (Experiment e : {Experiment::nose_thinning, Experiment::nose_fixed, Experiment::bump_shrinking,
                       Experiment::bump_fixed, Experiment::star_refine, Experiment::identity}) {
    CHECK(parse_experiment(experiment_name(e)) == e);
    CHECK(default_sweep(e).size() == 5);
  }
  CHECK(default_sweep(Experiment::bump_shrinking).front() == 2000);
  CHECK(default_sweep(Experiment::bump_shrinking).back() == 32000);
  CHECK(sweeps_added_size(Experiment::star_refine));
  CHECK_FALSE(sweeps_added_size(Experiment::nose_fixed));
  CHECK_THROWS_AS(parse_experiment("teapot"), ConfigError);

  std::istringstream in("experiment = nose-fixed\nsweep = 2000, 4000\neps = 1e-8\nrepeats = 5\n");
  const ExperimentConfig cfg = experiment_config_from(parse_config(in));
  CHECK(cfg.experiment == Experiment::nose_fixed);
  CHECK(cfg.sweep == std::vector<Index>{2000, 4000});
  CHECK(cfg.eps == 1e-8);
  CHECK(cfg.repeats == 5);

  std::istringstream bad("experiment = bump-fixed\n\neps = fast\n");
  try {
    experiment_config_from(parse_config(bad));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line == 3);
  }
  std::istringstream unknown("experiment = teapot\n");
  try {
    experiment_config_from(parse_config(unknown));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line == 1);
  }
  CHECK_THROWS_AS(parse_sweep("2000,,x"), ConfigError);
}

TEST_CASE("experiment geometries") {
  const PerturbedGeometry b = make_experiment_geometry(Experiment::bump_shrinking, 4000);
  CHECK(b.n_original() == 4000);
  CHECK(b.n_added() == 199);
  CHECK(b.n_cut() == 199);
  const PerturbedGeometry s = make_experiment_geometry(Experiment::star_refine, 192);
  CHECK(s.n_original() == 3200);
  CHECK(s.n_added() == 192);
  const PerturbedGeometry n = make_experiment_geometry(Experiment::nose_thinning, 4000);
  CHECK(n.n_original() == 4000);
  CHECK(n.n_added() >= 700);
  CHECK(n.n_added() <= 900);
  const PerturbedGeometry f2 = make_experiment_geometry(Experiment::bump_fixed, 2000);
  const PerturbedGeometry f4 = make_experiment_geometry(Experiment::bump_fixed, 4000);
  CHECK(f4.n_cut() > f2.n_cut());
}

TEST_CASE("identity smoke run") {
  ExperimentConfig cfg;
  cfg.experiment = Experiment::identity;
  cfg.sweep = {1000};
  cfg.dense_oracle = true;
  const auto rows = run_experiment(cfg);
  REQUIRE(rows.size() == 1);
  const ExperimentRow& r = rows[0];
  CHECK(r.N_p == 0);
  CHECK(r.N_c == 0);
  CHECK(r.rank_Q == 0);
  CHECK(r.E <= 1e-8);
  CHECK(std::abs(r.E - r.E_dense) <= 1e-10);
  CHECK(r.oracle_diff <= 1e-8);
  // Nothing to update: the solve costs about the same as the plain one.
  CHECK(r.r_s > 0.25);
  CHECK(r.r_s < 4.0);
}

TEST_CASE("sweep points are deterministic in E and rank") {
  ExperimentConfig cfg;
  cfg.experiment = Experiment::bump_shrinking;
  cfg.sweep = {2000};
  cfg.dense_oracle = true;
  const ExperimentRow a = run_experiment(cfg).front();
  const ExperimentRow b = run_experiment(cfg).front();
  CHECK(a.E == b.E);
  CHECK(a.k == b.k);
  CHECK(a.k0 == b.k0);
  CHECK(a.rank_Q == b.rank_Q);
  CHECK(a.E <= 1e-8);
  CHECK(a.oracle_diff <= 1e-8);
  CHECK(a.k_opt >= 0);
  CHECK(a.k >= a.k_opt);
  cfg.seed = 2;
  CHECK(run_experiment(cfg).front().E != a.E);
}

TEST_CASE("table and svg output") {
  std::vector<ExperimentRow> rows;
  for (Index n : {2000, 4000, 8000, 16000}) rows.push_back(synthetic_row(n, 1e-5));
  std::ostringstream t;
  write_rows_table(t, rows);
  CHECK(t.str().find("16000") != std::string::npos);
  std::ostringstream svg;
  write_svg(svg, rows, PlotPhase::solve);
  CHECK(svg.str().rfind("<svg", 0) == 0);
  CHECK(svg.str().find("</svg>") != std::string::npos);
  CHECK(svg.str().find("T_new_s") != std::string::npos);
}
