#ifndef PERTSOLVE_BENCH_HPP
#define PERTSOLVE_BENCH_HPP

#include "pertsolve/update.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace pertsolve {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Experiment families. The sweep variable is N_o except for star-refine,
/// where N_o stays at 3200 and the sweep gives N_p.
enum class Experiment {
  nose_thinning,
  nose_fixed,
  bump_shrinking,
  bump_fixed,
  star_refine,
  identity,
};

Experiment parse_experiment(const std::string& name);  // throws ConfigError(line 0)
std::string experiment_name(Experiment e);
std::vector<Index> default_sweep(Experiment e);
bool sweeps_added_size(Experiment e);

struct ExperimentConfig {
  Experiment experiment = Experiment::bump_shrinking;
  std::vector<Index> sweep;  // empty: default_sweep
  double eps = 1e-10;
  std::uint64_t seed = 1;
  int repeats = 3;
  bool dense_oracle = false;
  Index dense_cap = 4000;
  bool parallel = false;
  double max_error = 1e-8;  // E above this is a contract violation
};

/// Keys: experiment, sweep (comma separated), eps, seed, repeats,
/// dense_oracle, dense_cap, parallel, max_error.
ExperimentConfig experiment_config_from(const KeyValueConfig& kv);
ExperimentConfig load_experiment_config(const std::string& path);
std::vector<Index> parse_sweep(const std::string& text);

/// Geometry of one sweep point.
PerturbedGeometry make_experiment_geometry(Experiment e, Index n);

struct ExperimentRow {
  std::string geometry;
  Index N_o = 0;
  Index N_p = 0;
  Index N_c = 0;
  double T_new_p = kNaN;
  double T_hbs_p = kNaN;
  double r_p = kNaN;
  double T_new_s = kNaN;
  double T_hbs_s = kNaN;
  double r_s = kNaN;
  double E = kNaN;
  Index k = -1;       // rank of the A_kc factor after recompression
  Index k0 = -1;      // before recompression
  Index k_opt = -1;   // SVD rank of A_kc, dense oracle only
  double break_even = kNaN;  // solves until rebuilding would have been cheaper
  Index rank_Q = -1;         // total rank of the update
  double E_dense = kNaN;     // E from the dense extended solve
  double oracle_diff = kNaN; // fast vs dense extended solution
  int concurrent = 0;        // 1 when timed alongside other sweep points
};

/// (T_hbs_p - T_new_p) / (T_new_s - T_hbs_s) when both differences are
/// positive, NaN otherwise.
double break_even_solves(double T_new_p, double T_hbs_p, double T_new_s, double T_hbs_s);

ExperimentRow run_point(const ExperimentConfig& cfg, Index n);
std::vector<ExperimentRow> run_experiment(const ExperimentConfig& cfg);

std::vector<std::string> row_fields();
void write_rows_csv(std::ostream& os, const std::vector<ExperimentRow>& rows);
void write_rows_csv(const std::string& path, const std::vector<ExperimentRow>& rows);
std::vector<ExperimentRow> read_rows_csv(std::istream& is);
std::vector<ExperimentRow> read_rows_csv(const std::string& path);
void write_rows_table(std::ostream& os, const std::vector<ExperimentRow>& rows);

/// Least-squares slope of log y against log x.
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

struct ScalingFit {
  double T_new_p = kNaN;
  double T_hbs_p = kNaN;
  double T_new_s = kNaN;
  double T_hbs_s = kNaN;
};
/// Slopes against N_o (N_p for star-refine rows). Needs at least 4 rows.
ScalingFit fit_scaling(const std::vector<ExperimentRow>& rows);
void write_scaling_csv(std::ostream& os, const ScalingFit& fit);

enum class PlotPhase { precompute, solve };
/// Log-log plot of the two timings of `phase` with a slope-1 guide.
void write_svg(std::ostream& os, const std::vector<ExperimentRow>& rows, PlotPhase phase);

}  // namespace pertsolve

#endif  // PERTSOLVE_BENCH_HPP
