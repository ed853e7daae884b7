#include "pertsolve/bench.hpp"

#include "pertsolve/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace pertsolve {

namespace {

struct NamedExperiment {
  Experiment e;
  const char* name;
};
constexpr NamedExperiment kExperiments[] = {
    {Experiment::nose_thinning, "nose-thinning"},
    {Experiment::nose_fixed, "nose-fixed"},
    {Experiment::bump_shrinking, "bump-shrinking"},
    {Experiment::bump_fixed, "bump-fixed"},
    {Experiment::star_refine, "star-refine"},
    {Experiment::identity, "identity"},
};

ConfigError config_error(const std::string& msg, int line) {
  return ConfigError(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg, line);
}

bool parse_bool(const std::string& v, bool& out) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") {
    out = true;
  } else if (v == "0" || v == "false" || v == "no" || v == "off") {
    out = false;
  } else {
    return false;
  }
  return true;
}

using Clock = std::chrono::steady_clock;

// Minimum wall time after one discarded warmup: at least `repeats` runs,
// more for short phases until about kTimingBudget seconds have been spent.
constexpr double kTimingBudget = 0.25;
constexpr int kMaxRepeats = 50;

template <class F>
double min_time(int repeats, F&& f) {
  f();
  double best = std::numeric_limits<double>::infinity(), spent = 0.0;
  for (int r = 0; r < kMaxRepeats && (r < repeats || spent < kTimingBudget); ++r) {
    const auto t0 = Clock::now();
    f();
    const double t = std::chrono::duration<double>(Clock::now() - t0).count();
    best = std::min(best, t);
    spent += t;
  }
  return best;
}

// Nose sweeps: N_o = 16 * panels; the thinning nose keeps 8 cut panels, the
// fixed nose keeps the cut at 8 panels per 125.
constexpr Index kNoseCut = 8;
constexpr Index kNoseBasePanels = 125;
constexpr Index kNoseAdded = 50;
constexpr Index kBumpArcSteps = 200;
constexpr Index kStarPanels = 200;
constexpr Index kStarCutPanels = 3;

}  // namespace

Experiment parse_experiment(const std::string& name) {
  for (const auto& x : kExperiments) {
    if (name == x.name) return x.e;
  }
  throw ConfigError("unknown experiment '" + name + "'", 0);
}

std::string experiment_name(Experiment e) {
  for (const auto& x : kExperiments) {
    if (x.e == e) return x.name;
  }
  return "unknown";
}

bool sweeps_added_size(Experiment e) { return e == Experiment::star_refine; }

std::vector<Index> default_sweep(Experiment e) {
  if (e == Experiment::star_refine) return {96, 192, 384, 768, 1536};
  return {2000, 4000, 8000, 16000, 32000};
}

std::vector<Index> parse_sweep(const std::string& text) {
  std::vector<Index> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    size_t pos = 0;
    long v = 0;
    try {
      v = std::stol(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (item.empty() || pos != item.size() || v <= 0) {
      throw ConfigError("bad sweep entry '" + item + "'", 0);
    }
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty sweep", 0);
  return out;
}

ExperimentConfig experiment_config_from(const KeyValueConfig& kv) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : kv.values) {
    const int line = kv.lines.count(key) ? kv.lines.at(key) : 0;
    try {
      if (key == "experiment") {
        cfg.experiment = parse_experiment(value);
      } else if (key == "sweep") {
        cfg.sweep = parse_sweep(value);
      } else if (key == "eps") {
        cfg.eps = kv.get_double(key, cfg.eps);
        if (!(cfg.eps > 0.0 && cfg.eps < 1.0)) throw ConfigError("eps must lie in (0, 1)", 0);
      } else if (key == "seed") {
        const long s = kv.get_int(key, 1);
        if (s < 0) throw ConfigError("seed must be non-negative", 0);
        cfg.seed = static_cast<std::uint64_t>(s);
      } else if (key == "repeats") {
        cfg.repeats = static_cast<int>(kv.get_int(key, cfg.repeats));
        if (cfg.repeats < 3) throw ConfigError("repeats must be at least 3", 0);
      } else if (key == "dense_oracle" || key == "parallel") {
        bool b = false;
        if (!parse_bool(value, b)) throw ConfigError("expected a boolean for '" + key + "'", 0);
        (key == "parallel" ? cfg.parallel : cfg.dense_oracle) = b;
      } else if (key == "dense_cap") {
        cfg.dense_cap = kv.get_int(key, cfg.dense_cap);
        if (cfg.dense_cap < 1) throw ConfigError("dense_cap must be positive", 0);
      } else if (key == "max_error") {
        cfg.max_error = kv.get_double(key, cfg.max_error);
      } else {
        throw ConfigError("unknown key '" + key + "'", 0);
      }
    } catch (const ConfigError& e) {
      // get_double/get_int report the line separately from the message.
      throw config_error(e.what(), line);
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_config_from(parse_config_file(path));
}

PerturbedGeometry make_experiment_geometry(Experiment e, Index n) {
  switch (e) {
    case Experiment::nose_thinning:
    case Experiment::nose_fixed: {
      if (n % 16 != 0 || n < 16 * kNoseBasePanels / 2) {
        throw std::invalid_argument("nose sweeps need N_o a multiple of 16, at least 1000");
      }
      const Index panels = n / 16;
      const Index cut = e == Experiment::nose_thinning
                            ? kNoseCut
                            : std::max<Index>(kNoseCut, kNoseCut * panels / kNoseBasePanels);
      return rounded_square_with_nose_problem(panels, cut, kNoseAdded).geometry;
    }
    case Experiment::bump_shrinking:
      return circle_with_bump_problem(n, kBumpArcSteps).geometry;
    case Experiment::bump_fixed:
      return circle_with_bump_problem(n, std::max<Index>(2, n / 20)).geometry;
    case Experiment::star_refine: {
      const Index per = 16 * kStarCutPanels;
      if (n % per != 0) throw std::invalid_argument("star-refine sweeps N_p in multiples of 48");
      return star_with_refined_panels(kStarPanels, kStarCutPanels, n / per).geometry;
    }
    case Experiment::identity:
      return make_identity_perturbation(discretize_trapezoid(circle(1.0), n));
  }
  throw std::invalid_argument("unknown experiment");
}

double break_even_solves(double T_new_p, double T_hbs_p, double T_new_s, double T_hbs_s) {
  const double saved = T_hbs_p - T_new_p, lost = T_new_s - T_hbs_s;
  if (!(saved > 0.0) || !(lost > 0.0)) return kNaN;
  return saved / lost;
}

ExperimentRow run_point(const ExperimentConfig& cfg, Index n) {
  const PerturbedGeometry pg = make_experiment_geometry(cfg.experiment, n);
  ExperimentRow row;
  row.geometry = experiment_name(cfg.experiment);
  row.N_o = pg.n_original();
  row.N_p = pg.n_added();
  row.N_c = pg.n_cut();

  // The original solver exists before the perturbation is known.
  const HbsRep rep = compress_hbs(pg.original, cfg.eps);
  const auto original = std::make_shared<const HbsSolver>(invert_hbs(rep));

  UpdateOptions uopt;
  uopt.eps = cfg.eps;
  std::optional<PerturbedSolver> ps;
  row.T_new_p = min_time(cfg.repeats, [&] {
    UpdateFactors uf = factor_update(rep, pg, uopt);
    ps.emplace(build_perturbed_solver(original, added_block(pg), std::move(uf)));
  });
  const UpdateFactors& uf = ps->factors();
  row.k = uf.kc.rank();
  row.k0 = uf.kc.k0;
  row.rank_Q = uf.rank();

  const Discretization perturbed = pg.perturbed();
  std::optional<HbsSolver> rebuilt;
  row.T_hbs_p = min_time(cfg.repeats, [&] {
    rebuilt.emplace(invert_hbs(compress_hbs(perturbed, cfg.eps)));
  });

  const TestProblem tp = make_test_problem(perturbed, cfg.seed);
  const Eigen::VectorXd g = boundary_data(tp.charges, perturbed);
  const Eigen::VectorXd g_o = boundary_data(tp.charges, pg.original);
  Eigen::VectorXd f_k(pg.n_keep());
  for (Index i = 0; i < pg.n_keep(); ++i) f_k[i] = g_o[pg.keep[i]];
  const Eigen::VectorXd f_ext =
      assemble_extended_rhs(pg, f_k, boundary_data(tp.charges, pg.added));

  PerturbedSolution sol;
  row.T_new_s = min_time(cfg.repeats, [&] { sol = ps->solve_split(f_ext); });
  Eigen::VectorXd sigma_hbs;
  row.T_hbs_s = min_time(cfg.repeats, [&] { sigma_hbs = apply_inverse(*rebuilt, g); });
  row.r_p = row.T_new_p / row.T_hbs_p;
  row.r_s = row.T_new_s / row.T_hbs_s;
  row.break_even = break_even_solves(row.T_new_p, row.T_hbs_p, row.T_new_s, row.T_hbs_s);

  const Eigen::VectorXd u_exact = exact_solution(tp.charges, tp.targets);
  const Eigen::VectorXd sigma = sol.on_perturbed(pg);
  row.E = relative_error_E(u_exact, eval_potential(perturbed, sigma, tp.targets).values);

  if (cfg.dense_oracle) {
    OracleOptions oopt;
    oopt.dense_cap = cfg.dense_cap;
    if (pg.n_extended() <= cfg.dense_cap) {
      const ExtendedSolution ds = dense_extended_solve(pg, f_ext, oopt);
      row.oracle_diff = (sol.extended - ds.extended).norm() / ds.extended.norm();
      const PerturbedSolution dsol{ds.sigma_k, ds.sigma_c, ds.sigma_p, ds.extended};
      row.E_dense = relative_error_E(
          u_exact, eval_potential(perturbed, dsol.on_perturbed(pg), tp.targets).values);
    }
    if (pg.n_cut() > 0 && pg.n_keep() * pg.n_cut() <= cfg.dense_cap * cfg.dense_cap) {
      row.k_opt = svd_rank(NystromMatrix(pg.original).block(pg.keep, pg.cut), cfg.eps);
    }
  }
  return row;
}

std::vector<ExperimentRow> run_experiment(const ExperimentConfig& cfg) {
  const std::vector<Index> sweep = cfg.sweep.empty() ? default_sweep(cfg.experiment) : cfg.sweep;
  std::vector<ExperimentRow> rows;
  if (!cfg.parallel) {
    for (Index n : sweep) rows.push_back(run_point(cfg, n));
    return rows;
  }
  std::vector<std::future<ExperimentRow>> jobs;
  for (Index n : sweep) {
    jobs.push_back(std::async(std::launch::async, [&cfg, n] { return run_point(cfg, n); }));
  }
  for (auto& j : jobs) {
    rows.push_back(j.get());
    rows.back().concurrent = 1;
  }
  return rows;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

struct Field {
  const char* name;
  std::function<std::string(const ExperimentRow&)> get;
  std::function<void(ExperimentRow&, const std::string&)> set;
};

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::scientific << std::setprecision(6) << v;
  return os.str();
}

double to_double(const std::string& s) {
  if (s == "nan" || s.empty()) return kNaN;
  return std::stod(s);
}

#define PS_REAL(f) \
  Field { #f, [](const ExperimentRow& r) { return fmt(r.f); }, \
          [](ExperimentRow& r, const std::string& s) { r.f = to_double(s); } }
#define PS_INT(f) \
  Field { #f, [](const ExperimentRow& r) { return std::to_string(r.f); }, \
          [](ExperimentRow& r, const std::string& s) { r.f = std::stol(s); } }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      Field{"geometry", [](const ExperimentRow& r) { return r.geometry; },
            [](ExperimentRow& r, const std::string& s) { r.geometry = s; }},
      PS_INT(N_o), PS_INT(N_p), PS_INT(N_c),
      PS_REAL(T_new_p), PS_REAL(T_hbs_p), PS_REAL(r_p),
      PS_REAL(T_new_s), PS_REAL(T_hbs_s), PS_REAL(r_s),
      PS_REAL(E), PS_INT(k), PS_INT(k0), PS_INT(k_opt),
      PS_REAL(break_even), PS_INT(rank_Q), PS_REAL(E_dense), PS_REAL(oracle_diff),
      PS_INT(concurrent),
  };
  return f;
}

#undef PS_REAL
#undef PS_INT

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::vector<std::string> row_fields() {
  std::vector<std::string> names;
  for (const auto& f : fields()) names.emplace_back(f.name);
  return names;
}

void write_rows_csv(std::ostream& os, const std::vector<ExperimentRow>& rows) {
  const auto& fs = fields();
  for (size_t i = 0; i < fs.size(); ++i) os << (i ? "," : "") << fs[i].name;
  os << '\n';
  for (const auto& r : rows) {
    for (size_t i = 0; i < fs.size(); ++i) os << (i ? "," : "") << fs[i].get(r);
    os << '\n';
  }
}

void write_rows_csv(const std::string& path, const std::vector<ExperimentRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_rows_csv(os, rows);
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<ExperimentRow> read_rows_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("read_rows_csv: missing header");
  const std::vector<std::string> header = split_csv(line);
  std::map<std::string, const Field*> by_name;
  for (const auto& f : fields()) by_name[f.name] = &f;
  std::vector<const Field*> cols;
  for (const auto& h : header) {
    auto it = by_name.find(h);
    if (it == by_name.end()) throw std::runtime_error("read_rows_csv: unknown column " + h);
    cols.push_back(it->second);
  }
  std::vector<ExperimentRow> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != cols.size()) {
      throw std::runtime_error("read_rows_csv: line " + std::to_string(lineno) +
                               " has the wrong number of fields");
    }
    ExperimentRow r;
    try {
      for (size_t i = 0; i < cells.size(); ++i) cols[i]->set(r, cells[i]);
    } catch (const std::logic_error&) {
      throw std::runtime_error("read_rows_csv: bad value on line " + std::to_string(lineno));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ExperimentRow> read_rows_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_rows_csv(is);
}

void write_rows_table(std::ostream& os, const std::vector<ExperimentRow>& rows) {
  const char* names[] = {"N_o", "N_p", "N_c", "T_new_p", "T_hbs_p", "r_p", "T_new_s",
                         "T_hbs_s", "r_s", "E", "k", "k0", "k_opt", "break_even"};
  std::map<std::string, const Field*> by_name;
  for (const auto& f : fields()) by_name[f.name] = &f;
  for (const char* n : names) os << std::setw(13) << n;
  os << '\n';
  for (const auto& r : rows) {
    for (const char* n : names) os << std::setw(13) << by_name[n]->get(r);
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Scaling

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("log_log_slope: need at least two paired points");
  }
  const size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("log_log_slope: non-positive data");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw std::invalid_argument("log_log_slope: all x equal");
  return sxy / sxx;
}

ScalingFit fit_scaling(const std::vector<ExperimentRow>& rows) {
  if (rows.size() < 4) throw std::invalid_argument("fit_scaling: need at least 4 rows");
  const bool by_p = rows.front().geometry == experiment_name(Experiment::star_refine);
  std::vector<double> x;
  for (const auto& r : rows) x.push_back(static_cast<double>(by_p ? r.N_p : r.N_o));
  auto slope = [&](double ExperimentRow::*m) {
    std::vector<double> y;
    for (const auto& r : rows) y.push_back(r.*m);
    return log_log_slope(x, y);
  };
  ScalingFit f;
  f.T_new_p = slope(&ExperimentRow::T_new_p);
  f.T_hbs_p = slope(&ExperimentRow::T_hbs_p);
  f.T_new_s = slope(&ExperimentRow::T_new_s);
  f.T_hbs_s = slope(&ExperimentRow::T_hbs_s);
  return f;
}

void write_scaling_csv(std::ostream& os, const ScalingFit& f) {
  os << "column,slope\n"
     << "T_new_p," << fmt(f.T_new_p) << "\nT_hbs_p," << fmt(f.T_hbs_p) << "\nT_new_s,"
     << fmt(f.T_new_s) << "\nT_hbs_s," << fmt(f.T_hbs_s) << '\n';
}

// ---------------------------------------------------------------------------
// SVG

void write_svg(std::ostream& os, const std::vector<ExperimentRow>& rows, PlotPhase phase) {
  constexpr double W = 640, H = 480, left = 80, right = 20, top = 40, bottom = 60;
  const bool by_p = !rows.empty() && rows.front().geometry == experiment_name(Experiment::star_refine);
  const bool pre = phase == PlotPhase::precompute;
  struct Series {
    const char* label;
    const char* color;
    std::vector<std::pair<double, double>> pts;
  };
  Series s_new{pre ? "T_new_p" : "T_new_s", "#c03020", {}};
  Series s_hbs{pre ? "T_hbs_p" : "T_hbs_s", "#2050b0", {}};
  for (const auto& r : rows) {
    const double x = static_cast<double>(by_p ? r.N_p : r.N_o);
    const double a = pre ? r.T_new_p : r.T_new_s, b = pre ? r.T_hbs_p : r.T_hbs_s;
    if (x > 0 && a > 0) s_new.pts.emplace_back(std::log10(x), std::log10(a));
    if (x > 0 && b > 0) s_hbs.pts.emplace_back(std::log10(x), std::log10(b));
  }
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool any = false;
  for (const Series* s : {&s_new, &s_hbs}) {
    for (auto [x, y] : s->pts) {
      if (!any) {
        x0 = x1 = x;
        y0 = y1 = y;
        any = true;
      }
      x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
  }
  x0 = std::floor(x0 * 10) / 10, x1 = std::ceil(x1 * 10) / 10;
  y0 = std::floor(y0), y1 = std::ceil(y1);
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (W - left - right); };
  auto py = [&](double y) { return H - bottom - (y - y0) / (y1 - y0) * (H - top - bottom); };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\">"
     << (rows.empty() ? std::string("no data") : rows.front().geometry) << ' '
     << (pre ? "precomputation" : "solve") << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\""
     << H - bottom << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
     << "\" stroke=\"black\"/>\n";
  for (double d = std::ceil(y0); d <= y1 + 1e-9; d += 1) {
    os << "<text x=\"" << left - 8 << "\" y=\"" << py(d) + 4 << "\" text-anchor=\"end\">1e"
       << static_cast<int>(d) << "</text>\n";
  }
  for (double d = std::ceil(x0); d <= x1 + 1e-9; d += 1) {
    os << "<text x=\"" << px(d) << "\" y=\"" << H - bottom + 18
       << "\" text-anchor=\"middle\">1e" << static_cast<int>(d) << "</text>\n";
  }
  os << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 16
     << "\" text-anchor=\"middle\">" << (by_p ? "N_p" : "N_o") << "</text>\n";
  os << "<text x=\"20\" y=\"" << (top + H - bottom) / 2 << "\" transform=\"rotate(-90 20 "
     << (top + H - bottom) / 2 << ")\" text-anchor=\"middle\">seconds</text>\n";

  int legend = 0;
  for (const Series* s : {&s_new, &s_hbs}) {
    if (s->pts.empty()) continue;
    os << "<polyline fill=\"none\" stroke=\"" << s->color << "\" stroke-width=\"2\" points=\"";
    for (auto [x, y] : s->pts) os << px(x) << ',' << py(y) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << left + 12 << "\" y=\"" << top + 16 * ++legend << "\" fill=\"" << s->color
       << "\">" << s->label << "</text>\n";
  }
  // Slope-1 guide through the first baseline point.
  const auto& ref = s_hbs.pts.empty() ? s_new.pts : s_hbs.pts;
  if (!ref.empty()) {
    const auto [rx, ry] = ref.front();
    os << "<line x1=\"" << px(x0) << "\" y1=\"" << py(ry + x0 - rx) << "\" x2=\"" << px(x1)
       << "\" y2=\"" << py(ry + x1 - rx) << "\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n";
    os << "<text x=\"" << left + 12 << "\" y=\"" << top + 16 * ++legend
       << "\" fill=\"gray\">slope 1</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace pertsolve
