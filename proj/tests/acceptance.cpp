// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Usage: acceptance [output-dir]   (sweep CSVs are written there)

#include "pertsolve/bench.hpp"
#include "pertsolve/oracle.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

using namespace pertsolve;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::cout << "criterion " << id << ' ' << (ok ? "PASS" : "FAIL") << ": " << detail << std::endl;
  if (!ok) ++failures;
}

std::string num(double v, int prec = 3) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Row sums of the Nystrom matrix without storing it.
Eigen::VectorXd row_sums(const Discretization& d) {
  const NystromMatrix A(d);
  const Index n = d.size(), block = 512;
  Eigen::VectorXd s(n);
  for (Index r = 0; r < n; r += block) {
    const Index m = std::min(block, n - r);
    s.segment(r, m) = A.block(r, m, 0, n).rowwise().sum();
  }
  return s;
}

const std::vector<Experiment> kFamilies = {Experiment::nose_thinning, Experiment::nose_fixed,
                                           Experiment::bump_shrinking, Experiment::bump_fixed,
                                           Experiment::star_refine};

std::map<Experiment, std::vector<ExperimentRow>> run_sweeps(const fs::path& out) {
  std::map<Experiment, std::vector<ExperimentRow>> all;
  for (Experiment e : kFamilies) {
    ExperimentConfig cfg;
    cfg.experiment = e;
    const auto t0 = std::chrono::steady_clock::now();
    all[e] = run_experiment(cfg);
    write_rows_csv((out / (experiment_name(e) + ".csv")).string(), all[e]);
    std::cout << "  swept " << experiment_name(e) << " in " << num(elapsed(t0)) << " s"
              << std::endl;
  }
  return all;
}

void criterion1(const std::map<Experiment, std::vector<ExperimentRow>>& sweeps, double seconds) {
  double worst = 0.0;
  std::string where;
  for (const auto& [e, rows] : sweeps) {
    for (const auto& r : rows) {
      if (!(r.E <= worst)) {
        worst = std::isnan(r.E) ? INFINITY : r.E;
        where = experiment_name(e) + " N_o=" + std::to_string(r.N_o);
      }
    }
  }
  report(1, worst <= 1e-8,
         "max E = " + num(worst) + " (" + where + ") over all five sweeps, " + num(seconds) +
             " s total");
}

void criterion2() {
  bool ok = true;
  std::string detail;
  for (Index panels : {80, 320, 1280}) {
    const PerturbedGeometry pg = star_cut(panels, panels / 16, 0.4, 5, 0.0);
    const HbsRep rep = compress_hbs(pg.original, 1e-10);
    const LowRankBlock kc = factor_A_kc(rep, pg);
    const DenseMatrix Akc = NystromMatrix(pg.original).block(pg.keep, pg.cut);
    const Index k_opt = svd_rank(Akc, 1e-10);
    const bool row_ok = std::abs(k_opt - 15) <= 1 && kc.rank() >= k_opt &&
                        kc.rank() <= k_opt + 5 && kc.k0 >= 5 * kc.rank();
    ok = ok && row_ok;
    detail += "(" + std::to_string(pg.n_keep()) + "," + std::to_string(pg.n_cut()) +
              "): k0=" + std::to_string(kc.k0) + " k=" + std::to_string(kc.rank()) +
              " k_opt=" + std::to_string(k_opt) + "; ";
  }
  report(2, ok, detail);
}

void criterion3() {
  std::vector<std::pair<std::string, PerturbedGeometry>> cases;
  cases.emplace_back("bump", circle_with_bump_problem(2000, 200).geometry);
  cases.emplace_back("nose", rounded_square_with_nose_problem(125, 8, 50).geometry);
  cases.emplace_back("star-refine", star_with_refined_panels(150, 3, 2).geometry);
  cases.emplace_back("star-cut", star_cut(80, 5, 0.4, 5, 0.0));
  cases.emplace_back("identity", make_identity_perturbation(discretize_trapezoid(star(0.3, 5), 1000)));
  double worst_diff = 0.0, worst_res = 0.0;
  for (auto& [name, pg] : cases) {
    const HbsRep rep = compress_hbs(pg.original, 1e-10);
    auto solver = std::make_shared<HbsSolver>(invert_hbs(rep));
    const PerturbedSolver ps =
        build_perturbed_solver(solver, added_block(pg), factor_update(rep, pg));
    IndexList ext;
    const Discretization pd = pg.perturbed(&ext);
    const bool closed = pg.n_cut() == 0 || pg.n_added() > 0;
    Eigen::VectorXd g = Eigen::VectorXd::Random(pd.size());
    if (closed) g = boundary_data(make_test_problem(pd, 3).charges, pd);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(pg.n_extended());
    for (Index i = 0; i < pd.size(); ++i) f[ext[static_cast<size_t>(i)]] = g[i];
    const PerturbedSolution s = solve_perturbed(ps, f);
    const ExtendedSolution d = dense_extended_solve(pg, f);
    worst_diff = std::max(worst_diff, (s.extended - d.extended).norm() / d.extended.norm());
    worst_res = std::max(worst_res, nystrom_residual(pd, s.on_perturbed(pg), g));
  }
  report(3, worst_diff <= 1e-8 && worst_res <= 1e-8,
         "max fast-vs-dense diff " + num(worst_diff) + ", max perturbed-system residual " +
             num(worst_res) + " on " + std::to_string(cases.size()) + " geometries");
}

void criterion4() {
  const std::vector<Discretization> ds = {
      discretize_trapezoid(circle(1.0), 1600),
      discretize_trapezoid(star(0.3, 5), 3200),
      discretize_panels(rounded_square(1.0, 8), uniform_breaks(0.0, kTwoPi, 200), 16),
      circle_with_bump_problem(3000, 200).geometry.perturbed(),
      rounded_square_with_nose_problem(125, 8, 50).geometry.perturbed(),
  };
  double worst_apply = 0.0, worst_res = 0.0;
  for (const Discretization& d : ds) {
    const DenseMatrix A = NystromMatrix(d).dense();
    const HbsRep rep = compress_hbs(d, 1e-10);
    const HbsSolver s = invert_hbs(rep);
    const DenseMatrix x = DenseMatrix::Random(d.size(), 4);
    const DenseMatrix Ax = A * x;
    worst_apply = std::max(worst_apply, (apply_hbs(rep, x) - Ax).norm() / Ax.norm());
    const DenseMatrix b = DenseMatrix::Random(d.size(), 4);
    worst_res = std::max(worst_res, (A * apply_inverse(s, b) - b).norm() / b.norm());
  }
  report(4, worst_apply <= 1e-9 && worst_res <= 1e-8,
         "max apply error " + num(worst_apply) + ", max inverse residual " + num(worst_res) +
             " on " + std::to_string(ds.size()) + " discretizations, N <= 3200");
}

void criterion5() {
  std::mt19937_64 rng(20240601);
  const double eps = 1e-10;
  double worst = 0.0;
  Index worst_gap = 0;
  for (int i = 0; i < 100; ++i) {
    const DenseMatrix W = testing::structured_matrix(i, rng);
    const IdFactor f = interpolatory_decomposition(W, eps);
    DenseMatrix S(f.rank(), W.cols());
    for (Index r = 0; r < f.rank(); ++r) S.row(r) = W.row(f.J[static_cast<size_t>(r)]);
    worst = std::max(worst, testing::relative_frobenius(f.P * S, W));
    worst_gap = std::max(worst_gap, std::abs(f.rank() - svd_rank(W, eps, true)));
  }
  report(5, worst <= 10 * eps && worst_gap <= 2,
         "100 matrices: max ||W - P W(J,:)||_F / ||W||_F = " + num(worst) +
             ", max rank gap to SVD = " + std::to_string(worst_gap));
}

void criterion6() {
  std::vector<Discretization> ds = {discretize_trapezoid(circle(1.0), 1600),
                                    discretize_trapezoid(star(0.3, 5), 3200)};
  for (Experiment e : kFamilies) {
    for (Index n : default_sweep(e)) {
      const PerturbedGeometry pg = make_experiment_geometry(e, n);
      if (pg.n_extended() > 8200) continue;
      ds.push_back(pg.original);
      ds.push_back(pg.perturbed());
    }
  }
  for (Index panels : {80, 320}) ds.push_back(star_cut(panels, panels / 16, 0.4, 5, 0.0).original);
  double worst = 0.0;
  for (const Discretization& d : ds) {
    worst = std::max(worst, (row_sums(d).array() + 1.0).abs().maxCoeff());
  }
  report(6, worst <= 1e-8,
         "max |A 1 + 1| = " + num(worst) + " over " + std::to_string(ds.size()) +
             " discretizations with N <= 8200");
}

double top_slope(const std::vector<ExperimentRow>& rows) {
  std::vector<double> x, y;
  for (size_t i = rows.size() - 3; i < rows.size(); ++i) {
    x.push_back(static_cast<double>(rows[i].N_o));
    y.push_back(rows[i].T_new_p);
  }
  return log_log_slope(x, y);
}

void criterion7(const std::map<Experiment, std::vector<ExperimentRow>>& sweeps) {
  bool ok = true;
  std::string detail;
  auto in_band = [](double s) { return s >= 0.8 && s <= 1.3; };
  for (Experiment e : {Experiment::bump_shrinking, Experiment::nose_thinning}) {
    const auto& rows = sweeps.at(e);
    const ScalingFit fit = fit_scaling(rows);
    double worst_rp = 0.0;
    for (const auto& r : rows) {
      if (r.N_o >= 8000) worst_rp = std::max(worst_rp, r.r_p);
    }
    const bool f_ok = in_band(fit.T_new_p) && in_band(fit.T_new_s) && worst_rp < 0.9;
    ok = ok && f_ok;
    detail += experiment_name(e) + " precompute " + num(fit.T_new_p) + " solve " +
              num(fit.T_new_s) + " max r_p(N_o>=8000) " + num(worst_rp) + "; ";
  }
  for (Experiment e : {Experiment::bump_fixed, Experiment::nose_fixed}) {
    const double s = top_slope(sweeps.at(e));
    ok = ok && s > 1.3;
    detail += experiment_name(e) + " top precompute " + num(s) + "; ";
  }
  report(7, ok, detail);
}

void criterion8(const std::map<Experiment, std::vector<ExperimentRow>>& sweeps) {
  const ExperimentRow& r = sweeps.at(Experiment::nose_thinning).back();
  const bool ok = r.break_even > 0.0 && std::isfinite(r.break_even);
  report(8, ok,
         "nose-thinning N_o=" + std::to_string(r.N_o) + ": break-even after " +
             num(r.break_even) + " solves");
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  fs::create_directories(out);
  try {
    const auto t0 = std::chrono::steady_clock::now();
    const auto sweeps = run_sweeps(out);
    criterion1(sweeps, elapsed(t0));
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7(sweeps);
    criterion8(sweeps);
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 2;
  }
  return failures ? 1 : 0;
}
