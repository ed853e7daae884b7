#include "pertsolve/oracle.hpp"

#include <ostream>

namespace pertsolve {

namespace {

void check_cap(Index n, const OracleOptions& opt) {
  if (n > opt.dense_cap) {
    throw DenseCapExceeded("dense oracle: N = " + std::to_string(n) + " exceeds cap " +
                           std::to_string(opt.dense_cap));
  }
}

Eigen::VectorXd lu_solve(const DenseMatrix& M, const Eigen::VectorXd& f, double* residual) {
  Eigen::PartialPivLU<DenseMatrix> lu(M);
  Eigen::VectorXd x = lu.solve(f);
  if (residual) {
    const double fn = f.norm();
    *residual = fn > 0.0 ? (M * x - f).norm() / fn : (M * x).norm();
  }
  return x;
}

}  // namespace

DenseMatrix dense_extended_matrix(const PerturbedGeometry& pg, const OracleOptions& opt) {
  const Index no = pg.n_original(), n = pg.n_extended();
  check_cap(n, opt);
  DenseMatrix M = NystromMatrix(Discretization::concat(pg.original, pg.added)).dense();
  // Adding Q to blockdiag(A_oo, A_pp): the cut columns keep only the diagonal
  // of A_cc, and the added-to-cut couplings vanish.
  for (Index c : pg.cut) {
    const double diag = M(c, c);
    M.col(c).setZero();
    M(c, c) = diag;
  }
  if (opt.drop_cut_rows) {
    for (Index c : pg.cut) M.row(c).tail(n - no).setZero();
  }
  return M;
}

ExtendedSolution dense_extended_solve(const PerturbedGeometry& pg,
                                      const Eigen::VectorXd& f_ext,
                                      const OracleOptions& opt) {
  if (f_ext.size() != pg.n_extended()) {
    throw std::invalid_argument("dense_extended_solve: right-hand side length mismatch");
  }
  const DenseMatrix M = dense_extended_matrix(pg, opt);
  ExtendedSolution s;
  s.extended = lu_solve(M, f_ext, &s.residual);
  s.sigma_k.resize(pg.n_keep());
  for (Index i = 0; i < pg.n_keep(); ++i) s.sigma_k[i] = s.extended[pg.keep[i]];
  s.sigma_c.resize(pg.n_cut());
  for (Index i = 0; i < pg.n_cut(); ++i) s.sigma_c[i] = s.extended[pg.cut[i]];
  s.sigma_p = s.extended.tail(pg.n_added());
  return s;
}

ExtendedSolution dense_extended_solve(const PerturbedGeometry& pg, const ChargeSet& charges,
                                      const OracleOptions& opt) {
  const Eigen::VectorXd go = boundary_data(charges, pg.original);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(pg.n_extended());
  for (Index i : pg.keep) f[i] = go[i];
  f.tail(pg.n_added()) = boundary_data(charges, pg.added);
  return dense_extended_solve(pg, f, opt);
}

Eigen::VectorXd dense_perturbed_solve(const Discretization& perturbed,
                                      const Eigen::VectorXd& g, const OracleOptions& opt) {
  check_cap(perturbed.size(), opt);
  if (g.size() != perturbed.size()) {
    throw std::invalid_argument("dense_perturbed_solve: data length mismatch");
  }
  return lu_solve(NystromMatrix(perturbed).dense(), g, nullptr);
}

double nystrom_residual(const Discretization& d, const Eigen::VectorXd& sigma,
                        const Eigen::VectorXd& g) {
  return (NystromMatrix(d).dense() * sigma - g).norm() / g.norm();
}

Index svd_rank(const DenseMatrix& M, double eps, bool relative) {
  if (M.size() == 0) return 0;
  const Eigen::VectorXd s = Eigen::BDCSVD<DenseMatrix>(M).singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  const double thr = relative ? eps * s[0] : eps;
  return static_cast<Index>((s.array() > thr).count());
}

SvdRanks svd_ranks(const DenseMatrix& M, double eps) {
  SvdRanks r;
  if (M.size() == 0) return r;
  const Eigen::VectorXd s = Eigen::BDCSVD<DenseMatrix>(M).singularValues();
  if (s.size() == 0 || s[0] == 0.0) return r;
  r.absolute = static_cast<Index>((s.array() > eps).count());
  r.relative = static_cast<Index>((s.array() > eps * s[0]).count());
  return r;
}

double relative_error_E(const Eigen::VectorXd& u_exact, const Eigen::VectorXd& u_new) {
  if (u_exact.size() != u_new.size()) {
    throw std::invalid_argument("relative_error_E: length mismatch");
  }
  const double d = u_exact.norm();
  if (d == 0.0) throw std::domain_error("relative_error_E: exact solution is zero");
  return (u_exact - u_new).norm() / d;
}

std::vector<std::string> ErrorReport::violations() const {
  std::vector<std::string> v;
  if (!(E >= 0.0)) v.push_back("E is negative or NaN");
  if (k_opt >= 0 && k >= 0 && k < k_opt) {
    v.push_back("k = " + std::to_string(k) + " below k_opt = " + std::to_string(k_opt));
  }
  if (k >= 0 && k0 >= 0 && k > k0) {
    v.push_back("k = " + std::to_string(k) + " above k0 = " + std::to_string(k0));
  }
  return v;
}

void write_error_report_header(std::ostream& os) {
  os << "label,E,residual_fast,residual_dense,k0,k,k_opt,k_opt_relative\n";
}

void write_error_report_row(std::ostream& os, const ErrorReport& r) {
  const auto prec = os.precision(6);
  os << r.label << ',' << std::scientific << r.E << ',' << r.residual_fast << ','
     << r.residual_dense << std::defaultfloat << ',' << r.k0 << ',' << r.k << ',' << r.k_opt
     << ',' << r.k_opt_relative << '\n';
  os.precision(prec);
}

}  // namespace pertsolve
