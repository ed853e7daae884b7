#ifndef PERTSOLVE_ORACLE_HPP
#define PERTSOLVE_ORACLE_HPP

// Dense reference computations. Nothing here touches the compressed solvers;
// only kernel-level assembly and dense LAPACK-style factorizations.

#include "pertsolve/kernel.hpp"

#include <iosfwd>
#include <string>

namespace pertsolve {

struct DenseCapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OracleOptions {
  Index dense_cap = 4000;
  bool drop_cut_rows = true;  // must match the fast path being checked
};

struct ExtendedSolution {
  Eigen::VectorXd sigma_k;
  Eigen::VectorXd sigma_c;
  Eigen::VectorXd sigma_p;
  Eigen::VectorXd extended;
  double residual = 0.0;  // ||M x - f|| / ||f|| of the dense solve
};

/// Dense matrix of the full extended system (block diagonal part plus Q).
DenseMatrix dense_extended_matrix(const PerturbedGeometry& pg, const OracleOptions& opt = {});

/// Solves the extended system with right-hand side f_ext by dense LU.
ExtendedSolution dense_extended_solve(const PerturbedGeometry& pg,
                                      const Eigen::VectorXd& f_ext,
                                      const OracleOptions& opt = {});
/// Same, with boundary data from point charges.
ExtendedSolution dense_extended_solve(const PerturbedGeometry& pg,
                                      const ChargeSet& charges,
                                      const OracleOptions& opt = {});

/// Density on the perturbed boundary from a dense solve of its own Nystrom
/// system, in the node order of pg.perturbed().
Eigen::VectorXd dense_perturbed_solve(const Discretization& perturbed,
                                      const Eigen::VectorXd& g,
                                      const OracleOptions& opt = {});

/// ||A sigma - g|| / ||g|| for the Nystrom matrix of `d`.
double nystrom_residual(const Discretization& d, const Eigen::VectorXd& sigma,
                        const Eigen::VectorXd& g);

/// Number of singular values above eps (absolute) or above eps * s_max.
Index svd_rank(const DenseMatrix& M, double eps, bool relative = false);

struct SvdRanks {
  Index absolute = 0;
  Index relative = 0;
};
SvdRanks svd_ranks(const DenseMatrix& M, double eps);

/// ||u_exact - u_new||_2 / ||u_exact||_2.
double relative_error_E(const Eigen::VectorXd& u_exact, const Eigen::VectorXd& u_new);

struct ErrorReport {
  std::string label;
  double E = 0.0;
  double residual_fast = -1.0;   // negative when not measured
  double residual_dense = -1.0;
  Index k0 = -1;
  Index k = -1;
  Index k_opt = -1;           // absolute SVD threshold
  Index k_opt_relative = -1;  // relative SVD threshold

  /// Human-readable descriptions of violated expectations
  /// (E < 0, or k_opt <= k <= k0 failing when all three are known).
  std::vector<std::string> violations() const;
};

void write_error_report_header(std::ostream& os);
void write_error_report_row(std::ostream& os, const ErrorReport& r);

}  // namespace pertsolve

#endif  // PERTSOLVE_ORACLE_HPP
