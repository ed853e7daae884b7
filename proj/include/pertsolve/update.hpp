#ifndef PERTSOLVE_UPDATE_HPP
#define PERTSOLVE_UPDATE_HPP

#include "pertsolve/hbs.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>

namespace pertsolve {

/// Right-hand side of the extended system: f_k at the kept positions, zeros
/// at the cut positions, f_p after the N_o original slots.
Eigen::VectorXd assemble_extended_rhs(const PerturbedGeometry& pg,
                                      const Eigen::VectorXd& f_k,
                                      const Eigen::VectorXd& f_p);

/// Low-rank factors of one off-diagonal piece, M ~ L R.
/// `skeleton` indexes the rows (or columns, for column factors) of the
/// extended system kept in R; `k0` is the skeleton length before
/// recompression.
struct LowRankBlock {
  DenseMatrix L;
  DenseMatrix R;
  IndexList skeleton;
  Index k0 = 0;

  Index rank() const { return L.cols(); }
};

struct UpdateOptions {
  double eps = 1e-10;
  Index near_leaf_cap = 64;  // leaf cap of the near-field tree
  ProxyOptions proxy;
  double far_ratio = 1.5;    // far boxes lie outside this multiple of the
                             // enclosing circle of the added piece
  // When true, the cut rows of A_op are left out of Q. They only feed the
  // auxiliary cut density and are nearly singular when added nodes land on
  // top of cut nodes.
  bool drop_cut_rows = true;
  bool combined_traversal = false;
};

/// Row factorization of A_kc = A_oo(I_k, I_c): L_kc is N_k x k with rows
/// ordered as pg.keep, R_kc = A_kc(J, :).
LowRankBlock factor_A_kc(const HbsRep& rep, const PerturbedGeometry& pg,
                         const UpdateOptions& opt = {});

/// Rows of M given as global indices.
using RowAccessor = std::function<DenseMatrix(const IndexList&)>;

struct RecompressResult {
  DenseMatrix C;     // |K| x k, with M(K,:) ~ C M(J,:)
  IndexList J;       // subset of K
};
/// Sequential pairwise recompression of the concatenated skeletons.
RecompressResult recompress(const std::vector<IndexList>& skeletons,
                            const RowAccessor& rows, double eps);

/// Row ID of A(tau, [p_begin, p_end)) for the extended matrix behind `pc`,
/// with the proxy circle drawn around the points of `box` (tau itself at a
/// leaf). With `columns`, the column ID of A([p_begin, p_end), tau) instead.
IdFactor factor_near_block(const ProxyCompressor& pc, const IndexList& tau,
                           const IndexList& box, Index p_begin, Index p_end,
                           bool columns = false);

/// A_op = A(I_o, p) on the extended node set. L_op is N_o x k (cut rows
/// zero when drop_cut_rows); R_op = A_op(J, :).
LowRankBlock factor_A_op(const HbsRep& rep, const PerturbedGeometry& pg,
                         const UpdateOptions& opt = {});

/// A_pk = A(p, I_k), factored through its columns: R_pk is k x N_k (columns
/// ordered as pg.keep), L_pk = A_pk(:, J).
LowRankBlock factor_A_pk(const HbsRep& rep, const PerturbedGeometry& pg,
                         const UpdateOptions& opt = {});

/// Q = L R on the extended system. Column groups of L, in order:
/// k_kc (-L_kc on I_k), N_c (-B_cc on I_c), k_pk (L_pk on p), k_op (L_op on o).
struct UpdateFactors {
  Index n_original = 0;
  Index n_added = 0;
  IndexList keep;
  IndexList cut;
  LowRankBlock kc;
  DenseMatrix B_cc;
  LowRankBlock op;
  LowRankBlock pk;
  bool cut_rows_dropped = true;

  Index n_extended() const { return n_original + n_added; }
  Index rank() const { return kc.rank() + B_cc.cols() + pk.rank() + op.rank(); }
  DenseMatrix L() const;
  DenseMatrix R() const;
  /// R x without forming R.
  DenseMatrix apply_R(const DenseMatrix& x) const;
};

UpdateFactors assemble_Q(const PerturbedGeometry& pg, LowRankBlock kc,
                         DenseMatrix B_cc, LowRankBlock op, LowRankBlock pk,
                         bool cut_rows_dropped = true);

/// All of the above for one perturbation.
UpdateFactors factor_update(const HbsRep& rep, const PerturbedGeometry& pg,
                            const UpdateOptions& opt = {});

/// Dense Q straight from the extended-system definition. For tests.
DenseMatrix dense_update_matrix(const PerturbedGeometry& pg, bool drop_cut_rows = true);

struct PerturbedSolution {
  Eigen::VectorXd sigma_k;
  Eigen::VectorXd sigma_c;  // auxiliary
  Eigen::VectorXd sigma_p;
  Eigen::VectorXd extended;

  /// Density on the perturbed boundary, in the node order of pg.perturbed().
  Eigen::VectorXd on_perturbed(const PerturbedGeometry& pg) const;
};

class PerturbedSolver {
 public:
  PerturbedSolver(std::shared_ptr<const HbsSolver> original, DenseMatrix A_pp,
                  UpdateFactors factors);

  Index size() const { return uf_.n_extended(); }
  Index rank() const { return uf_.rank(); }
  double capacitance_condition() const { return cap_cond_; }
  const UpdateFactors& factors() const { return uf_; }
  const DenseMatrix& AinvL() const { return ainv_l_; }

  /// A^{-1} applied blockwise (HBS inverse on o, dense inverse on p).
  DenseMatrix apply_block_inverse(const DenseMatrix& b) const;
  Eigen::VectorXd solve(const Eigen::VectorXd& f_ext) const;
  PerturbedSolution solve_split(const Eigen::VectorXd& f_ext) const;

  void save(std::ostream& os) const;
  /// `original` must be the same solver the saved one was built from.
  static PerturbedSolver load(std::istream& is,
                              std::shared_ptr<const HbsSolver> original);

 private:
  PerturbedSolver() = default;
  void precompute();
  DenseMatrix solve_added(const DenseMatrix& b) const;

  std::shared_ptr<const HbsSolver> hbs_;
  DenseMatrix A_pp_lu_;  // packed LU of A_pp with row permutation
  Eigen::VectorXi A_pp_perm_;
  UpdateFactors uf_;
  DenseMatrix ainv_l_;
  DenseMatrix cap_inv_;
  double cap_cond_ = 1.0;
};

struct SingularCapacitanceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Factors A_pp densely and precomputes A^{-1} L and the capacitance inverse.
PerturbedSolver build_perturbed_solver(std::shared_ptr<const HbsSolver> original,
                                       const DenseMatrix& A_pp, UpdateFactors uf);

PerturbedSolution solve_perturbed(const PerturbedSolver& ps,
                                  const Eigen::VectorXd& f_ext);

/// Dense A_pp of the added piece (perturbed-geometry diagonal terms).
DenseMatrix added_block(const PerturbedGeometry& pg);

void save_update_factors(std::ostream& os, const UpdateFactors& uf);
UpdateFactors load_update_factors(std::istream& is);

/// Plain-text manifest naming the stored components and whether each depends
/// on where the added piece is placed.
void write_manifest(std::ostream& os, const UpdateFactors& uf);

}  // namespace pertsolve

#endif  // PERTSOLVE_UPDATE_HPP
