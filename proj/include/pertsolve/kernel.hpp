#ifndef PERTSOLVE_KERNEL_HPP
#define PERTSOLVE_KERNEL_HPP

#include "pertsolve/geometry.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>

namespace pertsolve {

/// Dense matrices are Eigen column-major.
using DenseMatrix = Eigen::MatrixXd;

inline constexpr double kInvTwoPi = 1.0 / kTwoPi;

/// G(x, y) = -1/(2 pi) log|x - y|.
double fundamental_solution(const Point& x, const Point& y);

/// D(x, y) = 1/(2 pi) <x - y, nu_y> / |x - y|^2.
double double_layer_kernel(const Point& x, const Point& y, const Point& nu_y);

/// Smooth limit of w * D(x, y) as y -> x along the curve: -w kappa / (4 pi).
double diagonal_limit(double curvature, double weight);

/// Nystrom matrix of the interior Dirichlet double-layer equation over one
/// node set. Entry (i, j) is w_j D(x_i, y_j, nu_j) for i != j and
/// -1/2 + diagonal_limit(kappa_i, w_i) on the diagonal. Distinct nodes that
/// coincide are rejected.
class NystromMatrix {
 public:
  explicit NystromMatrix(const Discretization& d);

  Index size() const { return d_.size(); }
  const Discretization& geometry() const { return d_; }

  double operator()(Index i, Index j) const;
  DenseMatrix block(const IndexList& rows, const IndexList& cols) const;
  DenseMatrix block(Index row0, Index nrows, Index col0, Index ncols) const;
  DenseMatrix dense() const;

 private:
  Discretization d_;
};

/// Matrix of assemble_dense. With same_curve, src and trg must be the same
/// discretization and the diagonal gets the jump term; otherwise all pairs
/// must be distinct points and the result is the plain potential operator.
DenseMatrix assemble_dense(const Discretization& src, const Discretization& trg,
                           bool same_curve);

/// G(t_i, z_j) for targets t and sources z.
DenseMatrix single_layer_matrix(const Eigen::Matrix2Xd& targets,
                                const Eigen::Matrix2Xd& sources);

/// w_j D(t_i, y_j, nu_j) for arbitrary targets t and source nodes `cols`.
DenseMatrix double_layer_matrix(const Eigen::Matrix2Xd& targets,
                                const Discretization& src,
                                const IndexList& cols);

struct PotentialResult {
  Eigen::VectorXd values;
  // Set when a target lies within 5 local node spacings of the boundary.
  bool near_boundary = false;
};

/// u(t) = sum_j w_j D(t, y_j, nu_j) sigma_j.
PotentialResult eval_potential(const Discretization& src,
                               const Eigen::VectorXd& sigma,
                               const Eigen::Matrix2Xd& targets);

struct ChargeSet {
  Eigen::Matrix2Xd locations;
  Eigen::VectorXd strengths;
};

/// u(t) = sum_j q_j G(t, s_j).
Eigen::VectorXd exact_solution(const ChargeSet& charges,
                               const Eigen::Matrix2Xd& targets);

/// Ten charges on a circle of twice the bounding radius and ten targets on a
/// circle of half the bounding radius, both about the bounding-circle
/// center, at random angles. Strengths are uniform in [-1, 1].
struct TestProblem {
  ChargeSet charges;
  Eigen::Matrix2Xd targets;
};
TestProblem make_test_problem(const Discretization& d, std::uint64_t seed,
                              int count = 10);

/// Boundary data g_i = u_exact(x_i).
Eigen::VectorXd boundary_data(const ChargeSet& charges, const Discretization& d);

/// Binary format: int64 rows, int64 cols, then rows*cols little-endian
/// doubles in column-major order.
void write_matrix_binary(std::ostream& os, const DenseMatrix& m);
DenseMatrix read_matrix_binary(std::istream& is);
void write_matrix_binary(const std::string& path, const DenseMatrix& m);
DenseMatrix read_matrix_binary(const std::string& path);
void write_matrix_csv(std::ostream& os, const DenseMatrix& m);

}  // namespace pertsolve

#endif  // PERTSOLVE_KERNEL_HPP
