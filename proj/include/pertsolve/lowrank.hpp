#ifndef PERTSOLVE_LOWRANK_HPP
#define PERTSOLVE_LOWRANK_HPP

#include "pertsolve/kernel.hpp"

#include <utility>

namespace pertsolve {

/// Row interpolatory decomposition W ~ P * W(J, :).
///
/// J holds the l skeleton rows (positions in [0, m)); P is m x l with
/// P(J, :) equal to the identity exactly.
struct IdFactor {
  DenseMatrix P;
  IndexList J;
  double residual = 0.0;  // ||W - P W(J,:)||_F as measured by the pivoted QR

  Index rank() const { return static_cast<Index>(J.size()); }
  Index rows() const { return P.rows(); }
};

/// Rank chosen as the smallest l with ||R22||_F <= 2 eps ||W||_F in a
/// column-pivoted QR of W^T.
IdFactor interpolatory_decomposition(const DenseMatrix& W, double eps);

/// Same factorization truncated at a prescribed rank (clamped to min(m, n)).
IdFactor interpolatory_decomposition_rank(const DenseMatrix& W, Index rank);

/// Row ID of W given W^T directly; `rank` < 0 selects the eps criterion.
IdFactor interpolatory_decomposition_transposed(const DenseMatrix& At, double eps,
                                                Index rank = -1);

struct ProxyOptions {
  double radius_ratio = 1.5;
  int points = 75;
  double floor_fraction = 1e-3;  // of the geometry diameter
  double floor_spacing = 3.0;    // in local node spacings
};

struct ProxySurface {
  Point center = Point::Zero();
  double radius = 0.0;
  Eigen::Matrix2Xd points;

  Index size() const { return points.cols(); }
  /// Points on the circle count as inside.
  bool encloses(const Point& p) const { return (p - center).norm() <= radius; }
};

/// Proxy circle around the given points. The radius is radius_ratio times
/// the minimal enclosing radius, floored at floor_spacing * spacing when that
/// radius is below floor_fraction * diameter.
ProxySurface make_proxy(const Eigen::Matrix2Xd& box_points,
                        const ProxyOptions& opt = {}, double diameter = 0.0,
                        double spacing = 0.0);
/// Proxy around nodes `box` of `d`; a negative diameter means "measure d".
ProxySurface make_proxy(const Discretization& d, const IndexList& box,
                        const ProxyOptions& opt = {}, double diameter = -1.0);

/// Half-open index ranges [first, second).
using RangeList = std::vector<std::pair<Index, Index>>;
RangeList to_ranges(const IndexList& idx);
Index range_count(const RangeList& r);

/// Proxy-accelerated skeletonization against one Nystrom matrix.
///
/// compress_rows finds a row skeleton of A(rows, S) where S is every column
/// index in `sources`: sources inside the proxy are kept as explicit columns
/// and the rest are represented by poles on the proxy circle plus a constant.
/// compress_cols is the column analogue with target points on the proxy.
class ProxyCompressor {
 public:
  ProxyCompressor(const NystromMatrix& A, double eps, ProxyOptions opt = {});

  const NystromMatrix& matrix() const { return *A_; }
  double eps() const { return eps_; }
  const ProxyOptions& options() const { return opt_; }
  double diameter() const { return diameter_; }

  ProxySurface proxy_for(const IndexList& box) const;

  /// `rank` < 0 selects the eps criterion. The assembled matrix is returned
  /// through `work` when requested so a fixed-rank pass can reuse it.
  IdFactor compress_rows(const IndexList& rows, const ProxySurface& proxy,
                         const RangeList& sources, Index rank = -1,
                         DenseMatrix* work = nullptr) const;
  IdFactor compress_cols(const IndexList& cols, const ProxySurface& proxy,
                         const RangeList& targets, Index rank = -1,
                         DenseMatrix* work = nullptr) const;

  /// How many of `sources` fall inside `proxy`.
  Index near_count(const ProxySurface& proxy, const RangeList& sources) const;

 private:
  DenseMatrix row_matrix(const IndexList& rows, const ProxySurface& proxy,
                         const RangeList& sources) const;
  DenseMatrix col_matrix(const IndexList& cols, const ProxySurface& proxy,
                         const RangeList& targets) const;
  void split(const ProxySurface& proxy, const RangeList& set, IndexList& near,
             IndexList& far_sample, Index& far_count) const;

  const NystromMatrix* A_;
  double eps_;
  ProxyOptions opt_;
  double diameter_;
};

/// Row ID of A(tau, complement) on `geometry` via a proxy circle around tau.
/// With `refine`, the proxy skeleton is re-skeletonized against the actual
/// complement columns, at O(k^2 |complement|) extra cost.
IdFactor compress_block_proxy(const IndexList& tau, const Discretization& geometry,
                              const IndexList& complement, double eps,
                              const ProxyOptions& opt = {}, bool refine = true);

/// Writes "position,index" lines of a skeleton.
void write_skeleton_csv(std::ostream& os, const IndexList& skeleton);

}  // namespace pertsolve

#endif  // PERTSOLVE_LOWRANK_HPP
