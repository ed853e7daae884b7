#include "pertsolve/lowrank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace pertsolve {

namespace {

// Column-pivoted Householder QR of At (the transpose of the matrix whose
// rows are being skeletonized), stopped early. Only R is kept.
IdFactor id_from_transposed(DenseMatrix At, double eps, Index fixed_rank) {
  const Index n = At.rows(), m = At.cols();
  const Index kmax = std::min(n, m);
  Eigen::VectorXd ns(m), orig(m);
  for (Index j = 0; j < m; ++j) ns[j] = At.col(j).squaredNorm();
  orig = ns;
  const double total = ns.sum();
  // Pivoted QR overshoots the SVD truncation rank on slowly decaying
  // spectra; a factor 2 slack on the residual brings it back in line.
  const double thr2 = 4.0 * eps * eps * total;
  std::vector<Index> perm(static_cast<size_t>(m));
  std::iota(perm.begin(), perm.end(), Index{0});
  Eigen::VectorXd workspace(m);

  Index k = 0;
  for (; k < kmax; ++k) {
    const double rem = ns.tail(m - k).sum();
    if (fixed_rank < 0 ? rem <= thr2 : k >= fixed_rank) break;
    Index p;
    ns.tail(m - k).maxCoeff(&p);
    p += k;
    if (p != k) {
      At.col(k).swap(At.col(p));
      std::swap(ns[k], ns[p]);
      std::swap(orig[k], orig[p]);
      std::swap(perm[k], perm[p]);
    }
    double tau = 0.0, beta = 0.0;
    auto x = At.col(k).segment(k, n - k);
    x.makeHouseholderInPlace(tau, beta);
    if (k + 1 < m) {
      At.block(k, k + 1, n - k, m - k - 1)
          .applyHouseholderOnTheLeft(x.tail(n - k - 1), tau, workspace.data());
    }
    At(k, k) = beta;
    ns[k] = 0.0;
    for (Index j = k + 1; j < m; ++j) {
      ns[j] -= At(k, j) * At(k, j);
      if (ns[j] <= 1e-10 * orig[j]) {
        ns[j] = k + 1 < n ? At.col(j).segment(k + 1, n - k - 1).squaredNorm() : 0.0;
        orig[j] = ns[j];
      }
    }
  }
  const Index l = k;

  IdFactor f;
  f.residual = std::sqrt(std::max(0.0, ns.tail(m - l).sum()));
  f.J.assign(perm.begin(), perm.begin() + l);
  f.P = DenseMatrix::Zero(m, l);
  for (Index i = 0; i < l; ++i) f.P(perm[i], i) = 1.0;
  if (l == 0 || l == m) return f;

  // Leading block that is safely invertible; trailing skeleton rows beyond
  // it only appear with zero coefficients.
  Index r = 0;
  const double r00 = std::abs(At(0, 0));
  while (r < l && std::abs(At(r, r)) > 1e-13 * r00) ++r;
  if (r == 0) return f;
  const DenseMatrix T = At.topLeftCorner(r, r)
                            .triangularView<Eigen::Upper>()
                            .solve(At.block(0, l, r, m - l));
  for (Index j = 0; j < m - l; ++j) {
    f.P.row(perm[l + j]).head(r) = T.col(j).transpose();
  }
  return f;
}

}  // namespace

IdFactor interpolatory_decomposition(const DenseMatrix& W, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw std::invalid_argument("interpolatory_decomposition: eps must be in (0,1)");
  }
  return id_from_transposed(W.transpose(), eps, -1);
}

IdFactor interpolatory_decomposition_rank(const DenseMatrix& W, Index rank) {
  if (rank < 0) throw std::invalid_argument("interpolatory_decomposition_rank: rank < 0");
  return id_from_transposed(W.transpose(), 0.0, rank);
}

ProxySurface make_proxy(const Eigen::Matrix2Xd& box_points, const ProxyOptions& opt,
                        double diameter, double spacing) {
  if (box_points.cols() == 0) throw std::invalid_argument("make_proxy: empty box");
  if (opt.points < 1 || !(opt.radius_ratio > 1.0)) {
    throw std::invalid_argument("make_proxy: bad options");
  }
  const Circle c = enclosing_circle(box_points);
  ProxySurface s;
  s.center = c.center;
  double r = c.radius;
  if (r < opt.floor_fraction * diameter) r = std::max(r, opt.floor_spacing * spacing);
  s.radius = opt.radius_ratio * r;
  if (!(s.radius > 0.0)) {
    throw std::invalid_argument("make_proxy: degenerate box and no spacing floor");
  }
  s.points.resize(2, opt.points);
  for (int p = 0; p < opt.points; ++p) {
    const double a = kTwoPi * p / opt.points;
    s.points.col(p) = s.center + s.radius * Point(std::cos(a), std::sin(a));
  }
  return s;
}

ProxySurface make_proxy(const Discretization& d, const IndexList& box,
                        const ProxyOptions& opt, double diameter) {
  if (diameter < 0) diameter = 2.0 * enclosing_circle(d.nodes).radius;
  Eigen::Matrix2Xd pts(2, static_cast<Index>(box.size()));
  double spacing = 0.0;
  for (size_t i = 0; i < box.size(); ++i) {
    pts.col(static_cast<Index>(i)) = d.nodes.col(box[i]);
    spacing += d.weights[box[i]];
  }
  if (!box.empty()) spacing /= static_cast<double>(box.size());
  return make_proxy(pts, opt, diameter, spacing);
}

RangeList to_ranges(const IndexList& idx) {
  RangeList r;
  for (Index i : idx) {
    if (!r.empty() && r.back().second == i) {
      ++r.back().second;
    } else {
      r.emplace_back(i, i + 1);
    }
  }
  return r;
}

Index range_count(const RangeList& r) {
  Index n = 0;
  for (const auto& [a, b] : r) n += b - a;
  return n;
}

ProxyCompressor::ProxyCompressor(const NystromMatrix& A, double eps, ProxyOptions opt)
    : A_(&A), eps_(eps), opt_(opt) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw std::invalid_argument("ProxyCompressor: eps must be in (0,1)");
  }
  diameter_ = 2.0 * enclosing_circle(A.geometry().nodes).radius;
}

ProxySurface ProxyCompressor::proxy_for(const IndexList& box) const {
  return make_proxy(A_->geometry(), box, opt_, diameter_);
}

void ProxyCompressor::split(const ProxySurface& proxy, const RangeList& set,
                            IndexList& near, IndexList& far_sample,
                            Index& far_count) const {
  const Eigen::Matrix2Xd& x = A_->geometry().nodes;
  const double r2 = proxy.radius * proxy.radius;
  const double cx = proxy.center.x(), cy = proxy.center.y();
  IndexList far;
  for (const auto& [a, b] : set) {
    for (Index i = a; i < b; ++i) {
      const double dx = x(0, i) - cx, dy = x(1, i) - cy;
      if (dx * dx + dy * dy <= r2) {
        near.push_back(i);
      } else {
        far.push_back(i);
      }
    }
  }
  far_count = static_cast<Index>(far.size());
  constexpr Index kSamples = 48;
  if (far_count <= kSamples) {
    far_sample = std::move(far);
  } else {
    for (Index s = 0; s < kSamples; ++s) far_sample.push_back(far[s * far_count / kSamples]);
  }
}

Index ProxyCompressor::near_count(const ProxySurface& proxy,
                                  const RangeList& sources) const {
  IndexList near, sample;
  Index far = 0;
  split(proxy, sources, near, sample, far);
  return static_cast<Index>(near.size());
}

namespace {

// Scale that makes the proxy block carry the estimated far-field norm.
double far_scale(const DenseMatrix& far_block, Index far_count,
                 double proxy_norm) {
  if (far_block.size() == 0 || proxy_norm == 0.0) return 0.0;
  const double est = far_block.norm() *
                     std::sqrt(static_cast<double>(far_count) /
                               static_cast<double>(far_block.cols()));
  return est / proxy_norm;
}

}  // namespace

DenseMatrix ProxyCompressor::row_matrix(const IndexList& rows,
                                        const ProxySurface& proxy,
                                        const RangeList& sources) const {
  IndexList near, sample;
  Index far_count = 0;
  split(proxy, sources, near, sample, far_count);
  const Index m = static_cast<Index>(rows.size());
  const Index nn = static_cast<Index>(near.size());
  const bool use_proxy = far_count > 0;
  const Index np = use_proxy ? proxy.size() + 1 : 0;
  DenseMatrix W(m, nn + np);
  if (nn) W.leftCols(nn) = A_->block(rows, near);
  if (use_proxy) {
    Eigen::Matrix2Xd pts(2, m);
    for (Index i = 0; i < m; ++i) pts.col(i) = A_->geometry().nodes.col(rows[i]);
    DenseMatrix G = single_layer_matrix(pts, proxy.points);
    const double s = far_scale(A_->block(rows, sample), far_count, G.norm());
    W.middleCols(nn, proxy.size()) = s * G;
    const double col = s * G.norm() / std::sqrt(static_cast<double>(proxy.size()));
    W.col(nn + proxy.size()).setConstant(col / std::sqrt(static_cast<double>(m)));
  }
  return W;
}

DenseMatrix ProxyCompressor::col_matrix(const IndexList& cols,
                                        const ProxySurface& proxy,
                                        const RangeList& targets) const {
  IndexList near, sample;
  Index far_count = 0;
  split(proxy, targets, near, sample, far_count);
  const Index n = static_cast<Index>(cols.size());
  const Index nn = static_cast<Index>(near.size());
  const bool use_proxy = far_count > 0;
  const Index np = use_proxy ? proxy.size() : 0;
  // Stored transposed: one row per column of A being skeletonized.
  DenseMatrix W(n, nn + np);
  if (nn) W.leftCols(nn) = A_->block(near, cols).transpose();
  if (use_proxy) {
    DenseMatrix Dp = double_layer_matrix(proxy.points, A_->geometry(), cols);
    const DenseMatrix far = A_->block(sample, cols).transpose();
    const double s = far_scale(far, far_count, Dp.norm());
    W.rightCols(np) = s * Dp.transpose();
  }
  return W;
}

IdFactor ProxyCompressor::compress_rows(const IndexList& rows,
                                        const ProxySurface& proxy,
                                        const RangeList& sources, Index rank,
                                        DenseMatrix* work) const {
  DenseMatrix At = row_matrix(rows, proxy, sources).transpose();
  IdFactor f = id_from_transposed(At, eps_, rank);
  if (work) *work = std::move(At);
  return f;
}

IdFactor ProxyCompressor::compress_cols(const IndexList& cols,
                                        const ProxySurface& proxy,
                                        const RangeList& targets, Index rank,
                                        DenseMatrix* work) const {
  DenseMatrix At = col_matrix(cols, proxy, targets).transpose();
  IdFactor f = id_from_transposed(At, eps_, rank);
  if (work) *work = std::move(At);
  return f;
}

IdFactor interpolatory_decomposition_transposed(const DenseMatrix& At, double eps,
                                                Index rank) {
  return id_from_transposed(At, eps, rank);
}

IdFactor compress_block_proxy(const IndexList& tau, const Discretization& geometry,
                              const IndexList& complement, double eps,
                              const ProxyOptions& opt, bool refine) {
  if (tau.empty()) return {};
  NystromMatrix A(geometry);
  ProxyCompressor pc(A, eps, opt);
  if (complement.empty()) {
    IdFactor f;
    f.P = DenseMatrix::Zero(static_cast<Index>(tau.size()), 0);
    return f;
  }
  IdFactor f = pc.compress_rows(tau, pc.proxy_for(tau), to_ranges(complement));
  if (!refine || f.rank() == 0) return f;
  // The proxy basis is generic, so its skeleton can overshoot the rank of the
  // actual block (badly so on a circle, where D is constant). A second ID of
  // the skeleton rows against the true complement trims it.
  IndexList rows(f.J.size());
  for (size_t i = 0; i < f.J.size(); ++i) rows[i] = tau[f.J[i]];
  const DenseMatrix S = A.block(rows, complement);
  if (S.norm() == 0.0) {
    IdFactor z;
    z.P = DenseMatrix::Zero(static_cast<Index>(tau.size()), 0);
    return z;
  }
  const IdFactor g = interpolatory_decomposition(S, eps);
  IdFactor out;
  out.P = f.P * g.P;
  out.J.resize(g.J.size());
  for (size_t i = 0; i < g.J.size(); ++i) out.J[i] = f.J[g.J[i]];
  out.residual = f.residual + f.P.norm() * g.residual;
  return out;
}

void write_skeleton_csv(std::ostream& os, const IndexList& skeleton) {
  os << "position,index\n";
  for (size_t i = 0; i < skeleton.size(); ++i) os << i << ',' << skeleton[i] << '\n';
}

}  // namespace pertsolve
