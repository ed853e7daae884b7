#include "pertsolve/hbs.hpp"

#include <algorithm>
#include <cmath>

namespace pertsolve {

IndexList IndexTree::indices(int node) const {
  const Node& nd = nodes[static_cast<size_t>(node)];
  IndexList r(static_cast<size_t>(nd.size()));
  for (Index i = 0; i < nd.size(); ++i) r[i] = nd.begin + i;
  return r;
}

std::vector<int> IndexTree::level_nodes(int level) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (nodes[static_cast<size_t>(i)].level == level) out.push_back(i);
  }
  return out;
}

IndexTree build_tree(Index n, Index leaf_cap) {
  if (n < 1) throw std::invalid_argument("build_tree: N must be positive");
  if (leaf_cap < 8) throw std::invalid_argument("build_tree: leaf cap must be >= 8");
  IndexTree t;
  t.n_points = n;
  t.leaf_cap = leaf_cap;
  int levels = 0;
  while ((Index{1} << levels) * leaf_cap < n) ++levels;
  t.levels = levels;
  t.nodes.push_back({0, n, -1, -1, -1, 0});
  for (size_t i = 0; i < t.nodes.size(); ++i) {
    if (t.nodes[i].level == levels) continue;
    const Index b = t.nodes[i].begin, e = t.nodes[i].end;
    const Index mid = b + (e - b) / 2;
    const int lvl = t.nodes[i].level + 1;
    t.nodes[i].left = static_cast<int>(t.nodes.size());
    t.nodes.push_back({b, mid, static_cast<int>(i), -1, -1, lvl});
    t.nodes[i].right = static_cast<int>(t.nodes.size());
    t.nodes.push_back({mid, e, static_cast<int>(i), -1, -1, lvl});
  }
  return t;
}

Index HbsRep::max_rank() const {
  Index k = 0;
  for (const auto& n : nodes) k = std::max(k, n.rank());
  return k;
}

Index HbsRep::stored_entries() const {
  Index s = 0;
  for (const auto& n : nodes) {
    s += n.U.size() + n.V.size() + n.D.size() + n.B12.size() + n.B21.size();
  }
  return s;
}

namespace {

IndexList concat(const IndexList& a, const IndexList& b) {
  IndexList r = a;
  r.insert(r.end(), b.begin(), b.end());
  return r;
}

IndexList pick(const IndexList& from, const IndexList& positions) {
  IndexList r(positions.size());
  for (size_t i = 0; i < positions.size(); ++i) r[i] = from[positions[i]];
  return r;
}

}  // namespace

HbsRep compress_hbs(const Discretization& d, double eps, const HbsOptions& opt) {
  HbsRep rep;
  rep.eps = eps;
  rep.tree = build_tree(d.size(), opt.leaf_cap);
  rep.nodes.resize(static_cast<size_t>(rep.tree.size()));
  NystromMatrix A(d);
  const Index n = d.size();
  if (rep.tree.levels == 0) {
    rep.nodes[0].D = A.dense();
    return rep;
  }
  ProxyCompressor pc(A, eps, opt.proxy);

  for (int level = rep.tree.levels; level >= 1; --level) {
    for (int id : rep.tree.level_nodes(level)) {
      const IndexTree::Node& tn = rep.tree[id];
      HbsNode& node = rep.nodes[static_cast<size_t>(id)];
      IndexList rc, cc;
      if (tn.is_leaf()) {
        rc = rep.tree.indices(id);
        cc = rc;
        node.D = A.block(rc, rc);
      } else {
        const HbsNode& l = rep.nodes[static_cast<size_t>(tn.left)];
        const HbsNode& r = rep.nodes[static_cast<size_t>(tn.right)];
        rc = concat(l.rskel, r.rskel);
        cc = concat(l.cskel, r.cskel);
      }
      const ProxySurface proxy = pc.proxy_for(rep.tree.indices(id));
      node.proxy_center = proxy.center;
      node.proxy_radius = proxy.radius;
      RangeList outside;
      if (tn.begin > 0) outside.emplace_back(0, tn.begin);
      if (tn.end < n) outside.emplace_back(tn.end, n);

      DenseMatrix wr, wc;
      IdFactor fr = pc.compress_rows(rc, proxy, outside, -1, &wr);
      IdFactor fc = pc.compress_cols(cc, proxy, outside, -1, &wc);
      // The inverse needs square V^T X U blocks, so both sides share a rank.
      Index k = std::max(fr.rank(), fc.rank());
      k = std::min({k, std::min(wr.rows(), wr.cols()), std::min(wc.rows(), wc.cols())});
      if (fr.rank() != k) fr = interpolatory_decomposition_transposed(wr, 0.0, k);
      if (fc.rank() != k) fc = interpolatory_decomposition_transposed(wc, 0.0, k);
      node.full_rank = k >= static_cast<Index>(rc.size());
      if (node.full_rank) ++rep.full_rank_nodes;
      node.U = std::move(fr.P);
      node.V = std::move(fc.P);
      node.rskel = pick(rc, fr.J);
      node.cskel = pick(cc, fc.J);
    }
  }
  for (int id = 0; id < rep.tree.size(); ++id) {
    const IndexTree::Node& tn = rep.tree[id];
    if (tn.is_leaf()) continue;
    HbsNode& node = rep.nodes[static_cast<size_t>(id)];
    const HbsNode& l = rep.nodes[static_cast<size_t>(tn.left)];
    const HbsNode& r = rep.nodes[static_cast<size_t>(tn.right)];
    node.B12 = A.block(l.rskel, r.cskel);
    node.B21 = A.block(r.rskel, l.cskel);
  }
  return rep;
}

DenseMatrix apply_hbs(const HbsRep& rep, const DenseMatrix& x) {
  const IndexTree& t = rep.tree;
  if (x.rows() != t.n_points) throw std::invalid_argument("apply_hbs: dimension mismatch");
  const Index nrhs = x.cols();
  DenseMatrix y(x.rows(), nrhs);
  if (t.levels == 0) {
    y.noalias() = rep.nodes[0].D * x;
    return y;
  }
  std::vector<DenseMatrix> xh(static_cast<size_t>(t.size())), yh(xh.size());
  for (int id = t.size() - 1; id >= 1; --id) {
    const auto& tn = t[id];
    const HbsNode& nd = rep.node(id);
    if (tn.is_leaf()) {
      xh[id].noalias() = nd.V.transpose() * x.middleRows(tn.begin, tn.size());
    } else {
      DenseMatrix s(xh[tn.left].rows() + xh[tn.right].rows(), nrhs);
      s << xh[tn.left], xh[tn.right];
      xh[id].noalias() = nd.V.transpose() * s;
    }
  }
  for (int id = 0; id < t.size(); ++id) {
    const auto& tn = t[id];
    const HbsNode& nd = rep.node(id);
    if (tn.is_leaf()) {
      y.middleRows(tn.begin, tn.size()).noalias() = nd.D * x.middleRows(tn.begin, tn.size());
      y.middleRows(tn.begin, tn.size()).noalias() += nd.U * yh[id];
      continue;
    }
    const Index k1 = rep.node(tn.left).rank(), k2 = rep.node(tn.right).rank();
    DenseMatrix& yl = yh[tn.left];
    DenseMatrix& yr = yh[tn.right];
    yl.noalias() = nd.B12 * xh[tn.right];
    yr.noalias() = nd.B21 * xh[tn.left];
    if (id != 0) {
      const DenseMatrix up = nd.U * yh[id];
      yl += up.topRows(k1);
      yr += up.bottomRows(k2);
    }
  }
  return y;
}

Eigen::VectorXd apply_hbs(const HbsRep& rep, const Eigen::VectorXd& x) {
  return apply_hbs(rep, DenseMatrix(x)).col(0);
}

DenseMatrix reconstruct_dense(const HbsRep& rep) {
  const DenseMatrix I = DenseMatrix::Identity(rep.size(), rep.size());
  return apply_hbs(rep, I);
}

NodeFactors get_node_factors(const HbsRep& rep, int node) {
  if (node < 0 || node >= rep.tree.size()) {
    throw std::out_of_range("get_node_factors: invalid node id");
  }
  const HbsNode& n = rep.node(node);
  return {n.U, n.V, n.rskel, n.cskel, rep.tree[node].is_leaf()};
}

namespace {

DenseMatrix telescope(const HbsRep& rep, int node, bool rows) {
  const auto& tn = rep.tree[node];
  const HbsNode& nd = rep.node(node);
  const DenseMatrix& F = rows ? nd.U : nd.V;
  if (tn.is_leaf()) return F;
  const DenseMatrix a = telescope(rep, tn.left, rows);
  const DenseMatrix b = telescope(rep, tn.right, rows);
  DenseMatrix out(a.rows() + b.rows(), F.cols());
  out.topRows(a.rows()).noalias() = a * F.topRows(a.cols());
  out.bottomRows(b.rows()).noalias() = b * F.bottomRows(b.cols());
  return out;
}

}  // namespace

DenseMatrix telescoped_U(const HbsRep& rep, int node) {
  if (node <= 0 || node >= rep.tree.size()) {
    throw std::out_of_range("telescoped_U: node must be a non-root node");
  }
  return telescope(rep, node, true);
}

DenseMatrix telescoped_V(const HbsRep& rep, int node) {
  if (node <= 0 || node >= rep.tree.size()) {
    throw std::out_of_range("telescoped_V: node must be a non-root node");
  }
  return telescope(rep, node, false);
}

Index HbsSolver::stored_entries() const {
  Index s = 0;
  for (const auto& n : nodes) s += n.E.size() + n.Ft.size() + n.G.size();
  return s;
}

namespace {

DenseMatrix checked_inverse(const DenseMatrix& M, int node, const char* what) {
  Eigen::PartialPivLU<DenseMatrix> lu(M);
  const double rc = lu.rcond();
  if (!(rc > 1e-15)) {
    throw SingularBlockError(std::string("invert_hbs: singular ") + what +
                                 " at node " + std::to_string(node) +
                                 " (rcond " + std::to_string(rc) + ")",
                             node);
  }
  return lu.inverse();
}

}  // namespace

HbsSolver invert_hbs(const HbsRep& rep) {
  HbsSolver s;
  s.tree = rep.tree;
  const IndexTree& t = rep.tree;
  s.nodes.resize(static_cast<size_t>(t.size()));
  std::vector<DenseMatrix> dhat(static_cast<size_t>(t.size()));
  for (int id = t.size() - 1; id >= 0; --id) {
    const auto& tn = t[id];
    const HbsNode& nd = rep.node(id);
    DenseMatrix Dt;
    if (tn.is_leaf()) {
      Dt = nd.D;
    } else {
      const Index k1 = dhat[tn.left].rows(), k2 = dhat[tn.right].rows();
      Dt.resize(k1 + k2, k1 + k2);
      Dt << dhat[tn.left], nd.B12, nd.B21, dhat[tn.right];
      dhat[tn.left].resize(0, 0);
      dhat[tn.right].resize(0, 0);
    }
    HbsSolver::Node& sn = s.nodes[static_cast<size_t>(id)];
    if (id == 0) {
      sn.G = checked_inverse(Dt, id, "root block");
      break;
    }
    const DenseMatrix X = checked_inverse(Dt, id, "diagonal block");
    const DenseMatrix XU = X * nd.U;
    const DenseMatrix VX = nd.V.transpose() * X;
    dhat[id] = checked_inverse(nd.V.transpose() * XU, id, "reduced block");
    sn.E.noalias() = XU * dhat[id];
    sn.Ft.noalias() = dhat[id] * VX;
    sn.G = X;
    sn.G.noalias() -= sn.E * VX;
  }
  return s;
}

DenseMatrix apply_inverse(const HbsSolver& solver, const DenseMatrix& b) {
  const IndexTree& t = solver.tree;
  if (b.rows() != t.n_points) {
    throw std::invalid_argument("apply_inverse: dimension mismatch");
  }
  const Index nrhs = b.cols();
  if (t.levels == 0) return solver.nodes[0].G * b;
  std::vector<DenseMatrix> q(static_cast<size_t>(t.size())), u(q.size());
  std::vector<DenseMatrix> stacked(q.size());
  for (int id = t.size() - 1; id >= 1; --id) {
    const auto& tn = t[id];
    const auto& sn = solver.nodes[static_cast<size_t>(id)];
    if (tn.is_leaf()) {
      q[id].noalias() = sn.Ft * b.middleRows(tn.begin, tn.size());
    } else {
      stacked[id].resize(q[tn.left].rows() + q[tn.right].rows(), nrhs);
      stacked[id] << q[tn.left], q[tn.right];
      q[id].noalias() = sn.Ft * stacked[id];
    }
  }
  DenseMatrix x(b.rows(), nrhs);
  for (int id = 0; id < t.size(); ++id) {
    const auto& tn = t[id];
    const auto& sn = solver.nodes[static_cast<size_t>(id)];
    if (tn.is_leaf()) {
      auto xs = x.middleRows(tn.begin, tn.size());
      xs.noalias() = sn.G * b.middleRows(tn.begin, tn.size());
      xs.noalias() += sn.E * u[id];
      continue;
    }
    DenseMatrix qs;
    if (id == 0) {
      qs.resize(q[tn.left].rows() + q[tn.right].rows(), nrhs);
      qs << q[tn.left], q[tn.right];
    } else {
      qs = std::move(stacked[id]);
    }
    DenseMatrix us = sn.G * qs;
    if (id != 0) us.noalias() += sn.E * u[id];
    const Index k1 = q[tn.left].rows();
    u[tn.left] = us.topRows(k1);
    u[tn.right] = us.bottomRows(us.rows() - k1);
  }
  return x;
}

Eigen::VectorXd apply_inverse(const HbsSolver& solver, const Eigen::VectorXd& b) {
  return apply_inverse(solver, DenseMatrix(b)).col(0);
}

}  // namespace pertsolve
