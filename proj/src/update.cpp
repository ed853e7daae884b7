#include "pertsolve/update.hpp"

#include <algorithm>
#include <cmath>

namespace pertsolve {

Eigen::VectorXd assemble_extended_rhs(const PerturbedGeometry& pg,
                                      const Eigen::VectorXd& f_k,
                                      const Eigen::VectorXd& f_p) {
  if (f_k.size() != pg.n_keep() || f_p.size() != pg.n_added()) {
    throw std::invalid_argument("assemble_extended_rhs: size mismatch");
  }
  Eigen::VectorXd f = Eigen::VectorXd::Zero(pg.n_extended());
  for (Index i = 0; i < pg.n_keep(); ++i) f[pg.keep[i]] = f_k[i];
  f.tail(pg.n_added()) = f_p;
  return f;
}

namespace {

DenseMatrix gather_rows(const DenseMatrix& x, const IndexList& idx) {
  DenseMatrix out(static_cast<Index>(idx.size()), x.cols());
  for (size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = x.row(idx[i]);
  return out;
}

IndexList pick(const IndexList& from, const IndexList& positions) {
  IndexList r(positions.size());
  for (size_t i = 0; i < positions.size(); ++i) r[i] = from[positions[i]];
  return r;
}

IndexList iota_list(Index begin, Index end) {
  IndexList r(static_cast<size_t>(end - begin));
  for (Index i = begin; i < end; ++i) r[i - begin] = i;
  return r;
}

IndexList sorted(IndexList v) {
  std::sort(v.begin(), v.end());
  return v;
}

// Position of each original index inside `list`, -1 elsewhere.
std::vector<Index> positions_in(Index n, const IndexList& list) {
  std::vector<Index> pos(static_cast<size_t>(n), -1);
  for (size_t i = 0; i < list.size(); ++i) pos[list[i]] = static_cast<Index>(i);
  return pos;
}

// Counts of flagged indices in [b, e) in O(1).
struct PrefixCount {
  std::vector<Index> c;
  explicit PrefixCount(const std::vector<char>& flag) : c(flag.size() + 1, 0) {
    for (size_t i = 0; i < flag.size(); ++i) c[i + 1] = c[i] + (flag[i] ? 1 : 0);
  }
  Index operator()(Index b, Index e) const { return c[e] - c[b]; }
};

// Nested basis over a tree: P(node) is the leaf basis or transfer matrix.
struct NestedBasis {
  const IndexTree* tree;
  std::function<const DenseMatrix&(int)> P;
  std::function<Index(Index)> global;  // tree position -> original index
};

// Writes (telescoped basis of `node`) * C into rows out_row(global) of out.
void push_down(const NestedBasis& nb, int node, const DenseMatrix& C,
               const std::vector<Index>& out_row, DenseMatrix& out) {
  const DenseMatrix M = nb.P(node) * C;
  const IndexTree::Node& tn = (*nb.tree)[node];
  if (tn.is_leaf()) {
    for (Index i = 0; i < tn.size(); ++i) out.row(out_row[nb.global(tn.begin + i)]) = M.row(i);
    return;
  }
  const Index k1 = nb.P(tn.left).cols();
  push_down(nb, tn.left, M.topRows(k1), out_row, out);
  push_down(nb, tn.right, M.bottomRows(M.rows() - k1), out_row, out);
}

// One diagonal block of the pre-recompression basis: a subtree of a nested
// basis, or an explicit factor over `rows`.
struct BasisBlock {
  int node = -1;
  IndexList rows;
  DenseMatrix P;
  IndexList skeleton;
};

void expand_blocks(const std::vector<BasisBlock>& blocks, const NestedBasis* nb,
                   const DenseMatrix& C, const std::vector<Index>& out_row,
                   DenseMatrix& out) {
  Index off = 0;
  for (const auto& b : blocks) {
    const Index len = static_cast<Index>(b.skeleton.size());
    const DenseMatrix seg = C.middleRows(off, len);
    off += len;
    if (b.node >= 0) {
      push_down(*nb, b.node, seg, out_row, out);
    } else {
      const DenseMatrix M = b.P * seg;
      for (size_t i = 0; i < b.rows.size(); ++i) {
        out.row(out_row[b.rows[i]]) = M.row(static_cast<Index>(i));
      }
    }
  }
}

NestedBasis hbs_basis(const HbsRep& rep, bool rows) {
  return {&rep.tree,
          [&rep, rows](int n) -> const DenseMatrix& {
            return rows ? rep.node(n).U : rep.node(n).V;
          },
          [](Index i) { return i; }};
}

Discretization extended_nodes(const PerturbedGeometry& pg) {
  return Discretization::concat(pg.original, pg.added);
}

}  // namespace

RecompressResult recompress(const std::vector<IndexList>& skeletons,
                            const RowAccessor& rows, double eps) {
  RecompressResult res;
  Index total = 0;
  for (const auto& s : skeletons) total += static_cast<Index>(s.size());
  res.C = DenseMatrix::Zero(total, 0);
  Index seen = 0;
  for (const auto& s : skeletons) {
    if (s.empty()) continue;
    IndexList S = res.J;
    S.insert(S.end(), s.begin(), s.end());
    const DenseMatrix M = rows(S);
    IdFactor f;
    if (M.norm() == 0.0) {
      f.P = DenseMatrix::Zero(static_cast<Index>(S.size()), 0);
    } else {
      f = interpolatory_decomposition(M, eps);
    }
    const Index kj = static_cast<Index>(res.J.size());
    const Index ns = static_cast<Index>(s.size());
    // C <- blockdiag(C, I) P, restricted to the rows seen so far.
    DenseMatrix C(total, f.rank());
    C.setZero();
    if (kj) C.topRows(seen).noalias() = res.C.topRows(seen) * f.P.topRows(kj);
    C.middleRows(seen, ns) = f.P.bottomRows(ns);
    res.C = std::move(C);
    seen += ns;
    res.J = pick(S, f.J);
  }
  return res;
}

LowRankBlock factor_A_kc(const HbsRep& rep, const PerturbedGeometry& pg,
                         const UpdateOptions& opt) {
  LowRankBlock out;
  const Index nk = pg.n_keep(), nc = pg.n_cut(), no = pg.n_original();
  if (nc == 0 || nk == 0) {
    out.L = DenseMatrix::Zero(nk, 0);
    out.R = DenseMatrix::Zero(0, nc);
    return out;
  }
  if (rep.size() != no) throw std::invalid_argument("factor_A_kc: HBS size mismatch");
  NystromMatrix A(pg.original);
  ProxyCompressor pc(A, opt.eps, opt.proxy);
  std::vector<char> in_cut(static_cast<size_t>(no), 0);
  for (Index i : pg.cut) in_cut[i] = 1;
  const PrefixCount cut_count(in_cut);
  const RangeList cut_ranges = to_ranges(sorted(pg.cut));

  std::vector<BasisBlock> blocks;
  std::function<void(int)> visit = [&](int id) {
    const IndexTree::Node& tn = rep.tree[id];
    const Index c = cut_count(tn.begin, tn.end);
    if (c == tn.size()) return;
    if (c == 0 && id != 0) {
      blocks.push_back({id, {}, {}, rep.node(id).rskel});
      return;
    }
    if (tn.is_leaf()) {
      BasisBlock b;
      for (Index i = tn.begin; i < tn.end; ++i) {
        if (!in_cut[i]) b.rows.push_back(i);
      }
      IdFactor f = pc.compress_rows(b.rows, pc.proxy_for(b.rows), cut_ranges);
      b.skeleton = pick(b.rows, f.J);
      b.P = std::move(f.P);
      blocks.push_back(std::move(b));
      return;
    }
    visit(tn.left);
    visit(tn.right);
  };
  visit(0);

  std::vector<IndexList> skels;
  for (const auto& b : blocks) {
    skels.push_back(b.skeleton);
    out.k0 += static_cast<Index>(b.skeleton.size());
  }
  const RecompressResult rc =
      recompress(skels, [&](const IndexList& r) { return A.block(r, pg.cut); }, opt.eps);
  const NestedBasis nb = hbs_basis(rep, true);
  out.L = DenseMatrix::Zero(nk, rc.C.cols());
  expand_blocks(blocks, &nb, rc.C, positions_in(no, pg.keep), out.L);
  out.R = A.block(rc.J, pg.cut);
  out.skeleton = rc.J;
  return out;
}

IdFactor factor_near_block(const ProxyCompressor& pc, const IndexList& tau,
                           const IndexList& box, Index p_begin, Index p_end,
                           bool columns) {
  const ProxySurface proxy = pc.proxy_for(box);
  const RangeList p{{p_begin, p_end}};
  return columns ? pc.compress_cols(tau, proxy, p) : pc.compress_rows(tau, proxy, p);
}

namespace {

// Boxes of the original tree that are far from the added piece, and the
// remaining points of `in_set` (the near field).
struct FarNearSplit {
  std::vector<int> far;
  IndexList near;
};

FarNearSplit split_far_near(const HbsRep& rep, const PerturbedGeometry& pg,
                            const std::vector<char>& in_set, double far_ratio) {
  FarNearSplit s;
  const Index no = pg.n_original();
  const Circle pc = enclosing_circle(pg.added.nodes);
  const double far_r = far_ratio * pc.radius;
  std::vector<char> close(static_cast<size_t>(no), 0);
  for (Index i = 0; i < no; ++i) {
    close[i] = (pg.original.nodes.col(i) - pc.center).norm() <= far_r;
  }
  const PrefixCount close_count(close), set_count(in_set);

  // clear[n]: no added point inside the proxy circle of n or its descendants.
  std::vector<char> clear(static_cast<size_t>(rep.tree.size()), 1);
  for (int id = rep.tree.size() - 1; id >= 1; --id) {
    const HbsNode& nd = rep.node(id);
    bool ok = (nd.proxy_center - pc.center).norm() > nd.proxy_radius + pc.radius;
    if (!ok) {
      ok = true;
      for (Index j = 0; j < pg.n_added() && ok; ++j) {
        ok = (pg.added.nodes.col(j) - nd.proxy_center).norm() > nd.proxy_radius;
      }
    }
    const auto& tn = rep.tree[id];
    if (!tn.is_leaf()) ok = ok && clear[tn.left] && clear[tn.right];
    clear[id] = ok;
  }

  std::function<void(int)> visit = [&](int id) {
    const IndexTree::Node& tn = rep.tree[id];
    const Index inside = set_count(tn.begin, tn.end);
    if (inside == 0) return;
    if (id != 0 && inside == tn.size() && close_count(tn.begin, tn.end) == 0 && clear[id]) {
      s.far.push_back(id);
      return;
    }
    if (tn.is_leaf()) {
      for (Index i = tn.begin; i < tn.end; ++i) {
        if (in_set[i]) s.near.push_back(i);
      }
      return;
    }
    visit(tn.left);
    visit(tn.right);
  };
  visit(0);
  return s;
}

// Factorization of M = A(S, p) (rows) or A(p, S)^T (columns) for a set S of
// original indices: returns the basis (rows ordered by `out_order`) and the
// skeleton in S.
struct SideFactor {
  DenseMatrix basis;
  IndexList skeleton;
  Index k0 = 0;
};

SideFactor factor_against_added(const HbsRep& rep, const PerturbedGeometry& pg,
                                const NystromMatrix& Aext, const FarNearSplit& split,
                                const IndexList& out_order, bool columns,
                                const UpdateOptions& opt) {
  const Index no = pg.n_original(), np = pg.n_added();
  const IndexList p = iota_list(no, no + np);
  ProxyCompressor pc(Aext, opt.eps, opt.proxy);
  const RowAccessor M = [&](const IndexList& r) -> DenseMatrix {
    if (columns) return Aext.block(p, r).transpose();
    return Aext.block(r, p);
  };

  // Far field: nested bases straight from the original compression.
  std::vector<BasisBlock> far_blocks;
  std::vector<IndexList> far_skels;
  SideFactor out;
  for (int id : split.far) {
    const IndexList& sk = columns ? rep.node(id).cskel : rep.node(id).rskel;
    far_blocks.push_back({id, {}, {}, sk});
    far_skels.push_back(sk);
    out.k0 += static_cast<Index>(sk.size());
  }
  const RecompressResult far = recompress(far_skels, M, opt.eps);

  // Near field: a fresh tree over the near points.
  const Index nn = static_cast<Index>(split.near.size());
  IndexTree near_tree;
  std::vector<DenseMatrix> near_P;
  IndexList J_near;
  if (nn > 0) {
    near_tree = build_tree(nn, std::max<Index>(opt.near_leaf_cap, 8));
    near_P.resize(static_cast<size_t>(near_tree.size()));
    std::vector<IndexList> skel(near_P.size());
    for (int level = near_tree.levels; level >= 0; --level) {
      for (int id : near_tree.level_nodes(level)) {
        const auto& tn = near_tree[id];
        IndexList box(split.near.begin() + tn.begin, split.near.begin() + tn.end);
        IndexList cand;
        if (tn.is_leaf()) {
          cand = box;
        } else {
          cand = skel[tn.left];
          cand.insert(cand.end(), skel[tn.right].begin(), skel[tn.right].end());
        }
        IdFactor f = factor_near_block(pc, cand, box, no, no + np, columns);
        skel[id] = pick(cand, f.J);
        near_P[id] = std::move(f.P);
      }
    }
    J_near = skel[0];
    out.k0 += static_cast<Index>(J_near.size());
  }

  // Joint compression of far and near skeletons.
  IndexList J_tot = far.J;
  J_tot.insert(J_tot.end(), J_near.begin(), J_near.end());
  const Index kf = static_cast<Index>(far.J.size());
  IdFactor joint;
  const DenseMatrix Mt = M(J_tot);
  if (J_tot.empty() || Mt.norm() == 0.0) {
    joint.P = DenseMatrix::Zero(static_cast<Index>(J_tot.size()), 0);
  } else {
    joint = interpolatory_decomposition(Mt, opt.eps);
  }
  out.skeleton = pick(J_tot, joint.J);
  const std::vector<Index> out_row = positions_in(no, out_order);
  out.basis = DenseMatrix::Zero(static_cast<Index>(out_order.size()), joint.rank());
  if (kf) {
    const NestedBasis nb = hbs_basis(rep, !columns);
    expand_blocks(far_blocks, &nb, far.C * joint.P.topRows(kf), out_row, out.basis);
  }
  if (nn > 0) {
    const NestedBasis nb{&near_tree,
                         [&near_P](int n) -> const DenseMatrix& { return near_P[n]; },
                         [&split](Index i) { return split.near[i]; }};
    push_down(nb, 0, joint.P.bottomRows(joint.P.rows() - kf), out_row, out.basis);
  }
  return out;
}

std::vector<char> flags(Index n, const IndexList& idx) {
  std::vector<char> f(static_cast<size_t>(n), 0);
  for (Index i : idx) f[i] = 1;
  return f;
}

LowRankBlock op_from(const SideFactor& sf, const NystromMatrix& Aext,
                     const PerturbedGeometry& pg) {
  LowRankBlock b;
  b.L = sf.basis;
  b.R = Aext.block(sf.skeleton, iota_list(pg.n_original(), pg.n_extended()));
  b.skeleton = sf.skeleton;
  b.k0 = sf.k0;
  return b;
}

LowRankBlock pk_from(const SideFactor& sf, const NystromMatrix& Aext,
                     const PerturbedGeometry& pg) {
  LowRankBlock b;
  b.L = Aext.block(iota_list(pg.n_original(), pg.n_extended()), sf.skeleton);
  b.R = sf.basis.transpose();
  b.skeleton = sf.skeleton;
  b.k0 = sf.k0;
  return b;
}

IndexList op_rows(const PerturbedGeometry& pg, bool drop_cut_rows) {
  return drop_cut_rows ? pg.keep : iota_list(0, pg.n_original());
}

}  // namespace

LowRankBlock factor_A_op(const HbsRep& rep, const PerturbedGeometry& pg,
                         const UpdateOptions& opt) {
  const IndexList rows = op_rows(pg, opt.drop_cut_rows);
  if (pg.n_added() == 0 || rows.empty()) {
    LowRankBlock b;
    b.L = DenseMatrix::Zero(pg.n_original(), 0);
    b.R = DenseMatrix::Zero(0, pg.n_added());
    return b;
  }
  if (rep.size() != pg.n_original()) {
    throw std::invalid_argument("factor_A_op: HBS size mismatch");
  }
  const NystromMatrix Aext(extended_nodes(pg));
  const FarNearSplit split =
      split_far_near(rep, pg, flags(pg.n_original(), rows), opt.far_ratio);
  const SideFactor sf = factor_against_added(rep, pg, Aext, split,
                                             iota_list(0, pg.n_original()), false, opt);
  return op_from(sf, Aext, pg);
}

LowRankBlock factor_A_pk(const HbsRep& rep, const PerturbedGeometry& pg,
                         const UpdateOptions& opt) {
  if (pg.n_added() == 0 || pg.n_keep() == 0) {
    LowRankBlock b;
    b.L = DenseMatrix::Zero(pg.n_added(), 0);
    b.R = DenseMatrix::Zero(0, pg.n_keep());
    return b;
  }
  if (rep.size() != pg.n_original()) {
    throw std::invalid_argument("factor_A_pk: HBS size mismatch");
  }
  const NystromMatrix Aext(extended_nodes(pg));
  const FarNearSplit split =
      split_far_near(rep, pg, flags(pg.n_original(), pg.keep), opt.far_ratio);
  const SideFactor sf = factor_against_added(rep, pg, Aext, split, pg.keep, true, opt);
  return pk_from(sf, Aext, pg);
}

UpdateFactors assemble_Q(const PerturbedGeometry& pg, LowRankBlock kc,
                         DenseMatrix B_cc, LowRankBlock op, LowRankBlock pk,
                         bool cut_rows_dropped) {
  const Index nk = pg.n_keep(), nc = pg.n_cut(), no = pg.n_original(), np = pg.n_added();
  auto check = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("assemble_Q: ") + what);
  };
  check(kc.L.rows() == nk && kc.R.cols() == nc && kc.L.cols() == kc.R.rows(), "A_kc factors");
  check(B_cc.rows() == nc && B_cc.cols() == nc, "B_cc");
  check(op.L.rows() == no && op.R.cols() == np && op.L.cols() == op.R.rows(), "A_op factors");
  check(pk.L.rows() == np && pk.R.cols() == nk && pk.L.cols() == pk.R.rows(), "A_pk factors");
  UpdateFactors uf;
  uf.n_original = no;
  uf.n_added = np;
  uf.keep = pg.keep;
  uf.cut = pg.cut;
  uf.kc = std::move(kc);
  uf.B_cc = std::move(B_cc);
  uf.op = std::move(op);
  uf.pk = std::move(pk);
  uf.cut_rows_dropped = cut_rows_dropped;
  return uf;
}

UpdateFactors factor_update(const HbsRep& rep, const PerturbedGeometry& pg,
                            const UpdateOptions& opt) {
  NystromMatrix A(pg.original);
  DenseMatrix B_cc = A.block(pg.cut, pg.cut);
  B_cc.diagonal().setZero();
  LowRankBlock kc = factor_A_kc(rep, pg, opt);
  if (!opt.combined_traversal || pg.n_added() == 0 || pg.n_keep() == 0 ||
      !opt.drop_cut_rows) {
    return assemble_Q(pg, std::move(kc), std::move(B_cc), factor_A_op(rep, pg, opt),
                      factor_A_pk(rep, pg, opt), opt.drop_cut_rows);
  }
  // A_op and A_pk see the same row set: split the tree and build the
  // extended matrix once.
  const NystromMatrix Aext(extended_nodes(pg));
  const FarNearSplit split =
      split_far_near(rep, pg, flags(pg.n_original(), pg.keep), opt.far_ratio);
  const SideFactor r =
      factor_against_added(rep, pg, Aext, split, iota_list(0, pg.n_original()), false, opt);
  const SideFactor c = factor_against_added(rep, pg, Aext, split, pg.keep, true, opt);
  return assemble_Q(pg, std::move(kc), std::move(B_cc), op_from(r, Aext, pg),
                    pk_from(c, Aext, pg), true);
}

namespace {

// Columns [c0, c0 + nc) of L.
DenseMatrix L_columns(const UpdateFactors& uf, Index c0, Index nc) {
  DenseMatrix out = DenseMatrix::Zero(uf.n_extended(), nc);
  const Index g[5] = {0, uf.kc.rank(), uf.kc.rank() + uf.B_cc.cols(),
                      uf.kc.rank() + uf.B_cc.cols() + uf.pk.rank(), uf.rank()};
  for (Index c = c0; c < c0 + nc; ++c) {
    auto col = out.col(c - c0);
    if (c < g[1]) {
      for (size_t i = 0; i < uf.keep.size(); ++i) col[uf.keep[i]] = -uf.kc.L(i, c);
    } else if (c < g[2]) {
      for (size_t i = 0; i < uf.cut.size(); ++i) col[uf.cut[i]] = -uf.B_cc(i, c - g[1]);
    } else if (c < g[3]) {
      col.tail(uf.n_added) = uf.pk.L.col(c - g[2]);
    } else {
      col.head(uf.n_original) = uf.op.L.col(c - g[3]);
    }
  }
  return out;
}

// sqrt(|R row j| / |L column j|), or 1 when either vanishes.
Eigen::VectorXd balance_scaling(const UpdateFactors& uf) {
  Eigen::VectorXd lc(uf.rank()), rr(uf.rank());
  Index r = 0;
  for (Index j = 0; j < uf.kc.rank(); ++j, ++r) {
    lc[r] = uf.kc.L.col(j).norm();
    rr[r] = uf.kc.R.row(j).norm();
  }
  for (Index j = 0; j < uf.B_cc.cols(); ++j, ++r) {
    lc[r] = uf.B_cc.col(j).norm();
    rr[r] = 1.0;
  }
  for (Index j = 0; j < uf.pk.rank(); ++j, ++r) {
    lc[r] = uf.pk.L.col(j).norm();
    rr[r] = uf.pk.R.row(j).norm();
  }
  for (Index j = 0; j < uf.op.rank(); ++j, ++r) {
    lc[r] = uf.op.L.col(j).norm();
    rr[r] = uf.op.R.row(j).norm();
  }
  Eigen::VectorXd d(uf.rank());
  for (Index j = 0; j < d.size(); ++j) {
    d[j] = (lc[j] > 0.0 && rr[j] > 0.0) ? std::sqrt(rr[j] / lc[j]) : 1.0;
  }
  return d;
}

}  // namespace

DenseMatrix UpdateFactors::L() const { return L_columns(*this, 0, rank()); }

DenseMatrix UpdateFactors::R() const {
  DenseMatrix out = DenseMatrix::Zero(rank(), n_extended());
  Index r = 0;
  for (Index i = 0; i < kc.rank(); ++i, ++r) {
    for (size_t j = 0; j < cut.size(); ++j) out(r, cut[j]) = kc.R(i, j);
  }
  for (size_t i = 0; i < cut.size(); ++i, ++r) out(r, cut[i]) = 1.0;
  for (Index i = 0; i < pk.rank(); ++i, ++r) {
    for (size_t j = 0; j < keep.size(); ++j) out(r, keep[j]) = pk.R(i, j);
  }
  for (Index i = 0; i < op.rank(); ++i, ++r) out.row(r).tail(n_added) = op.R.row(i);
  return out;
}

DenseMatrix UpdateFactors::apply_R(const DenseMatrix& x) const {
  if (x.rows() != n_extended()) throw std::invalid_argument("apply_R: dimension mismatch");
  DenseMatrix out(rank(), x.cols());
  const DenseMatrix xc = gather_rows(x, cut);
  Index r = 0;
  out.middleRows(r, kc.rank()).noalias() = kc.R * xc;
  r += kc.rank();
  out.middleRows(r, xc.rows()) = xc;
  r += xc.rows();
  out.middleRows(r, pk.rank()).noalias() = pk.R * gather_rows(x, keep);
  r += pk.rank();
  out.middleRows(r, op.rank()).noalias() = op.R * x.bottomRows(n_added);
  return out;
}

DenseMatrix dense_update_matrix(const PerturbedGeometry& pg, bool drop_cut_rows) {
  const Index no = pg.n_original(), n = pg.n_extended();
  const NystromMatrix A(extended_nodes(pg));
  const IndexList p = iota_list(no, n);
  DenseMatrix Q = DenseMatrix::Zero(n, n);
  auto scatter = [&Q](const IndexList& r, const IndexList& c, const DenseMatrix& M) {
    for (size_t j = 0; j < c.size(); ++j) {
      for (size_t i = 0; i < r.size(); ++i) Q(r[i], c[j]) = M(i, j);
    }
  };
  scatter(pg.keep, pg.cut, -A.block(pg.keep, pg.cut));
  DenseMatrix B = A.block(pg.cut, pg.cut);
  B.diagonal().setZero();
  scatter(pg.cut, pg.cut, -B);
  const IndexList rows = op_rows(pg, drop_cut_rows);
  scatter(rows, p, A.block(rows, p));
  scatter(p, pg.keep, A.block(p, pg.keep));
  return Q;
}

Eigen::VectorXd PerturbedSolution::on_perturbed(const PerturbedGeometry& pg) const {
  IndexList ext;
  pg.perturbed(&ext);
  Eigen::VectorXd s(static_cast<Index>(ext.size()));
  for (size_t i = 0; i < ext.size(); ++i) s[static_cast<Index>(i)] = extended[ext[i]];
  return s;
}

DenseMatrix added_block(const PerturbedGeometry& pg) {
  return NystromMatrix(pg.added).dense();
}

PerturbedSolver::PerturbedSolver(std::shared_ptr<const HbsSolver> original,
                                 DenseMatrix A_pp, UpdateFactors factors)
    : hbs_(std::move(original)), uf_(std::move(factors)) {
  if (!hbs_ || hbs_->size() != uf_.n_original) {
    throw std::invalid_argument("PerturbedSolver: original solver size mismatch");
  }
  if (A_pp.rows() != uf_.n_added || A_pp.cols() != uf_.n_added) {
    throw std::invalid_argument("PerturbedSolver: A_pp size mismatch");
  }
  if (uf_.n_added > 0) {
    Eigen::PartialPivLU<DenseMatrix> lu(A_pp);
    // Pivot ratio instead of rcond(): the estimator costs a third of the LU
    // here, and A_pp = -I/2 + compact is far from singular on resolved pieces.
    const Eigen::VectorXd piv = lu.matrixLU().diagonal().cwiseAbs();
    if (!(piv.minCoeff() > 1e-15 * piv.maxCoeff())) {
      throw std::runtime_error("PerturbedSolver: A_pp is singular");
    }
    A_pp_lu_ = lu.matrixLU();
    A_pp_perm_ = lu.permutationP().indices();
  } else {
    A_pp_lu_.resize(0, 0);
    A_pp_perm_.resize(0);
  }
  precompute();
}

DenseMatrix PerturbedSolver::solve_added(const DenseMatrix& b) const {
  if (b.cols() == 0 || uf_.n_added == 0) return DenseMatrix::Zero(b.rows(), b.cols());
  DenseMatrix x = Eigen::PermutationWrapper<Eigen::VectorXi>(A_pp_perm_) * b;
  A_pp_lu_.triangularView<Eigen::UnitLower>().solveInPlace(x);
  A_pp_lu_.triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

DenseMatrix PerturbedSolver::apply_block_inverse(const DenseMatrix& b) const {
  if (b.rows() != size()) throw std::invalid_argument("apply_block_inverse: dimension mismatch");
  DenseMatrix x(b.rows(), b.cols());
  x.topRows(uf_.n_original) = apply_inverse(*hbs_, DenseMatrix(b.topRows(uf_.n_original)));
  if (uf_.n_added > 0) x.bottomRows(uf_.n_added) = solve_added(b.bottomRows(uf_.n_added));
  return x;
}

void PerturbedSolver::precompute() {
  const Index k = uf_.rank();
  ainv_l_.resize(size(), k);
  ainv_l_.setZero();
  // The pk columns of L live on the added rows only and the rest on the
  // original rows only, so each group needs just one of the two inverses.
  const Index pk0 = uf_.kc.rank() + uf_.B_cc.cols(), pk1 = pk0 + uf_.pk.rank();
  constexpr Index kChunk = 256;
  for (Index c0 = 0; c0 < k; c0 += kChunk) {
    const Index nc = std::min(kChunk, k - c0);
    const DenseMatrix Lc = L_columns(uf_, c0, nc);
    for (Index j = 0; j < nc;) {
      const bool added = c0 + j >= pk0 && c0 + j < pk1;
      Index e = j;
      while (e < nc && ((c0 + e >= pk0 && c0 + e < pk1) == added)) ++e;
      if (added) {
        ainv_l_.block(uf_.n_original, c0 + j, uf_.n_added, e - j) =
            solve_added(Lc.block(uf_.n_original, j, uf_.n_added, e - j));
      } else {
        ainv_l_.block(0, c0 + j, uf_.n_original, e - j) =
            apply_inverse(*hbs_, DenseMatrix(Lc.block(0, j, uf_.n_original, e - j)));
      }
      j = e;
    }
  }
  if (k == 0) {
    cap_inv_.resize(0, 0);
    cap_cond_ = 1.0;
    return;
  }
  // Rescaling column j of L by d_j and row j of R by 1/d_j leaves Q alone
  // but turns the capacitance matrix into D^-1 C D. Equal column and row
  // norms keep that similar matrix well conditioned.
  const Eigen::VectorXd d = balance_scaling(uf_);
  DenseMatrix cap = d.cwiseInverse().asDiagonal() * uf_.apply_R(ainv_l_) * d.asDiagonal();
  cap.diagonal().array() += 1.0;
  Eigen::PartialPivLU<DenseMatrix> lu(cap);
  const double rc = lu.rcond();
  if (!(rc > 1e-14) || !cap.allFinite()) {
    throw SingularCapacitanceError("capacitance matrix is singular (rcond " +
                                   std::to_string(rc) + ")");
  }
  cap_cond_ = 1.0 / rc;
  cap_inv_ = d.asDiagonal() * lu.inverse() * d.cwiseInverse().asDiagonal();
}

Eigen::VectorXd PerturbedSolver::solve(const Eigen::VectorXd& f_ext) const {
  if (f_ext.size() != size()) throw std::invalid_argument("solve: dimension mismatch");
  const DenseMatrix y = apply_block_inverse(DenseMatrix(f_ext));
  if (rank() == 0) return y.col(0);
  const Eigen::VectorXd t = cap_inv_ * uf_.apply_R(y).col(0);
  Eigen::VectorXd x = y.col(0);
  x.noalias() -= ainv_l_ * t;
  return x;
}

PerturbedSolution PerturbedSolver::solve_split(const Eigen::VectorXd& f_ext) const {
  PerturbedSolution s;
  s.extended = solve(f_ext);
  s.sigma_k.resize(static_cast<Index>(uf_.keep.size()));
  for (size_t i = 0; i < uf_.keep.size(); ++i) s.sigma_k[static_cast<Index>(i)] = s.extended[uf_.keep[i]];
  s.sigma_c.resize(static_cast<Index>(uf_.cut.size()));
  for (size_t i = 0; i < uf_.cut.size(); ++i) s.sigma_c[static_cast<Index>(i)] = s.extended[uf_.cut[i]];
  s.sigma_p = s.extended.tail(uf_.n_added);
  return s;
}

PerturbedSolver build_perturbed_solver(std::shared_ptr<const HbsSolver> original,
                                       const DenseMatrix& A_pp, UpdateFactors uf) {
  return PerturbedSolver(std::move(original), A_pp, std::move(uf));
}

PerturbedSolution solve_perturbed(const PerturbedSolver& ps, const Eigen::VectorXd& f_ext) {
  return ps.solve_split(f_ext);
}

}  // namespace pertsolve
