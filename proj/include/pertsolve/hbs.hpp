#ifndef PERTSOLVE_HBS_HPP
#define PERTSOLVE_HBS_HPP

#include "pertsolve/lowrank.hpp"

#include <iosfwd>
#include <string>

namespace pertsolve {

/// Fully populated binary tree over the contiguous index range [0, N).
///
/// Nodes are stored breadth-first with the root at position 0 (add one for
/// the usual 1-based box numbering). Every leaf sits on level `levels`.
struct IndexTree {
  struct Node {
    Index begin = 0;
    Index end = 0;
    int parent = -1;
    int left = -1;
    int right = -1;
    int level = 0;

    bool is_leaf() const { return left < 0; }
    Index size() const { return end - begin; }
  };

  std::vector<Node> nodes;
  Index n_points = 0;
  Index leaf_cap = 0;
  int levels = 0;

  int size() const { return static_cast<int>(nodes.size()); }
  const Node& operator[](int i) const { return nodes[static_cast<size_t>(i)]; }
  IndexList indices(int node) const;
  /// Node ids of one level, left to right.
  std::vector<int> level_nodes(int level) const;
};

/// Depth L = ceil(log2(N / leaf_cap)); each split gives the left child
/// floor(n/2) indices.
IndexTree build_tree(Index n, Index leaf_cap);

struct HbsOptions {
  Index leaf_cap = 64;
  ProxyOptions proxy;
};

struct HbsNode {
  IndexList rskel;  // global indices, subset of the box
  IndexList cskel;
  // Leaf: |box| x k. Non-leaf: (k_left + k_right) x k. Empty at the root.
  DenseMatrix U;
  DenseMatrix V;
  DenseMatrix D;    // leaves only: A(box, box)
  DenseMatrix B12;  // non-leaves: A(rskel left, cskel right)
  DenseMatrix B21;  // non-leaves: A(rskel right, cskel left)
  Point proxy_center = Point::Zero();
  double proxy_radius = 0.0;
  bool full_rank = false;  // no compression achieved at this node

  Index rank() const { return static_cast<Index>(rskel.size()); }
};

/// Telescoping factorization of the Nystrom matrix on one discretization.
struct HbsRep {
  IndexTree tree;
  std::vector<HbsNode> nodes;
  double eps = 0.0;
  int full_rank_nodes = 0;

  Index size() const { return tree.n_points; }
  const HbsNode& node(int i) const { return nodes[static_cast<size_t>(i)]; }
  /// Largest skeleton size over all compressed nodes.
  Index max_rank() const;
  /// Number of stored matrix entries (U, V, D, B).
  Index stored_entries() const;
};

HbsRep compress_hbs(const Discretization& d, double eps, const HbsOptions& opt = {});

/// y = A_hbs x, column by column.
DenseMatrix apply_hbs(const HbsRep& rep, const DenseMatrix& x);
Eigen::VectorXd apply_hbs(const HbsRep& rep, const Eigen::VectorXd& x);

/// Dense matrix represented by `rep`. Intended for tests.
DenseMatrix reconstruct_dense(const HbsRep& rep);

struct NodeFactors {
  const DenseMatrix& U;  // leaf U or non-leaf P
  const DenseMatrix& V;
  const IndexList& rskel;
  const IndexList& cskel;
  bool leaf;
};
NodeFactors get_node_factors(const HbsRep& rep, int node);

/// Full row basis of a non-root node: blockdiag(U_left, U_right) P, with
/// rows ordered as the node's index range. Same for columns.
DenseMatrix telescoped_U(const HbsRep& rep, int node);
DenseMatrix telescoped_V(const HbsRep& rep, int node);

/// Linear-time inverse of an HBS matrix built by the standard telescoping
/// Woodbury recursion.
struct HbsSolver {
  struct Node {
    DenseMatrix E;   // |rows| x k
    DenseMatrix Ft;  // k x |rows|
    DenseMatrix G;   // |rows| x |rows|
  };
  IndexTree tree;
  std::vector<Node> nodes;

  Index size() const { return tree.n_points; }
  Index stored_entries() const;
};

/// Throws SingularBlockError naming the node if a reduced block is singular.
HbsSolver invert_hbs(const HbsRep& rep);

DenseMatrix apply_inverse(const HbsSolver& solver, const DenseMatrix& b);
Eigen::VectorXd apply_inverse(const HbsSolver& solver, const Eigen::VectorXd& b);

struct SingularBlockError : std::runtime_error {
  SingularBlockError(const std::string& what, int node)
      : std::runtime_error(what), node(node) {}
  int node;
};

/// Binary containers: magic tag, version, tree layout, then per-node blobs
/// with matrices in the kernel binary matrix format.
void save_hbs(std::ostream& os, const HbsRep& rep);
HbsRep load_hbs(std::istream& is);
void save_hbs_solver(std::ostream& os, const HbsSolver& s);
HbsSolver load_hbs_solver(std::istream& is);

namespace io {
void write_index(std::ostream& os, std::int64_t v);
std::int64_t read_index(std::istream& is);
void write_double(std::ostream& os, double v);
double read_double(std::istream& is);
void write_list(std::ostream& os, const IndexList& v);
IndexList read_list(std::istream& is);
void write_tag(std::ostream& os, const char (&tag)[5]);
void expect_tag(std::istream& is, const char (&tag)[5]);
}  // namespace io

}  // namespace pertsolve

#endif  // PERTSOLVE_HBS_HPP
