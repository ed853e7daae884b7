#include "pertsolve/kernel.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <unordered_map>

namespace pertsolve {

double fundamental_solution(const Point& x, const Point& y) {
  const double r = (x - y).norm();
  if (r == 0.0) throw std::domain_error("fundamental_solution: coincident points");
  return -kInvTwoPi * std::log(r);
}

double double_layer_kernel(const Point& x, const Point& y, const Point& nu_y) {
  const Point d = x - y;
  const double r2 = d.squaredNorm();
  if (r2 == 0.0) throw std::domain_error("double_layer_kernel: coincident points");
  return kInvTwoPi * d.dot(nu_y) / r2;
}

double diagonal_limit(double curvature, double weight) {
  return -weight * curvature * (0.5 * kInvTwoPi);
}

NystromMatrix::NystromMatrix(const Discretization& d) : d_(d) {}

double NystromMatrix::operator()(Index i, Index j) const {
  if (i == j) return -0.5 + diagonal_limit(d_.curvatures[i], d_.weights[i]);
  return d_.weights[j] *
         double_layer_kernel(d_.nodes.col(i), d_.nodes.col(j), d_.normals.col(j));
}

namespace {

// Fills out(:, c) = w_j D(t_i, y_j, nu_j) for gathered target coordinates.
// Returns true if some target coincides with the source.
bool fill_column(const Eigen::ArrayXd& tx, const Eigen::ArrayXd& ty,
                 const Discretization& d, Index j, double* out) {
  const double yx = d.nodes(0, j), yy = d.nodes(1, j);
  const double nx = d.normals(0, j), ny = d.normals(1, j);
  const double s = d.weights[j] * kInvTwoPi;
  bool hit = false;
  const Index m = tx.size();
  for (Index i = 0; i < m; ++i) {
    const double dx = tx[i] - yx, dy = ty[i] - yy;
    const double r2 = dx * dx + dy * dy;
    hit |= (r2 == 0.0);
    out[i] = s * (dx * nx + dy * ny) / r2;
  }
  return hit;
}

}  // namespace

DenseMatrix NystromMatrix::block(const IndexList& rows, const IndexList& cols) const {
  const Index m = static_cast<Index>(rows.size());
  const Index n = static_cast<Index>(cols.size());
  DenseMatrix out(m, n);
  if (m == 0 || n == 0) return out;
  Eigen::ArrayXd tx(m), ty(m);
  for (Index i = 0; i < m; ++i) {
    tx[i] = d_.nodes(0, rows[i]);
    ty[i] = d_.nodes(1, rows[i]);
  }
  std::unordered_map<Index, Index> rowpos;
  for (Index j = 0; j < n; ++j) {
    if (!fill_column(tx, ty, d_, cols[j], out.col(j).data())) continue;
    if (rowpos.empty()) {
      for (Index i = 0; i < m; ++i) rowpos.emplace(rows[i], i);
    }
    for (Index i = 0; i < m; ++i) {
      if (tx[i] == d_.nodes(0, cols[j]) && ty[i] == d_.nodes(1, cols[j]) &&
          rows[i] != cols[j]) {
        throw std::domain_error("NystromMatrix: distinct nodes coincide");
      }
    }
    auto it = rowpos.find(cols[j]);
    if (it != rowpos.end()) out(it->second, j) = (*this)(cols[j], cols[j]);
  }
  return out;
}

DenseMatrix NystromMatrix::block(Index row0, Index nrows, Index col0,
                                 Index ncols) const {
  IndexList r(static_cast<size_t>(nrows)), c(static_cast<size_t>(ncols));
  for (Index i = 0; i < nrows; ++i) r[i] = row0 + i;
  for (Index j = 0; j < ncols; ++j) c[j] = col0 + j;
  return block(r, c);
}

DenseMatrix NystromMatrix::dense() const { return block(0, size(), 0, size()); }

DenseMatrix assemble_dense(const Discretization& src, const Discretization& trg,
                           bool same_curve) {
  if (same_curve) {
    if (src.size() != trg.size() || src.nodes != trg.nodes) {
      throw std::invalid_argument("assemble_dense: same_curve needs identical nodes");
    }
    return NystromMatrix(src).dense();
  }
  IndexList cols(static_cast<size_t>(src.size()));
  for (Index j = 0; j < src.size(); ++j) cols[j] = j;
  DenseMatrix m = double_layer_matrix(trg.nodes, src, cols);
  if (!m.allFinite()) {
    throw std::domain_error("assemble_dense: source and target nodes coincide");
  }
  return m;
}

DenseMatrix single_layer_matrix(const Eigen::Matrix2Xd& targets,
                                const Eigen::Matrix2Xd& sources) {
  const Index m = targets.cols(), n = sources.cols();
  DenseMatrix out(m, n);
  for (Index j = 0; j < n; ++j) {
    const double zx = sources(0, j), zy = sources(1, j);
    for (Index i = 0; i < m; ++i) {
      const double dx = targets(0, i) - zx, dy = targets(1, i) - zy;
      out(i, j) = -0.5 * kInvTwoPi * std::log(dx * dx + dy * dy);
    }
  }
  return out;
}

DenseMatrix double_layer_matrix(const Eigen::Matrix2Xd& targets,
                                const Discretization& src, const IndexList& cols) {
  const Index m = targets.cols(), n = static_cast<Index>(cols.size());
  DenseMatrix out(m, n);
  const Eigen::ArrayXd tx = targets.row(0).transpose().array();
  const Eigen::ArrayXd ty = targets.row(1).transpose().array();
  for (Index j = 0; j < n; ++j) fill_column(tx, ty, src, cols[j], out.col(j).data());
  return out;
}

PotentialResult eval_potential(const Discretization& src,
                               const Eigen::VectorXd& sigma,
                               const Eigen::Matrix2Xd& targets) {
  if (sigma.size() != src.size()) {
    throw std::invalid_argument("eval_potential: density length mismatch");
  }
  PotentialResult res;
  res.values = Eigen::VectorXd::Zero(targets.cols());
  for (Index t = 0; t < targets.cols(); ++t) {
    const Point x = targets.col(t);
    double acc = 0.0, best = std::numeric_limits<double>::infinity();
    Index nearest = 0;
    for (Index j = 0; j < src.size(); ++j) {
      const Point dv = x - src.nodes.col(j);
      const double r2 = dv.squaredNorm();
      if (r2 < best) {
        best = r2;
        nearest = j;
      }
      acc += src.weights[j] * sigma[j] * dv.dot(src.normals.col(j)) / r2;
    }
    res.values[t] = kInvTwoPi * acc;
    if (std::sqrt(best) < 5.0 * src.weights[nearest]) res.near_boundary = true;
  }
  return res;
}

Eigen::VectorXd exact_solution(const ChargeSet& charges,
                               const Eigen::Matrix2Xd& targets) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(targets.cols());
  for (Index t = 0; t < targets.cols(); ++t) {
    for (Index j = 0; j < charges.locations.cols(); ++j) {
      u[t] += charges.strengths[j] *
              fundamental_solution(targets.col(t), charges.locations.col(j));
    }
  }
  return u;
}

TestProblem make_test_problem(const Discretization& d, std::uint64_t seed,
                              int count) {
  const Circle bound = enclosing_circle(d.nodes);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  std::uniform_real_distribution<double> strength(-1.0, 1.0);
  TestProblem tp;
  tp.charges.locations.resize(2, count);
  tp.charges.strengths.resize(count);
  tp.targets.resize(2, count);
  for (int j = 0; j < count; ++j) {
    const double a = angle(rng);
    tp.charges.locations.col(j) =
        bound.center + 2.0 * bound.radius * Point(std::cos(a), std::sin(a));
    tp.charges.strengths[j] = strength(rng);
  }
  for (int j = 0; j < count; ++j) {
    const double a = angle(rng);
    tp.targets.col(j) =
        bound.center + 0.5 * bound.radius * Point(std::cos(a), std::sin(a));
  }
  for (int j = 0; j < count; ++j) {
    if (winding_number(d, tp.charges.locations.col(j)) != 0) {
      throw std::runtime_error("make_test_problem: charge inside the domain");
    }
    if (winding_number(d, tp.targets.col(j)) != 1) {
      throw std::runtime_error("make_test_problem: target outside the domain");
    }
  }
  return tp;
}

Eigen::VectorXd boundary_data(const ChargeSet& charges, const Discretization& d) {
  return exact_solution(charges, d.nodes);
}

void write_matrix_binary(std::ostream& os, const DenseMatrix& m) {
  const std::int64_t dims[2] = {static_cast<std::int64_t>(m.rows()),
                                static_cast<std::int64_t>(m.cols())};
  os.write(reinterpret_cast<const char*>(dims), sizeof dims);
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!os) throw std::runtime_error("write_matrix_binary: write failed");
}

DenseMatrix read_matrix_binary(std::istream& is) {
  std::int64_t dims[2];
  is.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!is || dims[0] < 0 || dims[1] < 0) {
    throw std::runtime_error("read_matrix_binary: bad header");
  }
  DenseMatrix m(dims[0], dims[1]);
  is.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!is) throw std::runtime_error("read_matrix_binary: truncated payload");
  return m;
}

void write_matrix_binary(const std::string& path, const DenseMatrix& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_matrix_binary(os, m);
}

DenseMatrix read_matrix_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  return read_matrix_binary(is);
}

void write_matrix_csv(std::ostream& os, const DenseMatrix& m) {
  os.precision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << m(i, j);
    }
    os << '\n';
  }
}

}  // namespace pertsolve
