#include "pertsolve/lowrank.hpp"
#include "pertsolve/oracle.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

using namespace pertsolve;
using namespace pertsolve::testing;

namespace {

DenseMatrix reconstruct(const IdFactor& f, const DenseMatrix& W) {
  DenseMatrix S(f.rank(), W.cols());
  for (Index i = 0; i < f.rank(); ++i) S.row(i) = W.row(f.J[static_cast<size_t>(i)]);
  return f.P * S;
}

void check_id_shape(const IdFactor& f, Index m) {
  CHECK(f.P.rows() == m);
  CHECK(f.P.cols() == f.rank());
  CHECK(f.rank() <= m);
  std::set<Index> seen(f.J.begin(), f.J.end());
  CHECK(seen.size() == f.J.size());
  for (Index i = 0; i < f.rank(); ++i) {
    const Index r = f.J[static_cast<size_t>(i)];
    for (Index j = 0; j < f.rank(); ++j) CHECK(f.P(r, j) == (i == j ? 1.0 : 0.0));
  }
}

IndexList range(Index a, Index b) {
  IndexList r;
  for (Index i = a; i < b; ++i) r.push_back(i);
  return r;
}

}  // namespace

TEST_CASE("ID of the zero matrix has rank 0") {
  const IdFactor f = interpolatory_decomposition(DenseMatrix::Zero(30, 20), 1e-10);
  CHECK(f.rank() == 0);
  CHECK(f.P.rows() == 30);
}

TEST_CASE("ID of an outer product has rank 1 and is exact") {
  std::mt19937_64 rng(1);
  const Eigen::VectorXd u = Eigen::VectorXd::Random(40), v = Eigen::VectorXd::Random(25);
  const DenseMatrix W = u * v.transpose();
  const IdFactor f = interpolatory_decomposition(W, 1e-10);
  REQUIRE(f.rank() == 1);
  check_id_shape(f, 40);
  CHECK((reconstruct(f, W) - W).norm() <= 1e-13 * W.norm());
}

TEST_CASE("ID rank tracks the SVD on geometric spectra") {
  std::mt19937_64 rng(2);
  for (auto [m, n] : {std::pair<Index, Index>{80, 60}, {60, 80}, {120, 120}}) {
    const DenseMatrix W = geometric_spectrum(m, n, 1e-15, rng);
    const IdFactor f = interpolatory_decomposition(W, 1e-10);
    check_id_shape(f, m);
    const Index svd = svd_rank(W, 1e-10, true);
    CHECK(std::abs(f.rank() - svd) <= 2);
    CHECK(relative_frobenius(reconstruct(f, W), W) <= 10 * 1e-10);
  }
}

TEST_CASE("ID contract on 100 randomized structured matrices") {
  std::mt19937_64 rng(20240601);
  const double eps = 1e-10;
  int worst_rank_gap = 0;
  double worst_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const DenseMatrix W = structured_matrix(i, rng);
    const IdFactor f = interpolatory_decomposition(W, eps);
    const double err = relative_frobenius(reconstruct(f, W), W);
    const int gap = static_cast<int>(std::abs(f.rank() - svd_rank(W, eps, true)));
    worst_err = std::max(worst_err, err);
    worst_rank_gap = std::max(worst_rank_gap, gap);
    CHECK(err <= 10 * eps);
    CHECK(gap <= 2);
  }
  MESSAGE("worst relative error " << worst_err << ", worst rank gap " << worst_rank_gap);
}

TEST_CASE("fixed-rank ID and the transposed entry point agree") {
  std::mt19937_64 rng(4);
  const DenseMatrix W = geometric_spectrum(50, 40, 1e-12, rng);
  const IdFactor a = interpolatory_decomposition_rank(W, 7);
  CHECK(a.rank() == 7);
  check_id_shape(a, 50);
  const IdFactor b = interpolatory_decomposition_transposed(W.transpose(), 0.5, 7);
  CHECK(a.J == b.J);
  CHECK((a.P - b.P).norm() <= 1e-14 * a.P.norm());
  CHECK(interpolatory_decomposition_rank(W, 500).rank() == 40);
}

TEST_CASE("ID rank grows as eps shrinks") {
  std::mt19937_64 rng(6);
  const DenseMatrix W = separated_clusters(80, 90, 2.0, rng);
  Index prev = 0;
  for (double eps : {1e-4, 1e-7, 1e-10, 1e-13}) {
    const Index k = interpolatory_decomposition(W, eps).rank();
    CHECK(k >= prev);
    prev = k;
  }
}

TEST_CASE("proxy circle of a quarter-pi arc") {
  const int m = 41;
  Eigen::Matrix2Xd arc(2, m);
  for (int i = 0; i < m; ++i) {
    const double t = -kTwoPi / 16 + (kTwoPi / 8) * i / (m - 1);
    arc.col(i) = Point(std::cos(t), std::sin(t));
  }
  const ProxySurface s = make_proxy(arc);
  // The chord is a diameter of the minimal enclosing circle.
  CHECK(s.radius == doctest::Approx(1.5 * std::sin(kTwoPi / 16)).epsilon(1e-12));
  CHECK(s.size() == 75);
  CHECK(std::abs(s.center.y()) <= 1e-14);
  for (Index p = 0; p < s.size(); ++p) {
    CHECK((s.points.col(p) - s.center).norm() == doctest::Approx(s.radius).epsilon(1e-14));
  }
  CHECK(s.encloses(s.points.col(0)));
}

TEST_CASE("empty complement gives rank 0") {
  const Discretization d = discretize_trapezoid(circle(1.0), 200);
  const IdFactor f = compress_block_proxy(range(0, 20), d, {}, 1e-10);
  CHECK(f.rank() == 0);
  CHECK(f.P.rows() == 20);
}

TEST_CASE("circle arc block: proxy rank near the SVD rank") {
  const Index n = 2000;
  const Discretization d = discretize_trapezoid(circle(1.0), n);
  const IndexList tau = range(100, 150);
  IndexList comp = range(0, 100);
  for (Index i = 150; i < n; ++i) comp.push_back(i);
  const DenseMatrix W = NystromMatrix(d).block(tau, comp);
  const IdFactor f = compress_block_proxy(tau, d, comp, 1e-10);
  check_id_shape(f, 50);
  CHECK(std::abs(f.rank() - svd_rank(W, 1e-10)) <= 3);
  CHECK(relative_frobenius(reconstruct(f, W), W) <= 10 * 1e-10);
}

TEST_CASE("proxy skeletons meet the block contract on random boxes") {
  std::mt19937_64 rng(9);
  const Discretization star800 = discretize_trapezoid(star(0.3, 5), 800);
  const Discretization square =
      discretize_panels(rounded_square(1.0, 8), uniform_breaks(0.0, kTwoPi, 50), 16);
  for (const Discretization* d : {&star800, &square}) {
    std::uniform_int_distribution<Index> start(0, d->size() - 65);
    for (int trial = 0; trial < 4; ++trial) {
      const Index a = start(rng);
      const IndexList tau = range(a, a + 64);
      IndexList comp = range(0, a);
      for (Index i = a + 64; i < d->size(); ++i) comp.push_back(i);
      const DenseMatrix W = NystromMatrix(*d).block(tau, comp);
      const IdFactor f = compress_block_proxy(tau, *d, comp, 1e-10);
      CHECK(relative_frobenius(reconstruct(f, W), W) <= 10 * 1e-10);
      CHECK(f.rank() < 64);
    }
  }
}

TEST_CASE("far-only sources use the proxy columns alone") {
  const Index n = 1000;
  const Discretization d = discretize_trapezoid(circle(1.0), n);
  const NystromMatrix A(d);
  const ProxyCompressor pc(A, 1e-10);
  const IndexList tau = range(0, 40);
  const ProxySurface proxy = pc.proxy_for(tau);
  // Sources on the far side of the circle.
  const RangeList far = {{300, 700}};
  CHECK(pc.near_count(proxy, far) == 0);
  DenseMatrix work;
  const IdFactor f = pc.compress_rows(tau, proxy, far, -1, &work);
  // Stored transposed: 75 poles plus the constant column.
  CHECK(work.rows() == 76);
  const DenseMatrix W = A.block(tau, range(300, 700));
  CHECK(relative_frobenius(reconstruct(f, W), W) <= 10 * 1e-10);
}

TEST_CASE("column compression mirrors row compression") {
  const Discretization d = discretize_trapezoid(star(0.3, 5), 600);
  const NystromMatrix A(d);
  const ProxyCompressor pc(A, 1e-10);
  const IndexList tau = range(200, 260);
  IndexList comp = range(0, 200);
  for (Index i = 260; i < 600; ++i) comp.push_back(i);
  const IdFactor f = pc.compress_cols(tau, pc.proxy_for(tau), to_ranges(comp));
  // Column ID: A(comp, tau) ~ A(comp, tau[J]) P^T.
  const DenseMatrix W = A.block(comp, tau);
  const DenseMatrix Wt = W.transpose();
  CHECK(relative_frobenius(reconstruct(f, Wt), Wt) <= 10 * 1e-10);
}

TEST_CASE("index ranges and skeleton csv") {
  const RangeList r = to_ranges({0, 1, 2, 5, 6, 9});
  REQUIRE(r.size() == 3);
  CHECK(r[1] == std::pair<Index, Index>{5, 7});
  CHECK(range_count(r) == 6);
  std::ostringstream os;
  write_skeleton_csv(os, {4, 9});
  CHECK(os.str() == "position,index\n0,4\n1,9\n");
}
