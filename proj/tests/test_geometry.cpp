#include "pertsolve/geometry.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

using namespace pertsolve;

namespace {

void check_partition(const PerturbedGeometry& pg) {
  IndexList all = pg.keep;
  all.insert(all.end(), pg.cut.begin(), pg.cut.end());
  std::sort(all.begin(), all.end());
  IndexList expect(static_cast<size_t>(pg.n_original()));
  std::iota(expect.begin(), expect.end(), Index{0});
  CHECK(all == expect);
  CHECK(std::is_sorted(pg.keep.begin(), pg.keep.end()));
}

void check_normals(const Discretization& d) {
  for (Index i = 0; i < d.size(); ++i) {
    CHECK(std::abs(d.normal(i).norm() - 1.0) <= 1e-14);
    CHECK(d.weights[i] > 0.0);
  }
}

}  // namespace

TEST_CASE("trapezoid circle: equal weights, unit curvature, exact perimeter") {
  const Discretization d = discretize_trapezoid(circle(1.0), 100);
  REQUIRE(d.size() == 100);
  for (Index i = 0; i < d.size(); ++i) {
    CHECK(d.weights[i] == doctest::Approx(kTwoPi / 100).epsilon(1e-15));
    CHECK(d.curvatures[i] == doctest::Approx(1.0).epsilon(1e-14));
    // Outward normal of the unit circle is the position itself.
    CHECK((d.normal(i) - d.node(i)).norm() <= 1e-14);
  }
  CHECK(std::abs(d.perimeter() - kTwoPi) <= 1e-12 * kTwoPi);
  check_normals(d);
  CHECK(d.signed_area() == doctest::Approx(kTwoPi / 2).epsilon(1e-12));
}

TEST_CASE("trapezoid star perimeter against adaptive arclength") {
  // r = 1 + 0.3 cos 5t; arclength by 30-digit adaptive quadrature.
  constexpr double kStarLength = 9.01720350051514322723949291718;
  const Discretization d = discretize_trapezoid(star(0.3, 5), 800);
  CHECK(std::abs(d.perimeter() - kStarLength) <= 1e-10 * kStarLength);
  check_normals(d);
  CHECK(d.signed_area() > 0.0);
}

TEST_CASE("trapezoid perimeter error collapses under doubling") {
  constexpr double kStarLength = 9.01720350051514322723949291718;
  const Curve c = star(0.3, 5);
  double prev = std::abs(discretize_trapezoid(c, 32).perimeter() - kStarLength);
  for (Index n : {64, 128}) {
    const double err = std::abs(discretize_trapezoid(c, n).perimeter() - kStarLength);
    if (prev < 1e-13) break;
    CHECK(err * 10 < prev);
    prev = err;
  }
}

TEST_CASE("trapezoid rejects open curves and tiny N") {
  CHECK_THROWS_AS(discretize_trapezoid(circle(1.0), 8), std::invalid_argument);
  CHECK_THROWS_AS(discretize_trapezoid(circle(1.0).segment(0.0, 1.0), 32),
                  std::invalid_argument);
}

TEST_CASE("panel circle perimeter and refinement additivity") {
  const Curve c = circle(1.0);
  std::vector<double> br = uniform_breaks(0.0, kTwoPi, 10);
  const Discretization d = discretize_panels(c, br, 16);
  CHECK(d.size() == 160);
  CHECK(std::abs(d.perimeter() - kTwoPi) <= 1e-13 * kTwoPi);
  check_normals(d);

  br.insert(br.begin() + 4, 0.5 * (br[3] + br[4]));
  const Discretization r = discretize_panels(c, br, 16);
  CHECK(r.size() == d.size() + 16);
  CHECK(std::abs(r.perimeter() - d.perimeter()) <= 1e-13 * kTwoPi);
}

TEST_CASE("panel nodes are the affine image of the Gauss-Legendre table") {
  // 16-point Gauss-Legendre: first node and weight from the standard table.
  constexpr double x0 = -0.9894009349916499;
  constexpr double w0 = 0.027152459411754037;
  Eigen::VectorXd x, w;
  gauss_legendre(16, x, w);
  CHECK(x[0] == doctest::Approx(x0).epsilon(1e-15));
  CHECK(w[0] == doctest::Approx(w0).epsilon(1e-14));
  CHECK(w.sum() == doctest::Approx(2.0).epsilon(1e-15));

  BumpShape shape;
  shape.theta = 0.6;
  shape.center_angle = 1.0;
  const Curve c = circle_with_bump(shape);
  const std::vector<double> br = uniform_breaks(0.0, kTwoPi, 12);
  const Discretization d = discretize_panels(c, br, 16);
  for (size_t p = 0; p + 1 < br.size(); ++p) {
    const double a = br[p], b = br[p + 1];
    for (int j = 0; j < 16; ++j) {
      const Index i = static_cast<Index>(p) * 16 + j;
      const double t = 0.5 * (a + b) + 0.5 * (b - a) * x[j];
      CHECK(d.params[i] == doctest::Approx(t).epsilon(1e-15));
      CHECK((d.node(i) - c.position(t)).norm() <= 1e-14);
      CHECK(d.weights[i] == doctest::Approx(0.5 * (b - a) * w[j] * c.speed(t)).epsilon(1e-14));
    }
  }
}

TEST_CASE("panel discretization rejects bad breakpoints") {
  const Curve c = circle(1.0);
  CHECK_THROWS_AS(discretize_panels(c, {}, 16), std::invalid_argument);
  CHECK_THROWS_AS(discretize_panels(c, {0.0, 2.0, 1.0, kTwoPi}, 16), std::invalid_argument);
  CHECK_THROWS_AS(discretize_panels(c, uniform_breaks(0.0, kTwoPi, 4), 3), std::invalid_argument);
}

TEST_CASE("identity perturbation") {
  const Discretization d = discretize_trapezoid(circle(1.0), 64);
  const PerturbedGeometry pg = make_identity_perturbation(d);
  CHECK(pg.n_cut() == 0);
  CHECK(pg.n_added() == 0);
  CHECK(pg.n_extended() == 64);
  check_partition(pg);
  const Discretization p = pg.perturbed();
  REQUIRE(p.size() == d.size());
  CHECK((p.nodes - d.nodes).norm() == 0.0);
}

TEST_CASE("circle cut of angle pi/8 removes the nodes strictly inside the arc") {
  const Index n = 800;
  const double ta = 0.1, tb = 0.1 + kTwoPi / 16;
  BumpShape shape;
  shape.theta = tb - ta;
  shape.center_angle = 0.5 * (ta + tb);
  const Curve orig = circle(1.0);
  const PerturbedGeometry pg =
      make_perturbation(discretize_trapezoid(orig, n), orig, {ta, tb},
                        circle_with_bump(shape), TrapezoidGrid{kTwoPi / n});
  // Grid nodes 2 pi k / 800 inside (0.1, 0.4927): k = 13..62.
  CHECK(pg.n_cut() == 50);
  CHECK(pg.cut.front() == 13);
  CHECK(pg.cut.back() == 62);
  check_partition(pg);
  check_normals(pg.added);
}

TEST_CASE("make_perturbation rejects empty cuts and mismatched pieces") {
  const Curve orig = circle(1.0);
  const Discretization d = discretize_trapezoid(orig, 200);
  // Arc narrower than one grid step: no node inside.
  CHECK_THROWS_AS(make_perturbation(d, orig, {0.001, 0.002}, orig, TrapezoidGrid{0.0005}),
                  std::invalid_argument);
  // A radius-2 circle does not meet the unit circle at the arc ends.
  CHECK_THROWS_AS(make_perturbation(d, orig, {0.1, 0.5}, circle(2.0), PanelGrid{2, 16}),
                  std::invalid_argument);
}

TEST_CASE("bump problem keeps N_p = N_c = 199 across N_o") {
  for (Index n : {2000, 4000, 8000, 16000}) {
    const BumpProblem bp = circle_with_bump_problem(n, 200);
    CHECK(bp.geometry.n_cut() == 199);
    CHECK(bp.geometry.n_added() == 199);
    check_partition(bp.geometry);
  }
}

TEST_CASE("bump flattens onto the circle as theta shrinks") {
  double prev = 1.0;
  for (double theta : {0.4, 0.1, 0.025}) {
    BumpShape s;
    s.theta = theta;
    const Curve c = circle_with_bump(s);
    double dev = 0.0;
    for (int i = 0; i < 200; ++i) {
      const double t = kTwoPi * i / 200;
      dev = std::max(dev, std::abs(c.position(t).norm() - 1.0));
    }
    CHECK(dev < prev);
    prev = dev;
  }
  CHECK(prev <= 0.25 * 0.025 + 1e-15);
  BumpShape bad;
  bad.theta = 2.0;
  CHECK_THROWS_AS(circle_with_bump(bad), std::invalid_argument);
}

TEST_CASE("star split for the rank table") {
  const PerturbedGeometry pg = star_cut(80, 5, 0.4, 5, 0.0);
  CHECK(pg.n_keep() == 1200);
  CHECK(pg.n_cut() == 80);
  CHECK(pg.n_added() == 0);
  check_partition(pg);
}

TEST_CASE("nose problem lands N_p in the 700..900 band") {
  for (Index panels : {125, 250, 500}) {
    const NoseProblem np = rounded_square_with_nose_problem(panels, 8, 50);
    CHECK(np.geometry.n_added() >= 700);
    CHECK(np.geometry.n_added() <= 900);
    CHECK(np.geometry.n_cut() == 8 * 16);
    check_partition(np.geometry);
    check_normals(np.geometry.added);
    CHECK(np.geometry.perturbed().signed_area() > np.geometry.original.signed_area());
  }
}

TEST_CASE("star with refined panels") {
  const StarRefineProblem sp = star_with_refined_panels(200, 3, 4);
  CHECK(sp.geometry.n_original() == 3200);
  CHECK(sp.geometry.n_cut() == 48);
  CHECK(sp.geometry.n_added() == 192);
  check_partition(sp.geometry);
  // Same curve, finer grid: the perimeter is unchanged.
  CHECK(sp.geometry.perturbed().perimeter() ==
        doctest::Approx(sp.geometry.original.perimeter()).epsilon(1e-12));
}

TEST_CASE("geometry config and csv export") {
  std::istringstream in("geometry = star\n# comment\nn = 128\na = 0.3\narms = 5\n");
  const Discretization d = discretization_from_config(parse_config(in));
  CHECK(d.size() == 128);

  std::istringstream bad("geometry = circle\nn 64\n");
  try {
    parse_config(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line == 2);
  }

  std::ostringstream os;
  write_csv(os, discretize_trapezoid(circle(1.0), 16));
  std::istringstream lines(os.str());
  std::string header;
  std::getline(lines, header);
  CHECK(header == "x,y,nx,ny,w,kappa");
  int count = 0;
  for (std::string l; std::getline(lines, l);) ++count;
  CHECK(count == 16);
}
