#ifndef PERTSOLVE_GEOMETRY_HPP
#define PERTSOLVE_GEOMETRY_HPP

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace pertsolve {

using Index = Eigen::Index;
using Point = Eigen::Vector2d;
using IndexList = std::vector<Index>;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// A parametrized plane curve x(t), t in [t_begin, t_end].
///
/// Curves carry analytic first and second derivatives. Normals point to the
/// right of the direction of travel for counterclockwise curves (outward for
/// a positively oriented boundary), and curvature is signed so that a
/// counterclockwise circle of radius R has curvature 1/R.
class Curve {
 public:
  using Map = std::function<Point(double)>;

  Curve(Map position, Map first_derivative, Map second_derivative,
        double t_begin, double t_end, bool closed,
        bool counterclockwise = true);

  /// Curve given in polar form r(t) about `center`, t in [t_begin, t_end].
  static Curve radial(std::function<double(double)> r,
                      std::function<double(double)> dr,
                      std::function<double(double)> ddr, double t_begin,
                      double t_end, bool closed, Point center = Point::Zero());

  Point position(double t) const { return position_(t); }
  Point tangent(double t) const { return first_(t); }
  Point second_derivative(double t) const { return second_(t); }
  Point normal(double t) const;
  double curvature(double t) const;
  double speed(double t) const { return tangent(t).norm(); }

  double t_begin() const { return t_begin_; }
  double t_end() const { return t_end_; }
  double period() const { return t_end_ - t_begin_; }
  bool closed() const { return closed_; }
  bool counterclockwise() const { return ccw_; }

  /// Restriction to [a, b] as an open segment.
  Curve segment(double a, double b) const;

 private:
  Map position_;
  Map first_;
  Map second_;
  double t_begin_;
  double t_end_;
  bool closed_;
  bool ccw_;
};

enum class Scheme { trapezoidal, composite_gauss };

/// Quadrature nodes of a boundary curve. Node data is stored column-wise.
struct Discretization {
  Eigen::Matrix2Xd nodes;
  Eigen::Matrix2Xd normals;
  Eigen::VectorXd weights;
  Eigen::VectorXd curvatures;
  Eigen::VectorXd params;
  Scheme scheme = Scheme::trapezoidal;
  std::vector<double> panel_breaks;

  Index size() const { return weights.size(); }
  Point node(Index i) const { return nodes.col(i); }
  Point normal(Index i) const { return normals.col(i); }

  double perimeter() const { return weights.sum(); }
  /// Signed area from the divergence theorem, (1/2) sum w (x . nu).
  double signed_area() const;
  Discretization subset(const IndexList& idx) const;
  static Discretization concat(const Discretization& a, const Discretization& b);
};

/// N nodes equispaced in the parameter, weights |x'(t)| * period / N.
Discretization discretize_trapezoid(const Curve& curve, Index n);

/// q-point Gauss-Legendre rule on each panel [breaks[i], breaks[i+1]].
Discretization discretize_panels(const Curve& curve,
                                 const std::vector<double>& breaks, int q);

/// Uniform breakpoints over [a, b].
std::vector<double> uniform_breaks(double a, double b, Index panels);

/// Gauss-Legendre nodes and weights on [-1, 1], ascending.
void gauss_legendre(int q, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

/// Parameter interval [t_a, t_b] of the original curve being removed.
struct ParamArc {
  double t_a = 0.0;
  double t_b = 0.0;
};

/// How the new boundary piece is discretized.
struct TrapezoidGrid {
  double spacing = 0.0;  // parameter spacing; nodes at t_a + j*spacing
};
struct PanelGrid {
  Index panels = 1;
  int q = 16;
};
using PieceResolution = std::variant<TrapezoidGrid, PanelGrid>;

struct PerturbedGeometry {
  Discretization original;
  IndexList keep;  // I_k, ascending
  IndexList cut;   // I_c, in curve order (may wrap around index 0)
  Discretization added;

  Index n_original() const { return original.size(); }
  Index n_keep() const { return static_cast<Index>(keep.size()); }
  Index n_cut() const { return static_cast<Index>(cut.size()); }
  Index n_added() const { return added.size(); }
  Index n_extended() const { return n_original() + n_added(); }

  /// Discretization of the perturbed boundary (kept nodes with the new piece
  /// spliced in where the cut was), plus the map from its nodes to positions
  /// in the extended system (original index, or N_o + added index).
  Discretization perturbed(IndexList* extended_index = nullptr) const;
};

/// Identity perturbation: nothing cut, nothing added.
PerturbedGeometry make_identity_perturbation(const Discretization& original);

/// Removes the original nodes whose parameter lies strictly inside `cut` and
/// adds `piece` (defined on [t_a, t_b]) discretized per `resolution`. Piece
/// endpoints must match the original curve at t_a, t_b within
/// glue_tolerance * perimeter.
PerturbedGeometry make_perturbation(const Discretization& original,
                                    const Curve& original_curve,
                                    const ParamArc& cut, const Curve& piece,
                                    const PieceResolution& resolution,
                                    double glue_tolerance = 1e-10);

/// Winding number of `p` with respect to the closed polygon through the nodes.
int winding_number(const Discretization& d, const Point& p);

/// Minimal enclosing circle.
struct Circle {
  Point center = Point::Zero();
  double radius = 0.0;
  bool contains(const Point& p) const {
    return (p - center).norm() <= radius;
  }
};
Circle enclosing_circle(const Eigen::Matrix2Xd& points);
Circle enclosing_circle(const Discretization& d, const IndexList& idx);

/// CSV with columns x,y,nx,ny,w,kappa.
void write_csv(std::ostream& os, const Discretization& d);
void write_csv(const std::string& path, const Discretization& d);

// ---------------------------------------------------------------------------
// Built-in geometries.

Curve circle(double radius);
/// r(t) = 1 + a cos(k t).
Curve star(double a, int arms);
/// Superellipse |x|^p + |y|^p = half_side^p, p even.
Curve rounded_square(double half_side, int exponent);

/// Circle of radius 1 with an outward Gaussian bump on the arc of central
/// angle theta centred at `center_angle`. Bump height is height_ratio*theta.
struct BumpShape {
  double theta = 0.3;
  double center_angle = kTwoPi / 2;
  double height_ratio = 0.25;
  double width_ratio = 0.17;  // Gaussian scale relative to theta/2
};
Curve circle_with_bump(const BumpShape& shape);

/// Rounded square with a smooth nose of height d on its top side. The nose
/// occupies the parameter window of width `window` centred at pi/2; its
/// profile is a difference of tanh ramps of scale window*edge_ratio.
struct NoseShape {
  double height = 0.05;
  double window = 0.08;
  double edge_ratio = 1.0 / 6.0;
  double center_angle = kTwoPi / 4;
  double half_side = 1.0;
  int exponent = 8;
};
Curve rounded_square_with_nose(const NoseShape& shape);
/// Parameter half-width outside which the nose profile is below 1e-16.
double nose_support_halfwidth(const NoseShape& shape);

/// Canonical perturbation factories used by the experiments.
struct BumpProblem {
  Curve original_curve;
  Curve perturbed_curve;
  PerturbedGeometry geometry;
};
/// Circle (trapezoidal, n_original nodes) with a bump spanning `arc_steps`
/// grid steps; N_c = N_p = arc_steps - 1.
BumpProblem circle_with_bump_problem(Index n_original, Index arc_steps,
                                     double height_ratio = 0.25);

struct NoseProblem {
  Curve original_curve;
  Curve perturbed_curve;
  PerturbedGeometry geometry;
  NoseShape shape;
};
/// Rounded square with `panels` 16-point panels. The cut spans `cut_panels`
/// panels centred on the top side; a nose of width cut/7.4 and height
/// height_ratio * width sits inside it, and the added piece uses
/// `added_panels` panels over the cut interval.
NoseProblem rounded_square_with_nose_problem(Index panels, Index cut_panels,
                                             Index added_panels,
                                             double height_ratio = 1.0);

struct StarRefineProblem {
  Curve curve;
  PerturbedGeometry geometry;
};
/// Star with `panels` 16-point panels; `cut_panels` consecutive panels are
/// replaced by cut_panels * refine panels over the same parameter interval.
StarRefineProblem star_with_refined_panels(Index panels, Index cut_panels,
                                           Index refine, double a = 0.3,
                                           int arms = 5,
                                           Index first_cut_panel = -1);

/// Star split for rank studies: `panels` panels total with `cut_panels`
/// consecutive cut panels centred at angle `center`. Nothing is added.
PerturbedGeometry star_cut(Index panels, Index cut_panels, double a, int arms,
                           double center);

// ---------------------------------------------------------------------------
// Plain-text key = value configuration.

struct KeyValueConfig {
  std::map<std::string, std::string> values;
  std::map<std::string, int> lines;

  bool has(const std::string& key) const { return values.count(key) != 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
};

/// Parses `key = value` lines; '#' starts a comment. Throws ConfigError with
/// the offending line number.
KeyValueConfig parse_config(std::istream& is);
KeyValueConfig parse_config_file(const std::string& path);

struct ConfigError : std::runtime_error {
  ConfigError(const std::string& msg, int line)
      : std::runtime_error(msg), line(line) {}
  int line;
};

/// Builds a discretization from a geometry config. Keys: geometry (circle,
/// star, rounded_square, circle_with_bump, square_with_nose), n, plus
/// shape parameters (radius, a, arms, half_side, exponent, theta, height).
Discretization discretization_from_config(const KeyValueConfig& cfg);

}  // namespace pertsolve

#endif  // PERTSOLVE_GEOMETRY_HPP
