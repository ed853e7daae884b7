#include "pertsolve/geometry.hpp"

#include <cmath>

namespace pertsolve {

namespace {

constexpr double kPi = kTwoPi / 2;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

// r(t) = h (cos^p + sin^p)^(-1/p) with derivatives.
struct SuperellipseRadius {
  double h;
  int p;

  void eval(double t, double& r, double& dr, double& ddr) const {
    const double c = std::cos(t), s = std::sin(t);
    const double cp = std::pow(c, p), sp = std::pow(s, p);
    const double f = cp + sp;
    const double f1 = p * (-std::pow(c, p - 1) * s + std::pow(s, p - 1) * c);
    const double f2 =
        p * ((p - 1) * (std::pow(c, p - 2) * s * s + std::pow(s, p - 2) * c * c) -
             cp - sp);
    const double e = -1.0 / p;
    r = h * std::pow(f, e);
    dr = h * e * std::pow(f, e - 1) * f1;
    ddr = h * e * ((e - 1) * std::pow(f, e - 2) * f1 * f1 + std::pow(f, e - 1) * f2);
  }
};

// d/2 [tanh((u + w/2)/delta) - tanh((u - w/2)/delta)] and derivatives.
struct NoseProfile {
  double d, w, delta, center;

  void eval(double t, double& b, double& db, double& ddb) const {
    double u = std::remainder(t - center, kTwoPi);
    const double a1 = (u + 0.5 * w) / delta, a2 = (u - 0.5 * w) / delta;
    const double t1 = std::tanh(a1), t2 = std::tanh(a2);
    const double s1 = 1.0 - t1 * t1, s2 = 1.0 - t2 * t2;
    b = 0.5 * d * (t1 - t2);
    db = 0.5 * d * (s1 - s2) / delta;
    ddb = 0.5 * d * (-2.0 * t1 * s1 + 2.0 * t2 * s2) / (delta * delta);
  }
};

Curve radial_from(std::function<void(double, double&, double&, double&)> f) {
  auto r = [f](double t) { double a, b, c; f(t, a, b, c); return a; };
  auto dr = [f](double t) { double a, b, c; f(t, a, b, c); return b; };
  auto ddr = [f](double t) { double a, b, c; f(t, a, b, c); return c; };
  return Curve::radial(r, dr, ddr, 0.0, kTwoPi, true);
}

}  // namespace

Curve circle(double radius) {
  require(radius > 0, "circle: radius must be positive");
  return Curve::radial([radius](double) { return radius; },
                       [](double) { return 0.0; }, [](double) { return 0.0; },
                       0.0, kTwoPi, true);
}

Curve star(double a, int arms) {
  require(a >= 0 && a < 1, "star: need 0 <= a < 1");
  require(arms >= 1, "star: need at least one arm");
  const double k = arms;
  return Curve::radial([a, k](double t) { return 1.0 + a * std::cos(k * t); },
                       [a, k](double t) { return -a * k * std::sin(k * t); },
                       [a, k](double t) { return -a * k * k * std::cos(k * t); },
                       0.0, kTwoPi, true);
}

Curve rounded_square(double half_side, int exponent) {
  require(half_side > 0, "rounded_square: half side must be positive");
  require(exponent >= 2 && exponent % 2 == 0,
          "rounded_square: exponent must be even and >= 2");
  const SuperellipseRadius sq{half_side, exponent};
  return radial_from([sq](double t, double& r, double& dr, double& ddr) {
    sq.eval(t, r, dr, ddr);
  });
}

Curve circle_with_bump(const BumpShape& shape) {
  require(shape.theta > 0 && shape.theta < kPi / 2,
          "circle_with_bump: need 0 < theta < pi/2");
  require(shape.height_ratio >= 0, "circle_with_bump: negative height");
  require(shape.width_ratio > 0, "circle_with_bump: width must be positive");
  const double height = shape.height_ratio * shape.theta;
  const double scale = shape.width_ratio * 0.5 * shape.theta;
  const double tc = shape.center_angle;
  return radial_from([=](double t, double& r, double& dr, double& ddr) {
    const double u = std::remainder(t - tc, kTwoPi) / scale;
    const double g = height * std::exp(-u * u);
    r = 1.0 + g;
    dr = -2.0 * u * g / scale;
    ddr = (4.0 * u * u - 2.0) * g / (scale * scale);
  });
}

Curve rounded_square_with_nose(const NoseShape& shape) {
  require(shape.height > 0, "rounded_square_with_nose: height must be positive");
  require(shape.window > 0 && shape.window < kPi / 2,
          "rounded_square_with_nose: window out of range");
  require(shape.edge_ratio > 0, "rounded_square_with_nose: bad edge ratio");
  const SuperellipseRadius sq{shape.half_side, shape.exponent};
  require(shape.half_side > 0 && shape.exponent >= 2 && shape.exponent % 2 == 0,
          "rounded_square_with_nose: bad square parameters");
  const NoseProfile nose{shape.height, shape.window,
                         shape.window * shape.edge_ratio, shape.center_angle};
  return radial_from([sq, nose](double t, double& r, double& dr, double& ddr) {
    double b, db, ddb;
    sq.eval(t, r, dr, ddr);
    nose.eval(t, b, db, ddb);
    r += b;
    dr += db;
    ddr += ddb;
  });
}

double nose_support_halfwidth(const NoseShape& shape) {
  // 1 - tanh(x) < 2 exp(-2x); x = 19 puts the tail near 1e-17.
  return 0.5 * shape.window + 19.0 * shape.window * shape.edge_ratio;
}

BumpProblem circle_with_bump_problem(Index n_original, Index arc_steps,
                                     double height_ratio) {
  require(n_original >= 16, "circle_with_bump_problem: N too small");
  require(arc_steps >= 2 && arc_steps * 4 < n_original,
          "circle_with_bump_problem: arc must cover 2..N/4 grid steps");
  const double h = kTwoPi / static_cast<double>(n_original);
  const Index first = static_cast<Index>(
      std::llround(0.5 * static_cast<double>(n_original - arc_steps)));
  const double ta = static_cast<double>(first) * h;
  const double tb = static_cast<double>(first + arc_steps) * h;

  BumpShape shape;
  shape.theta = tb - ta;
  shape.center_angle = 0.5 * (ta + tb);
  shape.height_ratio = height_ratio;
  Curve orig = circle(1.0);
  Curve bump = circle_with_bump(shape);
  Discretization d = discretize_trapezoid(orig, n_original);
  PerturbedGeometry pg =
      make_perturbation(d, orig, {ta, tb}, bump, TrapezoidGrid{h});
  return {orig, bump, std::move(pg)};
}

NoseProblem rounded_square_with_nose_problem(Index panels, Index cut_panels,
                                             Index added_panels,
                                             double height_ratio) {
  require(panels >= 8, "rounded_square_with_nose_problem: too few panels");
  require(cut_panels >= 1 && cut_panels * 8 <= panels,
          "rounded_square_with_nose_problem: cut must be 1..panels/8 panels");
  require(added_panels >= 1, "rounded_square_with_nose_problem: no added panels");
  const std::vector<double> breaks = uniform_breaks(0.0, kTwoPi, panels);
  const Index first = std::llround(0.25 * static_cast<double>(panels) -
                                   0.5 * static_cast<double>(cut_panels));
  const double ta = breaks[first], tb = breaks[first + cut_panels];

  NoseShape shape;
  shape.center_angle = 0.5 * (ta + tb);
  shape.window = (tb - ta) / 7.4;
  shape.height = height_ratio * shape.window;
  require(nose_support_halfwidth(shape) < 0.5 * (tb - ta),
          "rounded_square_with_nose_problem: nose does not fit in the cut");
  Curve orig = rounded_square(shape.half_side, shape.exponent);
  Curve nosed = rounded_square_with_nose(shape);
  Discretization d = discretize_panels(orig, breaks, 16);
  PerturbedGeometry pg =
      make_perturbation(d, orig, {ta, tb}, nosed, PanelGrid{added_panels, 16});
  return {orig, nosed, std::move(pg), shape};
}

StarRefineProblem star_with_refined_panels(Index panels, Index cut_panels,
                                           Index refine, double a, int arms,
                                           Index first_cut_panel) {
  require(panels >= 8, "star_with_refined_panels: too few panels");
  require(cut_panels >= 1 && cut_panels * 4 <= panels,
          "star_with_refined_panels: cut out of range");
  require(refine >= 1, "star_with_refined_panels: refine must be >= 1");
  Curve c = star(a, arms);
  const std::vector<double> breaks = uniform_breaks(0.0, kTwoPi, panels);
  if (first_cut_panel < 0) first_cut_panel = panels / (2 * arms) - cut_panels / 2;
  require(first_cut_panel >= 0 && first_cut_panel + cut_panels <= panels,
          "star_with_refined_panels: cut outside the panel list");
  const double ta = breaks[first_cut_panel];
  const double tb = breaks[first_cut_panel + cut_panels];
  Discretization d = discretize_panels(c, breaks, 16);
  PerturbedGeometry pg =
      make_perturbation(d, c, {ta, tb}, c, PanelGrid{cut_panels * refine, 16});
  return {c, std::move(pg)};
}

PerturbedGeometry star_cut(Index panels, Index cut_panels, double a, int arms,
                           double center) {
  require(panels >= 8, "star_cut: too few panels");
  require(cut_panels >= 1 && cut_panels * 2 <= panels, "star_cut: cut out of range");
  Curve c = star(a, arms);
  const std::vector<double> breaks = uniform_breaks(0.0, kTwoPi, panels);
  Discretization d = discretize_panels(c, breaks, 16);
  const double width = kTwoPi / static_cast<double>(panels);
  const double first =
      std::round(center / width - 0.5 * static_cast<double>(cut_panels));
  const double ta = first * width;
  const double tb = ta + static_cast<double>(cut_panels) * width;
  PerturbedGeometry pg = make_perturbation(d, c, {ta, tb}, c, PanelGrid{1, 16});
  pg.added = d.subset({});
  return pg;
}

Discretization discretization_from_config(const KeyValueConfig& cfg) {
  const std::string name = cfg.get("geometry", "");
  const long n = cfg.get_int("n", 0);
  const int line = cfg.has("geometry") ? cfg.lines.at("geometry") : 0;
  if (name.empty()) throw ConfigError("missing key 'geometry'", 0);
  if (n < 16) throw ConfigError("key 'n' must be at least 16", cfg.has("n") ? cfg.lines.at("n") : 0);
  std::optional<Curve> c;
  try {
    if (name == "circle") {
      c = circle(cfg.get_double("radius", 1.0));
    } else if (name == "star") {
      c = star(cfg.get_double("a", 0.3), static_cast<int>(cfg.get_int("arms", 5)));
    } else if (name == "rounded_square") {
      c = rounded_square(cfg.get_double("half_side", 1.0),
                         static_cast<int>(cfg.get_int("exponent", 8)));
    } else if (name == "circle_with_bump") {
      BumpShape s;
      s.theta = cfg.get_double("theta", s.theta);
      s.height_ratio = cfg.get_double("height", s.height_ratio);
      c = circle_with_bump(s);
    } else if (name == "square_with_nose") {
      NoseShape s;
      s.height = cfg.get_double("height", s.height);
      s.window = cfg.get_double("window", s.window);
      s.half_side = cfg.get_double("half_side", s.half_side);
      s.exponent = static_cast<int>(cfg.get_int("exponent", s.exponent));
      c = rounded_square_with_nose(s);
    } else {
      throw ConfigError("unknown geometry '" + name + "'", line);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), line);
  }
  const std::string scheme = cfg.get("scheme", "trapezoidal");
  if (scheme == "trapezoidal") return discretize_trapezoid(*c, n);
  if (scheme == "panels") {
    const long q = cfg.get_int("q", 16);
    if (n % q != 0) {
      throw ConfigError("n must be a multiple of q for the panel scheme",
                        cfg.lines.at("n"));
    }
    return discretize_panels(*c, uniform_breaks(0.0, kTwoPi, n / q),
                             static_cast<int>(q));
  }
  throw ConfigError("unknown scheme '" + scheme + "'",
                    cfg.has("scheme") ? cfg.lines.at("scheme") : 0);
}

}  // namespace pertsolve
