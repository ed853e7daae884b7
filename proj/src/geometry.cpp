#include "pertsolve/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace pertsolve {

Curve::Curve(Map position, Map first_derivative, Map second_derivative,
             double t_begin, double t_end, bool closed, bool counterclockwise)
    : position_(std::move(position)),
      first_(std::move(first_derivative)),
      second_(std::move(second_derivative)),
      t_begin_(t_begin),
      t_end_(t_end),
      closed_(closed),
      ccw_(counterclockwise) {
  if (!(t_end > t_begin)) {
    throw std::invalid_argument("Curve: empty parameter domain");
  }
}

Curve Curve::radial(std::function<double(double)> r,
                    std::function<double(double)> dr,
                    std::function<double(double)> ddr, double t_begin,
                    double t_end, bool closed, Point center) {
  auto pos = [r, center](double t) -> Point {
    return center + r(t) * Point(std::cos(t), std::sin(t));
  };
  auto d1 = [r, dr](double t) -> Point {
    const double c = std::cos(t), s = std::sin(t);
    return dr(t) * Point(c, s) + r(t) * Point(-s, c);
  };
  auto d2 = [r, dr, ddr](double t) -> Point {
    const double c = std::cos(t), s = std::sin(t);
    return ddr(t) * Point(c, s) + 2.0 * dr(t) * Point(-s, c) -
           r(t) * Point(c, s);
  };
  return Curve(pos, d1, d2, t_begin, t_end, closed, true);
}

Point Curve::normal(double t) const {
  const Point d = tangent(t);
  const double len = d.norm();
  if (len == 0.0) throw std::domain_error("Curve: vanishing tangent");
  Point n(d.y() / len, -d.x() / len);
  return ccw_ ? n : Point(-n);
}

double Curve::curvature(double t) const {
  const Point d = tangent(t);
  const Point dd = second_derivative(t);
  const double len = d.norm();
  if (len == 0.0) throw std::domain_error("Curve: vanishing tangent");
  const double k = (d.x() * dd.y() - d.y() * dd.x()) / (len * len * len);
  return ccw_ ? k : -k;
}

Curve Curve::segment(double a, double b) const {
  return Curve(position_, first_, second_, a, b, false, ccw_);
}

double Discretization::signed_area() const {
  double a = 0.0;
  for (Index i = 0; i < size(); ++i) {
    a += weights[i] * nodes.col(i).dot(normals.col(i));
  }
  return 0.5 * a;
}

Discretization Discretization::subset(const IndexList& idx) const {
  Discretization d;
  const Index n = static_cast<Index>(idx.size());
  d.nodes.resize(2, n);
  d.normals.resize(2, n);
  d.weights.resize(n);
  d.curvatures.resize(n);
  d.params.resize(n);
  for (Index i = 0; i < n; ++i) {
    const Index j = idx[i];
    d.nodes.col(i) = nodes.col(j);
    d.normals.col(i) = normals.col(j);
    d.weights[i] = weights[j];
    d.curvatures[i] = curvatures[j];
    d.params[i] = params[j];
  }
  d.scheme = scheme;
  return d;
}

Discretization Discretization::concat(const Discretization& a,
                                      const Discretization& b) {
  Discretization d;
  const Index n = a.size() + b.size();
  d.nodes.resize(2, n);
  d.normals.resize(2, n);
  d.weights.resize(n);
  d.curvatures.resize(n);
  d.params.resize(n);
  d.nodes << a.nodes, b.nodes;
  d.normals << a.normals, b.normals;
  d.weights << a.weights, b.weights;
  d.curvatures << a.curvatures, b.curvatures;
  d.params << a.params, b.params;
  d.scheme = a.scheme == b.scheme ? a.scheme : Scheme::composite_gauss;
  return d;
}

namespace {

void fill_node(Discretization& d, Index i, const Curve& c, double t,
               double param_weight) {
  const Point x = c.position(t);
  const double speed = c.speed(t);
  if (!(speed > 0.0)) throw std::domain_error("discretize: vanishing tangent");
  d.nodes.col(i) = x;
  d.normals.col(i) = c.normal(t);
  d.weights[i] = speed * param_weight;
  d.curvatures[i] = c.curvature(t);
  d.params[i] = t;
}

void resize(Discretization& d, Index n) {
  d.nodes.resize(2, n);
  d.normals.resize(2, n);
  d.weights.resize(n);
  d.curvatures.resize(n);
  d.params.resize(n);
}

bool is_closed(const Curve& c) {
  const Point a = c.position(c.t_begin());
  const Point b = c.position(c.t_end());
  const double scale = std::max(1.0, a.norm());
  return (a - b).norm() <= 1e-12 * scale;
}

}  // namespace

Discretization discretize_trapezoid(const Curve& curve, Index n) {
  if (n < 16) throw std::invalid_argument("discretize_trapezoid: need N >= 16");
  if (!curve.closed() || !is_closed(curve)) {
    throw std::invalid_argument("discretize_trapezoid: curve is not closed");
  }
  Discretization d;
  resize(d, n);
  const double h = curve.period() / static_cast<double>(n);
  for (Index i = 0; i < n; ++i) {
    fill_node(d, i, curve, curve.t_begin() + static_cast<double>(i) * h, h);
  }
  d.scheme = Scheme::trapezoidal;
  return d;
}

void gauss_legendre(int q, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  if (q < 1) throw std::invalid_argument("gauss_legendre: q < 1");
  nodes.resize(q);
  weights.resize(q);
  const int m = (q + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (q + 0.5));
    double pp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= q; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = q * (z * p1 - p2) / (z * z - 1.0);
      const double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p1 = 1.0, p2 = 0.0;
    for (int j = 1; j <= q; ++j) {
      const double p3 = p2;
      p2 = p1;
      p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
    }
    pp = q * (z * p1 - p2) / (z * z - 1.0);
    nodes[i] = -z;
    nodes[q - 1 - i] = z;
    weights[i] = weights[q - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
  if (q % 2 == 1) nodes[q / 2] = 0.0;
}

std::vector<double> uniform_breaks(double a, double b, Index panels) {
  if (panels < 1) throw std::invalid_argument("uniform_breaks: no panels");
  std::vector<double> br(static_cast<size_t>(panels) + 1);
  for (Index i = 0; i <= panels; ++i) {
    br[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(panels);
  }
  br.back() = b;
  return br;
}

Discretization discretize_panels(const Curve& curve,
                                 const std::vector<double>& breaks, int q) {
  if (breaks.size() < 2) {
    throw std::invalid_argument("discretize_panels: empty panel list");
  }
  if (q < 4) throw std::invalid_argument("discretize_panels: q < 4");
  for (size_t i = 1; i < breaks.size(); ++i) {
    if (!(breaks[i] > breaks[i - 1])) {
      throw std::invalid_argument(
          "discretize_panels: breakpoints not strictly increasing");
    }
  }
  if (curve.closed()) {
    const double tol = 1e-12 * curve.period();
    if (std::abs(breaks.front() - curve.t_begin()) > tol ||
        std::abs(breaks.back() - curve.t_end()) > tol) {
      throw std::invalid_argument(
          "discretize_panels: breakpoints do not cover the closed curve");
    }
  }
  Eigen::VectorXd gx, gw;
  gauss_legendre(q, gx, gw);
  const Index panels = static_cast<Index>(breaks.size()) - 1;
  Discretization d;
  resize(d, panels * q);
  for (Index p = 0; p < panels; ++p) {
    const double a = breaks[p], b = breaks[p + 1];
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (int j = 0; j < q; ++j) {
      fill_node(d, p * q + j, curve, mid + half * gx[j], half * gw[j]);
    }
  }
  d.scheme = Scheme::composite_gauss;
  d.panel_breaks = breaks;
  return d;
}

Discretization PerturbedGeometry::perturbed(IndexList* extended_index) const {
  const Index no = n_original();
  IndexList order;
  order.reserve(static_cast<size_t>(n_keep() + n_added()));
  IndexList ext;
  if (cut.empty()) {
    Discretization d = original;
    if (extended_index) {
      extended_index->resize(static_cast<size_t>(no));
      std::iota(extended_index->begin(), extended_index->end(), Index{0});
    }
    if (n_added() > 0) {
      if (extended_index) {
        for (Index j = 0; j < n_added(); ++j) extended_index->push_back(no + j);
      }
      return Discretization::concat(d, added);
    }
    return d;
  }
  const Index first = cut.front();
  const Index last = cut.back();
  const bool wraps = last < first;
  if (!wraps) {
    for (Index i = 0; i < first; ++i) order.push_back(i);
  } else {
    for (Index i = last + 1; i < first; ++i) order.push_back(i);
  }
  Discretization head = original.subset(order);
  ext = order;
  for (Index j = 0; j < n_added(); ++j) ext.push_back(no + j);
  Discretization d = Discretization::concat(head, added);
  if (!wraps) {
    IndexList tail;
    for (Index i = last + 1; i < no; ++i) tail.push_back(i);
    d = Discretization::concat(d, original.subset(tail));
    ext.insert(ext.end(), tail.begin(), tail.end());
  }
  if (extended_index) *extended_index = std::move(ext);
  return d;
}

PerturbedGeometry make_identity_perturbation(const Discretization& original) {
  PerturbedGeometry pg;
  pg.original = original;
  pg.keep.resize(static_cast<size_t>(original.size()));
  std::iota(pg.keep.begin(), pg.keep.end(), Index{0});
  resize(pg.added, 0);
  pg.added.scheme = original.scheme;
  return pg;
}

PerturbedGeometry make_perturbation(const Discretization& original,
                                    const Curve& original_curve,
                                    const ParamArc& arc, const Curve& piece,
                                    const PieceResolution& resolution,
                                    double glue_tolerance) {
  if (!(arc.t_b > arc.t_a)) {
    throw std::invalid_argument("make_perturbation: empty cut arc");
  }
  const double period = original_curve.period();
  const double ptol = 1e-12 * period;
  const Index n = original.size();

  std::vector<std::pair<double, Index>> inside;
  for (Index i = 0; i < n; ++i) {
    double s = std::fmod(original.params[i] - arc.t_a, period);
    if (s < 0) s += period;
    if (s > ptol && s < (arc.t_b - arc.t_a) - ptol) inside.emplace_back(s, i);
  }
  if (inside.empty()) throw std::invalid_argument("make_perturbation: empty cut");
  std::sort(inside.begin(), inside.end());
  PerturbedGeometry pg;
  pg.original = original;
  for (const auto& [s, i] : inside) pg.cut.push_back(i);
  for (size_t j = 1; j < pg.cut.size(); ++j) {
    if ((pg.cut[j - 1] + 1) % n != pg.cut[j]) {
      throw std::invalid_argument("make_perturbation: cut is not contiguous");
    }
  }
  std::vector<char> is_cut(static_cast<size_t>(n), 0);
  for (Index i : pg.cut) is_cut[i] = 1;
  for (Index i = 0; i < n; ++i) {
    if (!is_cut[i]) pg.keep.push_back(i);
  }

  const double tol = glue_tolerance * original.perimeter();
  if ((piece.position(arc.t_a) - original_curve.position(arc.t_a)).norm() > tol ||
      (piece.position(arc.t_b) - original_curve.position(arc.t_b)).norm() > tol) {
    throw std::invalid_argument(
        "make_perturbation: new piece does not meet the cut endpoints");
  }

  if (const auto* grid = std::get_if<TrapezoidGrid>(&resolution)) {
    if (!(grid->spacing > 0.0)) {
      throw std::invalid_argument("make_perturbation: bad trapezoid spacing");
    }
    const Index steps = std::llround((arc.t_b - arc.t_a) / grid->spacing);
    if (steps < 2) throw std::invalid_argument("make_perturbation: piece too short");
    resize(pg.added, steps - 1);
    for (Index j = 1; j < steps; ++j) {
      fill_node(pg.added, j - 1, piece,
                arc.t_a + static_cast<double>(j) * grid->spacing, grid->spacing);
    }
    pg.added.scheme = Scheme::trapezoidal;
  } else {
    const auto& panels = std::get<PanelGrid>(resolution);
    pg.added = discretize_panels(piece.segment(arc.t_a, arc.t_b),
                                 uniform_breaks(arc.t_a, arc.t_b, panels.panels),
                                 panels.q);
  }
  return pg;
}

int winding_number(const Discretization& d, const Point& p) {
  int wn = 0;
  const Index n = d.size();
  for (Index i = 0; i < n; ++i) {
    const Point a = d.nodes.col(i);
    const Point b = d.nodes.col((i + 1) % n);
    const double cross = (b.x() - a.x()) * (p.y() - a.y()) -
                         (p.x() - a.x()) * (b.y() - a.y());
    if (a.y() <= p.y()) {
      if (b.y() > p.y() && cross > 0) ++wn;
    } else {
      if (b.y() <= p.y() && cross < 0) --wn;
    }
  }
  return wn;
}

namespace {

Circle circle_two(const Point& a, const Point& b) {
  return {0.5 * (a + b), 0.5 * (a - b).norm()};
}

Circle circle_three(const Point& a, const Point& b, const Point& c) {
  const Point ab = b - a, ac = c - a;
  const double det = 2.0 * (ab.x() * ac.y() - ab.y() * ac.x());
  if (std::abs(det) < 1e-300) {
    Circle best = circle_two(a, b);
    for (const Circle& cand : {circle_two(a, c), circle_two(b, c)}) {
      if (cand.radius > best.radius) best = cand;
    }
    return best;
  }
  const double ab2 = ab.squaredNorm(), ac2 = ac.squaredNorm();
  const Point off((ac.y() * ab2 - ab.y() * ac2) / det,
                  (ab.x() * ac2 - ac.x() * ab2) / det);
  return {a + off, off.norm()};
}

bool inside(const Circle& c, const Point& p) {
  return (p - c.center).norm() <= c.radius * (1.0 + 1e-12) + 1e-300;
}

}  // namespace

Circle enclosing_circle(const Eigen::Matrix2Xd& points) {
  const Index n = points.cols();
  if (n == 0) return {};
  std::vector<Point> pts(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) pts[i] = points.col(i);
  // Welzl's incremental algorithm; the fixed shuffle keeps results reproducible.
  std::mt19937_64 rng(0x5eed);
  std::shuffle(pts.begin(), pts.end(), rng);
  Circle c{pts[0], 0.0};
  for (size_t i = 1; i < pts.size(); ++i) {
    if (inside(c, pts[i])) continue;
    c = {pts[i], 0.0};
    for (size_t j = 0; j < i; ++j) {
      if (inside(c, pts[j])) continue;
      c = circle_two(pts[i], pts[j]);
      for (size_t k = 0; k < j; ++k) {
        if (!inside(c, pts[k])) c = circle_three(pts[i], pts[j], pts[k]);
      }
    }
  }
  return c;
}

Circle enclosing_circle(const Discretization& d, const IndexList& idx) {
  Eigen::Matrix2Xd pts(2, static_cast<Index>(idx.size()));
  for (size_t i = 0; i < idx.size(); ++i) pts.col(static_cast<Index>(i)) = d.nodes.col(idx[i]);
  return enclosing_circle(pts);
}

void write_csv(std::ostream& os, const Discretization& d) {
  os << "x,y,nx,ny,w,kappa\n";
  os.precision(17);
  for (Index i = 0; i < d.size(); ++i) {
    os << d.nodes(0, i) << ',' << d.nodes(1, i) << ',' << d.normals(0, i)
       << ',' << d.normals(1, i) << ',' << d.weights[i] << ','
       << d.curvatures[i] << '\n';
  }
}

void write_csv(const std::string& path, const Discretization& d) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_csv(os, d);
}

// ---------------------------------------------------------------------------

std::string KeyValueConfig::get(const std::string& key,
                                const std::string& fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("expected a number for '" + key + "'", lines.at(key));
  }
}

long KeyValueConfig::get_int(const std::string& key, long fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    size_t pos = 0;
    const long v = std::stol(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("expected an integer for '" + key + "'", lines.at(key));
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig parse_config(std::istream& is) {
  KeyValueConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value",
                        lineno);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(lineno) + ": empty key", lineno);
    }
    if (cfg.values.count(key)) {
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" +
                            key + "'",
                        lineno);
    }
    cfg.values[key] = value;
    cfg.lines[key] = lineno;
  }
  return cfg;
}

KeyValueConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path, 0);
  return parse_config(is);
}

}  // namespace pertsolve
