#include "pertsolve/hbs.hpp"

#include <cstring>
#include <istream>
#include <ostream>

namespace pertsolve {

namespace io {

void write_index(std::ostream& os, std::int64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::int64_t read_index(std::istream& is) {
  std::int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error("read_index: truncated stream");
  return v;
}

void write_double(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

double read_double(std::istream& is) {
  double v = 0.0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error("read_double: truncated stream");
  return v;
}

void write_list(std::ostream& os, const IndexList& v) {
  write_index(os, static_cast<std::int64_t>(v.size()));
  for (Index i : v) write_index(os, i);
}

IndexList read_list(std::istream& is) {
  const std::int64_t n = read_index(is);
  if (n < 0 || n > (std::int64_t{1} << 40)) throw std::runtime_error("read_list: bad length");
  IndexList v(static_cast<size_t>(n));
  for (auto& i : v) i = read_index(is);
  return v;
}

void write_tag(std::ostream& os, const char (&tag)[5]) { os.write(tag, 4); }

void expect_tag(std::istream& is, const char (&tag)[5]) {
  char buf[4] = {};
  is.read(buf, 4);
  if (!is || std::memcmp(buf, tag, 4) != 0) {
    throw std::runtime_error(std::string("expected section '") + tag + "'");
  }
}

}  // namespace io

namespace {

constexpr std::int64_t kVersion = 1;

void write_tree(std::ostream& os, const IndexTree& t) {
  io::write_index(os, t.n_points);
  io::write_index(os, t.leaf_cap);
}

IndexTree read_tree(std::istream& is) {
  const Index n = io::read_index(is);
  const Index cap = io::read_index(is);
  return build_tree(n, cap);
}

void check_version(std::istream& is) {
  const auto v = io::read_index(is);
  if (v != kVersion) throw std::runtime_error("unsupported format version " + std::to_string(v));
}

}  // namespace

void save_hbs(std::ostream& os, const HbsRep& rep) {
  io::write_tag(os, "HBSR");
  io::write_index(os, kVersion);
  write_tree(os, rep.tree);
  io::write_double(os, rep.eps);
  io::write_index(os, rep.full_rank_nodes);
  for (const auto& n : rep.nodes) {
    io::write_tag(os, "NODE");
    io::write_list(os, n.rskel);
    io::write_list(os, n.cskel);
    write_matrix_binary(os, n.U);
    write_matrix_binary(os, n.V);
    write_matrix_binary(os, n.D);
    write_matrix_binary(os, n.B12);
    write_matrix_binary(os, n.B21);
    io::write_double(os, n.proxy_center.x());
    io::write_double(os, n.proxy_center.y());
    io::write_double(os, n.proxy_radius);
    io::write_index(os, n.full_rank ? 1 : 0);
  }
  if (!os) throw std::runtime_error("save_hbs: write failed");
}

HbsRep load_hbs(std::istream& is) {
  io::expect_tag(is, "HBSR");
  check_version(is);
  HbsRep rep;
  rep.tree = read_tree(is);
  rep.eps = io::read_double(is);
  rep.full_rank_nodes = static_cast<int>(io::read_index(is));
  rep.nodes.resize(static_cast<size_t>(rep.tree.size()));
  for (auto& n : rep.nodes) {
    io::expect_tag(is, "NODE");
    n.rskel = io::read_list(is);
    n.cskel = io::read_list(is);
    n.U = read_matrix_binary(is);
    n.V = read_matrix_binary(is);
    n.D = read_matrix_binary(is);
    n.B12 = read_matrix_binary(is);
    n.B21 = read_matrix_binary(is);
    n.proxy_center.x() = io::read_double(is);
    n.proxy_center.y() = io::read_double(is);
    n.proxy_radius = io::read_double(is);
    n.full_rank = io::read_index(is) != 0;
  }
  return rep;
}

void save_hbs_solver(std::ostream& os, const HbsSolver& s) {
  io::write_tag(os, "HBSI");
  io::write_index(os, kVersion);
  write_tree(os, s.tree);
  for (const auto& n : s.nodes) {
    io::write_tag(os, "NODE");
    write_matrix_binary(os, n.E);
    write_matrix_binary(os, n.Ft);
    write_matrix_binary(os, n.G);
  }
  if (!os) throw std::runtime_error("save_hbs_solver: write failed");
}

HbsSolver load_hbs_solver(std::istream& is) {
  io::expect_tag(is, "HBSI");
  check_version(is);
  HbsSolver s;
  s.tree = read_tree(is);
  s.nodes.resize(static_cast<size_t>(s.tree.size()));
  for (auto& n : s.nodes) {
    io::expect_tag(is, "NODE");
    n.E = read_matrix_binary(is);
    n.Ft = read_matrix_binary(is);
    n.G = read_matrix_binary(is);
  }
  return s;
}

}  // namespace pertsolve
