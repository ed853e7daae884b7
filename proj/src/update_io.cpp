#include "pertsolve/update.hpp"

#include <istream>
#include <ostream>

namespace pertsolve {

namespace {

constexpr std::int64_t kVersion = 2;

void write_block(std::ostream& os, const LowRankBlock& b) {
  write_matrix_binary(os, b.L);
  write_matrix_binary(os, b.R);
  io::write_list(os, b.skeleton);
  io::write_index(os, b.k0);
}

LowRankBlock read_block(std::istream& is) {
  LowRankBlock b;
  b.L = read_matrix_binary(is);
  b.R = read_matrix_binary(is);
  b.skeleton = io::read_list(is);
  b.k0 = io::read_index(is);
  return b;
}

}  // namespace

void save_update_factors(std::ostream& os, const UpdateFactors& uf) {
  io::write_tag(os, "UPDF");
  io::write_index(os, kVersion);
  io::write_index(os, uf.n_original);
  io::write_index(os, uf.n_added);
  io::write_list(os, uf.keep);
  io::write_list(os, uf.cut);
  io::write_index(os, uf.cut_rows_dropped ? 1 : 0);
  write_block(os, uf.kc);
  write_matrix_binary(os, uf.B_cc);
  write_block(os, uf.op);
  write_block(os, uf.pk);
  if (!os) throw std::runtime_error("save_update_factors: write failed");
}

UpdateFactors load_update_factors(std::istream& is) {
  io::expect_tag(is, "UPDF");
  if (io::read_index(is) != kVersion) throw std::runtime_error("unsupported format version");
  UpdateFactors uf;
  uf.n_original = io::read_index(is);
  uf.n_added = io::read_index(is);
  uf.keep = io::read_list(is);
  uf.cut = io::read_list(is);
  uf.cut_rows_dropped = io::read_index(is) != 0;
  uf.kc = read_block(is);
  uf.B_cc = read_matrix_binary(is);
  uf.op = read_block(is);
  uf.pk = read_block(is);
  const Index nk = static_cast<Index>(uf.keep.size()), nc = static_cast<Index>(uf.cut.size());
  if (nk + nc != uf.n_original || uf.kc.L.rows() != nk || uf.kc.R.cols() != nc ||
      uf.B_cc.rows() != nc || uf.op.L.rows() != uf.n_original ||
      uf.op.R.cols() != uf.n_added || uf.pk.L.rows() != uf.n_added ||
      uf.pk.R.cols() != nk) {
    throw std::runtime_error("load_update_factors: inconsistent block sizes");
  }
  return uf;
}

void PerturbedSolver::save(std::ostream& os) const {
  io::write_tag(os, "PSLV");
  io::write_index(os, kVersion);
  save_update_factors(os, uf_);
  write_matrix_binary(os, A_pp_lu_);
  io::write_index(os, A_pp_perm_.size());
  for (Index i = 0; i < A_pp_perm_.size(); ++i) io::write_index(os, A_pp_perm_[i]);
  write_matrix_binary(os, ainv_l_);
  write_matrix_binary(os, cap_inv_);
  io::write_double(os, cap_cond_);
  if (!os) throw std::runtime_error("PerturbedSolver::save: write failed");
}

PerturbedSolver PerturbedSolver::load(std::istream& is,
                                      std::shared_ptr<const HbsSolver> original) {
  io::expect_tag(is, "PSLV");
  if (io::read_index(is) != kVersion) throw std::runtime_error("unsupported format version");
  PerturbedSolver ps;
  ps.uf_ = load_update_factors(is);
  if (!original || original->size() != ps.uf_.n_original) {
    throw std::invalid_argument("PerturbedSolver::load: original solver size mismatch");
  }
  ps.hbs_ = std::move(original);
  ps.A_pp_lu_ = read_matrix_binary(is);
  const Index np = io::read_index(is);
  if (np != ps.uf_.n_added) throw std::runtime_error("PerturbedSolver::load: bad permutation");
  ps.A_pp_perm_.resize(np);
  for (Index i = 0; i < np; ++i) {
    const std::int64_t v = io::read_index(is);
    if (v < 0 || v >= np) throw std::runtime_error("PerturbedSolver::load: bad permutation");
    ps.A_pp_perm_[i] = static_cast<int>(v);
  }
  ps.ainv_l_ = read_matrix_binary(is);
  ps.cap_inv_ = read_matrix_binary(is);
  ps.cap_cond_ = io::read_double(is);
  if (ps.ainv_l_.rows() != ps.size() || ps.ainv_l_.cols() != ps.rank() ||
      ps.cap_inv_.rows() != ps.rank() || ps.A_pp_lu_.rows() != ps.uf_.n_added) {
    throw std::runtime_error("PerturbedSolver::load: inconsistent block sizes");
  }
  return ps;
}

void write_manifest(std::ostream& os, const UpdateFactors& uf) {
  os << "component,rows,cols,depends_on_placement\n";
  auto line = [&os](const char* name, Index r, Index c, bool dep) {
    os << name << ',' << r << ',' << c << ',' << (dep ? "yes" : "no") << '\n';
  };
  // A_pp only sees the added piece itself, which is the same wherever it is
  // attached; everything coupling it to the original boundary moves with it.
  line("hbs_original", uf.n_original, uf.n_original, false);
  line("A_pp_lu", uf.n_added, uf.n_added, false);
  line("L_kc", uf.kc.L.rows(), uf.kc.L.cols(), true);
  line("R_kc", uf.kc.R.rows(), uf.kc.R.cols(), true);
  line("B_cc", uf.B_cc.rows(), uf.B_cc.cols(), true);
  line("L_op", uf.op.L.rows(), uf.op.L.cols(), true);
  line("R_op", uf.op.R.rows(), uf.op.R.cols(), true);
  line("L_pk", uf.pk.L.rows(), uf.pk.L.cols(), true);
  line("R_pk", uf.pk.R.rows(), uf.pk.R.cols(), true);
  line("AinvL", uf.n_extended(), uf.rank(), true);
  line("capacitance_inverse", uf.rank(), uf.rank(), true);
}

}  // namespace pertsolve
