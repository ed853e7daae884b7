#include "pertsolve/oracle.hpp"
#include "pertsolve/update.hpp"

#include <doctest.h>

#include <cmath>

using namespace pertsolve;

TEST_CASE("rank table star: pre- and post-recompression lengths") {
  // Expected red: the pre-recompression length comes out near 358, above the
  // 245 +- 25% band. See the notes in the README.
  const PerturbedGeometry pg = star_cut(80, 5, 0.4, 5, 0.0);
  REQUIRE(pg.n_keep() == 1200);
  REQUIRE(pg.n_cut() == 80);
  const LowRankBlock kc = factor_A_kc(compress_hbs(pg.original, 1e-10), pg);
  const DenseMatrix Akc = NystromMatrix(pg.original).block(pg.keep, pg.cut);
  CHECK(svd_rank(Akc, 1e-10) == 15);
  CHECK(std::abs(kc.rank() - 17) <= 3);
  CHECK(kc.k0 >= static_cast<Index>(std::floor(0.75 * 245)));
  CHECK(kc.k0 <= static_cast<Index>(std::ceil(1.25 * 245)));
}
