#include <doctest.h>

#include <cstring>
#include <functional>
#include <random>
#include <vector>

#include "hgemm/fast_mm.hpp"
#include "test_util.hpp"

using namespace hgemm;

namespace {

// Recurrence evaluated directly, kept separate from the library's loop.
std::uint64_t recurrence(std::uint64_t n, std::uint64_t cutoff) {
  if (n <= cutoff) return 2 * n * n * n - n * n;
  const std::uint64_t h = n / 2;
  return 7 * recurrence(h, cutoff) + 15 * h * h;
}

bool same_bits(const MatrixF& x, const MatrixF& y) {
  return x.rows() == y.rows() && x.cols() == y.cols() &&
         std::memcmp(x.data(), y.data(), x.rows() * x.ld() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("winograd_mm with the identity") {
  std::mt19937_64 rng(1);
  MatrixF id = identity<float>(4);
  MatrixF b = random_matrix<float>(4, 4, rng);
  for (std::size_t cutoff : {2, 3, 4, 64}) {
    MatrixF c(4, 4);
    winograd_mm(c.view(), id.cview(), b.cview(), {.cutoff = cutoff});
    CHECK(rel_error(c.cview(), b.cview()) <= 1e-5);
  }
}

TEST_CASE("winograd_mm 128 x 128 with cutoff 32") {
  std::mt19937_64 rng(2);
  MatrixF a = random_matrix<float>(128, 128, rng);
  MatrixF b = random_matrix<float>(128, 128, rng);
  MatrixF c(128, 128);
  winograd_mm(c.view(), a.cview(), b.cview(), {.cutoff = 32});
  CHECK(rel_error(c.cview(), oracle_product(a, b).cview()) <= kTolerance);
}

TEST_CASE("winograd_mm below the cutoff is blocked_mm") {
  std::mt19937_64 rng(3);
  MatrixF a = random_matrix<float>(90, 70, rng);
  MatrixF b = random_matrix<float>(70, 100, rng);
  MatrixF fast(90, 100), blocked(90, 100);
  winograd_mm(fast.view(), a.cview(), b.cview(), {.cutoff = 100});
  blocked_mm(blocked.view(), a.cview(), b.cview(), false);
  CHECK(same_bits(fast, blocked));

  MatrixF depth0(90, 100);
  winograd_mm(depth0.view(), a.cview(), b.cview(), {.cutoff = 2, .max_depth = 0});
  CHECK(same_bits(depth0, blocked));
}

TEST_CASE("winograd_mm on odd and non-square shapes") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> dim(1, 300);
  std::vector<std::array<std::size_t, 3>> shapes{{3, 3, 3},     {5, 7, 9},     {1, 300, 2},
                                                 {300, 1, 300}, {299, 301 - 2, 257},
                                                 {2, 2, 1},     {17, 33, 65}};
  for (int i = 0; i < 12; ++i) shapes.push_back({dim(rng), dim(rng), dim(rng)});
  for (const auto& [m, n, k] : shapes) {
    MatrixF a = random_matrix<float>(m, k, rng);
    MatrixF b = random_matrix<float>(k, n, rng);
    MatrixF c(m, n);
    winograd_mm(c.view(), a.cview(), b.cview(), {.cutoff = 8});
    INFO("m=" << m << " n=" << n << " k=" << k);
    CHECK(rel_error(c.cview(), oracle_product(a, b).cview()) <= kTolerance);
  }
}

TEST_CASE("winograd_mm writes only its output view") {
  std::mt19937_64 rng(5);
  MatrixF base(50, 60, 64);
  fill(base, 7.0f);
  auto c = base.view().sub(4, 6, 41, 39);
  MatrixF a = random_matrix<float>(41, 45, rng);
  MatrixF b = random_matrix<float>(45, 39, rng);
  winograd_mm(c, a.cview(), b.cview(), {.cutoff = 4});
  CHECK(rel_error(c, oracle_product(a, b).cview()) <= kTolerance);
  CHECK(base(3, 6) == 7.0f);
  CHECK(base(4, 5) == 7.0f);
  CHECK(base(45, 6) == 7.0f);
  CHECK(base(4, 45) == 7.0f);
}

TEST_CASE("winograd_mm is deterministic") {
  std::mt19937_64 rng(6);
  MatrixF a = random_matrix<float>(150, 150, rng);
  MatrixF b = random_matrix<float>(150, 150, rng);
  MatrixF c1(150, 150), c2(150, 150);
  winograd_mm(c1.view(), a.cview(), b.cview(), {.cutoff = 16});
  winograd_mm(c2.view(), a.cview(), b.cview(), {.cutoff = 16});
  CHECK(same_bits(c1, c2));
}

TEST_CASE("winograd_mm in double precision") {
  std::mt19937_64 rng(7);
  auto a = random_matrix<double>(100, 77, rng);
  auto b = random_matrix<double>(77, 123, rng);
  Matrix<double> ref(100, 123), got(100, 123);
  naive_mm(ref.view(), a.cview(), b.cview(), false);
  winograd_mm(got.view(), a.cview(), b.cview(), {.cutoff = 8});
  CHECK(rel_error(got.cview(), ref.cview()) <= 1e-12);
}

TEST_CASE("winograd scratch") {
  const FastMMConfig cfg{.cutoff = 16};
  CHECK(winograd_scratch_size(16, 16, 16, cfg) == 0);
  // one level: three 16 x 16 temporaries
  CHECK(winograd_scratch_size(32, 32, 32, cfg) == 3 * 16 * 16);
  // 33 x 35 x 37: even cores 32, 34, 36 -> halves 16, 17, 18, then 8, 8, 9
  CHECK(winograd_scratch_size(33, 35, 37, cfg) == 16 * 18 + 18 * 17 + 16 * 17 + 8 * 9 + 9 * 8 + 8 * 8);
  CHECK(winograd_scratch_size(64, 64, 64, {.cutoff = 16, .max_depth = 1}) == 3 * 32 * 32);

  std::mt19937_64 rng(8);
  MatrixF a = random_matrix<float>(64, 64, rng);
  MatrixF b = random_matrix<float>(64, 64, rng);
  MatrixF c(64, 64);
  std::vector<float> exact(winograd_scratch_size(64, 64, 64, cfg));
  winograd_mm<float>(c.view(), a.cview(), b.cview(), cfg, exact);
  CHECK(rel_error(c.cview(), oracle_product(a, b).cview()) <= kTolerance);
  std::vector<float> small(exact.size() - 1);
  CHECK_THROWS_AS(winograd_mm<float>(c.view(), a.cview(), b.cview(), cfg, small),
                  std::invalid_argument);
}

TEST_CASE("winograd_mm contract violations") {
  MatrixF a(4, 5), b(4, 5), c(4, 5);
  CHECK_THROWS_AS(winograd_mm(c.view(), a.cview(), b.cview()), DimensionError);
  MatrixF sq(8, 8);
  CHECK_THROWS_AS(winograd_mm(sq.view(), sq.cview(), sq.cview()), AliasError);
  CHECK_THROWS_AS(winograd_mm(c.view(), a.cview(), MatrixF(5, 5).cview(), {.cutoff = 1}),
                  std::invalid_argument);
}

TEST_CASE("flop_count_fast") {
  for (std::uint64_t c : {8, 16, 32, 64}) {
    const FastMMConfig cfg{.cutoff = c};
    CHECK(flop_count_fast(c, cfg) == 2 * c * c * c - c * c);
    CHECK(flop_count_fast(c / 2, cfg) == c * c * c / 4 - c * c / 4);
    CHECK(flop_count_fast(2 * c, cfg) == 7 * (2 * c * c * c - c * c) + 15 * c * c);
    for (std::uint64_t n = 4 * c; n <= 4096; n *= 2) {
      CHECK(flop_count_fast(n, cfg) == recurrence(n, c));
      CHECK(static_cast<double>(flop_count_fast(n, cfg)) < 2.0 * n * n * n);
    }
  }
  // depth cap stops the recurrence
  CHECK(flop_count_fast(256, {.cutoff = 8, .max_depth = 1}) ==
        7 * (2ULL * 128 * 128 * 128 - 128 * 128) + 15 * 128 * 128);
  // 2 * cutoff = 128 with cutoff 64
  CHECK(flop_count_fast(128, {.cutoff = 64}) == 3'702'784);
}
