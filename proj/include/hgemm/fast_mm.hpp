#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "hgemm/matrix.hpp"

namespace hgemm {

struct FastMMConfig {
  // Problems whose largest side is at or below this use blocked_mm.
  std::size_t cutoff = 64;
  // Recursion levels allowed before falling back to blocked_mm.
  std::size_t max_depth = 16;

  void validate() const {
    if (cutoff < 2) throw std::invalid_argument("FastMMConfig: cutoff must be >= 2");
  }
};

// Elements of scratch winograd_mm needs for an m x k by k x n product.
//
// Each recursion level holds three temporaries sized on the even-floored
// halves h_m, h_n, h_k of the current problem: h_m*h_k (left operand sums),
// h_k*h_n (right operand sums) and h_m*h_n (one product). Levels run one at a
// time, so the total is the sum over levels down to the cutoff or max_depth.
std::size_t winograd_scratch_size(std::size_t m, std::size_t n, std::size_t k,
                                  const FastMMConfig& cfg);

// C = A * B with the Winograd variant of Strassen's algorithm (seven
// half-size products, fifteen additions per level). Odd dimensions are
// peeled: the even-floored core runs the fast recursion, the boundary row,
// column and rank-1 term are fixed up with the classic kernel.
template <class T>
void winograd_mm(MatrixView<T> c, std::type_identity_t<MatrixView<const T>> a,
                 std::type_identity_t<MatrixView<const T>> b, const FastMMConfig& cfg,
                 std::span<T> scratch);

// Same, allocating scratch internally.
template <class T>
void winograd_mm(MatrixView<T> c, std::type_identity_t<MatrixView<const T>> a,
                 std::type_identity_t<MatrixView<const T>> b, const FastMMConfig& cfg = {});

// Multiplies plus additions performed on n x n inputs:
// F(n) = 7 F(n/2) + 15 (n/2)^2 above the cutoff, 2n^3 - n^2 at the leaves.
std::uint64_t flop_count_fast(std::uint64_t n, const FastMMConfig& cfg);

extern template void winograd_mm<float>(MatrixView<float>, MatrixView<const float>,
                                        MatrixView<const float>, const FastMMConfig&,
                                        std::span<float>);
extern template void winograd_mm<double>(MatrixView<double>, MatrixView<const double>,
                                         MatrixView<const double>, const FastMMConfig&,
                                         std::span<double>);
extern template void winograd_mm<float>(MatrixView<float>, MatrixView<const float>,
                                        MatrixView<const float>, const FastMMConfig&);
extern template void winograd_mm<double>(MatrixView<double>, MatrixView<const double>,
                                         MatrixView<const double>, const FastMMConfig&);

}  // namespace hgemm
