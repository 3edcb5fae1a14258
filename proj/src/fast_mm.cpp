#include "hgemm/fast_mm.hpp"

#include <algorithm>
#include <vector>

namespace hgemm {

namespace {

bool recurses(std::size_t m, std::size_t n, std::size_t k, std::size_t depth,
              const FastMMConfig& cfg) {
  return depth < cfg.max_depth && std::max({m, n, k}) > cfg.cutoff && std::min({m, n, k}) >= 2;
}

std::size_t scratch_at(std::size_t m, std::size_t n, std::size_t k, std::size_t depth,
                       const FastMMConfig& cfg) {
  if (!recurses(m, n, k, depth, cfg)) return 0;
  const std::size_t hm = m / 2, hn = n / 2, hk = k / 2;
  return hm * hk + hk * hn + hm * hn + scratch_at(hm, hn, hk, depth + 1, cfg);
}

template <class T>
MatrixView<T> temp_view(T* p, std::size_t rows, std::size_t cols) {
  return MatrixView<T>(p, rows, cols, cols, 0, 0, rows, cols);
}

// dst = x + y elementwise; dst may alias x or y exactly.
template <class T>
void add(MatrixView<T> dst, const MatrixView<const T>& x, const MatrixView<const T>& y) {
  for (std::size_t i = 0; i < dst.rows(); ++i) {
    T* d = dst.row(i);
    const T* xr = x.row(i);
    const T* yr = y.row(i);
    for (std::size_t j = 0; j < dst.cols(); ++j) d[j] = xr[j] + yr[j];
  }
}

template <class T>
void sub(MatrixView<T> dst, const MatrixView<const T>& x, const MatrixView<const T>& y) {
  for (std::size_t i = 0; i < dst.rows(); ++i) {
    T* d = dst.row(i);
    const T* xr = x.row(i);
    const T* yr = y.row(i);
    for (std::size_t j = 0; j < dst.cols(); ++j) d[j] = xr[j] - yr[j];
  }
}

template <class T>
void winograd_rec(MatrixView<T> c, MatrixView<const T> a, MatrixView<const T> b,
                  const FastMMConfig& cfg, std::size_t depth, T* scratch) {
  const std::size_t m = c.rows(), n = c.cols(), k = a.cols();
  if (!recurses(m, n, k, depth, cfg)) {
    blocked_mm(c, a, b, false);
    return;
  }
  const std::size_t hm = m / 2, hn = n / 2, hk = k / 2;

  const auto cq = split_quadrants(c.sub(0, 0, 2 * hm, 2 * hn));
  const auto aq = split_quadrants(a.sub(0, 0, 2 * hm, 2 * hk));
  const auto bq = split_quadrants(b.sub(0, 0, 2 * hk, 2 * hn));
  const auto &a11 = aq.q0, &a12 = aq.q1, &a21 = aq.q2, &a22 = aq.q3;
  const auto &b11 = bq.q0, &b12 = bq.q1, &b21 = bq.q2, &b22 = bq.q3;
  const auto &c11 = cq.q0, &c12 = cq.q1, &c21 = cq.q2, &c22 = cq.q3;

  auto x = temp_view(scratch, hm, hk);
  auto y = temp_view(scratch + hm * hk, hk, hn);
  auto z = temp_view(scratch + hm * hk + hk * hn, hm, hn);
  T* child = scratch + hm * hk + hk * hn + hm * hn;
  auto mul = [&](MatrixView<T> dst, MatrixView<const T> l, MatrixView<const T> r) {
    winograd_rec(dst, l, r, cfg, depth + 1, child);
  };

  sub<T>(x, a11, a21);  // S3
  sub<T>(y, b22, b12);  // T3
  mul(c21, x, y);       // P7
  add<T>(x, a21, a22);  // S1
  sub<T>(y, b12, b11);  // T1
  mul(c22, x, y);       // P5
  sub<T>(x, x, a11);    // S2
  sub<T>(y, b22, y);    // T2
  mul(c12, x, y);       // P6
  sub<T>(x, a12, x);    // S4
  mul(c11, x, b22);     // P3
  mul(z, a11, b11);     // P1
  add<T>(c12, z, c12);  // U2 = P1 + P6
  add<T>(c21, c12, c21);  // U3 = U2 + P7
  add<T>(c12, c12, c22);  // U4 = U2 + P5
  add<T>(c22, c21, c22);  // U7 = U3 + P5, final C22
  add<T>(c12, c12, c11);  // U5 = U4 + P3, final C12
  sub<T>(y, y, b21);      // T4
  mul(c11, a22, y);       // P4
  sub<T>(c21, c21, c11);  // U6 = U3 - P4, final C21
  mul(c11, a12, b21);     // P2
  add<T>(c11, z, c11);    // U1 = P1 + P2, final C11

  // Peeling for odd sizes.
  if (k % 2)
    blocked_mm(c.sub(0, 0, 2 * hm, 2 * hn), a.sub(0, k - 1, 2 * hm, 1), b.sub(k - 1, 0, 1, 2 * hn),
               true);
  if (n % 2) blocked_mm(c.sub(0, n - 1, m, 1), a, b.sub(0, n - 1, k, 1), false);
  if (m % 2) blocked_mm(c.sub(m - 1, 0, 1, 2 * hn), a.sub(m - 1, 0, 1, k), b.sub(0, 0, k, 2 * hn),
                        false);
}

}  // namespace

std::size_t winograd_scratch_size(std::size_t m, std::size_t n, std::size_t k,
                                  const FastMMConfig& cfg) {
  cfg.validate();
  return scratch_at(m, n, k, 0, cfg);
}

template <class T>
void winograd_mm(MatrixView<T> c, std::type_identity_t<MatrixView<const T>> a,
                 std::type_identity_t<MatrixView<const T>> b, const FastMMConfig& cfg,
                 std::span<T> scratch) {
  cfg.validate();
  check_mm_operands(c, a, b);
  detail::require_storage(c, a, b);
  const std::size_t need = scratch_at(c.rows(), c.cols(), a.cols(), 0, cfg);
  if (scratch.size() < need)
    throw std::invalid_argument("winograd_mm: scratch holds " + std::to_string(scratch.size()) +
                                " elements, needs " + std::to_string(need));
  winograd_rec(c, a, b, cfg, 0, scratch.data());
}

template <class T>
void winograd_mm(MatrixView<T> c, std::type_identity_t<MatrixView<const T>> a,
                 std::type_identity_t<MatrixView<const T>> b, const FastMMConfig& cfg) {
  std::vector<T> scratch(winograd_scratch_size(c.rows(), c.cols(), a.cols(), cfg));
  winograd_mm<T>(c, a, b, cfg, std::span<T>(scratch));
}

std::uint64_t flop_count_fast(std::uint64_t n, const FastMMConfig& cfg) {
  cfg.validate();
  std::uint64_t levels = 0;
  std::uint64_t leaf = n;
  while (levels < cfg.max_depth && leaf > cfg.cutoff && leaf >= 2) {
    leaf /= 2;
    ++levels;
  }
  std::uint64_t f = 2 * leaf * leaf * leaf - leaf * leaf;
  for (std::uint64_t half = leaf; levels > 0; --levels, half *= 2) f = 7 * f + 15 * half * half;
  return f;
}

template void winograd_mm<float>(MatrixView<float>, MatrixView<const float>,
                                 MatrixView<const float>, const FastMMConfig&, std::span<float>);
template void winograd_mm<double>(MatrixView<double>, MatrixView<const double>,
                                  MatrixView<const double>, const FastMMConfig&,
                                  std::span<double>);
template void winograd_mm<float>(MatrixView<float>, MatrixView<const float>,
                                 MatrixView<const float>, const FastMMConfig&);
template void winograd_mm<double>(MatrixView<double>, MatrixView<const double>,
                                  MatrixView<const double>, const FastMMConfig&);

}  // namespace hgemm
