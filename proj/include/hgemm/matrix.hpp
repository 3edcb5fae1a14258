#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <limits>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "hgemm/error.hpp"

namespace hgemm {

// Side of the square output tile computed by one unit of work in blocked_mm.
inline constexpr std::size_t kTile = 32;

// Rectangular window into row-major storage. Element (i, j) of the view
// aliases element (row_offset() + i, col_offset() + j) of the base matrix.
// T may be const-qualified for read-only operands.
//
// A view without storage (see shape_only) carries geometry only; it is used
// by the scheduler's trace-only runs where no element is ever touched.
template <class T>
class MatrixView {
 public:
  using value_type = std::remove_const_t<T>;

  MatrixView() = default;

  MatrixView(T* origin, std::size_t base_rows, std::size_t base_cols, std::size_t ld,
             std::size_t row_off, std::size_t col_off, std::size_t rows, std::size_t cols)
      : origin_(origin),
        base_rows_(base_rows),
        base_cols_(base_cols),
        ld_(ld),
        row_off_(row_off),
        col_off_(col_off),
        rows_(rows),
        cols_(cols) {
    if (ld_ < base_cols_) throw DimensionError("leading dimension smaller than column count");
    if (row_off_ + rows_ > base_rows_ || col_off_ + cols_ > base_cols_)
      throw DimensionError("view exceeds its base matrix");
  }

  static MatrixView shape_only(std::size_t rows, std::size_t cols) {
    return MatrixView(nullptr, rows, cols, cols, 0, 0, rows, cols);
  }

  // const view from a mutable one
  template <class U = T>
    requires(!std::is_const_v<U>)
  operator MatrixView<const U>() const {
    return MatrixView<const U>(origin_, base_rows_, base_cols_, ld_, row_off_, col_off_, rows_,
                               cols_);
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t ld() const noexcept { return ld_; }
  std::size_t row_offset() const noexcept { return row_off_; }
  std::size_t col_offset() const noexcept { return col_off_; }
  std::size_t base_rows() const noexcept { return base_rows_; }
  std::size_t base_cols() const noexcept { return base_cols_; }
  bool empty() const noexcept { return rows_ == 0 || cols_ == 0; }
  bool has_storage() const noexcept { return origin_ != nullptr; }

  // Element (0, 0) of the base matrix; identifies the storage a view belongs to.
  T* origin() const noexcept { return origin_; }
  // Element (0, 0) of the view.
  T* data() const noexcept { return origin_ ? origin_ + row_off_ * ld_ + col_off_ : nullptr; }
  T* row(std::size_t i) const noexcept { return data() + i * ld_; }

  T& operator()(std::size_t i, std::size_t j) const noexcept {
    return origin_[(row_off_ + i) * ld_ + col_off_ + j];
  }

  MatrixView sub(std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) const {
    if (r0 + rows > rows_ || c0 + cols > cols_) throw DimensionError("sub-view out of range");
    return MatrixView(origin_, base_rows_, base_cols_, ld_, row_off_ + r0, col_off_ + c0, rows,
                      cols);
  }

 private:
  T* origin_ = nullptr;
  std::size_t base_rows_ = 0;
  std::size_t base_cols_ = 0;
  std::size_t ld_ = 0;
  std::size_t row_off_ = 0;
  std::size_t col_off_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

// Dense row-major matrix with an explicit leading dimension.
template <class T>
class Matrix {
  static_assert(std::is_floating_point_v<T>);

 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : Matrix(rows, cols, cols) {}
  Matrix(std::size_t rows, std::size_t cols, std::size_t ld)
      : rows_(rows), cols_(cols), ld_(ld), data_(rows * ld, T{0}) {
    if (ld < cols) throw DimensionError("leading dimension smaller than column count");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t ld() const noexcept { return ld_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  T& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * ld_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * ld_ + j]; }

  MatrixView<T> view() noexcept {
    return MatrixView<T>(data_.data(), rows_, cols_, ld_, 0, 0, rows_, cols_);
  }
  MatrixView<const T> view() const noexcept {
    return MatrixView<const T>(data_.data(), rows_, cols_, ld_, 0, 0, rows_, cols_);
  }
  MatrixView<const T> cview() const noexcept { return view(); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t ld_ = 0;
  std::vector<T> data_;
};

template <class T>
struct Quadrants {
  MatrixView<T> q0, q1, q2, q3;
};

// q0 is ceil(m/2) x ceil(n/2), q1 ceil x floor, q2 floor x ceil, q3 floor x floor.
template <class T>
Quadrants<T> split_quadrants(const MatrixView<T>& d) {
  const std::size_t top = (d.rows() + 1) / 2;
  const std::size_t left = (d.cols() + 1) / 2;
  const std::size_t bottom = d.rows() - top;
  const std::size_t right = d.cols() - left;
  return {d.sub(0, 0, top, left), d.sub(0, left, top, right), d.sub(top, 0, bottom, left),
          d.sub(top, left, bottom, right)};
}

namespace detail {

template <class T, class U>
bool views_overlap(const MatrixView<T>& x, const MatrixView<U>& y) {
  if (x.empty() || y.empty() || !x.has_storage() || !y.has_storage()) return false;
  const auto* xo = static_cast<const void*>(x.origin());
  const auto* yo = static_cast<const void*>(y.origin());
  if (xo == yo && x.ld() == y.ld()) {
    return x.row_offset() < y.row_offset() + y.rows() &&
           y.row_offset() < x.row_offset() + x.rows() &&
           x.col_offset() < y.col_offset() + y.cols() && y.col_offset() < x.col_offset() + x.cols();
  }
  const auto* x_lo = reinterpret_cast<const char*>(x.data());
  const auto* x_hi = reinterpret_cast<const char*>(x.row(x.rows() - 1) + x.cols());
  const auto* y_lo = reinterpret_cast<const char*>(y.data());
  const auto* y_hi = reinterpret_cast<const char*>(y.row(y.rows() - 1) + y.cols());
  return x_lo < y_hi && y_lo < x_hi;
}

}  // namespace detail

// Validates C = A * B shapes and that C overlaps neither operand.
template <class T>
void check_mm_operands(const MatrixView<T>& c, const MatrixView<const T>& a,
                       const MatrixView<const T>& b) {
  if (a.rows() != c.rows() || b.cols() != c.cols() || a.cols() != b.rows())
    throw DimensionError("shape mismatch: A is " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + ", B is " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ", C is " + std::to_string(c.rows()) + "x" +
                         std::to_string(c.cols()));
  if (detail::views_overlap(c, a) || detail::views_overlap(c, b))
    throw AliasError("output view aliases an operand");
}

namespace detail {

template <class T>
void require_storage(const MatrixView<T>& v) {
  if (!v.empty() && !v.has_storage()) throw std::invalid_argument("view has no storage");
}

template <class T>
void require_storage(const MatrixView<T>& c, const MatrixView<const T>& a,
                     const MatrixView<const T>& b) {
  require_storage(c);
  if (c.empty()) return;
  require_storage(a);
  require_storage(b);
}

}  // namespace detail

// Classic triple loop; the reference every other multiply is checked against.
template <class T>
void naive_mm(MatrixView<T> c, std::type_identity_t<MatrixView<const T>> a,
              std::type_identity_t<MatrixView<const T>> b, bool accumulate) {
  check_mm_operands(c, a, b);
  detail::require_storage(c, a, b);
  const std::size_t k = a.cols();
  for (std::size_t i = 0; i < c.rows(); ++i) {
    for (std::size_t j = 0; j < c.cols(); ++j) {
      T s{0};
      for (std::size_t p = 0; p < k; ++p) s += a(i, p) * b(p, j);
      c(i, j) = accumulate ? c(i, j) + s : s;
    }
  }
}

// Tiled multiply: every 32x32 output tile is an independent unit of work and
// tiles may run in parallel. Per element the summation order is ascending in
// the inner index, so the result does not depend on the thread count.
template <class T>
void blocked_mm(MatrixView<T> c, std::type_identity_t<MatrixView<const T>> a,
                std::type_identity_t<MatrixView<const T>> b, bool accumulate);

// ||X - Y||_F / max(||Y||_F, tiny), accumulated in double.
template <class T, class U>
double rel_error(const MatrixView<T>& x, const MatrixView<U>& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw DimensionError("rel_error: shape mismatch");
  double diff = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double yv = static_cast<double>(y(i, j));
      const double d = static_cast<double>(x(i, j)) - yv;
      diff += d * d;
      ref += yv * yv;
    }
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), std::numeric_limits<double>::min());
}

template <class T>
void fill_uniform(MatrixView<T> m, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = static_cast<T>(dist(rng));
}

template <class T>
Matrix<T> random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  Matrix<T> m(rows, cols);
  fill_uniform(m.view(), rng);
  return m;
}

template <class T>
void copy_into(MatrixView<T> dst, std::type_identity_t<MatrixView<const T>> src) {
  if (dst.rows() != src.rows() || dst.cols() != src.cols())
    throw DimensionError("copy_into: shape mismatch");
  for (std::size_t i = 0; i < dst.rows(); ++i)
    std::copy_n(src.row(i), src.cols(), dst.row(i));
}

// Text fixtures: first line "rows cols", then one line of space-separated
// decimals per row.
template <class T>
Matrix<T> read_matrix_text(std::istream& in);
template <class T>
void write_matrix_text(std::ostream& out, const MatrixView<const T>& m);

extern template void blocked_mm<float>(MatrixView<float>, MatrixView<const float>,
                                       MatrixView<const float>, bool);
extern template void blocked_mm<double>(MatrixView<double>, MatrixView<const double>,
                                        MatrixView<const double>, bool);

using MatrixF = Matrix<float>;
using ViewF = MatrixView<float>;
using ConstViewF = MatrixView<const float>;

}  // namespace hgemm
