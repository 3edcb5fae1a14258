#include "hgemm/matrix.hpp"

#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace hgemm {

namespace {

template <class T>
void tile_kernel(MatrixView<T> c, const MatrixView<const T>& a, const MatrixView<const T>& b,
                 std::size_t i0, std::size_t j0, bool accumulate) {
  const std::size_t ib = std::min(kTile, c.rows() - i0);
  const std::size_t jb = std::min(kTile, c.cols() - j0);
  const std::size_t k = a.cols();
  std::array<T, kTile * kTile> acc{};
  for (std::size_t p0 = 0; p0 < k; p0 += kTile) {
    const std::size_t pe = std::min(k, p0 + kTile);
    for (std::size_t i = 0; i < ib; ++i) {
      const T* arow = a.row(i0 + i);
      T* crow = acc.data() + i * kTile;
      for (std::size_t p = p0; p < pe; ++p) {
        const T av = arow[p];
        const T* brow = b.row(p) + j0;
        for (std::size_t j = 0; j < jb; ++j) crow[j] += av * brow[j];
      }
    }
  }
  for (std::size_t i = 0; i < ib; ++i) {
    T* out = c.row(i0 + i) + j0;
    const T* src = acc.data() + i * kTile;
    if (accumulate) {
      for (std::size_t j = 0; j < jb; ++j) out[j] += src[j];
    } else {
      std::copy_n(src, jb, out);
    }
  }
}

}  // namespace

template <class T>
void blocked_mm(MatrixView<T> c, std::type_identity_t<MatrixView<const T>> a,
                std::type_identity_t<MatrixView<const T>> b, bool accumulate) {
  check_mm_operands(c, a, b);
  detail::require_storage(c, a, b);
  if (c.empty()) return;
  const auto tiles_m = static_cast<long long>((c.rows() + kTile - 1) / kTile);
  const auto tiles_n = static_cast<long long>((c.cols() + kTile - 1) / kTile);
  const long long tiles = tiles_m * tiles_n;
#pragma omp parallel for schedule(static) if (tiles > 1)
  for (long long t = 0; t < tiles; ++t) {
    const auto i0 = static_cast<std::size_t>(t / tiles_n) * kTile;
    const auto j0 = static_cast<std::size_t>(t % tiles_n) * kTile;
    tile_kernel(c, a, b, i0, j0, accumulate);
  }
}

template void blocked_mm<float>(MatrixView<float>, MatrixView<const float>,
                                MatrixView<const float>, bool);
template void blocked_mm<double>(MatrixView<double>, MatrixView<const double>,
                                 MatrixView<const double>, bool);

template <class T>
Matrix<T> read_matrix_text(std::istream& in) {
  std::size_t rows = 0;
  std::size_t cols = 0;
  if (!(in >> rows >> cols)) throw std::invalid_argument("matrix fixture: missing header");
  Matrix<T> m(rows, cols);
  std::string token;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (!(in >> token))
        throw std::invalid_argument("matrix fixture: truncated at row " + std::to_string(i));
      T value{};
      const auto* end = token.data() + token.size();
      auto [ptr, ec] = std::from_chars(token.data(), end, value);
      if (ec != std::errc{} || ptr != end)
        throw std::invalid_argument("matrix fixture: bad number '" + token + "'");
      m(i, j) = value;
    }
  }
  return m;
}

template <class T>
void write_matrix_text(std::ostream& out, const MatrixView<const T>& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  std::array<char, 64> buf{};
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), m(i, j));
      if (j) out << ' ';
      out.write(buf.data(), ptr - buf.data());
    }
    out << '\n';
  }
}

template Matrix<float> read_matrix_text<float>(std::istream&);
template Matrix<double> read_matrix_text<double>(std::istream&);
template void write_matrix_text<float>(std::ostream&, const MatrixView<const float>&);
template void write_matrix_text<double>(std::ostream&, const MatrixView<const double>&);

}  // namespace hgemm
