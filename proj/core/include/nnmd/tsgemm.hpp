#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nnmd/types.hpp"

namespace nnmd {

enum class PrecisionMode { Double, MixFp32, MixFp16 };

const char* to_string(PrecisionMode mode);
PrecisionMode parse_precision(const std::string& name);

/// Dense row-major matrix.
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows_ * cols_)
      throw Error(ErrorKind::Dimension, "matrix value count does not match shape");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }
  T* row(std::size_t i) { return data_.data() + i * cols_; }
  const T* row(std::size_t i) const { return data_.data() + i * cols_; }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  void resize(std::size_t rows, std::size_t cols) {
    rows_ = rows;
    cols_ = cols;
    data_.assign(rows * cols, T(0));
  }
  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Matrix<U> cast() const {
    Matrix<U> out(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i)
      out.values()[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool operator==(const Matrix& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Rows at or below this count take the row-broadcast kernel.
inline constexpr std::size_t kSkinnyRows = 3;

namespace detail {

template <typename T>
void check_gemm_shapes(std::size_t m, std::size_t k, std::size_t kb,
                       std::size_t n, const Matrix<T>& c) {
  if (k != kb)
    throw Error(ErrorKind::Dimension, "gemm inner dimensions differ: " +
                                          std::to_string(k) + " vs " +
                                          std::to_string(kb));
  if (c.rows() != m || c.cols() != n)
    throw Error(ErrorKind::Dimension, "gemm output shape mismatch");
}

// C[i,:] += sum_k A[i,k] * B[k,:], k ascending.
template <typename T>
void gemm_row_broadcast(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    T* __restrict ci = c.row(i);
    const T* ai = a.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T s = ai[k];
      const T* __restrict bk = b.row(k);
      for (std::size_t j = 0; j < n; ++j) ci[j] += s * bk[j];
    }
  }
}

// Tiled over (i, j); every element still accumulates over k in ascending
// order so the result is order-identical to the skinny kernel.
template <typename T>
void gemm_blocked(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  constexpr std::size_t kTileI = 4;
  constexpr std::size_t kTileJ = 64;
  const std::size_t m = a.rows(), n = b.cols(), kk = a.cols();
  for (std::size_t i0 = 0; i0 < m; i0 += kTileI) {
    const std::size_t i1 = std::min(m, i0 + kTileI);
    for (std::size_t j0 = 0; j0 < n; j0 += kTileJ) {
      const std::size_t j1 = std::min(n, j0 + kTileJ);
      for (std::size_t k = 0; k < kk; ++k) {
        const T* __restrict bk = b.row(k);
        for (std::size_t i = i0; i < i1; ++i) {
          const T s = a(i, k);
          T* __restrict ci = c.row(i);
          for (std::size_t j = j0; j < j1; ++j) ci[j] += s * bk[j];
        }
      }
    }
  }
}

}  // namespace detail

/// C += A * B. Shapes: A m x k, B k x n, C m x n.
template <typename T>
void gemm_nn(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  detail::check_gemm_shapes(a.rows(), a.cols(), b.rows(), b.cols(), c);
  if (a.rows() <= kSkinnyRows)
    detail::gemm_row_broadcast(a, b, c);
  else
    detail::gemm_blocked(a, b, c);
}

/// Always the blocked path; exposed for oracle comparison.
template <typename T>
void gemm_nn_general(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  detail::check_gemm_shapes(a.rows(), a.cols(), b.rows(), b.cols(), c);
  detail::gemm_blocked(a, b, c);
}

template <typename T>
Matrix<T> gemm_nn(const Matrix<T>& a, const Matrix<T>& b) {
  Matrix<T> c(a.rows(), b.cols());
  gemm_nn(a, b, c);
  return c;
}

template <typename T>
Matrix<T> prepack_transpose(const Matrix<T>& w) {
  Matrix<T> t(w.cols(), w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) t(j, i) = w(i, j);
  return t;
}

/// Nearest binary16 value (ties to even), saturating at +-65504. NaN passes.
double quantize_fp16(double x);
inline float quantize_fp16(float x) {
  return static_cast<float>(quantize_fp16(static_cast<double>(x)));
}

template <typename T>
Matrix<float> quantize_fp16_copy(const Matrix<T>& m) {
  Matrix<float> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i)
    out.values()[i] = static_cast<float>(quantize_fp16(static_cast<double>(m.values()[i])));
  return out;
}

/// C += A * B with both operands stored as binary16 and fp32 accumulation.
template <typename T>
void gemm_fp16(const Matrix<T>& a, const Matrix<float>& b_half, Matrix<T>& c) {
  detail::check_gemm_shapes(a.rows(), a.cols(), b_half.rows(), b_half.cols(), c);
  const Matrix<float> ah = quantize_fp16_copy(a);
  Matrix<float> acc = c.template cast<float>();
  gemm_nn(ah, b_half, acc);
  for (std::size_t i = 0; i < c.size(); ++i)
    c.values()[i] = static_cast<T>(acc.values()[i]);
}

template <typename T>
Matrix<T> gemm_fp16(const Matrix<T>& a, const Matrix<T>& b) {
  Matrix<T> c(a.rows(), b.cols());
  gemm_fp16(a, quantize_fp16_copy(b), c);
  return c;
}

}  // namespace nnmd
