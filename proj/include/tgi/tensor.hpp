// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major matrix and the deterministic RNG shared by every module.
// All reductions run in a fixed index order so results are bit-reproducible.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <algorithm>
#include <initializer_list>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tgi/errors.hpp"

namespace tgi {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      detail::require(row.size() == c, "Matrix::from_rows: ragged rows");
      std::size_t j = 0;
      for (double v : row) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline bool all_finite(std::span<const double> values) {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

// a (n x k) * b (k x m)
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  detail::require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double av = a(i, k);
      auto src = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += av * src[j];
    }
  }
  return out;
}

// a (n x k) * b^T where b is (m x k)
inline Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  detail::require(a.cols() == b.cols(), "matmul_transposed: inner dimension mismatch");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ar = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto br = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < ar.size(); ++k) acc += ar[k] * br[k];
      out(i, j) = acc;
    }
  }
  return out;
}

inline void add_inplace(Matrix& dst, const Matrix& src, double scale = 1.0) {
  detail::require(dst.rows() == src.rows() && dst.cols() == src.cols(), "add_inplace: shape mismatch");
  auto d = dst.flat();
  auto s = src.flat();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
}

inline Matrix slice_cols(const Matrix& m, std::size_t begin, std::size_t count) {
  detail::require(begin + count <= m.cols(), "slice_cols: range out of bounds");
  Matrix out(m.rows(), count);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = m(r, begin + c);
  return out;
}

inline void assign_cols(Matrix& dst, std::size_t begin, const Matrix& src) {
  detail::require(dst.rows() == src.rows() && begin + src.cols() <= dst.cols(), "assign_cols: shape mismatch");
  for (std::size_t r = 0; r < src.rows(); ++r)
    for (std::size_t c = 0; c < src.cols(); ++c) dst(r, begin + c) = src(r, c);
}

inline Matrix vstack(const Matrix& top, const Matrix& bottom) {
  detail::require(top.cols() == bottom.cols(), "vstack: column mismatch");
  Matrix out(top.rows() + bottom.rows(), top.cols());
  auto dst = out.flat();
  auto a = top.flat();
  auto b = bottom.flat();
  std::copy(a.begin(), a.end(), dst.begin());
  std::copy(b.begin(), b.end(), dst.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

// Parameter-free RMS normalisation of each row.
inline Matrix rms_norm_rows(const Matrix& x, double eps = 1e-6) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto src = x.row(r);
    double ss = 0.0;
    for (double v : src) ss += v * v;
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(src.size()) + eps);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c] * inv;
  }
  return out;
}

// std::mt19937_64 has a standard-mandated output sequence; the distributions
// on top are implemented here because std:: distributions are not portable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  Matrix normal_matrix(std::size_t rows, std::size_t cols, double stddev = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.flat()) v = stddev * normal();
    return m;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Derives an independent stream seed from a base seed and a label.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Matrix with orthonormal rows (rows <= cols) via modified Gram-Schmidt on
// seeded Gaussian rows.
inline Matrix orthonormal_rows(std::size_t rows, std::size_t cols, Rng& rng) {
  detail::require(rows <= cols, "orthonormal_rows: rows must not exceed cols");
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (;;) {
      auto v = m.row(r);
      for (double& x : v) x = rng.normal();
      for (std::size_t p = 0; p < r; ++p) {
        auto u = m.row(p);
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += v[c] * u[c];
        for (std::size_t c = 0; c < cols; ++c) v[c] -= dot * u[c];
      }
      double norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > 1e-8) {
        for (double& x : v) x /= norm;
        break;
      }
    }
  }
  return m;
}

}  // namespace tgi
