#pragma once

// Dense numeric kernels, activations and the seeded random stream shared by
// every other module. All arithmetic is double precision.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wsd/errors.hpp"

namespace wsd {

using Vector = std::vector<double>;

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {

inline void require_same_length(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": length mismatch " + std::to_string(a) + " vs " +
                     std::to_string(b));
  }
}

}  // namespace detail

inline double dot(std::span<const double> a, std::span<const double> b) {
  detail::require_same_length(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// result[i] = sum_j m(i, j) * v[j]
inline Vector matvec(const Matrix& m, std::span<const double> v) {
  if (m.cols() != v.size()) {
    throw ShapeError("matvec: matrix has " + std::to_string(m.cols()) + " columns, vector has " +
                     std::to_string(v.size()) + " elements");
  }
  Vector out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * v[j];
    out[i] = s;
  }
  return out;
}

/// result[j] = sum_i m(i, j) * v[i]
inline Vector matvec_transposed(const Matrix& m, std::span<const double> v) {
  if (m.rows() != v.size()) {
    throw ShapeError("matvec_transposed: matrix has " + std::to_string(m.rows()) +
                     " rows, vector has " + std::to_string(v.size()) + " elements");
  }
  Vector out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    const double vi = v[i];
    if (vi == 0.0) continue;
    for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j] * vi;
  }
  return out;
}

/// m += scale * a * b^T
inline void add_outer(Matrix& m, std::span<const double> a, std::span<const double> b,
                      double scale = 1.0) {
  detail::require_same_length(m.rows(), a.size(), "add_outer");
  detail::require_same_length(m.cols(), b.size(), "add_outer");
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ai = a[i] * scale;
    if (ai == 0.0) continue;
    auto r = m.row(i);
    for (std::size_t j = 0; j < b.size(); ++j) r[j] += ai * b[j];
  }
}

/// Cosine similarity. A zero-norm operand yields 0 so that padding carries no
/// evidence.
inline double cosine(std::span<const double> a, std::span<const double> b) {
  detail::require_same_length(a.size(), b.size(), "cosine");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  const double c = ab / (std::sqrt(aa) * std::sqrt(bb));
  return std::clamp(c, -1.0, 1.0);
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double tanh_(double x) { return std::tanh(x); }

// NaN passes through so divergence is not hidden.
inline double relu(double x) { return x < 0.0 ? 0.0 : x; }

inline Vector softmax(std::span<const double> scores) {
  if (scores.empty()) throw ShapeError("softmax: empty input");
  const double mx = *std::max_element(scores.begin(), scores.end());
  Vector out(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

/// Index of the first maximal element.
inline std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw ShapeError("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the C++ standard; every distribution on top of it is
/// implemented here, because the std:: distributions are not portable across
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  /// Independent stream keyed by (seed, a, b), e.g. (run seed, epoch, example).
  static Rng derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return Rng(splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b + 0x632be59bd9b4e019ULL)));
  }

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in the open interval (0, 1).
  double uniform01() { return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52; }

  /// Uniform in the open interval (lo, hi).
  double uniform(double lo, double hi) {
    for (;;) {
      const double x = lo + (hi - lo) * uniform01();
      if (x > lo && x < hi) return x;
    }
  }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ConfigError("Rng::below: empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Fisher-Yates.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Inverted-dropout mask: each element is 1/keep_prob with probability
/// keep_prob, else 0.
inline Vector bernoulli_mask(Rng& rng, std::size_t len, double keep_prob) {
  if (!(keep_prob > 0.0) || keep_prob > 1.0) {
    throw ConfigError("bernoulli_mask: keep probability must be in (0, 1], got " +
                      std::to_string(keep_prob));
  }
  Vector mask(len, 1.0);
  if (keep_prob == 1.0) return mask;
  const double scale = 1.0 / keep_prob;
  for (double& m : mask) m = rng.uniform01() < keep_prob ? scale : 0.0;
  return mask;
}

inline void hadamard_inplace(std::span<double> a, std::span<const double> b) {
  detail::require_same_length(a.size(), b.size(), "hadamard");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace wsd
