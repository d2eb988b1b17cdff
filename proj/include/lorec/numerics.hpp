#pragma once

// Dense numerical kernel shared by every other module: a row-major matrix,
// row-vector products, softmax, activations and normalized entropy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lorec/errors.hpp"

namespace lorec {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, Vector data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("matrix data size " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  const Vector& data() const noexcept { return data_; }
  Vector& data() noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

enum class Activation { relu, silu };

inline std::string_view to_string(Activation a) {
  return a == Activation::relu ? "relu" : "silu";
}

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "silu") return Activation::silu;
  throw ParameterError("unknown activation kind '" + std::string(s) + "'");
}

inline double activate(double x, Activation kind) {
  switch (kind) {
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::silu:
      return x / (1.0 + std::exp(-x));
  }
  throw ParameterError("unknown activation kind");
}

inline Vector activation(std::span<const double> x, Activation kind) {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw NumericError("activation: non-finite input");
    out[i] = activate(x[i], kind);
  }
  return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// y = x * m, with x treated as a row vector of length m.rows().
inline Vector row_times(std::span<const double> x, const Matrix& m) {
  if (x.size() != m.rows()) {
    throw ShapeError("row_times: vector length " + std::to_string(x.size()) +
                     " vs matrix rows " + std::to_string(m.rows()));
  }
  Vector y(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const auto mr = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) y[c] += xr * mr[c];
  }
  return y;
}

// Every row of a times b.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const Vector y = row_times(a.row(r), b);
    std::copy(y.begin(), y.end(), out.row(r).begin());
  }
  return out;
}

inline void add_inplace(std::span<double> acc, std::span<const double> x) {
  if (acc.size() != x.size()) throw ShapeError("add: length mismatch");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
}

inline bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

// Lowest index among the maxima.
inline std::size_t argmax(std::span<const double> x) {
  if (x.empty()) throw DimensionError("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (x[i] > x[best]) best = i;
  }
  return best;
}

inline Vector softmax(std::span<const double> logits) {
  if (logits.empty()) throw DimensionError("softmax: empty input");
  if (!all_finite(logits)) throw NumericError("softmax: non-finite logit");
  const double peak = *std::max_element(logits.begin(), logits.end());
  Vector out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

// Probabilities below this floor contribute nothing to entropy sums.
inline constexpr double kEntropyFloor = 1e-12;

/// Shannon entropy of the top_n largest probabilities divided by log(top_n).
/// With renormalize (the default) the selected mass is rescaled to one first,
/// which keeps the result in [0, 1]; the raw variant is clamped into [0, 1].
inline double normalized_entropy(std::span<const double> probs, std::size_t top_n,
                                 bool renormalize = true) {
  if (top_n < 2) throw ParameterError("normalized_entropy: top_n must be >= 2");
  if (top_n > probs.size()) {
    throw ParameterError("normalized_entropy: top_n " + std::to_string(top_n) +
                         " exceeds distribution size " + std::to_string(probs.size()));
  }
  Vector top(probs.begin(), probs.end());
  if (top_n < top.size()) {
    std::nth_element(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(top_n), top.end(),
                     std::greater<>());
    top.resize(top_n);
  }
  double mass = 0.0;
  for (double p : top) mass += p;
  if (!(mass > 0.0)) throw NumericError("normalized_entropy: zero probability mass");
  const auto [lo, hi] = std::minmax_element(top.begin(), top.end());
  if (renormalize && *lo == *hi) return 1.0;  // uniform selection, exact
  const double scale = renormalize ? 1.0 / mass : 1.0;
  double h = 0.0;
  for (double p : top) {
    const double q = p * scale;
    if (q >= kEntropyFloor) h -= q * std::log(q);
  }
  const double value = h / std::log(static_cast<double>(top_n));
  return std::clamp(value, 0.0, 1.0);
}

}  // namespace lorec
