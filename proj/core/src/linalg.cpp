#include "mwr/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mwr/errors.hpp"

namespace mwr {

void RealVector::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

RealVector zeros(std::size_t n) { return RealVector(n, 0.0); }

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": length mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
  }
}

bool all_finite(std::span<const double> v) noexcept {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void require_finite(std::span<const double> v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw NumericalError(std::string(what) + ": non-finite value at index " +
                           std::to_string(i));
    }
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_length(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  if (!std::isfinite(s)) throw NumericalError("dot: non-finite result");
  return s;
}

double dot(const RealVector& a, const RealVector& b) { return dot(a.span(), b.span()); }

RealVector scaled_add(double alpha, const RealVector& x, const RealVector& y) {
  require_same_length(x.size(), y.size(), "scaled_add");
  RealVector out = y;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += alpha * x[i];
  require_finite(out.span(), "scaled_add");
  return out;
}

void axpy(double alpha, const RealVector& x, RealVector& y) {
  require_same_length(x.size(), y.size(), "axpy");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

double squared_norm(const RealVector& v) { return dot(v, v); }

}  // namespace mwr
