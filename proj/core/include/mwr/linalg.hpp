#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace mwr {

/// Fixed-length vector of doubles. Model parameters, virtual parameters and
/// every gradient share this flat layout.
class RealVector {
 public:
  RealVector() = default;
  explicit RealVector(std::size_t n, double fill = 0.0) : values_(n, fill) {}
  RealVector(std::initializer_list<double> init) : values_(init) {}
  explicit RealVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  const std::vector<double>& values() const noexcept { return values_; }

  void fill(double v);

  friend bool operator==(const RealVector&, const RealVector&) = default;

 private:
  std::vector<double> values_;
};

RealVector zeros(std::size_t n);

/// Sum of a[i] * b[i] in index order. Throws DimensionError on length
/// mismatch and NumericalError on a non-finite result.
double dot(const RealVector& a, const RealVector& b);
double dot(std::span<const double> a, std::span<const double> b);

/// Returns y + alpha * x. Inputs are not modified.
RealVector scaled_add(double alpha, const RealVector& x, const RealVector& y);

/// y += alpha * x, in place.
void axpy(double alpha, const RealVector& x, RealVector& y);

double squared_norm(const RealVector& v);

bool all_finite(std::span<const double> v) noexcept;

/// Throws NumericalError naming `what` if any entry is NaN or Inf.
void require_finite(std::span<const double> v, const char* what);

void require_same_length(std::size_t a, std::size_t b, const char* what);

}  // namespace mwr
