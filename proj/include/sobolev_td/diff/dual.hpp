#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sobolev_td {

/// Negative-side slope of the leaky ReLU used throughout.
inline constexpr double kLeakySlope = 0.01;

/// A real value carrying one directional derivative per input coordinate.
///
/// The tangent length is fixed at construction; mixing duals of different
/// tangent lengths throws std::invalid_argument.
class DualVector {
 public:
  DualVector() = default;

  /// A constant: all tangents zero.
  DualVector(double value, std::size_t dim);
  DualVector(double value, std::vector<double> tangents);

  /// The coordinate variable x_index, i.e. tangent e_index.
  static DualVector variable(double value, std::size_t dim, std::size_t index);

  double value() const { return value_; }
  std::span<const double> tangents() const { return tangents_; }
  double tangent(std::size_t i) const { return tangents_[i]; }
  std::size_t dim() const { return tangents_.size(); }

  DualVector& operator+=(const DualVector& o);
  DualVector& operator-=(const DualVector& o);
  DualVector& operator*=(const DualVector& o);
  DualVector& operator*=(double c);
  DualVector& operator+=(double c);

  friend DualVector operator-(DualVector x);
  friend DualVector operator+(DualVector x, const DualVector& y) { return x += y; }
  friend DualVector operator-(DualVector x, const DualVector& y) { return x -= y; }
  friend DualVector operator*(DualVector x, const DualVector& y) { return x *= y; }
  friend DualVector operator*(DualVector x, double c) { return x *= c; }
  friend DualVector operator*(double c, DualVector x) { return x *= c; }
  friend DualVector operator+(DualVector x, double c) { return x += c; }
  friend DualVector operator+(double c, DualVector x) { return x += c; }

 private:
  double value_ = 0.0;
  std::vector<double> tangents_;
};

/// Leaky ReLU; the derivative at exactly 0 is taken from the x >= 0 branch.
DualVector leaky_relu(const DualVector& x, double slope = kLeakySlope);
DualVector square(const DualVector& x);
/// Euclidean norm of a vector of duals. Throws at the origin, where it is
/// not differentiable.
DualVector norm(std::span<const DualVector> xs);
/// bias + sum_i weights[i] * xs[i]
DualVector affine(std::span<const double> weights, std::span<const DualVector> xs, double bias);

}  // namespace sobolev_td
