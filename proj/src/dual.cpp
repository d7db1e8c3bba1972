#include "sobolev_td/diff/dual.hpp"

#include <cmath>
#include <stdexcept>

namespace sobolev_td {

namespace {

void check_same_dim(const DualVector& a, const DualVector& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("DualVector: tangent length mismatch");
  }
}

}  // namespace

DualVector::DualVector(double value, std::size_t dim) : value_(value), tangents_(dim, 0.0) {}

DualVector::DualVector(double value, std::vector<double> tangents)
    : value_(value), tangents_(std::move(tangents)) {}

DualVector DualVector::variable(double value, std::size_t dim, std::size_t index) {
  if (index >= dim) throw std::invalid_argument("DualVector::variable: index out of range");
  DualVector d(value, dim);
  d.tangents_[index] = 1.0;
  return d;
}

DualVector& DualVector::operator+=(const DualVector& o) {
  check_same_dim(*this, o);
  value_ += o.value_;
  for (std::size_t i = 0; i < tangents_.size(); ++i) tangents_[i] += o.tangents_[i];
  return *this;
}

DualVector& DualVector::operator-=(const DualVector& o) {
  check_same_dim(*this, o);
  value_ -= o.value_;
  for (std::size_t i = 0; i < tangents_.size(); ++i) tangents_[i] -= o.tangents_[i];
  return *this;
}

DualVector& DualVector::operator*=(const DualVector& o) {
  check_same_dim(*this, o);
  for (std::size_t i = 0; i < tangents_.size(); ++i) {
    tangents_[i] = tangents_[i] * o.value_ + value_ * o.tangents_[i];
  }
  value_ *= o.value_;
  return *this;
}

DualVector& DualVector::operator*=(double c) {
  value_ *= c;
  for (double& t : tangents_) t *= c;
  return *this;
}

DualVector& DualVector::operator+=(double c) {
  value_ += c;
  return *this;
}

DualVector operator-(DualVector x) {
  x *= -1.0;
  return x;
}

DualVector leaky_relu(const DualVector& x, double slope) {
  const double d = x.value() >= 0.0 ? 1.0 : slope;
  DualVector y = x;
  y *= d;
  return y;
}

DualVector square(const DualVector& x) { return x * x; }

DualVector norm(std::span<const DualVector> xs) {
  if (xs.empty()) throw std::invalid_argument("norm: empty input");
  const std::size_t dim = xs.front().dim();
  double sq = 0.0;
  for (const auto& x : xs) {
    if (x.dim() != dim) throw std::invalid_argument("norm: tangent length mismatch");
    sq += x.value() * x.value();
  }
  const double n = std::sqrt(sq);
  if (n == 0.0) throw std::domain_error("norm: not differentiable at the origin");
  std::vector<double> t(dim, 0.0);
  for (const auto& x : xs) {
    for (std::size_t j = 0; j < dim; ++j) t[j] += x.value() * x.tangent(j) / n;
  }
  return DualVector(n, std::move(t));
}

DualVector affine(std::span<const double> weights, std::span<const DualVector> xs, double bias) {
  if (weights.size() != xs.size()) throw std::invalid_argument("affine: size mismatch");
  if (xs.empty()) return DualVector(bias, 0);
  DualVector acc(bias, xs.front().dim());
  for (std::size_t i = 0; i < xs.size(); ++i) acc += weights[i] * xs[i];
  return acc;
}

}  // namespace sobolev_td
