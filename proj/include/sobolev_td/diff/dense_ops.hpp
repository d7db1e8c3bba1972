#pragma once

// Dense building blocks shared by the tangent-carrying tape and the plain
// value-only backprop path. Both paths must call exactly these functions so
// that a value-only computation is reproduced bit for bit.

#include <Eigen/Core>

namespace sobolev_td::dense {

using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using MatMap = Eigen::Map<Eigen::MatrixXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

/// y = b + W x
inline void affine_value(const ConstMatMap& w, const ConstVecMap& b, const ConstVecMap& x, VecMap y) {
  y = b;
  y.noalias() += w * x;
}

/// Y = W X (tangent propagation through the linear part)
inline void linear_block(const ConstMatMap& w, const ConstMatMap& x, MatMap y) { y.noalias() = w * x; }

/// dW += dy x^T, db += dy, dx += W^T dy
inline void affine_backward_value(const ConstMatMap& w, const ConstVecMap& dy, const ConstVecMap& x, MatMap dw,
                                  VecMap db, VecMap dx) {
  dw.noalias() += dy * x.transpose();
  db += dy;
  dx.noalias() += w.transpose() * dy;
}

/// dW += dY X^T, dX += W^T dY
inline void linear_backward_block(const ConstMatMap& w, const ConstMatMap& dy, const ConstMatMap& x, MatMap dw,
                                  MatMap dx) {
  dw.noalias() += dy * x.transpose();
  dx.noalias() += w.transpose() * dy;
}

}  // namespace sobolev_td::dense
