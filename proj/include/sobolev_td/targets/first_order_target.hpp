#pragma once

#include <Eigen/Core>

namespace sobolev_td {

/// Bellman target value and its gradients with respect to (s, a).
struct FirstOrderTarget {
  double y = 0.0;
  Eigen::VectorXd dy_ds;
  Eigen::VectorXd dy_da;
  /// Bootstrap action a' used for the target.
  Eigen::VectorXd a_prime;
  /// True iff a' is the unique grid argmax and not at a grid boundary.
  /// Always true for policy-based targets.
  bool a_prime_interior = true;
};

}  // namespace sobolev_td
