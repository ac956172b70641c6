#pragma once

#include <Eigen/Dense>

namespace rpebo {

struct DetAdj {
  double det = 0.0;
  Eigen::MatrixXd adj;
};

/// Determinant and adjugate of a square matrix. Uses LU (adj = det * inverse)
/// when the matrix is comfortably invertible; falls back to cofactor minors
/// otherwise, so the result stays finite for singular input.
DetAdj det_adjugate(const Eigen::MatrixXd& a);

/// 2-norm condition number via SVD; +inf for singular input.
double cond_2(const Eigen::MatrixXd& a);

}  // namespace rpebo
