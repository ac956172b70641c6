#include "rpebo/linalg.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rpebo {

namespace {

double minor_det(const Eigen::MatrixXd& a, int drop_row, int drop_col) {
  const int n = static_cast<int>(a.rows());
  Eigen::MatrixXd m(n - 1, n - 1);
  for (int r = 0, mr = 0; r < n; ++r) {
    if (r == drop_row) continue;
    for (int c = 0, mc = 0; c < n; ++c) {
      if (c == drop_col) continue;
      m(mr, mc++) = a(r, c);
    }
    ++mr;
  }
  return m.partialPivLu().determinant();
}

}  // namespace

DetAdj det_adjugate(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("det_adjugate: matrix must be square");
  }
  const int n = static_cast<int>(a.rows());
  DetAdj out;
  if (n == 0) {
    out.det = 1.0;
    out.adj.resize(0, 0);
    return out;
  }
  if (n == 1) {
    out.det = a(0, 0);
    out.adj = Eigen::MatrixXd::Ones(1, 1);
    return out;
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  out.det = lu.determinant();

  const double pivot_max = std::abs(lu.maxPivot());
  const double threshold = pivot_max * n * std::numeric_limits<double>::epsilon() * 16.0;
  const bool well_conditioned =
      pivot_max > 0.0 && lu.rank() == n &&
      std::abs(lu.matrixLU().diagonal().cwiseAbs().minCoeff()) > threshold;

  if (well_conditioned && std::isfinite(out.det) && out.det != 0.0) {
    out.adj = out.det * lu.inverse();
    return out;
  }

  // Near-singular: build the adjugate entrywise from cofactor minors.
  out.adj.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
      out.adj(j, i) = sign * minor_det(a, i, j);
    }
  }
  return out;
}

double cond_2(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) <= 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return s(0) / (s(s.size() - 1));
}

}  // namespace rpebo
