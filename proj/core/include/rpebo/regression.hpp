#pragma once

#include <vector>

#include "rpebo/filters.hpp"
#include "rpebo/lie3.hpp"

namespace rpebo {

/// Stage inputs for the velocity-measured problem.
struct VelocityInput {
  Vec3 y;      // unit bearing
  Vec3 omega;  // rad/s
  Vec3 v;      // body-frame velocity
};

/// Scalar-parameter regressor for range estimation with measured velocity.
///
/// Carries the dynamic extension xi with xi_dot = -y.v, so that the range
/// satisfies r(t) = xi(t) + theta for the constant theta = r(0) - xi(0), plus
/// the filter bank producing the regression pair (phi, y_r) with
///   phi = washout[y] + alpha * lag[omega x y]
///   y_r = -lag[alpha * proj(y) v + (y.v) phi] - phi * xi
/// and y_r = phi * theta along exact trajectories. Filters are exactly
/// initialized from the first bearing sample, so the pair carries no decaying
/// initialization transient.
class ScalarRegressor {
 public:
  struct State {
    double xi = 0.0;
    Vec3 wash_y = Vec3::Zero();
    Vec3 lag_wy = Vec3::Zero();
    Vec3 lag_reg = Vec3::Zero();

    State operator+(const State& o) const {
      return {xi + o.xi, wash_y + o.wash_y, lag_wy + o.lag_wy, lag_reg + o.lag_reg};
    }
    friend State operator*(double c, const State& s) {
      return {c * s.xi, c * s.wash_y, c * s.lag_wy, c * s.lag_reg};
    }
  };

  ScalarRegressor(double alpha, const Vec3& y0, double xi0 = 0.0);

  double alpha() const { return alpha_; }
  const State& state() const { return state_; }
  void set_state(const State& s) { state_ = s; }

  State deriv(const State& s, const VelocityInput& in) const;
  Vec3 phi(const State& s, const Vec3& y) const;
  Vec3 y_r(const State& s, const Vec3& y) const;

  void step(const VelocityInput& in0, const VelocityInput& inm, const VelocityInput& in1,
            double dt);

 private:
  double alpha_;
  State state_;
};

/// Stage inputs for the IMU-only problems.
struct ImuInput {
  Vec3 y;
  Vec3 omega;
  Vec3 accel;  // measured-convention apparent acceleration
  Mat3 Q;      // attitude of the auxiliary frame at the stage time
};

/// Transition-matrix dynamic extension for the single-feature, biased-IMU
/// problem. The extended state chi = (r, v, b_a, g_c) in R^10 obeys
/// chi_dot = A chi + B(a); integrating
///   xi_dot = A xi + B,  xi(0) = 0,   Psi_dot = A Psi,  Psi(0) = I
/// gives chi(t) = xi(t) + Psi(t) chi(0) for every t, which converts state
/// estimation into identification of the constant chi(0). The same filter
/// bank as the scalar regressor turns this into the vector regression
/// y_n = psi^T theta with three scalar rows per sample.
class MatrixExtension {
 public:
  static constexpr int kDim = 10;
  using VecN = Eigen::Matrix<double, kDim, 1>;
  using MatN = Eigen::Matrix<double, kDim, kDim>;
  using PsiOut = Eigen::Matrix<double, kDim, 3>;

  struct State {
    VecN xi = VecN::Zero();
    MatN Psi = MatN::Identity();
    Vec3 wash_y = Vec3::Zero();
    Vec3 lag_wy = Vec3::Zero();
    Vec3 lag_yn = Vec3::Zero();
    Eigen::Matrix<double, 3, kDim> lag_psi = Eigen::Matrix<double, 3, kDim>::Zero();

    State operator+(const State& o) const;
    friend State operator*(double c, const State& s);
  };

  MatrixExtension(double alpha, const Vec3& y0);

  double alpha() const { return alpha_; }
  const State& state() const { return state_; }
  void set_state(const State& s) { state_ = s; }

  State deriv(const State& s, const ImuInput& in) const;
  Vec3 phi(const State& s, const Vec3& y) const;
  Vec3 y_n(const State& s, const Vec3& y) const;
  PsiOut psi(const State& s, const Vec3& y) const;

  void step(const ImuInput& in0, const ImuInput& inm, const ImuInput& in1, double dt);

 private:
  double alpha_;
  State state_;
};

/// Stage inputs for the multi-landmark navigation problem.
struct NavInput {
  std::vector<Vec3> y;
  Vec3 omega;
  Vec3 accel;
  Mat3 Q;
};

/// Stacked dynamic extension for n landmarks with known inertial positions.
/// Extended state chi = (v, b_a, g_c, r_1..r_n) in R^{9+n}; emits 3n
/// regression rows per sample.
class NavExtension {
 public:
  NavExtension(double alpha, const std::vector<Vec3>& y0);

  int n_features() const { return n_; }
  int dim() const { return 9 + n_; }
  double alpha() const { return alpha_; }

  struct State {
    Eigen::VectorXd xi;       // 9+n
    Eigen::MatrixXd Psi;      // (9+n) x (9+n)
    Eigen::MatrixXd wash_y;   // 3 x n
    Eigen::MatrixXd lag_wy;   // 3 x n
    Eigen::VectorXd lag_yn;   // 3n
    Eigen::MatrixXd lag_psi;  // 3n x (9+n)

    State operator+(const State& o) const;
    friend State operator*(double c, const State& s);
  };

  const State& state() const { return state_; }
  void set_state(const State& s) { state_ = s; }

  State deriv(const State& s, const NavInput& in) const;
  Vec3 phi(const State& s, int i, const Vec3& y_i) const;
  Eigen::VectorXd y_n(const State& s, const std::vector<Vec3>& y) const;       // 3n
  Eigen::MatrixXd psi(const State& s, const std::vector<Vec3>& y) const;       // (9+n) x 3n

  void step(const NavInput& in0, const NavInput& inm, const NavInput& in1, double dt);

 private:
  double alpha_;
  int n_;
  State state_;
};

}  // namespace rpebo
