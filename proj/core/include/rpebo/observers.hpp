#pragma once

#include <optional>
#include <vector>

#include "rpebo/linalg.hpp"
#include "rpebo/regression.hpp"
#include "rpebo/simulator.hpp"

namespace rpebo {

/// Gradient-descent range observer for the velocity-measured problem.
/// Requires persistent excitation of the regressor for convergence.
class GradientObserver {
 public:
  struct Params {
    double alpha = 1.0;
    double gamma = 50.0;
    double rhat0 = 0.0;
    double xi0 = 0.0;
  };

  GradientObserver(const Params& p, const MeasurementSample& first);

  void step(const MeasurementSample& s0, const MeasurementSample& sm,
            const MeasurementSample& s1, double dt);

  double r_hat() const { return rhat_; }
  Vec3 z_hat() const { return rhat_ * last_y_; }
  double xi() const { return reg_.state().xi; }
  Vec3 phi() const { return reg_.phi(reg_.state(), last_y_); }
  Vec3 y_r() const { return reg_.y_r(reg_.state(), last_y_); }

  /// Test hook: pin the range estimate (isolates the bearing-noise floor).
  void clamp_range(double r) { rhat_ = r; }

 private:
  ScalarRegressor reg_;
  double gamma_;
  double rhat_;
  Vec3 last_y_;
};

/// Range observer that identifies the constant offset theta = r - xi through
/// an excitation-accumulating filter, so convergence needs only interval
/// excitation. Optional regressor mixing (kp_mix > 0) blends the accumulated
/// regression with the instantaneous one to speed up convergence.
class PeboObserver {
 public:
  struct Params {
    double alpha = 1.0;
    double gamma = 50.0;
    double kp_mix = 1.0;
    double zeta0 = 0.0;
    double theta0 = 0.0;
    double xi0 = 0.0;
    bool gradient_flow = false;  // use the gradient-flow parameter update instead
  };

  PeboObserver(const Params& p, const MeasurementSample& first);

  void step(const MeasurementSample& s0, const MeasurementSample& sm,
            const MeasurementSample& s1, double dt);

  double theta_hat() const { return theta_; }
  double omega() const { return omega_; }
  double zeta() const { return zeta_; }
  double r_hat() const { return reg_.state().xi + theta_; }
  Vec3 z_hat() const { return r_hat() * last_y_; }
  double xi() const { return reg_.state().xi; }
  Vec3 phi() const { return reg_.phi(reg_.state(), last_y_); }
  Vec3 y_r() const { return reg_.y_r(reg_.state(), last_y_); }
  /// Running quadrature of |phi|^2, integrated alongside the observer.
  double excitation_integral() const { return gram_; }

 private:
  ScalarRegressor reg_;
  Params p_;
  double zeta_;
  double omega_ = 1.0;
  double theta_;
  double gram_ = 0.0;
  Vec3 last_y_;
};

/// Excitation-mixing parameter estimator: filters the vector regression
/// (psi, y_n) into a square extended pair (Phi, Y) with forgetting, mixes it
/// through the adjugate into decoupled scalar regressions, and accumulates
/// them so one excited interval suffices for convergence.
///
/// The extended pair advances by RK4. The mixing block
///   zeta_dot  = delta mixed_y - delta^2 zeta
///   omega_dot = -delta^2 omega
///   theta_dot = gamma [(zeta + kp delta mixed_y) - (1 - omega + kp delta^2) theta]
/// is advanced by an exponential midpoint step instead: with the mixing gains
/// of interest, kp delta^2 reaches 1e3..1e4 once the run is excited, which an
/// explicit step at the scenario dt cannot integrate stably, while the
/// exponential form is exact for frozen coefficients at any magnitude (and
/// preserves zeta = (1 - omega) theta exactly).
class DremEstimator {
 public:
  struct Params {
    double rho = 0.4;
    double gamma = 100.0;
    double kp = 500.0;
  };

  /// Kreisselmeier extended regression pair.
  struct Extended {
    Eigen::MatrixXd Phi;
    Eigen::VectorXd Y;

    Extended operator+(const Extended& o) const { return {Phi + o.Phi, Y + o.Y}; }
    friend Extended operator*(double c, const Extended& s) {
      return {c * s.Phi, c * s.Y};
    }
  };

  /// Determinant and adjugate-mixed output of the extended pair.
  struct Mixed {
    double delta = 0.0;
    Eigen::VectorXd mixed_y;
  };

  DremEstimator(int n, const Params& p, const Eigen::VectorXd& theta0);

  int dim() const { return n_; }
  const Params& params() const { return p_; }
  const Extended& extended() const { return ext_; }
  void set_extended(Extended e) { ext_ = std::move(e); }
  const Eigen::VectorXd& zeta() const { return zeta_; }
  double omega() const { return omega_; }
  const Eigen::VectorXd& theta_hat() const { return theta_; }

  Extended ext_deriv(const Extended& s, const Eigen::MatrixXd& psi,
                     const Eigen::VectorXd& y_n) const;

  /// Raw determinant and adjugate mixing. Determinant magnitudes below 1e-300
  /// are treated as exactly zero; above 1e100 the pair (delta, mixed_y) is
  /// rescaled jointly, which leaves the regression mixed_y = delta * theta
  /// intact while keeping downstream squares representable.
  static Mixed mixed_regressor(const Eigen::MatrixXd& Phi, const Eigen::VectorXd& Y);

  /// Exponential midpoint update of (zeta, omega, theta) over dt, with the
  /// mixed regression frozen at the supplied midpoint pair.
  void mix_update(double dt, const Extended& mid);

  /// Full step from regressor samples at the three stage points.
  void step(const Eigen::MatrixXd& psi0, const Eigen::VectorXd& yn0,
            const Eigen::MatrixXd& psim, const Eigen::VectorXd& ynm,
            const Eigen::MatrixXd& psi1, const Eigen::VectorXd& yn1, double dt);

 private:
  int n_;
  Params p_;
  Extended ext_;
  Eigen::VectorXd zeta_;
  double omega_ = 1.0;
  Eigen::VectorXd theta_;
};

/// State reconstruction for the single-feature problem: splits
/// w = xi + Psi * theta_hat back into range/velocity/bias (plus the combined
/// gravity vector estimate) and rebuilds the feature position along y.
struct PvEstimate {
  double r_hat = 0.0;
  Vec3 z_hat = Vec3::Zero();
  Vec3 v_hat = Vec3::Zero();
  Vec3 ba_hat = Vec3::Zero();
  Vec3 gc_hat = Vec3::Zero();
};
PvEstimate reconstruct_pv(const Eigen::VectorXd& w, const Vec3& y);

/// Navigation counterpart: per-landmark ranges and positions plus velocity.
struct NavEstimate {
  Vec3 v_hat = Vec3::Zero();
  Vec3 ba_hat = Vec3::Zero();
  Vec3 gc_hat = Vec3::Zero();
  Eigen::VectorXd r_hat;
  std::vector<Vec3> z_hat;
};
NavEstimate reconstruct_nav(const Eigen::VectorXd& w, const std::vector<Vec3>& y);

/// Position-velocity-bias observer from bearing plus biased IMU only.
class PvObserver {
 public:
  struct Params {
    double alpha = 2.0;
    double gamma = 100.0;
    double rho = 0.4;
    double kp = 500.0;
    Eigen::VectorXd theta0;  // defaults to (0,...,0,10)
  };

  PvObserver(const Params& p, const MeasurementSample& first);

  void step(const MeasurementSample& s0, const MeasurementSample& sm,
            const MeasurementSample& s1, double dt);

  PvEstimate estimate() const;
  const Eigen::VectorXd& theta_hat() const { return drem_.theta_hat(); }
  double omega() const { return drem_.omega(); }
  double delta() const;
  double cond_psi() const { return cond_2(ext_.state().Psi); }
  const MatrixExtension& extension() const { return ext_; }
  const DremEstimator& estimator() const { return drem_; }
  const Rot3& Q() const { return Q_; }
  Vec3 phi() const { return ext_.phi(ext_.state(), last_y_); }

 private:
  MatrixExtension ext_;
  DremEstimator drem_;
  Rot3 Q_;
  long steps_ = 0;
  Vec3 last_y_;
};

/// Full navigation observer: the stacked extension and mixing estimator
/// reconstruct velocity and landmark positions, which drive a cascaded
/// attitude-plus-position observer on SO(3) x R^3.
class NavObserver {
 public:
  struct Params {
    double alpha = 1.0;
    double gamma = 100.0;
    double rho = 0.4;
    double kp = 1000.0;
    double k_att = 1.0;     // attitude gain per landmark pair
    double sigma_pos = 1.0; // position gain per landmark
    Eigen::VectorXd theta0;
    Rot3 qc0;               // initial auxiliary-attitude estimate
    Vec3 x0 = Vec3::Zero(); // initial position estimate
  };

  NavObserver(const Params& p, std::vector<Vec3> anchors, const MeasurementSample& first);

  void step(const MeasurementSample& s0, const MeasurementSample& sm,
            const MeasurementSample& s1, double dt);

  NavEstimate estimate() const;
  Rot3 R_hat() const { return Qc_hat_ * Q_; }
  const Rot3& Qc_hat() const { return Qc_hat_; }
  const Vec3& x_hat() const { return x_hat_; }
  const Eigen::VectorXd& theta_hat() const { return drem_.theta_hat(); }
  double omega() const { return drem_.omega(); }
  double delta() const;
  double cond_psi() const { return cond_2(ext_.state().Psi); }
  const NavExtension& extension() const { return ext_; }
  const Rot3& Q() const { return Q_; }

 private:
  Vec3 attitude_drive(const Eigen::VectorXd& rec, const Mat3& Qc_stage,
                      const Mat3& Q_stage, const std::vector<Vec3>& y) const;

  NavExtension ext_;
  DremEstimator drem_;
  Params p_;
  std::vector<Vec3> anchors_;
  std::vector<Vec3> eta_;  // anchor differences
  Rot3 Q_;
  Rot3 Qc_hat_;
  Vec3 x_hat_;
  long steps_ = 0;
  std::vector<Vec3> last_y_;
};

}  // namespace rpebo
