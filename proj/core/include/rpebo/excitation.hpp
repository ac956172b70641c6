#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rpebo {

/// Trapezoidal integral of the outer-product Gram matrix of a sampled vector
/// signal over [t_a, t_b]. Throws std::out_of_range if the window leaves the
/// trace; window endpoints snap to the sample grid.
Eigen::MatrixXd gram_integral(const std::vector<double>& t,
                              const std::vector<Eigen::VectorXd>& signal, double t_a,
                              double t_b);

struct IeResult {
  bool excited = false;
  double t_star = 0.0;  // earliest time the running Gram clears the threshold
  double level = 0.0;   // smallest Gram eigenvalue at t_star
};

/// Scans the running Gram integral from the start of the trace and reports the
/// earliest time its smallest eigenvalue exceeds delta.
IeResult is_ie(const std::vector<double>& t, const std::vector<Eigen::VectorXd>& signal,
               double delta);

/// Smallest eigenvalue of the Gram integral over the sliding window [t, t+T],
/// minimized over all window starts in [t_from, t_to].
double min_window_gram(const std::vector<double>& t,
                       const std::vector<Eigen::VectorXd>& signal, double window,
                       double t_from, double t_to);

struct GramTracePoint {
  double t = 0.0;
  double lambda_min = 0.0;
  double trace = 0.0;
};

/// Excitation diagnostics attached to a run: interval-excitation detection on
/// the running Gram and the worst sliding-window level (the persistent
/// excitation proxy), plus a decimated trace of both.
struct ExcitationReport {
  std::string signal_name;
  std::optional<double> ie_time;
  double ie_threshold = 0.0;
  double ie_level = 0.0;
  double pe_window = 0.0;
  double pe_level = 0.0;                  // min over window starts of lambda_min
  double pe_level_late = 0.0;             // same, windows starting after pe_late_from
  double pe_late_from = 0.0;
  std::vector<GramTracePoint> gram_trace;

  std::string to_json() const;
};

/// Builds the report from a sampled regressor trace. delta is the
/// interval-excitation pass threshold; the window length is the persistent
/// excitation probe.
ExcitationReport analyze_excitation(const std::vector<double>& t,
                                    const std::vector<Eigen::VectorXd>& signal,
                                    double delta, double window, std::string signal_name,
                                    int trace_stride = 100);

}  // namespace rpebo
