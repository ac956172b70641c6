#include "rpebo/excitation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rpebo {

namespace {

std::size_t index_at_or_after(const std::vector<double>& t, double v) {
  const auto it = std::lower_bound(t.begin(), t.end(), v - 1e-12);
  return static_cast<std::size_t>(it - t.begin());
}

double lambda_min(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  return es.eigenvalues().minCoeff();
}

// Prefix trapezoidal sums of the outer products, so window integrals are a
// difference of two prefixes.
std::vector<Eigen::MatrixXd> prefix_gram(const std::vector<double>& t,
                                         const std::vector<Eigen::VectorXd>& sig) {
  const int n = sig.empty() ? 0 : static_cast<int>(sig.front().size());
  std::vector<Eigen::MatrixXd> out(t.size(), Eigen::MatrixXd::Zero(n, n));
  for (std::size_t k = 1; k < t.size(); ++k) {
    const double h = t[k] - t[k - 1];
    out[k] = out[k - 1] + (0.5 * h) * (sig[k - 1] * sig[k - 1].transpose() +
                                       sig[k] * sig[k].transpose());
  }
  return out;
}

}  // namespace

Eigen::MatrixXd gram_integral(const std::vector<double>& t,
                              const std::vector<Eigen::VectorXd>& signal, double t_a,
                              double t_b) {
  if (t.size() != signal.size() || t.empty()) {
    throw std::invalid_argument("gram_integral: trace sizes mismatch or empty");
  }
  if (t_a >= t_b || t_a < t.front() - 1e-12 || t_b > t.back() + 1e-12) {
    throw std::out_of_range("gram_integral: window outside the trace");
  }
  const std::size_t ia = index_at_or_after(t, t_a);
  const std::size_t ib = index_at_or_after(t, t_b);
  const int n = static_cast<int>(signal.front().size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = ia + 1; k <= ib && k < t.size(); ++k) {
    const double h = t[k] - t[k - 1];
    g += (0.5 * h) *
         (signal[k - 1] * signal[k - 1].transpose() + signal[k] * signal[k].transpose());
  }
  return g;
}

IeResult is_ie(const std::vector<double>& t, const std::vector<Eigen::VectorXd>& signal,
               double delta) {
  if (t.size() != signal.size() || t.empty()) {
    throw std::invalid_argument("is_ie: trace sizes mismatch or empty");
  }
  const int n = static_cast<int>(signal.front().size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  IeResult r;
  for (std::size_t k = 1; k < t.size(); ++k) {
    const double h = t[k] - t[k - 1];
    g += (0.5 * h) *
         (signal[k - 1] * signal[k - 1].transpose() + signal[k] * signal[k].transpose());
    const double lmin = lambda_min(g);
    if (lmin >= delta) {
      r.excited = true;
      r.t_star = t[k];
      r.level = lmin;
      return r;
    }
  }
  r.level = lambda_min(g);
  return r;
}

double min_window_gram(const std::vector<double>& t,
                       const std::vector<Eigen::VectorXd>& signal, double window,
                       double t_from, double t_to) {
  const auto prefix = prefix_gram(t, signal);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < t_from || t[k] > t_to) continue;
    if (t[k] + window > t.back() + 1e-12) break;
    const std::size_t j = index_at_or_after(t, t[k] + window);
    if (j >= t.size()) break;
    best = std::min(best, lambda_min(prefix[j] - prefix[k]));
  }
  return std::isfinite(best) ? best : 0.0;
}

ExcitationReport analyze_excitation(const std::vector<double>& t,
                                    const std::vector<Eigen::VectorXd>& signal,
                                    double delta, double window, std::string signal_name,
                                    int trace_stride) {
  ExcitationReport rep;
  rep.signal_name = std::move(signal_name);
  rep.ie_threshold = delta;
  rep.pe_window = window;

  const IeResult ie = is_ie(t, signal, delta);
  if (ie.excited) {
    rep.ie_time = ie.t_star;
  }
  rep.ie_level = ie.level;

  const double t_end = t.back();
  rep.pe_level = min_window_gram(t, signal, window, t.front(), t_end - window);
  rep.pe_late_from = 0.5 * t_end;
  rep.pe_level_late =
      (t_end - window > rep.pe_late_from)
          ? min_window_gram(t, signal, window, rep.pe_late_from, t_end - window)
          : rep.pe_level;

  const int n = static_cast<int>(signal.front().size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 1; k < t.size(); ++k) {
    const double h = t[k] - t[k - 1];
    g += (0.5 * h) *
         (signal[k - 1] * signal[k - 1].transpose() + signal[k] * signal[k].transpose());
    if (k % static_cast<std::size_t>(trace_stride) == 0 || k + 1 == t.size()) {
      rep.gram_trace.push_back({t[k], lambda_min(g), g.trace()});
    }
  }
  return rep;
}

std::string ExcitationReport::to_json() const {
  nlohmann::json j;
  j["signal"] = signal_name;
  j["ie"]["threshold"] = ie_threshold;
  j["ie"]["excited"] = ie_time.has_value();
  if (ie_time) {
    j["ie"]["t_star"] = *ie_time;
  }
  j["ie"]["level"] = ie_level;
  j["pe"]["window_s"] = pe_window;
  j["pe"]["min_window_lambda"] = pe_level;
  j["pe"]["min_window_lambda_late"] = pe_level_late;
  j["pe"]["late_from_s"] = pe_late_from;
  auto& arr = j["gram_trace"] = nlohmann::json::array();
  for (const auto& p : gram_trace) {
    arr.push_back({p.t, p.lambda_min, p.trace});
  }
  return j.dump(2);
}

}  // namespace rpebo
