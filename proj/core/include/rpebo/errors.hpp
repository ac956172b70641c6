#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rpebo {

/// Raised when the robot gets closer than the configured minimum range to a
/// feature point mid-run. Scenario runners catch this and mark the run aborted.
class MinRangeViolation : public std::runtime_error {
 public:
  MinRangeViolation(double t, int feature, double range)
      : std::runtime_error("minimum-range violation at t=" + std::to_string(t) +
                           " s: feature " + std::to_string(feature) +
                           " at range " + std::to_string(range) + " m"),
        t_(t),
        feature_(feature),
        range_(range) {}

  double time() const { return t_; }
  int feature() const { return feature_; }
  double range() const { return range_; }

 private:
  double t_;
  int feature_;
  double range_;
};

/// Carries every validation problem found in a scenario config, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> messages)
      : std::runtime_error(join(messages)), messages_(std::move(messages)) {}

  const std::vector<std::string>& messages() const { return messages_; }

 private:
  static std::string join(const std::vector<std::string>& msgs) {
    std::string out = "invalid scenario config:";
    for (const auto& m : msgs) {
      out += "\n  - " + m;
    }
    return out;
  }

  std::vector<std::string> messages_;
};

}  // namespace rpebo
