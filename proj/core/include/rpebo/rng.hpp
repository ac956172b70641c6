#pragma once

#include <cstdint>
#include <string_view>

#include "rpebo/lie3.hpp"

namespace rpebo {

/// Deterministic per-channel Gaussian stream. Each sensor channel derives its
/// own seed from the master seed and a fixed label, so adding a channel never
/// perturbs the draws of the others. Uses splitmix64 + Box-Muller, which is
/// reproducible across standard libraries.
class GaussianStream {
 public:
  GaussianStream(std::uint64_t master_seed, std::string_view label);

  double next();
  Vec3 next_vec3();

 private:
  double uniform01();  // in (0, 1]

  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace rpebo
