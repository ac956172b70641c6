#include "rpebo/rng.hpp"

#include <cmath>
#include <numbers>

namespace rpebo {

namespace {

std::uint64_t splitmix64(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

GaussianStream::GaussianStream(std::uint64_t master_seed, std::string_view label)
    : state_(master_seed ^ fnv1a(label)) {
  // Warm up so nearby seeds decorrelate.
  for (int i = 0; i < 4; ++i) {
    splitmix64(state_);
  }
}

double GaussianStream::uniform01() {
  // 53-bit mantissa in (0, 1].
  const std::uint64_t bits = splitmix64(state_) >> 11;
  return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

double GaussianStream::next() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const double u1 = uniform01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  cached_ = r * std::sin(a);
  has_cached_ = true;
  return r * std::cos(a);
}

Vec3 GaussianStream::next_vec3() {
  return Vec3(next(), next(), next());
}

}  // namespace rpebo
