#include "slmc/rng.hpp"

#include <cmath>

namespace slmc {

namespace {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

RngStream RngStream::from_seed(std::uint64_t seed) {
  std::uint64_t x = seed;
  std::uint64_t key = splitmix64(x);
  RngStream r{raw_tag{}};
  r.key_ = key;
  std::uint64_t s = key;
  for (auto& w : r.state_) w = splitmix64(s);
  r.has_spare_ = false;
  return r;
}

RngStream RngStream::fork(std::string_view name) const {
  std::uint64_t mixed = key_ ^ fnv1a64(name);
  RngStream child = from_seed(mixed);
  return child;
}

RngStream RngStream::fork(std::string_view name, std::uint64_t index) const {
  std::uint64_t mixed = key_ ^ fnv1a64(name);
  mixed ^= 0x9e3779b97f4a7c15ULL * (index + 1);
  return from_seed(mixed);
}

std::uint64_t RngStream::next_u64() {
  auto& s = state_;
  const std::uint64_t result = rotl(s[0] + s[3], 23) + s[0];
  const std::uint64_t t = s[1] << 17;
  s[2] ^= s[0];
  s[3] ^= s[1];
  s[1] ^= s[2];
  s[0] ^= s[3];
  s[2] ^= t;
  s[3] = rotl(s[3], 45);
  return result;
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_pos() {
  double u = uniform();
  return u > 0.0 ? u : 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_pos();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

Vector RngStream::normal_vector(Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal();
  return v;
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  // Rejection to avoid modulo bias.
  const std::uint64_t limit = n * (UINT64_MAX / n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double RngStream::uniform_range(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

}  // namespace slmc
