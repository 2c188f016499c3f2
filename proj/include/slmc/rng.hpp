#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "slmc/types.hpp"

namespace slmc {

// Splittable pseudo-random stream (xoshiro256++ core, splitmix64 seeding).
//
// Streams are identified by a 64-bit key. `fork(name)` derives a child
// stream from the parent key and the name only, never from the parent's
// draw position, so parallel consumers stay order-independent and a run
// is reproducible from (seed, stream-name tree) alone.
class RngStream {
 public:
  RngStream() : RngStream(from_seed(0)) {}

  static RngStream from_seed(std::uint64_t seed);
  RngStream fork(std::string_view name) const;
  // Numbered child, e.g. one stream per chain or candidate.
  RngStream fork(std::string_view name, std::uint64_t index) const;

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform();
  // Uniform on (0, 1); safe under log().
  double uniform_pos();
  // Standard normal (Box-Muller, one cached spare).
  double normal();
  Vector normal_vector(Index n);
  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  // Uniform on [lo, hi).
  double uniform_range(double lo, double hi);

  std::uint64_t key() const { return key_; }

 private:
  struct raw_tag {};
  explicit RngStream(raw_tag) {}

  std::uint64_t key_ = 0;
  std::array<std::uint64_t, 4> state_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace slmc
