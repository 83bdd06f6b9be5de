#pragma once

#include <cstdint>
#include <limits>

namespace sgdboot {

// Role tags for derive_key. New roles get new values; existing values never change.
enum class StreamTag : std::uint64_t {
  Data = 1,
  Weights = 2,
  Directions = 3,
  Instances = 4,
  Estimation = 5,
  Design = 6,
  Rotation = 7,
};

// SipHash-2-4 of `index` keyed by `key`.
std::uint64_t substream(std::uint64_t key, std::uint64_t index);

// SipHash-2-4 of (tag, index) keyed by `master`.
std::uint64_t derive_key(std::uint64_t master, StreamTag tag, std::uint64_t index);

// SplitMix64. Output j of a generator seeded with s depends only on (s, j).
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

}  // namespace sgdboot
