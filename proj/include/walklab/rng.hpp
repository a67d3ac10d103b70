#pragma once

#include <cstdint>

namespace walklab {

// Counter-based stream: the k-th draw of stream (seed, stream) is a pure
// function of (seed, stream, k), so ensembles can be sharded across threads
// in any order and still reproduce bit-identically.
class CounterRng {
public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ull))) {}

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ull); }

  // uniform in [0,1)
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [-1,1]
  double next_signed() { return 2.0 * next_double() - 1.0; }

  bool next_bit() { return (next_u64() & 1u) != 0; }

private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace walklab
