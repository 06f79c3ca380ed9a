#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace kmplab {

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based generator: output i is a hash of (key, i), so any stream
// can be split off or replayed from its seed without shared state.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0)
      : key_(mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL))), ctr_(0) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix64(key_ + 0x9e3779b97f4a7c15ULL * (++ctr_)); }

  // Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1].
  double uniform_pos() { return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53; }

  double exponential(double mean) { return -mean * std::log(uniform_pos()); }

  double normal() {
    // Box-Muller; one variate per call keeps the stream position simple.
    double u1 = uniform_pos();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Uniform integer in [0, n) by multiply-shift.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
  }

  Rng split(std::uint64_t stream) const {
    Rng r;
    r.key_ = mix64(key_ ^ mix64(stream ^ 0xd1b54a32d192ed03ULL));
    r.ctr_ = 0;
    return r;
  }

  std::uint64_t counter() const { return ctr_; }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_;
};

}  // namespace kmplab
