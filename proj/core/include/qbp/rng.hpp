#pragma once

#include <cmath>
#include <cstdint>

namespace qbp {

/// Counter-based random stream. Each draw mixes (key, counter) through the
/// SplitMix64 finalizer, so streams are random-access and the per-(frame,row)
/// keying makes parallel simulation bit-identical for any thread schedule.
class RngStream {
 public:
  RngStream(uint64_t master_seed, uint64_t stream_a, uint64_t stream_b) {
    key_ = mix(master_seed ^ 0x9e3779b97f4a7c15ULL);
    key_ = mix(key_ ^ mix(stream_a ^ 0xbf58476d1ce4e5b9ULL));
    key_ = mix(key_ ^ mix(stream_b ^ 0x94d049bb133111ebULL));
  }

  uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++ctr_); }

  /// Uniform double in [0, 1).
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1] (safe as a log argument).
  double uniform_pos() { return ((next_u64() >> 11) + 1) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Poisson sample: Knuth product method for small mean, Hormann's PTRS
  /// transformed rejection for large mean.
  int64_t poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda < 30.0) {
      const double l = std::exp(-lambda);
      int64_t k = 0;
      double p = 1.0;
      do {
        ++k;
        p *= uniform_pos();
      } while (p > l);
      return k - 1;
    }
    return poisson_ptrs(lambda);
  }

 private:
  static uint64_t mix(uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  int64_t poisson_ptrs(double lambda) {
    const double slam = std::sqrt(lambda);
    const double loglam = std::log(lambda);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform_pos();
      const double us = 0.5 - std::abs(u);
      const auto k = static_cast<int64_t>(std::floor((2.0 * a / us + b) * u + lambda + 0.43));
      if (us >= 0.07 && v <= vr) return k;
      if (k < 0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
          k * loglam - lambda - std::lgamma(static_cast<double>(k) + 1.0)) {
        return k;
      }
    }
  }

  uint64_t key_ = 0;
  uint64_t ctr_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Stream for simulated frame `frame`, image row `row`.
inline RngStream row_stream(uint64_t master_seed, int64_t frame, int64_t row) {
  return RngStream(master_seed, static_cast<uint64_t>(frame), static_cast<uint64_t>(row));
}

}  // namespace qbp
