#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace mcsbn {

// mt19937_64 plus hand-rolled sampling helpers. The standard distribution
// classes are implementation-defined, which would break the bytewise
// reproducibility contract on generated files and checkpoints.
class Rng {
public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform in [0, n)
  uint64_t uniform_int(uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n must be > 0");
    // rejection sampling to avoid modulo bias
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // index into a cumulative distribution (cdf.back() == total mass)
  size_t pick_cdf(std::span<const double> cdf) {
    double u = uniform() * cdf.back();
    size_t lo = 0, hi = cdf.size();
    while (lo < hi) {
      size_t mid = (lo + hi) / 2;
      if (cdf[mid] <= u)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo < cdf.size() ? lo : cdf.size() - 1;
  }

  // Knuth's method; fine for the small event rates used here
  int poisson(double lambda) {
    double l = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > l);
    return k - 1;
  }

private:
  std::mt19937_64 eng_;
};

} // namespace mcsbn
