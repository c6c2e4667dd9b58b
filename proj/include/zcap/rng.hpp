// Deterministic random source. All sampling goes through this class so that
// runs are bit-reproducible across reruns of the same binary; the standard
// library distributions are implementation-defined and are not used.
#pragma once

#include <cstdint>
#include <cmath>
#include <string>
#include <vector>

namespace zcap {

class Rng {
 public:
  explicit Rng(uint64_t seed) : root_(seed), state_(seed) {}

  // SplitMix64 step.
  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n); n must be > 0.
  uint64_t uniform_int(uint64_t n) {
    // Rejection-free modulo is biased for huge n; our n are tiny.
    return next_u64() % n;
  }

  double normal(double mean = 0.0, double sigma = 1.0) {
    if (have_cached_) {
      have_cached_ = false;
      return mean + sigma * cached_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return mean + sigma * r * std::cos(a);
  }

  // Beta(c, 1): density c*x^(c-1), mass near 1 for c > 1. Inverse CDF.
  double beta_near_one(double c) { return std::pow(1.0 - uniform(), 1.0 / c); }

  // Beta(1, c): mass near 0 for c > 1.
  double beta_near_zero(double c) { return 1.0 - std::pow(1.0 - uniform(), 1.0 / c); }

  uint64_t poisson(double lambda) {
    // Knuth; fine for the small rates used here.
    double limit = std::exp(-lambda);
    uint64_t k = 0;
    double p = 1.0;
    do {
      p *= uniform();
      ++k;
    } while (p > limit);
    return k - 1;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_int(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // Named substream, a pure function of the seed this Rng was created with.
  // Draws already taken from the parent do not perturb the substream.
  Rng substream(const std::string& name, uint64_t index = 0) const {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char ch : name) {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001b3ULL;
    }
    uint64_t mixed = root_ ^ (h + 0x9e3779b97f4a7c15ULL * (index + 1));
    // One finalizer round to decorrelate nearby seeds.
    mixed = (mixed ^ (mixed >> 30)) * 0xbf58476d1ce4e5b9ULL;
    mixed = (mixed ^ (mixed >> 27)) * 0x94d049bb133111ebULL;
    return Rng(mixed ^ (mixed >> 31));
  }

  uint64_t root_seed() const { return root_; }

 private:
  uint64_t root_;
  uint64_t state_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace zcap
