#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace sanmt {

// Deterministic random stream. mt19937_64 output is mandated by the
// standard, and all derived draws below avoid std::*_distribution
// (whose algorithms are implementation-defined), so identical seeds
// yield identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive bounds, unbiased via rejection
  int uniform_int(int lo, int hi) {
    std::uint64_t range = static_cast<std::uint64_t>(hi) - lo + 1;
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return lo + static_cast<int>(x % range);
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(0, static_cast<int>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derives an independent substream from the construction seed; keeps
  // init / batching / dropout draws insensitive to one another's order.
  Rng fork(std::uint64_t stream) const {
    std::uint64_t z = seed_ + (stream + 1) * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace sanmt
