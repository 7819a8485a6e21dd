#pragma once

#include <cmath>
#include <cstdint>
#include <Eigen/Dense>

namespace flowmc {

// Deterministic per-stream RNG. Streams are derived from a master seed and a
// stream index so that chains can be advanced in any order (or in parallel)
// with reproducible output.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(splitmix(seed ^ 0x9e3779b97f4a7c15ull)) {
    // warm up so that nearby seeds decorrelate
    for (int i = 0; i < 4; ++i) next();
  }

  RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
      : RngStream(splitmix(master_seed) ^ splitmix(stream_index * 0xbf58476d1ce4e5b9ull + 1)) {}

  // uniform on [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; both draws consumed, one returned, so a
  // call consumes a fixed amount of the stream.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  Eigen::VectorXd normal_vector(int dim) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = normal();
    return v;
  }

  std::uint64_t next() {
    // xorshift64* over a splitmix-initialized state
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545f4914f6cdd1dull;
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::uint64_t state_;
};

}  // namespace flowmc
