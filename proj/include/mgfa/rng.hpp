#ifndef MGFA_RNG_HPP
#define MGFA_RNG_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

namespace mgfa {

/// Deterministic random stream. Draws are generated from raw mt19937_64
/// output with explicit bit manipulation rather than the standard
/// distributions, whose output is implementation-defined; the same seed
/// yields the same sequence on every platform.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1), 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via the Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  /// 0-based index drawn according to the (nonnegative) weights.
  int categorical(const Eigen::VectorXd& weights) {
    const double u = uniform01() * weights.sum();
    double acc = 0.0;
    for (int g = 0; g < weights.size(); ++g) {
      acc += weights[g];
      if (u < acc) return g;
    }
    return static_cast<int>(weights.size()) - 1;
  }

  /// Integer uniform on {0, ..., n-1}.
  int uniform_int(int n) {
    return static_cast<int>(uniform01() * n) % n;
  }

  /// Splitmix64-style mixing for deriving independent per-task seeds from
  /// (seed, stream index).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mgfa

#endif  // MGFA_RNG_HPP
