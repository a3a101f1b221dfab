#pragma once

#include <array>
#include <cstdint>

namespace funfactor {

inline constexpr const char* kRngAlgorithm = "philox4x32-10";

/// Philox4x32-10 counter-based generator. A (seed, stream) pair names an
/// independent sequence, so per-subject or per-replicate substreams need no
/// shared state. Distributions are implemented here rather than taken from
/// <random> so draws are identical across standard libraries.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on the closed range [lo, hi].
  long uniform_int(long lo, long hi);
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  /// Gamma(shape, rate = 1).
  double gamma(double shape);
  double beta(double a, double b);
  /// Inverse-Gamma(shape, rate): 1 / Gamma(shape, rate).
  double inverse_gamma(double shape, double rate);
  bool bernoulli(double prob) { return uniform() < prob; }

  static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> counter,
                                             std::array<std::uint32_t, 2> key);

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;

  std::uint32_t next_u32();
};

/// Derives a child seed from a parent seed and an index (SplitMix64 mixing).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace funfactor
