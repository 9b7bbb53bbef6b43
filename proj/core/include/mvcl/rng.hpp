#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace mvcl {

/// Philox4x32-10 counter-based generator. A stream is identified by
/// (seed, stream id); every draw is a pure function of that key and the
/// position in the stream, so per-sample randomness never depends on the
/// order in which samples are processed.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint32_t NextU32();
  std::uint64_t NextU64();
  /// Uniform in [0, 1) with 53 random bits.
  double Uniform();
  double Uniform(double lo, double hi);
  /// Standard normal via Box-Muller.
  double Normal();
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t Below(std::uint64_t n);
  bool Bernoulli(double p);

 private:
  void Refill();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
};

std::uint64_t SplitMix64(std::uint64_t x);

/// Combines integers and names into a stream id. Order-sensitive.
std::uint64_t StreamId(std::initializer_list<std::uint64_t> parts);
std::uint64_t HashName(std::string_view name);

}  // namespace mvcl
