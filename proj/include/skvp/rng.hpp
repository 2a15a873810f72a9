#pragma once

#include <cstdint>
#include <random>

namespace skvp {

/// Purpose tags for the seeded streams. Two streams with the same master seed
/// but different tags never share a key.
enum class StreamTag : std::uint64_t {
  kCoupling = 0x436f75706c696e67ULL,
  kField = 0x4669656c64000000ULL,
  kReplica = 0x5265706c69636100ULL,
  kGlauber = 0x476c617562657200ULL,
  kGraph = 0x4772617068000000ULL,
  kSample = 0x53616d706c650000ULL,
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Key for the stream (master, tag, index). Used both to seed a
/// RandomStream and to derive per-replica master seeds.
std::uint64_t derive_seed(std::uint64_t master, StreamTag tag,
                          std::uint64_t index);

/// Standard normal quantile, Wichura's AS241 (PPND16), relative accuracy
/// about 1e-16 on (0, 1).
double normal_quantile(double p);

/// Reproducible random stream keyed by (master seed, tag, index).
///
/// The bit source is std::mt19937_64, whose output sequence is fixed by the
/// standard. Uniforms take the top 52 bits and are offset by half a step so
/// they lie in the open interval (0, 1); normals are produced by inverse-CDF
/// through normal_quantile, one uniform per normal. None of the
/// implementation-defined <random> distributions are used, so every sample is
/// bit-identical across standard libraries.
class RandomStream {
 public:
  RandomStream(std::uint64_t master, StreamTag tag, std::uint64_t index);

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double normal() { return normal_quantile(uniform()); }
  /// Uniform integer in [0, bound), rejection sampled.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
};

}  // namespace skvp
