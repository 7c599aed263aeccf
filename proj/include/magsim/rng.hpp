#pragma once

#include <cstdint>
#include <random>

namespace magsim {

/// Per-trajectory random stream. Identical (seed, stream_id) pairs reproduce
/// identical draw sequences; distinct stream ids are decorrelated by a
/// splitmix64 hash of the pair, so trajectories can run in parallel each
/// owning one stream.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id), gen_(mix(seed, stream_id)), normal_(0.0, 1.0) {}

  /// Standard normal draw.
  double gaussian() { return normal_(gen_); }

  /// Uniform in [0,1).
  double uniform() { return uniform_(gen_); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static std::mt19937_64 mix(std::uint64_t seed, std::uint64_t stream_id) {
    const std::uint64_t a = splitmix64(seed);
    const std::uint64_t b = splitmix64(a ^ splitmix64(stream_id + 0x2545f4914f6cdd1dULL));
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace magsim
