#pragma once

#include <cstdint>
#include <random>

namespace itemper {

/// Purpose of a substream within one replica and coordinate.
///
/// A single engine draws everything for coordinate j from `primary`.
/// A coupled pair uses `primary` for the X side, `secondary` for the Y side
/// and `shared` for draws both sides consume together. Start states drawn
/// at random come from the two `start_*` regimes so that changing the start
/// spec never shifts the transition streams.
enum class Regime : std::uint32_t {
  primary = 0,
  secondary = 1,
  shared = 2,
  start_primary = 3,
  start_secondary = 4,
};

/// A seedable 64-bit random stream.
///
/// Substreams are identified by the counter tuple (root, replica, coordinate,
/// regime); the tuple is fed word-by-word through std::seed_seq into a
/// std::mt19937_64. Adding replicas or coordinates never perturbs the stream
/// of an existing tuple.
///
/// Every draw consumes exactly one 64-bit word, including bounded integers,
/// so the number of words consumed by a kernel step is fixed by its draw
/// order alone.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  RandomStream(std::uint64_t root, std::uint64_t replica, std::uint64_t coordinate,
               Regime regime)
  {
    auto lo = [](std::uint64_t w) { return static_cast<std::uint32_t>(w); };
    auto hi = [](std::uint64_t w) { return static_cast<std::uint32_t>(w >> 32); };
    std::seed_seq seq{lo(root),       hi(root),       lo(replica),
                      hi(replica),    lo(coordinate), hi(coordinate),
                      static_cast<std::uint32_t>(regime)};
    engine_.seed(seq);
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform on {0, ..., bound - 1}; multiply-shift reduction of one word.
  /// The bias is at most bound / 2^64.
  std::uint64_t index(std::uint64_t bound) {
    const auto wide = static_cast<unsigned __int128>(next()) * bound;
    return static_cast<std::uint64_t>(wide >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace itemper
