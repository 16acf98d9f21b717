#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>

namespace errstruct {

// Philox4x64-10 (Salmon, Moraes, Dror, Shaw 2011), as in the Random123
// reference implementation. Pure function of (counter, key).
struct Philox4x64 {
  using Counter = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;
  static Counter block(Counter counter, Key key);
};

// Independent random streams drawn from Philox. Each stream is addressed by
// (seed, stream id, purpose); block i of the stream is Philox at counter
// {i, stream, purpose, 0} under key {seed, kStreamKey}.
enum class Purpose : std::uint64_t {
  BaseSample = 1,
  Perturbation = 2,
  Bits = 3,
  Ensemble = 4,
};

class CounterStream {
 public:
  static constexpr std::uint64_t kStreamKey = 0x9E3779B97F4A7C15ull;

  CounterStream(std::uint64_t seed, std::uint64_t stream, Purpose purpose);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Standard normal by Box-Muller; values come in pairs.
  double normal();

 private:
  void refill();

  Philox4x64::Key key_;
  Philox4x64::Counter counter_;
  Philox4x64::Counter buffer_{};
  std::size_t used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Work is split into chunks of this many items; chunk c draws from stream c.
inline constexpr std::size_t kChunkSize = 4096;

inline std::size_t chunk_count(std::size_t items) { return (items + kChunkSize - 1) / kChunkSize; }

// Runs fn(chunk) for chunk in [0, chunks) on up to `workers` threads. Callers
// write per-chunk results to disjoint slots and reduce them in chunk order, so
// output does not depend on the worker count. The first exception (lowest
// chunk index) is rethrown.
void for_each_chunk(std::size_t chunks, unsigned workers,
                    const std::function<void(std::size_t)>& fn);

}  // namespace errstruct
