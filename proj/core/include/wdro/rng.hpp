#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace wdro {

/// Purposes used to key independent streams off one experiment seed.
enum class StreamPurpose : std::uint64_t {
  data = 1,
  reference_cache = 2,
  multistart = 3,
  true_risk = 4,
  smoothing = 5,
  radius = 6,
  bootstrap = 7,
  sandwich = 8,
  laplace_normalizer = 9,
  generic = 10,
};

/// SplitMix64 finalizer; used to derive stream seeds from (seed, keys...).
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

/// A single pseudo-random stream. Not shareable across threads.
class RngStream {
 public:
  using Engine = std::mt19937_64;

  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  static RngStream derive(std::uint64_t seed, StreamPurpose purpose,
                          std::initializer_list<std::uint64_t> keys = {});

  double uniform() { return uniform_(engine_); }
  double normal() { return normal_(engine_); }
  std::uint64_t next_u64() { return engine_(); }
  Engine& engine() { return engine_; }

 private:
  Engine engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace wdro
