#pragma once

#include <cstdint>
#include <random>

namespace schedsim {

/// Purpose of an independent random stream within one replication.
enum class StreamKind : std::uint64_t {
  Channel = 1,
  Arrival = 2,
  Policy = 3,
  Initial = 4,
};

/// A seeded pseudo-random stream. Every stochastic draw in the library goes
/// through one of these; a stream is owned by exactly one replication.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  /// Stream `index` of `kind` for replication `replication` of an experiment
  /// seeded with `master_seed`. Streams with different keys are independent.
  static RandomStream named(std::uint64_t master_seed, std::uint64_t replication,
                            StreamKind kind, std::uint64_t index = 0);

  /// Uniform draw in [0, 1) with 53 random bits.
  double uniform();
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t poisson(double mean);

 private:
  std::mt19937_64 engine_;
};

}  // namespace schedsim
