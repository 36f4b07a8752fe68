#include "schedsim/random.hpp"

#include <array>

namespace schedsim {

RandomStream::RandomStream(std::uint64_t seed) : engine_(seed) {}

RandomStream RandomStream::named(std::uint64_t master_seed, std::uint64_t replication,
                                 StreamKind kind, std::uint64_t index) {
  const std::uint64_t seed = master_seed + replication;
  const std::array<std::uint32_t, 6> words{
      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
      static_cast<std::uint32_t>(kind), static_cast<std::uint32_t>(index),
      static_cast<std::uint32_t>(index >> 32), 0x5eed5eedU};
  std::seed_seq seq(words.begin(), words.end());
  RandomStream stream(0);
  stream.engine_.seed(seq);
  return stream;
}

double RandomStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RandomStream::poisson(double mean) {
  if (mean <= 0.0) {
    return 0;
  }
  std::poisson_distribution<std::uint64_t> dist(mean);
  return dist(engine_);
}

}  // namespace schedsim
