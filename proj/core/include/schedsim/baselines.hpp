#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "schedsim/channel.hpp"
#include "schedsim/scheduler.hpp"

namespace schedsim {

/// Fixed rotation of floor(M) users per slot.
class RoundRobinPolicy final : public Policy {
 public:
  RoundRobinPolicy(std::size_t users, double budget);

  void decide(const SlotView& view, RandomStream& randomization,
              std::span<std::uint8_t> actions) override;
  std::string name() const override { return "round-robin"; }

 private:
  std::size_t users_;
  std::size_t per_slot_;
};

/// Top floor(M) users by q_i * pi_i[t]; ties go to the lower user id.
class MyopicBeliefPolicy final : public Policy {
 public:
  MyopicBeliefPolicy(std::vector<ChannelParams> channels, int tau, double budget);

  void decide(const SlotView& view, RandomStream& randomization,
              std::span<std::uint8_t> actions) override;
  std::string name() const override { return "myopic-belief"; }

 private:
  std::vector<ChannelParams> channels_;
  int tau_;
  std::size_t per_slot_;
  std::vector<std::size_t> order_;
  std::vector<double> score_;
};

/// Each user independently with probability M / N.
class RandomPolicy final : public Policy {
 public:
  RandomPolicy(std::size_t users, double budget);

  void decide(const SlotView& view, RandomStream& randomization,
              std::span<std::uint8_t> actions) override;
  std::string name() const override { return "random"; }

 private:
  double probability_;
};

/// Throws std::invalid_argument for an unknown name.
std::unique_ptr<Policy> make_baseline(std::string_view name,
                                      const std::vector<ChannelParams>& channels, int tau,
                                      double budget);

}  // namespace schedsim
