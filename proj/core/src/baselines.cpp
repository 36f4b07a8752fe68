#include "schedsim/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace schedsim {

namespace {

std::size_t users_per_slot(std::size_t users, double budget) {
  if (!(budget > 0.0)) {
    throw std::invalid_argument("transmission budget must be positive");
  }
  return std::min(users, static_cast<std::size_t>(std::floor(budget)));
}

}  // namespace

RoundRobinPolicy::RoundRobinPolicy(std::size_t users, double budget)
    : users_(users), per_slot_(users_per_slot(users, budget)) {}

void RoundRobinPolicy::decide(const SlotView& view, RandomStream&,
                              std::span<std::uint8_t> actions) {
  std::fill(actions.begin(), actions.end(), std::uint8_t{0});
  if (users_ == 0) {
    return;
  }
  const auto start = static_cast<std::size_t>(view.slot) % users_ * per_slot_ % users_;
  for (std::size_t j = 0; j < per_slot_; ++j) {
    actions[(start + j) % users_] = 1;
  }
}

MyopicBeliefPolicy::MyopicBeliefPolicy(std::vector<ChannelParams> channels, int tau,
                                       double budget)
    : channels_(std::move(channels)),
      tau_(tau),
      per_slot_(users_per_slot(channels_.size(), budget)),
      order_(channels_.size()),
      score_(channels_.size()) {}

void MyopicBeliefPolicy::decide(const SlotView& view, RandomStream&,
                                std::span<std::uint8_t> actions) {
  std::fill(actions.begin(), actions.end(), std::uint8_t{0});
  for (std::size_t u = 0; u < channels_.size(); ++u) {
    order_[u] = u;
    score_[u] = static_cast<double>(view.queues[u]) *
                belief_value(channels_[u], view.beliefs[u], tau_);
  }
  const auto mid = order_.begin() + static_cast<std::ptrdiff_t>(per_slot_);
  std::partial_sort(order_.begin(), mid, order_.end(), [&](std::size_t a, std::size_t b) {
    return score_[a] != score_[b] ? score_[a] > score_[b] : a < b;
  });
  for (auto it = order_.begin(); it != mid; ++it) {
    actions[*it] = 1;
  }
}

RandomPolicy::RandomPolicy(std::size_t users, double budget)
    : probability_(users == 0 ? 0.0 : std::min(1.0, budget / static_cast<double>(users))) {
  if (!(budget > 0.0)) {
    throw std::invalid_argument("transmission budget must be positive");
  }
}

void RandomPolicy::decide(const SlotView&, RandomStream& randomization,
                          std::span<std::uint8_t> actions) {
  for (auto& a : actions) {
    a = randomization.bernoulli(probability_) ? 1 : 0;
  }
}

std::unique_ptr<Policy> make_baseline(std::string_view name,
                                      const std::vector<ChannelParams>& channels, int tau,
                                      double budget) {
  if (name == "round-robin") {
    return std::make_unique<RoundRobinPolicy>(channels.size(), budget);
  }
  if (name == "myopic-belief") {
    return std::make_unique<MyopicBeliefPolicy>(channels, tau, budget);
  }
  if (name == "random") {
    return std::make_unique<RandomPolicy>(channels.size(), budget);
  }
  throw std::invalid_argument("unknown baseline policy: " + std::string(name));
}

}  // namespace schedsim
