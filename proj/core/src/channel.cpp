#include "schedsim/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace schedsim {

ChannelParams::ChannelParams(double p11, double p01) : p11_(p11), p01_(p01) {
  if (!(p01 > 0.0 && p01 < p11 && p11 < 1.0)) {
    throw std::invalid_argument("channel requires 0 < p01 < p11 < 1, got p11=" +
                                std::to_string(p11) + " p01=" + std::to_string(p01));
  }
}

double ChannelParams::belief_after_off(int age) const {
  const double decay = std::pow(memory(), age);
  return (p01_ - decay * p01_) / (1.0 + p01_ - p11_);
}

double ChannelParams::belief_after_on(int age) const {
  const double decay = std::pow(memory(), age);
  return (p01_ + (1.0 - p11_) * decay) / (1.0 + p01_ - p11_);
}

double stationary_prob(const ChannelParams& params) { return params.stationary(); }

std::string to_string(const BeliefState& state) {
  if (state.is_stationary()) {
    return "s";
  }
  return "b" + std::to_string(state.last) + "," + std::to_string(state.age);
}

void check_state(const BeliefState& state, int tau) {
  if (tau < 1) {
    throw std::invalid_argument("truncation size must be >= 1");
  }
  if (state.is_stationary()) {
    return;
  }
  if (state.age < 1 || state.age > tau) {
    throw std::invalid_argument("belief age " + std::to_string(state.age) +
                                " outside [1, " + std::to_string(tau) + "]");
  }
}

int belief_order(const BeliefState& state, int tau) {
  check_state(state, tau);
  if (state.is_stationary()) {
    return tau;
  }
  return state.last == 0 ? state.age - 1 : 2 * tau + 1 - state.age;
}

BeliefState belief_at(int position, int tau) {
  if (position < 0 || position > 2 * tau) {
    throw std::invalid_argument("belief position out of range");
  }
  if (position < tau) {
    return BeliefState::observed(0, position + 1);
  }
  if (position == tau) {
    return BeliefState::stationary();
  }
  return BeliefState::observed(1, 2 * tau + 1 - position);
}

double belief_value(const ChannelParams& params, const BeliefState& state, int tau) {
  check_state(state, tau);
  if (state.is_stationary()) {
    return params.stationary();
  }
  return state.last == 0 ? params.belief_after_off(state.age)
                         : params.belief_after_on(state.age);
}

BeliefState advance_belief(const BeliefState& state, bool scheduled,
                           std::optional<int> observation, int tau) {
  check_state(state, tau);
  if (scheduled) {
    if (!observation) {
      throw std::invalid_argument("scheduled user requires ARQ observation");
    }
    return BeliefState::observed(*observation, 1);
  }
  if (observation) {
    throw std::invalid_argument("idle user cannot receive ARQ observation");
  }
  if (state.is_stationary() || state.age >= tau) {
    return BeliefState::stationary();
  }
  return BeliefState::observed(state.last, state.age + 1);
}

bool next_channel_state(const ChannelParams& params, bool current, double draw) {
  return draw < (current ? params.p11() : params.p01());
}

bool sample_transition(RandomStream& stream, const ChannelParams& params, bool current) {
  return next_channel_state(params, current, stream.uniform());
}

ChannelTrajectory ChannelTrajectory::generate(const ChannelParams& params,
                                              std::int64_t horizon, RandomStream& stream,
                                              std::optional<bool> initial) {
  ChannelTrajectory trajectory;
  if (horizon <= 0) {
    return trajectory;
  }
  trajectory.states.reserve(static_cast<std::size_t>(horizon));
  bool state = initial ? *initial : stream.bernoulli(params.stationary());
  trajectory.states.push_back(state);
  for (std::int64_t t = 1; t < horizon; ++t) {
    state = sample_transition(stream, params, state);
    trajectory.states.push_back(state);
  }
  return trajectory;
}

}  // namespace schedsim
