#include "schedsim/index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace schedsim {

double whittle_index_after_off(const ChannelParams& params, int age) {
  const double current = params.belief_after_off(age);
  const double next = params.belief_after_off(age + 1);
  const double step = current - next;
  const double l = static_cast<double>(age);
  return (step * (l + 1.0) + next) / (1.0 - params.p11() + step * l + next);
}

double whittle_index_top(const ChannelParams& params) {
  const double p11 = params.p11();
  const double p01 = params.p01();
  return p01 / ((1.0 - p11) * (1.0 + p01 - p11) + p01);
}

double whittle_index_after_on(const ChannelParams& params, int age) {
  const double belief = params.belief_after_on(age);
  return belief / (1.0 - params.p11() + belief);
}

double whittle_index(const ChannelParams& params, const BeliefState& state, int tau) {
  check_state(state, tau);
  if (state.is_stationary()) {
    return whittle_index_top(params);
  }
  return state.last == 0 ? whittle_index_after_off(params, state.age)
                         : whittle_index_after_on(params, state.age);
}

WeightVector::WeightVector(std::vector<double> weights) : weights_(std::move(weights)) {
  for (double w : weights_) {
    if (!std::isfinite(w) || w < 0.0) {
      throw std::invalid_argument("weights must be finite and nonnegative");
    }
  }
}

WeightVector WeightVector::uniform(std::size_t users, double value) {
  return WeightVector(std::vector<double>(users, value));
}

double WeightVector::sum() const {
  return std::accumulate(weights_.begin(), weights_.end(), 0.0);
}

double weighted_index(const WeightVector& weights, std::size_t user, double index) {
  return weights[user] * index;
}

ThresholdSpec ThresholdSpec::at(const BeliefState& state, double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) {
    throw std::invalid_argument("randomization factor must lie in (0, 1]");
  }
  return {Kind::At, state, rho};
}

ThresholdSpec ThresholdSpec::canonical() const {
  if (kind == Kind::At && !state.is_stationary() && state.last == 1) {
    return {Kind::At, BeliefState::stationary(), rho};
  }
  return *this;
}

ActivityRates threshold_rates(const ChannelParams& params, int tau,
                              const ThresholdSpec& threshold) {
  switch (threshold.kind) {
    case ThresholdSpec::Kind::AboveAll:
      return {0.0, 0.0};
    case ThresholdSpec::Kind::BelowAll:
      return {1.0, params.stationary()};
    case ThresholdSpec::Kind::At:
      break;
  }
  check_state(threshold.state, tau);
  const ThresholdSpec spec = threshold.canonical();
  const double rho = spec.rho;
  const double idle = 1.0 - params.p11();
  const double bs = params.stationary();

  if (spec.state.is_stationary()) {
    // Idle through b_{0,1..tau}, wait geometrically at b_s, then ride the ON run.
    const double denom = (1.0 + rho * tau) * idle + rho * bs;
    return {rho * (idle + bs) / denom, rho * bs / denom};
  }

  // Threshold on b_{0,h}: idle for h-1 slots, then transmit at b_{0,h} with
  // probability rho, otherwise one slot later at the next belief.
  const int h = spec.state.age;
  const double here = params.belief_after_off(h);
  const double next = (h < tau) ? params.belief_after_off(h + 1) : bs;
  const double launch = rho * here + (1.0 - rho) * next;
  const double denom = launch + idle * (h + 1.0 - rho);
  return {(idle + launch) / denom, launch / denom};
}

double activation_time(const ChannelParams& params, int tau, const ThresholdSpec& threshold) {
  return threshold_rates(params, tau, threshold).activation;
}

double transmission_rate(const ChannelParams& params, int tau,
                         const ThresholdSpec& threshold) {
  return threshold_rates(params, tau, threshold).rate;
}

double tau0(std::span<const ChannelParams> channels) {
  double worst = 0.0;
  for (const auto& c : channels) {
    const double log_gap = std::log(c.memory());
    worst = std::max({worst, 1.0 / -log_gap, 1.0 / (log_gap * log_gap)});
  }
  return 4.0 * worst;
}

int default_truncation(std::span<const ChannelParams> channels) {
  return std::max(static_cast<int>(std::ceil(tau0(channels))), 25);
}

double f_tau(std::span<const ChannelParams> channels, int tau) {
  if (tau < 1) {
    throw std::invalid_argument("truncation size must be >= 1");
  }
  const auto threshold = ThresholdSpec::at(BeliefState::observed(0, tau), 1.0);
  double total = 0.0;
  for (const auto& c : channels) {
    total += activation_time(c, tau, threshold);
  }
  return total;
}

double g_tau(std::span<const ChannelParams> channels, int tau) {
  return 3.0 * f_tau(channels, tau);
}

IndexTable::IndexTable(std::vector<ChannelParams> channels, int tau)
    : channels_(std::move(channels)), tau_(tau) {
  if (tau < 1) {
    throw std::invalid_argument("truncation size must be >= 1");
  }
  const auto per_user = static_cast<std::size_t>(states_per_user());
  values_.resize(channels_.size() * per_user);
  for (std::size_t u = 0; u < channels_.size(); ++u) {
    const auto& c = channels_[u];
    double* row = values_.data() + u * per_user;
    for (int l = 1; l <= tau; ++l) {
      row[l - 1] = whittle_index_after_off(c, l);
    }
    row[tau] = whittle_index_top(c);
    for (int l = 1; l <= tau; ++l) {
      row[2 * tau + 1 - l] = whittle_index_after_on(c, l);
    }
    for (std::size_t p = 1; p < per_user; ++p) {
      row[p] = std::max(row[p], row[p - 1]);
    }
  }
}

std::span<const double> IndexTable::user_values(std::size_t user) const {
  const auto per_user = static_cast<std::size_t>(states_per_user());
  return {values_.data() + user * per_user, per_user};
}

}  // namespace schedsim
