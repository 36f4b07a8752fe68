#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "schedsim/channel.hpp"

namespace schedsim {

/// Whittle index of `state` for an ON/OFF channel. States observed OFF use
/// the age-dependent branch; b_s and states observed ON use pi / (1 - p11 + pi),
/// whose value at b_s is the constant of whittle_index_top. Result lies in [0, 1].
double whittle_index(const ChannelParams& params, const BeliefState& state, int tau);

/// Age-dependent branch, evaluated at b_{0,age} (untruncated, age >= 1).
double whittle_index_after_off(const ChannelParams& params, int age);
/// Index of b_{1,age}.
double whittle_index_after_on(const ChannelParams& params, int age);
/// Index of b_s.
double whittle_index_top(const ChannelParams& params);

/// Nonnegative, finite per-user weights r_i.
class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(std::vector<double> weights);
  static WeightVector uniform(std::size_t users, double value = 1.0);

  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t user) const { return weights_[user]; }
  std::span<const double> values() const { return weights_; }
  double sum() const;

 private:
  std::vector<double> weights_;
};

/// r_i * w.
double weighted_index(const WeightVector& weights, std::size_t user, double index);

/// Single-user threshold: states above `state` (in belief order) are active,
/// `state` itself is active with probability `rho`, states below are idle.
/// A threshold on any b_{1,l} is evaluated as the threshold on b_s.
struct ThresholdSpec {
  enum class Kind { BelowAll, At, AboveAll };

  Kind kind = Kind::AboveAll;
  BeliefState state{};
  double rho = 1.0;

  static ThresholdSpec below_all() { return {Kind::BelowAll, {}, 1.0}; }
  static ThresholdSpec above_all() { return {Kind::AboveAll, {}, 1.0}; }
  /// Throws std::invalid_argument unless rho is in (0, 1].
  static ThresholdSpec at(const BeliefState& state, double rho = 1.0);

  /// Same policy with b_{1,l} thresholds mapped onto b_s.
  ThresholdSpec canonical() const;
};

/// Long-run fraction of slots transmitting (alpha) and long-run expected
/// successful deliveries per slot (nu) of one user under a threshold policy.
struct ActivityRates {
  double activation = 0.0;
  double rate = 0.0;
};

ActivityRates threshold_rates(const ChannelParams& params, int tau,
                              const ThresholdSpec& threshold);
double activation_time(const ChannelParams& params, int tau, const ThresholdSpec& threshold);
/// Unweighted; callers multiply by r_i.
double transmission_rate(const ChannelParams& params, int tau,
                         const ThresholdSpec& threshold);

/// 4 max_i { 1/(-ln g_i), 1/ln^2 g_i } with g_i = p11 - p01 (natural log).
double tau0(std::span<const ChannelParams> channels);
/// max(ceil(tau0), 25).
int default_truncation(std::span<const ChannelParams> channels);

/// Sum over users of the activation time at threshold b_{0,tau}, rho = 1.
double f_tau(std::span<const ChannelParams> channels, int tau);
/// 3 f(tau).
double g_tau(std::span<const ChannelParams> channels, int tau);

/// Unweighted Whittle indices of every truncated belief state of every user,
/// stored in belief order. Values are made nondecreasing along belief order
/// (a running max that only absorbs rounding noise).
class IndexTable {
 public:
  IndexTable(std::vector<ChannelParams> channels, int tau);

  int tau() const { return tau_; }
  int states_per_user() const { return truncated_state_count(tau_); }
  std::size_t users() const { return channels_.size(); }
  std::span<const ChannelParams> channels() const { return channels_; }
  const ChannelParams& channel(std::size_t user) const { return channels_[user]; }

  double value(std::size_t user, int position) const {
    return values_[user * static_cast<std::size_t>(states_per_user()) +
                   static_cast<std::size_t>(position)];
  }
  double value(std::size_t user, const BeliefState& state) const {
    return value(user, belief_order(state, tau_));
  }
  std::span<const double> user_values(std::size_t user) const;

 private:
  std::vector<ChannelParams> channels_;
  int tau_;
  std::vector<double> values_;
};

}  // namespace schedsim
