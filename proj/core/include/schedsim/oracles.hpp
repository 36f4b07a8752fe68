#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "schedsim/channel.hpp"
#include "schedsim/index.hpp"

namespace schedsim {

// Independent ground truth used only for validation. Nothing here calls the
// closed forms in index.hpp.

/// Position reached from `position` after one idle slot (belief order).
int idle_successor(int position, int tau);

/// Per-state activation probabilities a(s) in belief order for a threshold.
std::vector<double> activation_profile(int tau, const ThresholdSpec& threshold);

/// Transition matrix of one user's truncated belief chain under a per-state
/// activation profile. Row-major, 2 tau + 1 states in belief order.
class BeliefChainKernel {
 public:
  BeliefChainKernel(const ChannelParams& params, int tau, std::vector<double> activation);

  int tau() const { return tau_; }
  int size() const { return truncated_state_count(tau_); }
  double at(int from, int to) const {
    return matrix_[static_cast<std::size_t>(from) * static_cast<std::size_t>(size()) +
                   static_cast<std::size_t>(to)];
  }
  std::span<const double> activation() const { return activation_; }
  std::span<const double> beliefs() const { return beliefs_; }
  /// max_s |sum_t P(s, t) - 1|.
  double max_row_error() const;

 private:
  int tau_;
  std::vector<double> activation_;
  std::vector<double> beliefs_;
  std::vector<double> matrix_;
};

struct StationarySolution {
  std::vector<double> distribution;
  /// max_s |(pi P)(s) - pi(s)|.
  double residual = 0.0;
  bool power_iteration = false;
};

/// Direct solve of pi (P - I) = 0, sum pi = 1, with a power-iteration
/// fallback when the direct solution is ill-conditioned.
StationarySolution stationary_distribution(const BeliefChainKernel& kernel);

struct OracleRates {
  double activation = 0.0;
  double rate = 0.0;
  double residual = 0.0;
  bool power_iteration = false;
};

OracleRates exact_stationary_metrics(const ChannelParams& params, int tau,
                                     const ThresholdSpec& threshold);

/// Single-user average-reward problem paying `weight * belief` when active
/// and `subsidy` when idle.
struct SubsidyProblem {
  ChannelParams params;
  int tau = 1;
  double subsidy = 0.0;
  double weight = 1.0;
};

enum class Preference : std::uint8_t { Active, Passive, Indifferent };

struct SubsidySolution {
  double gain = 0.0;
  std::vector<double> bias;
  /// Q(active) - Q(passive) per state.
  std::vector<double> action_gap;
  std::vector<Preference> actions;
  int iterations = 0;
  double span = 0.0;
};

struct ValueIterationOptions {
  int max_iterations = 2'000'000;
  /// Lazy-chain weight; 1 is plain relative value iteration.
  double aperiodicity = 0.95;
  /// Optional starting bias (e.g. the previous solve of a nearby subsidy).
  std::span<const double> warm_start{};
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(int iterations, double span);
  int iterations() const { return iterations_; }
  double span() const { return span_; }

 private:
  int iterations_;
  double span_;
};

/// Relative value iteration with Stationary as the reference state; stops
/// when the span of the update falls below `tolerance`. States whose action
/// values differ by less than 10 * tolerance are reported Indifferent.
SubsidySolution subsidy_value_iteration(const SubsidyProblem& problem, double tolerance,
                                        const ValueIterationOptions& options = {});

/// States where idling is optimal or tied, in belief order.
std::vector<bool> passive_set(const SubsidySolution& solution);

struct IndexOracleOptions {
  double value_iteration_tolerance = 1e-10;
  double bisection_tolerance = 1e-8;
};

/// Infimum subsidy in [0, 1] at which idling `state` becomes optimal (r = 1).
double whittle_index_oracle(const ChannelParams& params, const BeliefState& state, int tau,
                            const IndexOracleOptions& options = {});

}  // namespace schedsim
