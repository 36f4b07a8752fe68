#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "schedsim/random.hpp"

namespace schedsim {

/// One Gilbert-Elliott ON/OFF channel. Invariant: 0 < p01 < p11 < 1
/// (positively correlated).
class ChannelParams {
 public:
  ChannelParams(double p11, double p01);

  double p11() const { return p11_; }
  double p01() const { return p01_; }
  /// Memory factor p11 - p01, in (0, 1).
  double memory() const { return p11_ - p01_; }
  /// Stationary ON probability p01 / (1 + p01 - p11).
  double stationary() const { return p01_ / (1.0 + p01_ - p11_); }
  /// One idle step of the belief operator: x p11 + (1 - x) p01.
  double evolve(double belief) const { return belief * p11_ + (1.0 - belief) * p01_; }

  /// Belief l slots after observing OFF, untruncated (l >= 1).
  double belief_after_off(int age) const;
  /// Belief l slots after observing ON, untruncated (l >= 1).
  double belief_after_on(int age) const;

  friend bool operator==(const ChannelParams&, const ChannelParams&) = default;

 private:
  double p11_;
  double p01_;
};

double stationary_prob(const ChannelParams& params);

/// Symbolic belief: either the stationary value or "last observation `last`
/// was made `age` slots ago". Values are derived from closed forms on demand.
struct BeliefState {
  enum class Kind : std::uint8_t { Stationary, Observed };

  Kind kind = Kind::Stationary;
  std::uint8_t last = 0;
  int age = 0;

  static constexpr BeliefState stationary() { return {}; }
  static constexpr BeliefState observed(int bit, int age) {
    return {Kind::Observed, static_cast<std::uint8_t>(bit != 0), age};
  }

  bool is_stationary() const { return kind == Kind::Stationary; }

  friend bool operator==(const BeliefState&, const BeliefState&) = default;
};

std::string to_string(const BeliefState& state);

/// Number of belief states per channel under truncation `tau`: 2 tau + 1.
constexpr int truncated_state_count(int tau) { return 2 * tau + 1; }

/// Position of a state in ascending-belief order:
/// b_{0,1} .. b_{0,tau}, b_s, b_{1,tau} .. b_{1,1}  ->  0 .. 2 tau.
int belief_order(const BeliefState& state, int tau);
/// Inverse of belief_order.
BeliefState belief_at(int position, int tau);

/// Throws std::invalid_argument unless the state belongs to B^tau.
void check_state(const BeliefState& state, int tau);

double belief_value(const ChannelParams& params, const BeliefState& state, int tau);

/// Belief update after one slot. `observation` must be present exactly when
/// the user was scheduled (ARQ feedback only follows a transmission).
BeliefState advance_belief(const BeliefState& state, bool scheduled,
                           std::optional<int> observation, int tau);

/// Next channel state given a uniform draw in [0, 1).
bool next_channel_state(const ChannelParams& params, bool current, double draw);
bool sample_transition(RandomStream& stream, const ChannelParams& params, bool current);

/// A sampled state sequence C[0..horizon). C[0] is drawn from the stationary
/// distribution unless `initial` is given.
struct ChannelTrajectory {
  std::vector<std::uint8_t> states;

  static ChannelTrajectory generate(const ChannelParams& params, std::int64_t horizon,
                                    RandomStream& stream,
                                    std::optional<bool> initial = std::nullopt);
};

}  // namespace schedsim
