#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "schedsim/channel.hpp"
#include "schedsim/index.hpp"
#include "schedsim/random.hpp"

namespace schedsim {

struct LadderEntry {
  double value = 0.0;
  std::uint32_t user = 0;
  std::uint32_t position = 0;  // belief order within the user
};

/// All (user, state) weighted indices in ascending order. Ties are broken by
/// user id, then by belief order, so the order is identical across runs and
/// each user's own entries appear in belief order.
class SortedIndexLadder {
 public:
  SortedIndexLadder(const IndexTable& table, const WeightVector& weights);

  std::span<const LadderEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const LadderEntry& operator[](std::size_t rank) const { return entries_[rank]; }
  std::size_t rank_of(std::size_t user, int position) const;

 private:
  int states_per_user_;
  std::vector<LadderEntry> entries_;
  std::vector<std::uint32_t> rank_;
};

/// A user's slice of a ladder threshold: positions above `position` are
/// active, `position` is active with probability `rho`. position 0 with
/// rho 1 means always active; 2 tau + 1 means never active.
struct UserCut {
  int position = 0;
  double rho = 1.0;
};

/// Output of the initialization phase: the r-weighted index policy.
/// Immutable after construction; safe to share read-only across threads.
struct ThresholdPolicy {
  enum class Kind { BelowAll, AtRank, AboveAll };

  Kind kind = Kind::BelowAll;
  std::size_t threshold_rank = 0;
  double rho = 1.0;
  int tau = 1;
  double budget = 0.0;
  /// True when the budget does not bind (M >= N or only zero weights remain).
  bool slack = false;
  std::shared_ptr<const SortedIndexLadder> ladder;
  std::vector<UserCut> cuts;
  /// Per-user activation time and unweighted rate at the final threshold.
  std::vector<double> activation;
  std::vector<double> rate;

  double activation_sum() const;
  /// Sum_i r_i nu_i.
  double weighted_rate(const WeightVector& weights) const;
  ThresholdSpec user_threshold(std::size_t user) const;
};

/// Single-user threshold spec equivalent to "positions >= cut.position are
/// active, cut.position with probability rho".
ThresholdSpec threshold_for_cut(const UserCut& cut, int tau);

/// Smallest randomization accepted by solve_rho.
inline constexpr double kMinRho = 1e-15;

/// Randomization at `state` giving activation time `target`, by bisection.
/// Throws std::domain_error if the target lies outside [alpha(0+), alpha(1)].
double solve_rho(const ChannelParams& params, int tau, const BeliefState& state,
                 double target);

/// Initialization phase. `walk`, when given, receives the running sum of
/// activation times after each ladder step.
ThresholdPolicy initialize(const IndexTable& table, const WeightVector& weights,
                           double budget, std::vector<double>* walk = nullptr);
ThresholdPolicy initialize(std::span<const ChannelParams> channels,
                           const WeightVector& weights, int tau, double budget);

/// One slot of the threshold policy. Only beliefs are consulted; channel
/// states never reach a policy.
void schedule_slot(const ThresholdPolicy& policy, std::span<const BeliefState> beliefs,
                   RandomStream& randomization, std::span<std::uint8_t> actions);

/// What a policy may observe at the start of a slot.
struct SlotView {
  std::int64_t slot = 0;
  std::span<const std::int64_t> queues;
  std::span<const BeliefState> beliefs;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual void decide(const SlotView& view, RandomStream& randomization,
                      std::span<std::uint8_t> actions) = 0;
  virtual std::string name() const = 0;
};

/// phi_tau(r, M): a fixed threshold policy.
class IndexPolicy final : public Policy {
 public:
  explicit IndexPolicy(ThresholdPolicy policy) : policy_(std::move(policy)) {}

  void decide(const SlotView& view, RandomStream& randomization,
              std::span<std::uint8_t> actions) override;
  std::string name() const override { return "index"; }
  const ThresholdPolicy& policy() const { return policy_; }

 private:
  ThresholdPolicy policy_;
};

/// QWI_tau(T, M): re-initializes with r = q[kT] and budget M - eps/2 at the
/// start of every frame of T slots.
class QwiPolicy final : public Policy {
 public:
  QwiPolicy(std::shared_ptr<const IndexTable> table, std::int64_t frame_length,
            double budget, double backoff);

  void decide(const SlotView& view, RandomStream& randomization,
              std::span<std::uint8_t> actions) override;
  std::string name() const override { return "qwi"; }

  std::int64_t frame_length() const { return frame_length_; }
  double effective_budget() const { return effective_budget_; }
  std::int64_t frame_index() const { return frame_index_; }
  /// Number of re-initializations so far.
  std::int64_t rebuilds() const { return rebuilds_; }
  const ThresholdPolicy& current() const { return current_; }

 private:
  std::shared_ptr<const IndexTable> table_;
  std::int64_t frame_length_;
  double effective_budget_;
  std::int64_t frame_index_ = -1;
  std::int64_t rebuilds_ = 0;
  ThresholdPolicy current_;
};

}  // namespace schedsim
