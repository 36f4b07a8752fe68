#include "schedsim/scheduler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/sort/pdqsort/pdqsort.hpp>

namespace schedsim {

namespace {

#if defined(__SIZEOF_INT128__)
__extension__ using SortKey = unsigned __int128;
SortKey pack_key(std::uint64_t high, std::uint64_t low) {
  return (static_cast<SortKey>(high) << 64) | low;
}
std::uint64_t key_high(SortKey key) { return static_cast<std::uint64_t>(key >> 64); }
std::uint64_t key_low(SortKey key) { return static_cast<std::uint64_t>(key); }
#else
struct SortKey {
  std::uint64_t high;
  std::uint64_t low;
  bool operator<(const SortKey& o) const {
    return (high < o.high) | ((high == o.high) & (low < o.low));
  }
};
SortKey pack_key(std::uint64_t high, std::uint64_t low) { return {high, low}; }
std::uint64_t key_high(const SortKey& key) { return key.high; }
std::uint64_t key_low(const SortKey& key) { return key.low; }
#endif

}  // namespace

SortedIndexLadder::SortedIndexLadder(const IndexTable& table, const WeightVector& weights)
    : states_per_user_(table.states_per_user()) {
  if (weights.size() != table.users()) {
    throw std::invalid_argument("weight vector size does not match number of users");
  }
  const auto per_user = static_cast<std::size_t>(states_per_user_);
  // Nonnegative doubles order like their bit patterns, so (value, user,
  // position) packs into one 128-bit integer key.
  std::vector<SortKey> keys(table.users() * per_user);
  std::size_t k = 0;
  for (std::size_t u = 0; u < table.users(); ++u) {
    const auto values = table.user_values(u);
    for (std::size_t p = 0; p < per_user; ++p) {
      const double value = weighted_index(weights, u, values[p]) + 0.0;  // drops -0.0
      keys[k++] = pack_key(std::bit_cast<std::uint64_t>(value), (std::uint64_t{u} << 32) | p);
    }
  }
  boost::sort::pdqsort_branchless(keys.begin(), keys.end());
  entries_.resize(keys.size());
  for (std::size_t r = 0; r < keys.size(); ++r) {
    const std::uint64_t tie = key_low(keys[r]);
    entries_[r] = {std::bit_cast<double>(key_high(keys[r])), static_cast<std::uint32_t>(tie >> 32),
                   static_cast<std::uint32_t>(tie & 0xffffffffu)};
  }
  rank_.resize(entries_.size());
  for (std::size_t r = 0; r < entries_.size(); ++r) {
    rank_[entries_[r].user * per_user + entries_[r].position] = static_cast<std::uint32_t>(r);
  }
}

std::size_t SortedIndexLadder::rank_of(std::size_t user, int position) const {
  return rank_[user * static_cast<std::size_t>(states_per_user_) +
               static_cast<std::size_t>(position)];
}

ThresholdSpec threshold_for_cut(const UserCut& cut, int tau) {
  // Once b_s is idle it is absorbing, so any cut above it never transmits.
  if (cut.position > tau) {
    return ThresholdSpec::above_all();
  }
  return ThresholdSpec::at(belief_at(cut.position, tau), cut.rho);
}

double ThresholdPolicy::activation_sum() const {
  long double total = 0.0L;
  for (double a : activation) {
    total += a;
  }
  return static_cast<double>(total);
}

double ThresholdPolicy::weighted_rate(const WeightVector& weights) const {
  long double total = 0.0L;
  for (std::size_t u = 0; u < rate.size(); ++u) {
    total += static_cast<long double>(weights[u]) * rate[u];
  }
  return static_cast<double>(total);
}

ThresholdSpec ThresholdPolicy::user_threshold(std::size_t user) const {
  return threshold_for_cut(cuts[user], tau);
}

double solve_rho(const ChannelParams& params, int tau, const BeliefState& state,
                 double target) {
  constexpr double kTolerance = 1e-12;
  auto alpha = [&](double rho) {
    return activation_time(params, tau, ThresholdSpec::at(state, rho));
  };
  const double top = alpha(1.0);
  if (target > top + kTolerance) {
    throw std::domain_error("target activation above the achievable bracket");
  }
  if (target >= top - kTolerance) {
    return 1.0;
  }
  double lo = kMinRho;
  if (target < alpha(lo) - kTolerance) {
    throw std::domain_error("target activation below the achievable bracket");
  }
  double hi = 1.0;
  // alpha is increasing in rho, so plain bisection is exact to the last ulp.
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (alpha(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double rho = std::abs(alpha(lo) - target) <= std::abs(alpha(hi) - target) ? lo : hi;
  return std::clamp(rho, kMinRho, 1.0);
}

namespace {

double cut_activation(const IndexTable& table, std::size_t user, int position) {
  if (position == 0) {
    return 1.0;
  }
  return activation_time(table.channel(user), table.tau(),
                         threshold_for_cut({position, 1.0}, table.tau()));
}

void finalize(ThresholdPolicy& policy, const IndexTable& table) {
  const std::size_t n = table.users();
  policy.activation.resize(n);
  policy.rate.resize(n);
  for (std::size_t u = 0; u < n; ++u) {
    const ActivityRates r = threshold_rates(
        table.channel(u), table.tau(),
        policy.cuts[u].position == 0 && policy.cuts[u].rho == 1.0
            ? ThresholdSpec::below_all()
            : policy.user_threshold(u));
    policy.activation[u] = r.activation;
    policy.rate[u] = r.rate;
  }
}

}  // namespace

ThresholdPolicy initialize(const IndexTable& table, const WeightVector& weights,
                           double budget, std::vector<double>* walk) {
  if (!(budget > 0.0) || !std::isfinite(budget)) {
    throw std::invalid_argument("transmission budget must be positive");
  }
  const std::size_t n = table.users();
  const int tau = table.tau();
  const int never = truncated_state_count(tau);

  ThresholdPolicy policy;
  policy.tau = tau;
  policy.budget = budget;
  policy.cuts.assign(n, UserCut{0, 1.0});
  policy.ladder = std::make_shared<const SortedIndexLadder>(table, weights);
  const SortedIndexLadder& ladder = *policy.ladder;

  if (budget >= static_cast<double>(n)) {
    policy.kind = ThresholdPolicy::Kind::BelowAll;
    policy.slack = true;
    finalize(policy, table);
    return policy;
  }

  std::vector<double> alpha(n, 1.0);
  long double total = static_cast<long double>(n);
  bool stopped = false;
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    const LadderEntry& entry = ladder[k];
    const std::size_t u = entry.user;
    const int crossed = static_cast<int>(entry.position) + 1;
    const double after = crossed >= never ? 0.0 : cut_activation(table, u, crossed);
    const long double candidate = total - alpha[u] + after;

    if (candidate < budget && entry.value > 0.0) {
      const long double others = total - alpha[u];
      if (total < budget) {
        // Only zero-weight entries were crossed so far and that alone
        // undershoots the budget: every positive-weight state stays active.
        policy.kind = ThresholdPolicy::Kind::AtRank;
        policy.threshold_rank = k;
        policy.rho = 1.0;
        policy.slack = true;
        policy.cuts[u] = {static_cast<int>(entry.position), 1.0};
      } else {
        const auto state = belief_at(static_cast<int>(entry.position), tau);
        const double target = static_cast<double>(static_cast<long double>(budget) - others);
        const double rho = solve_rho(table.channel(u), tau, state, target);
        policy.kind = ThresholdPolicy::Kind::AtRank;
        policy.threshold_rank = k;
        policy.rho = rho;
        policy.cuts[u] = {static_cast<int>(entry.position), rho};
      }
      stopped = true;
      break;
    }

    alpha[u] = after;
    policy.cuts[u] = {crossed, 1.0};
    total = candidate;
    if (walk != nullptr) {
      walk->push_back(static_cast<double>(total));
    }
  }

  if (!stopped) {
    // Every ladder entry was crossed: nothing with positive weight exists.
    policy.kind = ThresholdPolicy::Kind::AboveAll;
    policy.threshold_rank = ladder.size();
    policy.slack = true;
    for (auto& cut : policy.cuts) {
      cut = {never, 1.0};
    }
  }
  finalize(policy, table);
  return policy;
}

ThresholdPolicy initialize(std::span<const ChannelParams> channels,
                           const WeightVector& weights, int tau, double budget) {
  const IndexTable table(std::vector<ChannelParams>(channels.begin(), channels.end()), tau);
  return initialize(table, weights, budget);
}

void schedule_slot(const ThresholdPolicy& policy, std::span<const BeliefState> beliefs,
                   RandomStream& randomization, std::span<std::uint8_t> actions) {
  if (beliefs.size() != policy.cuts.size() || actions.size() != beliefs.size()) {
    throw std::invalid_argument("belief/action vector size does not match the policy");
  }
  for (std::size_t u = 0; u < beliefs.size(); ++u) {
    const int position = belief_order(beliefs[u], policy.tau);
    const UserCut& cut = policy.cuts[u];
    if (position > cut.position) {
      actions[u] = 1;
    } else if (position == cut.position) {
      actions[u] = cut.rho >= 1.0 ? 1 : static_cast<std::uint8_t>(randomization.bernoulli(cut.rho));
    } else {
      actions[u] = 0;
    }
  }
}

void IndexPolicy::decide(const SlotView& view, RandomStream& randomization,
                         std::span<std::uint8_t> actions) {
  schedule_slot(policy_, view.beliefs, randomization, actions);
}

QwiPolicy::QwiPolicy(std::shared_ptr<const IndexTable> table, std::int64_t frame_length,
                     double budget, double backoff)
    : table_(std::move(table)),
      frame_length_(frame_length),
      effective_budget_(budget - backoff / 2.0) {
  if (!table_) {
    throw std::invalid_argument("QWI policy needs an index table");
  }
  if (frame_length_ < 1) {
    throw std::invalid_argument("frame length must be >= 1");
  }
  if (!(backoff >= 0.0) || !(effective_budget_ > 0.0)) {
    throw std::invalid_argument("backoff must be nonnegative and below 2M");
  }
}

void QwiPolicy::decide(const SlotView& view, RandomStream& randomization,
                       std::span<std::uint8_t> actions) {
  const std::int64_t frame = view.slot / frame_length_;
  if (frame != frame_index_) {
    std::vector<double> weights(view.queues.begin(), view.queues.end());
    current_ = initialize(*table_, WeightVector(std::move(weights)), effective_budget_);
    frame_index_ = frame;
    ++rebuilds_;
  }
  schedule_slot(current_, view.beliefs, randomization, actions);
}

}  // namespace schedsim
