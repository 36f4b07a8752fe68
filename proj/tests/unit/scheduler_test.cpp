#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "schedsim/oracles.hpp"
#include "schedsim/scheduler.hpp"

namespace schedsim {
namespace {

struct Instance {
  std::vector<ChannelParams> channels;
  std::vector<double> weights;
  double budget;
};

Instance random_instance(std::mt19937_64& engine, std::size_t n) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Instance inst;
  for (std::size_t i = 0; i < n; ++i) {
    const double gap = 0.05 + 0.85 * unit(engine);
    const double p01 = 0.01 + (0.98 - gap) * unit(engine);
    inst.channels.emplace_back(p01 + gap, p01);
    inst.weights.push_back(0.1 + 9.9 * unit(engine));
  }
  inst.budget = 0.1 + (static_cast<double>(n) - 0.2) * unit(engine);
  return inst;
}

double oracle_sum(const IndexTable& table, const ThresholdPolicy& policy) {
  double total = 0.0;
  for (std::size_t u = 0; u < table.users(); ++u) {
    total += exact_stationary_metrics(table.channel(u), table.tau(), policy.user_threshold(u))
                 .activation;
  }
  return total;
}

TEST(SortedIndexLadder, SortedWithDeterministicTies) {
  const std::vector<ChannelParams> channels{{0.8, 0.2}, {0.8, 0.2}, {0.7, 0.1}};
  const IndexTable table(channels, 4);
  const SortedIndexLadder ladder(table, WeightVector({1.0, 1.0, 0.0}));
  ASSERT_EQ(ladder.size(), 27u);
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    seen.insert({ladder[k].user, ladder[k].position});
    EXPECT_EQ(ladder.rank_of(ladder[k].user, static_cast<int>(ladder[k].position)), k);
    if (k > 0) {
      const auto& a = ladder[k - 1];
      const auto& b = ladder[k];
      EXPECT_TRUE(a.value < b.value ||
                  (a.value == b.value && (a.user < b.user ||
                                          (a.user == b.user && a.position < b.position))));
    }
  }
  EXPECT_EQ(seen.size(), 27u);
  // Zero-weight user occupies the bottom of the ladder.
  for (std::size_t k = 0; k < 9; ++k) {
    EXPECT_EQ(ladder[k].user, 2u);
  }
  // Identical users interleave by user id on equal values.
  EXPECT_EQ(ladder[9].user, 0u);
  EXPECT_EQ(ladder[10].user, 1u);
}

TEST(Initialize, SingleUserBudgetCoversEverything) {
  const std::vector<ChannelParams> channels{{0.8, 0.2}};
  const auto policy = initialize(channels, WeightVector::uniform(1), 9, 1.0);
  EXPECT_EQ(policy.kind, ThresholdPolicy::Kind::BelowAll);
  EXPECT_TRUE(policy.slack);
  EXPECT_EQ(policy.activation_sum(), 1.0);
}

TEST(Initialize, SingleUserThresholdAtStationary) {
  const std::vector<ChannelParams> channels{{0.8, 0.2}};
  const IndexTable table(channels, 9);
  const auto policy = initialize(table, WeightVector::uniform(1), 0.28);
  ASSERT_EQ(policy.kind, ThresholdPolicy::Kind::AtRank);
  const auto& entry = (*policy.ladder)[policy.threshold_rank];
  EXPECT_EQ(belief_at(static_cast<int>(entry.position), 9), BeliefState::stationary());
  EXPECT_NEAR(policy.rho, 1.0, 1e-9);
  EXPECT_NEAR(policy.activation_sum(), 0.28, 1e-9);
}

TEST(Initialize, FractionalRandomizationBetweenWalkValues) {
  const std::vector<ChannelParams> channels{{0.75, 0.15}, {0.75, 0.15}};
  const IndexTable table(channels, 12);
  std::vector<double> walk;
  initialize(table, WeightVector::uniform(2), 0.01, &walk);
  ASSERT_GE(walk.size(), 6u);
  const double budget = 0.5 * (walk[4] + walk[5]);
  const auto policy = initialize(table, WeightVector::uniform(2), budget);
  EXPECT_GT(policy.rho, 0.0);
  EXPECT_LT(policy.rho, 1.0);
  EXPECT_NEAR(policy.activation_sum(), budget, 1e-9);
  EXPECT_NEAR(oracle_sum(table, policy), budget, 1e-9);
}

TEST(Initialize, BudgetEqualityAgainstOracle) {
  std::mt19937_64 engine(11);
  for (int k = 0; k < 60; ++k) {
    const Instance inst = random_instance(engine, 2 + static_cast<std::size_t>(k % 9));
    const IndexTable table(inst.channels, 25);
    const auto policy = initialize(table, WeightVector(inst.weights), inst.budget);
    ASSERT_FALSE(policy.slack);
    EXPECT_NEAR(policy.activation_sum(), inst.budget, 1e-9);
    EXPECT_NEAR(oracle_sum(table, policy), inst.budget, 1e-9);
  }
}

TEST(Initialize, WalkIsNonincreasing) {
  std::mt19937_64 engine(12);
  const Instance inst = random_instance(engine, 6);
  const IndexTable table(inst.channels, 20);
  std::vector<double> walk;
  initialize(table, WeightVector(inst.weights), 1e-3, &walk);
  double previous = 6.0;
  for (double s : walk) {
    EXPECT_LE(s, previous);
    previous = s;
  }
}

TEST(Initialize, ScaleInvariance) {
  std::mt19937_64 engine(13);
  for (int k = 0; k < 20; ++k) {
    const Instance inst = random_instance(engine, 5);
    const IndexTable table(inst.channels, 25);
    const auto base = initialize(table, WeightVector(inst.weights), inst.budget);
    for (double scale : {0.5, 4.0, 1024.0}) {
      std::vector<double> scaled = inst.weights;
      for (auto& w : scaled) {
        w *= scale;
      }
      const auto other = initialize(table, WeightVector(scaled), inst.budget);
      EXPECT_EQ(other.threshold_rank, base.threshold_rank);
      EXPECT_EQ(other.rho, base.rho);
      for (std::size_t r = 0; r < base.ladder->size(); ++r) {
        ASSERT_EQ((*other.ladder)[r].user, (*base.ladder)[r].user);
        ASSERT_EQ((*other.ladder)[r].position, (*base.ladder)[r].position);
      }
    }
  }
}

TEST(Initialize, ZeroWeightsGiveAboveAll) {
  const std::vector<ChannelParams> channels{{0.8, 0.2}, {0.6, 0.1}};
  const auto policy = initialize(channels, WeightVector({0.0, 0.0}), 10, 1.0);
  EXPECT_EQ(policy.kind, ThresholdPolicy::Kind::AboveAll);
  EXPECT_EQ(policy.activation_sum(), 0.0);
}

TEST(Initialize, SurplusBudgetKeepsPositiveUsersAlwaysActive) {
  const std::vector<ChannelParams> channels{{0.8, 0.2}, {0.6, 0.1}, {0.7, 0.3}};
  const auto policy = initialize(channels, WeightVector({0.0, 2.0, 0.0}), 10, 1.5);
  EXPECT_TRUE(policy.slack);
  EXPECT_EQ(policy.activation[1], 1.0);
  EXPECT_EQ(policy.activation[0], 0.0);
  EXPECT_EQ(policy.activation[2], 0.0);
}

TEST(Initialize, RejectsNonPositiveBudget) {
  const std::vector<ChannelParams> channels{{0.8, 0.2}};
  EXPECT_THROW(initialize(channels, WeightVector::uniform(1), 5, 0.0), std::invalid_argument);
  EXPECT_THROW(initialize(channels, WeightVector::uniform(2), 5, 0.5), std::invalid_argument);
}

TEST(WeightedRate, LipschitzInBudget) {
  std::mt19937_64 engine(14);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    Instance inst = random_instance(engine, 4);
    for (auto& w : inst.weights) {
      w = std::floor(50.0 * unit(engine));
    }
    const double eps = inst.budget * unit(engine);
    const IndexTable table(inst.channels, 25);
    const WeightVector q(inst.weights);
    const double high = initialize(table, q, inst.budget).weighted_rate(q);
    const double low = initialize(table, q, inst.budget - eps).weighted_rate(q);
    EXPECT_LE(std::abs(high - low), eps * q.sum() + 1e-12);
  }
}

TEST(SolveRho, Examples) {
  const ChannelParams c(0.8, 0.2);
  const auto state = BeliefState::observed(0, 3);
  const double full = activation_time(c, 10, ThresholdSpec::at(state, 1.0));
  EXPECT_EQ(solve_rho(c, 10, state, full), 1.0);
  const double half = activation_time(c, 10, ThresholdSpec::at(state, 0.5));
  EXPECT_NEAR(solve_rho(c, 10, state, half), 0.5, 1e-10);
  EXPECT_THROW(solve_rho(c, 10, state, full + 0.01), std::domain_error);
}

TEST(ScheduleSlot, Examples) {
  const std::vector<ChannelParams> channels{{0.8, 0.2}, {0.6, 0.1}};
  const IndexTable table(channels, 5);
  RandomStream rng(1);
  std::vector<BeliefState> beliefs{BeliefState::observed(0, 1), BeliefState::observed(1, 1)};
  std::vector<std::uint8_t> actions(2);

  schedule_slot(initialize(table, WeightVector({0.0, 0.0}), 1.0), beliefs, rng, actions);
  EXPECT_EQ(actions, (std::vector<std::uint8_t>{0, 0}));
  schedule_slot(initialize(table, WeightVector::uniform(2), 2.0), beliefs, rng, actions);
  EXPECT_EQ(actions, (std::vector<std::uint8_t>{1, 1}));

  // Threshold exactly at user 0's stationary entry with rho = 1.
  const double at_s = activation_time(channels[0], 5, ThresholdSpec::at(BeliefState::stationary()));
  const auto policy = initialize(table, WeightVector({1.0, 0.0}), at_s);
  ASSERT_NEAR(policy.rho, 1.0, 1e-9);
  beliefs = {BeliefState::stationary(), BeliefState::stationary()};
  for (int k = 0; k < 20; ++k) {
    schedule_slot(policy, beliefs, rng, actions);
    EXPECT_EQ(actions[0], 1);
    EXPECT_EQ(actions[1], 0);
  }
}

TEST(ScheduleSlot, MatchesLadderRankRule) {
  std::mt19937_64 engine(15);
  const Instance inst = random_instance(engine, 4);
  const IndexTable table(inst.channels, 8);
  const auto policy = initialize(table, WeightVector(inst.weights), inst.budget);
  ASSERT_EQ(policy.kind, ThresholdPolicy::Kind::AtRank);
  RandomStream rng(2);
  std::vector<std::uint8_t> actions(4);
  for (int p = 0; p < truncated_state_count(8); ++p) {
    std::vector<BeliefState> beliefs(4, belief_at(p, 8));
    schedule_slot(policy, beliefs, rng, actions);
    for (std::size_t u = 0; u < 4; ++u) {
      const std::size_t rank = policy.ladder->rank_of(u, p);
      if (rank > policy.threshold_rank) {
        EXPECT_EQ(actions[u], 1);
      } else if (rank < policy.threshold_rank) {
        EXPECT_EQ(actions[u], 0);
      }
    }
  }
}

TEST(QwiPolicy, RebuildsOnlyAtFrameBoundaries) {
  const std::vector<ChannelParams> channels{{0.8, 0.2}, {0.6, 0.1}};
  auto table = std::make_shared<const IndexTable>(channels, 10);
  QwiPolicy qwi(table, 5, 1.0, 0.02);
  EXPECT_NEAR(qwi.effective_budget(), 0.99, 1e-15);
  RandomStream rng(3);
  std::vector<std::int64_t> queues{3, 1};
  std::vector<BeliefState> beliefs(2, BeliefState::stationary());
  std::vector<std::uint8_t> actions(2);
  for (std::int64_t t = 0; t < 23; ++t) {
    queues[static_cast<std::size_t>(t % 2)] += 1;
    qwi.decide({t, queues, beliefs}, rng, actions);
    EXPECT_EQ(qwi.frame_index(), t / 5);
    EXPECT_EQ(qwi.rebuilds(), t / 5 + 1);
  }
}

TEST(QwiPolicy, EmptyQueuesScheduleNobody) {
  const std::vector<ChannelParams> channels{{0.8, 0.2}, {0.6, 0.1}};
  QwiPolicy qwi(std::make_shared<const IndexTable>(channels, 10), 10, 1.0, 0.02);
  RandomStream rng(4);
  std::vector<std::int64_t> queues{0, 0};
  std::vector<BeliefState> beliefs(2, BeliefState::observed(1, 1));
  std::vector<std::uint8_t> actions(2, 1);
  for (std::int64_t t = 0; t < 10; ++t) {
    qwi.decide({t, queues, beliefs}, rng, actions);
    EXPECT_EQ(actions, (std::vector<std::uint8_t>{0, 0}));
  }
  EXPECT_EQ(qwi.current().kind, ThresholdPolicy::Kind::AboveAll);
}

TEST(QwiPolicy, SingleQueueFollowsUnweightedPolicy) {
  const std::vector<ChannelParams> channels{{0.8, 0.2}, {0.6, 0.1}};
  auto table = std::make_shared<const IndexTable>(channels, 10);
  QwiPolicy qwi(table, 10, 0.3, 0.0);
  RandomStream rng(5);
  std::vector<std::int64_t> queues{0, 7};
  std::vector<BeliefState> beliefs(2, BeliefState::stationary());
  std::vector<std::uint8_t> actions(2);
  qwi.decide({0, queues, beliefs}, rng, actions);
  const auto reference = initialize(*table, WeightVector({0.0, 1.0}), 0.3);
  EXPECT_EQ(qwi.current().cuts[1].position, reference.cuts[1].position);
  EXPECT_EQ(qwi.current().rho, reference.rho);
  EXPECT_NEAR(qwi.current().activation[1], 0.3, 1e-9);
}

}  // namespace
}  // namespace schedsim
