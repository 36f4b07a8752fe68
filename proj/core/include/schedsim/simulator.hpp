#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "schedsim/channel.hpp"
#include "schedsim/index.hpp"
#include "schedsim/random.hpp"
#include "schedsim/scheduler.hpp"

namespace schedsim {

struct ArrivalSpec {
  enum class Kind { Bernoulli, Poisson };
  Kind kind = Kind::Bernoulli;
  double rate = 0.0;
};

enum class SimMode { Queued, Backlogged };

/// How beliefs start. Observed draws a channel state one slot before t = 0
/// and starts every user at Observed(that state, 1).
enum class InitialBelief { Stationary, Observed };

struct PolicySpec {
  /// index | qwi | round-robin | myopic-belief | random
  std::string name = "qwi";
  /// Weights of the fixed index policy; empty means all ones.
  std::vector<double> weights;
};

struct SimConfig {
  std::vector<ChannelParams> channels;
  int tau = 25;
  std::int64_t frame_length = 1000;
  double budget = 1.0;
  /// QWI backoff epsilon; negative means 0.02 * budget.
  double backoff = -1.0;
  std::vector<ArrivalSpec> arrivals;
  std::int64_t horizon = 100000;
  int replications = 1;
  std::uint64_t master_seed = 1;
  PolicySpec policy;
  SimMode mode = SimMode::Queued;
  InitialBelief initial_belief = InitialBelief::Stationary;
  /// Queue-sum sampling period; 0 means the frame length.
  std::int64_t sample_interval = 0;
  int jobs = 1;

  std::size_t users() const { return channels.size(); }
  double resolved_backoff() const { return backoff < 0.0 ? 0.02 * budget : backoff; }
  std::int64_t resolved_sample_interval() const {
    return sample_interval > 0 ? sample_interval : frame_length;
  }
};

/// Throws std::invalid_argument on a violated SimConfig invariant.
void validate_config(const SimConfig& config);

struct ReplicationMetrics {
  int replication = 0;
  std::uint64_t seed = 0;
  std::int64_t slots = 0;
  std::vector<std::int64_t> transmissions;
  /// Transmissions that met an ON channel (a * C).
  std::vector<std::int64_t> successes;
  /// Packets actually removed from a queue (equals successes when backlogged).
  std::vector<std::int64_t> delivered;
  std::vector<std::int64_t> arrivals;
  /// Sum over slots of pi_i[t] * a_i[t].
  std::vector<double> expected_successes;
  /// Transmissions per slot, with batch-means standard error.
  double transmissions_per_slot = 0.0;
  double transmissions_stderr = 0.0;
  /// Queue sums sampled at slots k * sample_interval (k >= 1).
  std::vector<std::int64_t> sample_slots;
  std::vector<std::int64_t> queue_sums;
  std::vector<double> lyapunov;
  std::int64_t max_queue = 0;
  std::vector<std::int64_t> final_queues;

  double throughput(std::size_t user) const;
  double belief_rate(std::size_t user) const;
};

struct Metrics {
  std::vector<ReplicationMetrics> replications;
  /// Mean over replications of transmissions per slot.
  double transmissions_per_slot = 0.0;
  double transmissions_stderr = 0.0;
  /// Per-user mean over replications.
  std::vector<double> throughput;
  std::vector<double> belief_rate;
  std::vector<double> belief_rate_stderr;
  /// Weighted rate sum_i r_i * throughput_i with the policy weights (ones if none).
  double weighted_rate = 0.0;
};

/// Builds a fresh policy for one replication.
using PolicyFactory = std::function<std::unique_ptr<Policy>()>;
PolicyFactory make_policy_factory(const SimConfig& config);

/// One replication stepped slot by slot. Channel states are internal; the
/// policy is only ever handed a SlotView.
class Replication {
 public:
  Replication(const SimConfig& config, std::unique_ptr<Policy> policy, int replication);

  void step();
  void run_to(std::int64_t horizon);

  std::int64_t slot() const { return slot_; }
  std::span<const std::int64_t> queues() const { return queues_; }
  std::span<const BeliefState> beliefs() const { return beliefs_; }
  std::span<const std::uint8_t> last_actions() const { return actions_; }
  /// Channel states of the slot just simulated (test visibility only).
  std::span<const std::uint8_t> last_channel_states() const { return last_channel_; }
  const Policy& policy() const { return *policy_; }

  ReplicationMetrics finish() const;

 private:
  const SimConfig& config_;
  std::unique_ptr<Policy> policy_;
  int replication_;
  std::int64_t slot_ = 0;
  std::int64_t interval_;

  std::vector<RandomStream> channel_streams_;
  std::vector<RandomStream> arrival_streams_;
  RandomStream policy_stream_;

  std::vector<std::uint8_t> channel_;
  std::vector<std::uint8_t> last_channel_;
  std::vector<BeliefState> beliefs_;
  std::vector<std::int64_t> queues_;
  std::vector<std::int64_t> ones_;
  std::vector<std::uint8_t> actions_;
  std::vector<std::vector<double>> belief_values_;

  ReplicationMetrics metrics_;
  std::vector<std::int64_t> batch_transmissions_;
  std::int64_t slot_transmissions_ = 0;
};

/// Runs every replication (in parallel when config.jobs > 1) and merges.
Metrics run(const SimConfig& config);
Metrics run(const SimConfig& config, const PolicyFactory& factory);

struct RatePoint {
  /// Belief-weighted estimate (1/H) sum_t pi_i[t] a_i[t].
  std::vector<double> rates;
  std::vector<double> standard_error;
  /// Realized-success estimate of the same quantity.
  std::vector<double> realized;
  double transmissions_per_slot = 0.0;
  double transmissions_stderr = 0.0;
};

/// Runs phi_tau(r, budget) in backlogged mode.
RatePoint estimate_rate_point(const SimConfig& config, const WeightVector& weights);

enum class Verdict { Stable, Unstable, Inconclusive };
std::string to_string(Verdict verdict);

struct StabilityOptions {
  double drift_tolerance = 1e-3;
  std::int64_t queue_ceiling = 1'000'000;
};

struct DriftFit {
  double slope = 0.0;
  double slope_se = 0.0;
  Verdict verdict = Verdict::Inconclusive;
};

/// Least-squares slope of the queue-sum samples over the last half.
DriftFit fit_drift(const ReplicationMetrics& metrics, const StabilityOptions& options);

struct StabilityReport {
  Verdict verdict = Verdict::Inconclusive;
  double slope = 0.0;
  double slope_se = 0.0;
  std::int64_t max_queue = 0;
  std::vector<DriftFit> per_replication;
  int stable_count = 0;
  int unstable_count = 0;
  double transmissions_per_slot = 0.0;
};

StabilityReport stability_probe(const SimConfig& config, const StabilityOptions& options = {});
StabilityReport stability_verdict(const Metrics& metrics, const StabilityOptions& options = {});

struct ConstraintReport {
  double transmissions_per_slot = 0.0;
  double standard_error = 0.0;
  double budget = 0.0;
  bool pass = false;
};

/// Passes iff Z <= M + 3 stderr.
ConstraintReport constraint_audit(const Metrics& metrics, double budget);

}  // namespace schedsim
