#include "schedsim/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "schedsim/baselines.hpp"

namespace schedsim {

namespace {

constexpr std::int64_t kBatches = 20;

double mean_of(std::span<const double> xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Standard error of the mean of independent samples.
double standard_error(std::span<const double> xs) {
  const auto n = static_cast<double>(xs.size());
  if (xs.size() < 2) {
    return 0.0;
  }
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) {
    ss += (x - m) * (x - m);
  }
  return std::sqrt(ss / (n - 1.0) / n);
}

std::vector<double> policy_weights(const SimConfig& config) {
  if (config.policy.weights.empty()) {
    return std::vector<double>(config.users(), 1.0);
  }
  return config.policy.weights;
}

}  // namespace

void validate_config(const SimConfig& config) {
  const std::size_t n = config.users();
  if (n == 0) {
    throw std::invalid_argument("at least one channel is required");
  }
  if (config.tau < 1) {
    throw std::invalid_argument("tau must be >= 1");
  }
  if (config.frame_length < 1) {
    throw std::invalid_argument("frame length must be >= 1");
  }
  if (!(config.budget > 0.0) || config.budget > static_cast<double>(n)) {
    throw std::invalid_argument("budget M must lie in (0, N]");
  }
  if (config.horizon < 1) {
    throw std::invalid_argument("horizon must be >= 1");
  }
  if (config.replications < 1) {
    throw std::invalid_argument("replications must be >= 1");
  }
  if (config.mode == SimMode::Queued) {
    if (config.horizon % config.frame_length != 0) {
      throw std::invalid_argument("horizon must be a multiple of the frame length");
    }
    if (config.arrivals.size() != n) {
      throw std::invalid_argument("one arrival spec per user is required");
    }
  }
  for (const auto& a : config.arrivals) {
    if (!(a.rate >= 0.0) || !std::isfinite(a.rate)) {
      throw std::invalid_argument("arrival rates must be finite and nonnegative");
    }
    if (a.kind == ArrivalSpec::Kind::Bernoulli && a.rate > 1.0) {
      throw std::invalid_argument("Bernoulli arrival rate must be <= 1");
    }
  }
  if (!config.policy.weights.empty() && config.policy.weights.size() != n) {
    throw std::invalid_argument("policy weight vector size does not match number of users");
  }
  if (config.resolved_backoff() >= 2.0 * config.budget) {
    throw std::invalid_argument("backoff must be below 2M");
  }
}

double ReplicationMetrics::throughput(std::size_t user) const {
  return slots == 0 ? 0.0 : static_cast<double>(delivered[user]) / static_cast<double>(slots);
}

double ReplicationMetrics::belief_rate(std::size_t user) const {
  return slots == 0 ? 0.0 : expected_successes[user] / static_cast<double>(slots);
}

PolicyFactory make_policy_factory(const SimConfig& config) {
  const std::string& name = config.policy.name;
  if (name == "index") {
    const IndexTable table(config.channels, config.tau);
    auto policy = std::make_shared<const ThresholdPolicy>(
        initialize(table, WeightVector(policy_weights(config)), config.budget));
    return [policy] { return std::make_unique<IndexPolicy>(*policy); };
  }
  if (name == "qwi") {
    auto table = std::make_shared<const IndexTable>(config.channels, config.tau);
    const std::int64_t frame = config.frame_length;
    const double budget = config.budget;
    const double backoff = config.resolved_backoff();
    return [=] { return std::make_unique<QwiPolicy>(table, frame, budget, backoff); };
  }
  // Validates the name eagerly so a bad config fails before any thread starts.
  make_baseline(name, config.channels, config.tau, config.budget);
  return [name, channels = config.channels, tau = config.tau, budget = config.budget] {
    return make_baseline(name, channels, tau, budget);
  };
}

Replication::Replication(const SimConfig& config, std::unique_ptr<Policy> policy,
                         int replication)
    : config_(config),
      policy_(std::move(policy)),
      replication_(replication),
      interval_(config.resolved_sample_interval()),
      policy_stream_(RandomStream::named(config.master_seed, static_cast<std::uint64_t>(replication),
                                         StreamKind::Policy)) {
  const std::size_t n = config.users();
  channel_.resize(n);
  last_channel_.resize(n);
  beliefs_.assign(n, BeliefState::stationary());
  queues_.assign(n, 0);
  ones_.assign(n, 1);
  actions_.assign(n, 0);
  belief_values_.resize(n);

  const auto rep = static_cast<std::uint64_t>(replication);
  for (std::size_t u = 0; u < n; ++u) {
    const ChannelParams& c = config.channels[u];
    channel_streams_.push_back(RandomStream::named(config.master_seed, rep, StreamKind::Channel, u));
    arrival_streams_.push_back(RandomStream::named(config.master_seed, rep, StreamKind::Arrival, u));
    auto& values = belief_values_[u];
    values.resize(static_cast<std::size_t>(truncated_state_count(config.tau)));
    for (int p = 0; p < truncated_state_count(config.tau); ++p) {
      values[static_cast<std::size_t>(p)] = belief_value(c, belief_at(p, config.tau), config.tau);
    }
    if (config.initial_belief == InitialBelief::Observed) {
      auto initial = RandomStream::named(config.master_seed, rep, StreamKind::Initial, u);
      const bool before = initial.bernoulli(c.stationary());
      beliefs_[u] = BeliefState::observed(before ? 1 : 0, 1);
      channel_[u] = sample_transition(channel_streams_[u], c, before) ? 1 : 0;
    } else {
      channel_[u] = channel_streams_[u].bernoulli(c.stationary()) ? 1 : 0;
    }
  }

  metrics_.replication = replication;
  metrics_.seed = config.master_seed + rep;
  metrics_.transmissions.assign(n, 0);
  metrics_.successes.assign(n, 0);
  metrics_.delivered.assign(n, 0);
  metrics_.arrivals.assign(n, 0);
  metrics_.expected_successes.assign(n, 0.0);
  batch_transmissions_.assign(static_cast<std::size_t>(kBatches), 0);
}

void Replication::step() {
  const std::size_t n = config_.users();
  const bool backlogged = config_.mode == SimMode::Backlogged;
  const SlotView view{slot_, backlogged ? std::span<const std::int64_t>(ones_)
                                        : std::span<const std::int64_t>(queues_),
                      beliefs_};
  policy_->decide(view, policy_stream_, actions_);

  std::int64_t scheduled = 0;
  std::int64_t queue_sum = 0;
  std::int64_t square_sum = 0;
  for (std::size_t u = 0; u < n; ++u) {
    const bool on = channel_[u] != 0;
    last_channel_[u] = channel_[u];
    if (actions_[u] != 0) {
      ++scheduled;
      ++metrics_.transmissions[u];
      metrics_.expected_successes[u] +=
          belief_values_[u][static_cast<std::size_t>(belief_order(beliefs_[u], config_.tau))];
      if (on) {
        ++metrics_.successes[u];
      }
      beliefs_[u] = advance_belief(beliefs_[u], true, on ? 1 : 0, config_.tau);
    } else {
      beliefs_[u] = advance_belief(beliefs_[u], false, std::nullopt, config_.tau);
    }

    if (backlogged) {
      if (actions_[u] != 0 && on) {
        ++metrics_.delivered[u];
      }
    } else {
      std::int64_t q = queues_[u];
      if (actions_[u] != 0 && on && q > 0) {
        --q;
        ++metrics_.delivered[u];
      }
      const ArrivalSpec& spec = config_.arrivals[u];
      std::int64_t arriving = 0;
      if (spec.rate > 0.0) {
        arriving = spec.kind == ArrivalSpec::Kind::Bernoulli
                       ? (arrival_streams_[u].bernoulli(spec.rate) ? 1 : 0)
                       : static_cast<std::int64_t>(arrival_streams_[u].poisson(spec.rate));
      }
      q += arriving;
      metrics_.arrivals[u] += arriving;
      queues_[u] = q;
      queue_sum += q;
      square_sum += q * q;
      metrics_.max_queue = std::max(metrics_.max_queue, q);
    }

    channel_[u] = sample_transition(channel_streams_[u], config_.channels[u], on) ? 1 : 0;
  }

  const std::int64_t batch_size = std::max<std::int64_t>(1, config_.horizon / kBatches);
  const std::int64_t batch = std::min(slot_ / batch_size, kBatches - 1);
  batch_transmissions_[static_cast<std::size_t>(batch)] += scheduled;
  slot_transmissions_ += scheduled;
  ++slot_;

  if (!backlogged && slot_ % interval_ == 0) {
    metrics_.sample_slots.push_back(slot_);
    metrics_.queue_sums.push_back(queue_sum);
    metrics_.lyapunov.push_back(0.5 * static_cast<double>(square_sum));
  }
}

void Replication::run_to(std::int64_t horizon) {
  while (slot_ < horizon) {
    step();
  }
}

ReplicationMetrics Replication::finish() const {
  ReplicationMetrics out = metrics_;
  out.slots = slot_;
  out.final_queues = queues_;
  out.transmissions_per_slot =
      slot_ == 0 ? 0.0 : static_cast<double>(slot_transmissions_) / static_cast<double>(slot_);

  const std::int64_t batch_size = std::max<std::int64_t>(1, config_.horizon / kBatches);
  std::vector<double> batch_means;
  for (std::int64_t b = 0; b < kBatches; ++b) {
    const std::int64_t begin = b * batch_size;
    const std::int64_t end = b == kBatches - 1 ? slot_ : std::min(slot_, begin + batch_size);
    if (end > begin) {
      batch_means.push_back(static_cast<double>(batch_transmissions_[static_cast<std::size_t>(b)]) /
                            static_cast<double>(end - begin));
    }
  }
  out.transmissions_stderr = standard_error(batch_means);
  return out;
}

Metrics run(const SimConfig& config) {
  validate_config(config);
  return run(config, make_policy_factory(config));
}

Metrics run(const SimConfig& config, const PolicyFactory& factory) {
  validate_config(config);
  const int reps = config.replications;
  std::vector<ReplicationMetrics> results(static_cast<std::size_t>(reps));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (int r = next++; r < reps; r = next++) {
      try {
        Replication replication(config, factory(), r);
        replication.run_to(config.horizon);
        results[static_cast<std::size_t>(r)] = replication.finish();
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
        }
      }
    }
  };
  const int jobs = std::clamp(config.jobs, 1, reps);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) {
      pool.emplace_back(worker);
    }
    for (auto& t : pool) {
      t.join();
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }

  Metrics metrics;
  metrics.replications = std::move(results);
  const std::size_t n = config.users();
  std::vector<double> z;
  for (const auto& r : metrics.replications) {
    z.push_back(r.transmissions_per_slot);
  }
  metrics.transmissions_per_slot = mean_of(z);
  metrics.transmissions_stderr =
      reps >= 2 ? standard_error(z) : metrics.replications.front().transmissions_stderr;

  metrics.throughput.assign(n, 0.0);
  metrics.belief_rate.assign(n, 0.0);
  metrics.belief_rate_stderr.assign(n, 0.0);
  const std::vector<double> weights = policy_weights(config);
  for (std::size_t u = 0; u < n; ++u) {
    std::vector<double> thr;
    std::vector<double> bel;
    for (const auto& r : metrics.replications) {
      thr.push_back(r.throughput(u));
      bel.push_back(r.belief_rate(u));
    }
    metrics.throughput[u] = mean_of(thr);
    metrics.belief_rate[u] = mean_of(bel);
    metrics.belief_rate_stderr[u] = standard_error(bel);
    metrics.weighted_rate += weights[u] * metrics.throughput[u];
  }
  return metrics;
}

RatePoint estimate_rate_point(const SimConfig& config, const WeightVector& weights) {
  SimConfig backlogged = config;
  backlogged.mode = SimMode::Backlogged;
  backlogged.policy.name = "index";
  backlogged.policy.weights.assign(weights.values().begin(), weights.values().end());
  const Metrics metrics = run(backlogged);

  RatePoint point;
  point.rates = metrics.belief_rate;
  point.standard_error = metrics.belief_rate_stderr;
  point.realized = metrics.throughput;
  point.transmissions_per_slot = metrics.transmissions_per_slot;
  point.transmissions_stderr = metrics.transmissions_stderr;
  return point;
}

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Stable:
      return "stable";
    case Verdict::Unstable:
      return "unstable";
    case Verdict::Inconclusive:
      break;
  }
  return "inconclusive";
}

namespace {

Verdict classify(double slope, double se, std::int64_t max_queue,
                 const StabilityOptions& options) {
  if (max_queue >= options.queue_ceiling) {
    return Verdict::Unstable;
  }
  if (slope - 1.96 * se > options.drift_tolerance) {
    return Verdict::Unstable;
  }
  if (slope + 1.96 * se < options.drift_tolerance) {
    return Verdict::Stable;
  }
  return Verdict::Inconclusive;
}

}  // namespace

DriftFit fit_drift(const ReplicationMetrics& metrics, const StabilityOptions& options) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t k = 0; k < metrics.sample_slots.size(); ++k) {
    if (2 * metrics.sample_slots[k] > metrics.slots) {
      xs.push_back(static_cast<double>(metrics.sample_slots[k]));
      ys.push_back(static_cast<double>(metrics.queue_sums[k]));
    }
  }
  DriftFit fit;
  if (xs.size() < 3) {
    return fit;
  }
  const double mx = mean_of(xs);
  const double my = mean_of(ys);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
  }
  fit.slope = sxy / sxx;
  double sse = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double e = ys[k] - my - fit.slope * (xs[k] - mx);
    sse += e * e;
  }
  fit.slope_se = std::sqrt(sse / static_cast<double>(xs.size() - 2) / sxx);
  fit.verdict = classify(fit.slope, fit.slope_se, metrics.max_queue, options);
  return fit;
}

StabilityReport stability_verdict(const Metrics& metrics, const StabilityOptions& options) {
  StabilityReport report;
  std::vector<double> slopes;
  for (const auto& r : metrics.replications) {
    const DriftFit fit = fit_drift(r, options);
    report.per_replication.push_back(fit);
    slopes.push_back(fit.slope);
    report.max_queue = std::max(report.max_queue, r.max_queue);
    report.stable_count += fit.verdict == Verdict::Stable ? 1 : 0;
    report.unstable_count += fit.verdict == Verdict::Unstable ? 1 : 0;
  }
  report.slope = mean_of(slopes);
  report.slope_se =
      slopes.size() >= 2 ? standard_error(slopes) : report.per_replication.front().slope_se;
  report.verdict = classify(report.slope, report.slope_se, report.max_queue, options);
  report.transmissions_per_slot = metrics.transmissions_per_slot;
  return report;
}

StabilityReport stability_probe(const SimConfig& config, const StabilityOptions& options) {
  if (config.mode != SimMode::Queued) {
    throw std::invalid_argument("stability probe needs queued mode");
  }
  return stability_verdict(run(config), options);
}

ConstraintReport constraint_audit(const Metrics& metrics, double budget) {
  ConstraintReport report;
  report.transmissions_per_slot = metrics.transmissions_per_slot;
  report.standard_error = metrics.transmissions_stderr;
  report.budget = budget;
  report.pass = report.transmissions_per_slot <= budget + 3.0 * report.standard_error;
  return report;
}

}  // namespace schedsim
