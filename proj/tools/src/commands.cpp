#include <cmath>
#include <iostream>
#include <numbers>

#include "schedsim/experiment.hpp"
#include "schedsim/oracles.hpp"

namespace schedsim::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_meta(Command command, const ExperimentSpec& spec, const fs::path& dir,
                const json& extra) {
  json meta;
  meta["command"] = command_name(command);
  meta["version"] = kVersion;
  meta["seed"] = spec.sim.master_seed;
  meta["tau0"] = tau0(spec.sim.channels);
  meta["tau"] = spec.sim.tau;
  for (const auto& item : extra.items()) {
    meta[item.key()] = item.value();
  }
  meta["resolved_spec"] = resolved_spec(spec);
  std::ofstream out(dir / (std::string(command_name(command)) + ".meta.json"), std::ios::binary);
  out << meta.dump(2) << '\n';
}

std::string state_kind(const BeliefState& s) {
  return s.is_stationary() ? "stationary" : "observed";
}

int cmd_validate(const ExperimentSpec& spec, const fs::path& dir) {
  const auto checks = run_validation(spec);
  CsvWriter csv(dir / "validate.csv",
                {"check", "status", "max_error", "tolerance", "cases", "note"});
  int failures = 0;
  for (const auto& c : checks) {
    csv.cell(c.name).cell(to_string(c.status)).cell(c.max_error).cell(c.tolerance);
    csv.cell(c.cases).cell(c.note).end_row();
    std::cout << to_string(c.status) << ' ' << c.name << " max_error=" << format_double(c.max_error)
              << " tol=" << format_double(c.tolerance) << " cases=" << c.cases;
    if (!c.note.empty()) {
      std::cout << " (" << c.note << ')';
    }
    std::cout << '\n';
    failures += c.status == CheckResult::Status::Fail ? 1 : 0;
  }
  write_meta(Command::Validate, spec, dir, {{"failures", failures}});
  return failures == 0 ? 0 : 1;
}

int cmd_index_table(const ExperimentSpec& spec, const fs::path& dir) {
  const int tau = spec.sim.tau;
  CsvWriter csv(dir / "index_table.csv", {"user", "position", "kind", "last", "age", "belief",
                                          "whittle_index", "oracle_index"});
  for (std::size_t u = 0; u < spec.sim.users(); ++u) {
    const ChannelParams& c = spec.sim.channels[u];
    for (int p = 0; p < truncated_state_count(tau); ++p) {
      const BeliefState s = belief_at(p, tau);
      csv.cell(u).cell(p).cell(state_kind(s));
      if (s.is_stationary()) {
        csv.empty().empty();
      } else {
        csv.cell(static_cast<int>(s.last)).cell(s.age);
      }
      csv.cell(belief_value(c, s, tau)).cell(whittle_index(c, s, tau));
      if (spec.oracle_index) {
        // The index of b_{0,l} compares thresholds at l and l + 1, which look
        // two ages ahead; two extra ages keep that horizon clear of b_s.
        csv.cell(whittle_index_oracle(c, s, tau + 2));
      } else {
        csv.empty();
      }
      csv.end_row();
    }
  }
  write_meta(Command::IndexTable, spec, dir, json::object());
  return 0;
}

std::vector<std::vector<double>> rate_directions(const ExperimentSpec& spec) {
  if (!spec.directions.empty()) {
    return spec.directions;
  }
  const std::size_t n = spec.sim.users();
  std::vector<std::vector<double>> out;
  if (n == 2) {
    for (int k = 0; k < spec.fan_size; ++k) {
      const double theta = std::numbers::pi / 2.0 * k / (spec.fan_size - 1);
      const double x = k == spec.fan_size - 1 ? 0.0 : std::cos(theta);
      const double y = k == 0 ? 0.0 : std::sin(theta);
      out.push_back({x, y});
    }
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> e(n, 0.0);
    e[i] = 1.0;
    out.push_back(std::move(e));
  }
  out.emplace_back(n, 1.0);
  return out;
}

int cmd_rate_region(const ExperimentSpec& spec, const fs::path& dir) {
  const IndexTable table(spec.sim.channels, spec.sim.tau);
  CsvWriter csv(dir / "rate_region.csv", {"direction", "user", "weight", "rate", "rate_se",
                                          "realized", "closed_rate", "z", "z_se", "slack"});
  const auto directions = rate_directions(spec);
  for (std::size_t d = 0; d < directions.size(); ++d) {
    const WeightVector weights(directions[d]);
    const ThresholdPolicy policy = initialize(table, weights, spec.sim.budget);
    const RatePoint point = estimate_rate_point(spec.sim, weights);
    for (std::size_t u = 0; u < spec.sim.users(); ++u) {
      csv.cell(d).cell(u).cell(weights[u]).cell(point.rates[u]).cell(point.standard_error[u]);
      csv.cell(point.realized[u]).cell(policy.rate[u]).cell(point.transmissions_per_slot);
      csv.cell(point.transmissions_stderr).cell(policy.slack ? 1 : 0).end_row();
    }
  }
  write_meta(Command::RateRegion, spec, dir, {{"directions", directions.size()}});
  return 0;
}

int cmd_simulate(const ExperimentSpec& spec, const fs::path& dir) {
  const SimConfig& sim = spec.sim;
  const Metrics metrics = run(sim);
  const ConstraintReport audit = constraint_audit(metrics, sim.budget);
  const bool queued = sim.mode == SimMode::Queued;
  const StabilityReport stability =
      queued ? stability_verdict(metrics, spec.stability) : StabilityReport{};

  CsvWriter summary(dir / "simulate_summary.csv",
                    {"policy", "mode", "z", "z_se", "budget", "constraint_pass", "verdict",
                     "slope", "slope_se", "max_queue", "weighted_rate"});
  summary.cell(sim.policy.name).cell(queued ? "queued" : "backlogged");
  summary.cell(audit.transmissions_per_slot).cell(audit.standard_error).cell(sim.budget);
  summary.cell(audit.pass ? 1 : 0).cell(queued ? to_string(stability.verdict) : "n/a");
  summary.cell(stability.slope).cell(stability.slope_se).cell(stability.max_queue);
  summary.cell(metrics.weighted_rate).end_row();

  CsvWriter users(dir / "simulate_users.csv",
                  {"user", "transmissions", "throughput", "belief_rate", "belief_rate_se",
                   "arrival_rate"});
  for (std::size_t u = 0; u < sim.users(); ++u) {
    double tx = 0.0;
    double arrivals = 0.0;
    for (const auto& r : metrics.replications) {
      tx += static_cast<double>(r.transmissions[u]) / static_cast<double>(r.slots);
      arrivals += static_cast<double>(r.arrivals[u]) / static_cast<double>(r.slots);
    }
    const auto reps = static_cast<double>(metrics.replications.size());
    users.cell(u).cell(tx / reps).cell(metrics.throughput[u]).cell(metrics.belief_rate[u]);
    users.cell(metrics.belief_rate_stderr[u]).cell(arrivals / reps).end_row();
  }

  CsvWriter reps(dir / "simulate_replications.csv",
                 {"replication", "seed", "z", "z_se", "max_queue", "slope", "slope_se",
                  "verdict"});
  for (std::size_t k = 0; k < metrics.replications.size(); ++k) {
    const auto& r = metrics.replications[k];
    reps.cell(r.replication).cell(static_cast<std::int64_t>(r.seed)).cell(r.transmissions_per_slot);
    reps.cell(r.transmissions_stderr).cell(r.max_queue);
    if (queued) {
      const DriftFit& fit = stability.per_replication[k];
      reps.cell(fit.slope).cell(fit.slope_se).cell(to_string(fit.verdict));
    } else {
      reps.empty().empty().cell("n/a");
    }
    reps.end_row();
  }

  CsvWriter queues(dir / "simulate_queues.csv", {"replication", "slot", "queue_sum", "lyapunov"});
  for (const auto& r : metrics.replications) {
    for (std::size_t k = 0; k < r.sample_slots.size(); ++k) {
      queues.cell(r.replication).cell(r.sample_slots[k]).cell(r.queue_sums[k]);
      queues.cell(r.lyapunov[k]).end_row();
    }
  }
  write_meta(Command::Simulate, spec, dir,
             {{"constraint_pass", audit.pass},
              {"verdict", queued ? to_string(stability.verdict) : "n/a"}});
  return 0;
}

int cmd_stability_sweep(const ExperimentSpec& spec, const fs::path& dir) {
  const WeightVector direction(spec.direction);
  const RatePoint boundary = estimate_rate_point(spec.sim, direction);

  CsvWriter edge(dir / "stability_boundary.csv",
                 {"user", "weight", "boundary_rate", "boundary_se", "realized"});
  for (std::size_t u = 0; u < spec.sim.users(); ++u) {
    edge.cell(u).cell(direction[u]).cell(boundary.rates[u]).cell(boundary.standard_error[u]);
    edge.cell(boundary.realized[u]).end_row();
  }

  CsvWriter csv(dir / "stability_sweep.csv",
                {"scaling", "lambda_sum", "verdict", "slope", "slope_se", "stable_reps",
                 "unstable_reps", "replications", "max_queue", "z"});
  for (double scaling : spec.load_scalings) {
    SimConfig sim = spec.sim;
    sim.mode = SimMode::Queued;
    double total = 0.0;
    for (std::size_t u = 0; u < sim.users(); ++u) {
      const double rate = scaling * boundary.rates[u];
      sim.arrivals[u] = {spec.arrival_kind, rate};
      total += rate;
    }
    const StabilityReport report = stability_probe(sim, spec.stability);
    csv.cell(scaling).cell(total).cell(to_string(report.verdict)).cell(report.slope);
    csv.cell(report.slope_se).cell(report.stable_count).cell(report.unstable_count);
    csv.cell(sim.replications).cell(report.max_queue).cell(report.transmissions_per_slot);
    csv.end_row();
  }
  write_meta(Command::StabilitySweep, spec, dir, json::object());
  return 0;
}

int cmd_truncation_sweep(const ExperimentSpec& spec, const fs::path& dir) {
  const WeightVector weights(spec.weights);
  const auto value = [&](int tau) {
    const IndexTable table(spec.sim.channels, tau);
    return initialize(table, weights, spec.sim.budget).weighted_rate(weights);
  };
  const double reference = value(spec.tau_ref);
  CsvWriter csv(dir / "truncation_sweep.csv",
                {"tau", "f", "g", "v_tau", "v_ref", "gap", "bound", "slack", "holds"});
  for (int tau : spec.tau_list) {
    const double f = f_tau(spec.sim.channels, tau);
    const double v = value(tau);
    const double gap = std::abs(v - reference);
    const double bound = f * weights.sum();
    csv.cell(tau).cell(f).cell(g_tau(spec.sim.channels, tau)).cell(v).cell(reference);
    csv.cell(gap).cell(bound).cell(bound - gap).cell(gap <= bound ? 1 : 0).end_row();
  }
  write_meta(Command::TruncationSweep, spec, dir, json::object());
  return 0;
}

}  // namespace

int execute(Command command, ExperimentSpec spec, const RunOptions& options) {
  if (spec.kind && *spec.kind != command) {
    throw SpecError("spec kind '" + std::string(command_name(*spec.kind)) +
                    "' does not match command '" + std::string(command_name(command)) + "'");
  }
  if (options.seed) {
    spec.sim.master_seed = *options.seed;
  }
  spec.sim.jobs = std::max(1, options.jobs);
  fs::create_directories(options.out_dir);
  switch (command) {
    case Command::Validate:
      return cmd_validate(spec, options.out_dir);
    case Command::IndexTable:
      return cmd_index_table(spec, options.out_dir);
    case Command::RateRegion:
      return cmd_rate_region(spec, options.out_dir);
    case Command::Simulate:
      return cmd_simulate(spec, options.out_dir);
    case Command::StabilitySweep:
      return cmd_stability_sweep(spec, options.out_dir);
    case Command::TruncationSweep:
      return cmd_truncation_sweep(spec, options.out_dir);
  }
  return 2;
}

}  // namespace schedsim::cli
