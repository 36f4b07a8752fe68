#include <algorithm>
#include <cmath>
#include <random>

#include "schedsim/experiment.hpp"
#include "schedsim/oracles.hpp"
#include "schedsim/scheduler.hpp"

namespace schedsim::cli {

namespace {

using Status = CheckResult::Status;

struct Tracker {
  CheckResult result;

  Tracker(std::string name, double tolerance) {
    result.name = std::move(name);
    result.tolerance = tolerance;
  }
  void observe(double error) {
    ++result.cases;
    if (!(error <= result.tolerance)) {
      result.status = Status::Fail;
    }
    if (std::isnan(error)) {
      result.max_error = error;
    } else if (!std::isnan(result.max_error)) {
      result.max_error = std::max(result.max_error, error);
    }
  }
  CheckResult skip(std::string note) {
    result.status = Status::Skipped;
    result.note = std::move(note);
    return result;
  }
};

std::vector<ChannelParams> random_channels(int count, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ChannelParams> out;
  for (int k = 0; k < count; ++k) {
    const double gap = 0.05 + 0.85 * unit(engine);
    const double p01 = 0.01 + (0.98 - gap) * unit(engine);
    out.emplace_back(p01 + gap, p01);
  }
  return out;
}

std::vector<ThresholdSpec> threshold_grid(int tau, int rho_steps) {
  std::vector<ThresholdSpec> grid{ThresholdSpec::below_all(), ThresholdSpec::above_all()};
  for (int p = 0; p < truncated_state_count(tau); ++p) {
    for (int k = 1; k <= rho_steps; ++k) {
      grid.push_back(ThresholdSpec::at(belief_at(p, tau), static_cast<double>(k) / rho_steps));
    }
  }
  return grid;
}

std::vector<BeliefState> index_states(int tau, const ValidateOptions& o) {
  std::vector<BeliefState> states;
  for (int l = 1; l <= std::min(o.index_states_off, tau); ++l) {
    states.push_back(BeliefState::observed(0, l));
  }
  states.push_back(BeliefState::stationary());
  for (int l = 1; l <= std::min(o.index_states_on, tau); ++l) {
    states.push_back(BeliefState::observed(1, l));
  }
  return states;
}

// Largest amount by which |nu_i - nu_j| exceeds |alpha_i - alpha_j| over all
// pairs, via the sorted-order characterization of the bound.
double lipschitz_excess(std::vector<ActivityRates> points) {
  std::sort(points.begin(), points.end(), [](const ActivityRates& a, const ActivityRates& b) {
    return a.activation != b.activation ? a.activation < b.activation : a.rate < b.rate;
  });
  double excess = 0.0;
  for (std::size_t k = 1; k < points.size(); ++k) {
    const double da = points[k].activation - points[k - 1].activation;
    const double dn = points[k].rate - points[k - 1].rate;
    excess = std::max(excess, std::abs(dn) - da);
  }
  return excess;
}

}  // namespace

std::string_view to_string(CheckResult::Status status) {
  switch (status) {
    case Status::Pass:
      return "PASS";
    case Status::Fail:
      return "FAIL";
    case Status::Skipped:
      break;
  }
  return "SKIPPED";
}

std::vector<CheckResult> run_validation(const ExperimentSpec& spec) {
  const ValidateOptions& o = spec.validate;
  const int tau = spec.sim.tau;
  std::vector<ChannelParams> channels = spec.sim.channels;
  const auto extra = random_channels(o.random_channels, o.random_seed);
  channels.insert(channels.end(), extra.begin(), extra.end());
  std::vector<CheckResult> checks;

  {
    Tracker t("belief_closed_form", 1e-12);
    for (const auto& c : channels) {
      double off = c.p01();
      double on = c.p11();
      for (int l = 1; l <= tau; ++l) {
        t.observe(std::abs(belief_value(c, BeliefState::observed(0, l), tau) - off));
        t.observe(std::abs(belief_value(c, BeliefState::observed(1, l), tau) - on));
        off = c.evolve(off);
        on = c.evolve(on);
      }
      t.observe(std::abs(c.evolve(c.stationary()) - c.stationary()));
    }
    checks.push_back(t.result);
  }

  {
    Tracker alpha("activation_closed_vs_oracle", o.closed_form_tolerance);
    Tracker nu("rate_closed_vs_oracle", o.closed_form_tolerance);
    Tracker below("rate_le_activation", o.property_tolerance);
    Tracker stationary("stationary_residual", 1e-10);
    for (const auto& c : channels) {
      for (const auto& th : threshold_grid(tau, o.rho_steps)) {
        const ActivityRates closed = threshold_rates(c, tau, th);
        const OracleRates exact = exact_stationary_metrics(c, tau, th);
        alpha.observe(std::abs(closed.activation - exact.activation));
        nu.observe(std::abs(closed.rate - exact.rate));
        below.observe(std::max(0.0, closed.rate - closed.activation));
        stationary.observe(exact.residual);
      }
    }
    checks.push_back(alpha.result);
    checks.push_back(nu.result);
    checks.push_back(below.result);
    checks.push_back(stationary.result);
  }

  {
    Tracker t("index_monotone", 1e-12);
    for (const auto& c : channels) {
      double previous = 0.0;
      for (int p = 0; p < truncated_state_count(tau); ++p) {
        const double w = whittle_index(c, belief_at(p, tau), tau);
        t.observe(std::max({0.0, previous - w, -w, w - 1.0}));
        previous = w;
      }
    }
    checks.push_back(t.result);
  }

  {
    // The index oracle needs room beyond the checked ages for the truncated
    // chain to behave like the untruncated one.
    const int oracle_tau = std::max({tau, 30, o.index_states_off + 2});
    Tracker index("index_closed_vs_oracle", o.index_tolerance);
    Tracker indexable("indexability_passive_sets", 0.0);
    for (const auto& c : channels) {
      for (const auto& s : index_states(oracle_tau, o)) {
        if (!s.is_stationary() && s.age > tau) {
          continue;
        }
        index.observe(std::abs(whittle_index(c, s, oracle_tau) -
                               whittle_index_oracle(c, s, oracle_tau)));
      }
      std::vector<bool> previous;
      std::vector<double> warm;
      for (int k = 0; k < o.omega_grid; ++k) {
        const double omega = static_cast<double>(k) / (o.omega_grid - 1);
        ValueIterationOptions vi;
        vi.warm_start = warm;
        const SubsidySolution sol =
            subsidy_value_iteration({c, oracle_tau, omega, 1.0}, 1e-10, vi);
        warm = sol.bias;
        const std::vector<bool> passive = passive_set(sol);
        double violations = 0.0;
        for (std::size_t p = 0; p < previous.size(); ++p) {
          violations += previous[p] && !passive[p] ? 1.0 : 0.0;
        }
        indexable.observe(violations);
        previous = passive;
      }
    }
    checks.push_back(index.result);
    checks.push_back(indexable.result);
  }

  {
    Tracker mono("threshold_monotone_in_rho", o.property_tolerance);
    Tracker lip("rate_lipschitz_in_activation", o.property_tolerance);
    const int required = static_cast<int>(std::ceil(tau0(spec.sim.channels)));
    if (tau < required) {
      const std::string note = "tau " + std::to_string(tau) + " < ceil(tau0) " +
                               std::to_string(required);
      checks.push_back(mono.skip(note));
      checks.push_back(lip.skip(note));
    } else {
      for (const auto& c : spec.sim.channels) {
        std::vector<ActivityRates> points{threshold_rates(c, tau, ThresholdSpec::below_all()),
                                          threshold_rates(c, tau, ThresholdSpec::above_all())};
        for (int p = 0; p < truncated_state_count(tau); ++p) {
          ActivityRates last{0.0, 0.0};
          for (int k = 1; k <= o.rho_steps; ++k) {
            const auto th =
                ThresholdSpec::at(belief_at(p, tau), static_cast<double>(k) / o.rho_steps);
            const ActivityRates r = threshold_rates(c, tau, th);
            mono.observe(std::max({0.0, last.activation - r.activation, last.rate - r.rate}));
            last = r;
            points.push_back(r);
          }
        }
        lip.observe(lipschitz_excess(std::move(points)));
      }
      checks.push_back(mono.result);
      checks.push_back(lip.result);
    }
  }

  {
    Tracker closed("budget_equality_closed", o.closed_form_tolerance);
    Tracker exact("budget_equality_oracle", o.closed_form_tolerance);
    Tracker walk("initialization_walk_monotone", 0.0);
    const IndexTable table(spec.sim.channels, tau);
    std::vector<double> steps;
    const ThresholdPolicy policy =
        initialize(table, WeightVector(spec.weights), spec.sim.budget, &steps);
    const double target = std::min(spec.sim.budget, static_cast<double>(table.users()));
    if (!policy.slack) {
      closed.observe(std::abs(policy.activation_sum() - target));
      double total = 0.0;
      for (std::size_t u = 0; u < table.users(); ++u) {
        total += exact_stationary_metrics(table.channel(u), tau, policy.user_threshold(u))
                     .activation;
      }
      exact.observe(std::abs(total - target));
    } else {
      closed.result.note = "budget does not bind";
      exact.result.note = "budget does not bind";
    }
    double previous = static_cast<double>(table.users());
    for (double s : steps) {
      walk.observe(std::max(0.0, s - previous));
      previous = s;
    }
    checks.push_back(closed.result);
    checks.push_back(exact.result);
    checks.push_back(walk.result);
  }

  {
    Tracker t("g_equals_three_f", 1e-12);
    for (int k : spec.tau_list) {
      t.observe(std::abs(g_tau(spec.sim.channels, k) - 3.0 * f_tau(spec.sim.channels, k)));
    }
    checks.push_back(t.result);
  }
  return checks;
}

}  // namespace schedsim::cli
