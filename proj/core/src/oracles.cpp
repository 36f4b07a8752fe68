#include "schedsim/oracles.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace schedsim {

namespace {

constexpr double kDirectResidualLimit = 1e-12;
constexpr int kPowerIterationCap = 10'000'000;

double chain_residual(const BeliefChainKernel& kernel, const std::vector<double>& pi) {
  const int n = kernel.size();
  double worst = 0.0;
  for (int to = 0; to < n; ++to) {
    double flow = 0.0;
    for (int from = 0; from < n; ++from) {
      flow += pi[static_cast<std::size_t>(from)] * kernel.at(from, to);
    }
    worst = std::max(worst, std::abs(flow - pi[static_cast<std::size_t>(to)]));
  }
  return worst;
}

std::vector<double> power_iteration(const BeliefChainKernel& kernel) {
  const int n = kernel.size();
  std::vector<double> pi(static_cast<std::size_t>(n), 1.0 / n);
  std::vector<double> next(pi.size());
  for (int it = 0; it < kPowerIterationCap; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int from = 0; from < n; ++from) {
      const double mass = pi[static_cast<std::size_t>(from)];
      for (int to = 0; to < n; ++to) {
        next[static_cast<std::size_t>(to)] += 0.5 * mass * kernel.at(from, to);
      }
      next[static_cast<std::size_t>(from)] += 0.5 * mass;
    }
    double change = 0.0;
    for (std::size_t s = 0; s < pi.size(); ++s) {
      change = std::max(change, std::abs(next[s] - pi[s]));
    }
    pi.swap(next);
    if (change < 1e-16) {
      break;
    }
  }
  return pi;
}

}  // namespace

int idle_successor(int position, int tau) {
  if (position < tau) {
    return position + 1;
  }
  if (position == tau) {
    return tau;
  }
  return position - 1;
}

std::vector<double> activation_profile(int tau, const ThresholdSpec& threshold) {
  const int n = truncated_state_count(tau);
  std::vector<double> profile(static_cast<std::size_t>(n), 0.0);
  switch (threshold.kind) {
    case ThresholdSpec::Kind::AboveAll:
      return profile;
    case ThresholdSpec::Kind::BelowAll:
      std::fill(profile.begin(), profile.end(), 1.0);
      return profile;
    case ThresholdSpec::Kind::At:
      break;
  }
  const ThresholdSpec spec = threshold.canonical();
  const int cut = belief_order(spec.state, tau);
  for (int p = cut + 1; p < n; ++p) {
    profile[static_cast<std::size_t>(p)] = 1.0;
  }
  profile[static_cast<std::size_t>(cut)] = spec.rho;
  return profile;
}

BeliefChainKernel::BeliefChainKernel(const ChannelParams& params, int tau,
                                     std::vector<double> activation)
    : tau_(tau), activation_(std::move(activation)) {
  const int n = size();
  if (static_cast<int>(activation_.size()) != n) {
    throw std::invalid_argument("activation profile must have 2 tau + 1 entries");
  }
  beliefs_.resize(static_cast<std::size_t>(n));
  // Beliefs by forward recursion from the observation points; deliberately
  // not the closed forms used by the index engine.
  double off = params.p01();
  double on = params.p11();
  for (int l = 1; l <= tau; ++l) {
    beliefs_[static_cast<std::size_t>(l - 1)] = off;
    beliefs_[static_cast<std::size_t>(2 * tau + 1 - l)] = on;
    off = params.evolve(off);
    on = params.evolve(on);
  }
  beliefs_[static_cast<std::size_t>(tau)] = params.p01() / (1.0 + params.p01() - params.p11());

  matrix_.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
  const int on_start = 2 * tau;  // b_{1,1}
  const int off_start = 0;       // b_{0,1}
  for (int p = 0; p < n; ++p) {
    const double a = activation_[static_cast<std::size_t>(p)];
    if (a < 0.0 || a > 1.0) {
      throw std::invalid_argument("activation probabilities must lie in [0, 1]");
    }
    const double b = beliefs_[static_cast<std::size_t>(p)];
    auto row = matrix_.begin() + static_cast<std::ptrdiff_t>(p) * n;
    row[on_start] += a * b;
    row[off_start] += a * (1.0 - b);
    row[idle_successor(p, tau)] += 1.0 - a;
  }
}

double BeliefChainKernel::max_row_error() const {
  const int n = size();
  double worst = 0.0;
  for (int p = 0; p < n; ++p) {
    double total = 0.0;
    for (int q = 0; q < n; ++q) {
      total += at(p, q);
    }
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return worst;
}

StationarySolution stationary_distribution(const BeliefChainKernel& kernel) {
  const int n = kernel.size();
  Eigen::MatrixXd system(n, n);
  for (int to = 0; to < n; ++to) {
    for (int from = 0; from < n; ++from) {
      system(to, from) = kernel.at(from, to) - (to == from ? 1.0 : 0.0);
    }
  }
  system.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;

  StationarySolution solution;
  const Eigen::VectorXd direct = system.partialPivLu().solve(rhs);
  solution.distribution.assign(direct.data(), direct.data() + n);
  bool usable = direct.allFinite();
  for (double v : solution.distribution) {
    usable = usable && v > -kDirectResidualLimit;
  }
  if (usable) {
    for (double& v : solution.distribution) {
      v = std::max(v, 0.0);
    }
    solution.residual = chain_residual(kernel, solution.distribution);
    usable = solution.residual < 1e-10;
  }
  if (!usable) {
    solution.distribution = power_iteration(kernel);
    solution.residual = chain_residual(kernel, solution.distribution);
    solution.power_iteration = true;
    if (!(solution.residual < 1e-10)) {
      throw std::runtime_error("stationary solve failed: residual " +
                               std::to_string(solution.residual));
    }
  }
  return solution;
}

OracleRates exact_stationary_metrics(const ChannelParams& params, int tau,
                                     const ThresholdSpec& threshold) {
  if (threshold.kind == ThresholdSpec::Kind::At) {
    check_state(threshold.state, tau);
  }
  const BeliefChainKernel kernel(params, tau, activation_profile(tau, threshold));
  const StationarySolution stat = stationary_distribution(kernel);
  OracleRates out;
  const auto a = kernel.activation();
  const auto b = kernel.beliefs();
  for (std::size_t s = 0; s < stat.distribution.size(); ++s) {
    out.activation += stat.distribution[s] * a[s];
    out.rate += stat.distribution[s] * a[s] * b[s];
  }
  out.residual = stat.residual;
  out.power_iteration = stat.power_iteration;
  return out;
}

ConvergenceError::ConvergenceError(int iterations, double span)
    : std::runtime_error("value iteration did not converge after " +
                         std::to_string(iterations) + " iterations (span " +
                         std::to_string(span) + ")"),
      iterations_(iterations),
      span_(span) {}

SubsidySolution subsidy_value_iteration(const SubsidyProblem& problem, double tolerance,
                                        const ValueIterationOptions& options) {
  if (!(tolerance > 0.0)) {
    throw std::invalid_argument("value iteration tolerance must be positive");
  }
  const int tau = problem.tau;
  const int n = truncated_state_count(tau);
  const double kappa = options.aperiodicity;
  if (!(kappa > 0.0 && kappa <= 1.0)) {
    throw std::invalid_argument("aperiodicity weight must lie in (0, 1]");
  }

  // Same forward recursion as the kernel: beliefs in belief order.
  std::vector<double> belief(static_cast<std::size_t>(n));
  {
    double off = problem.params.p01();
    double on = problem.params.p11();
    for (int l = 1; l <= tau; ++l) {
      belief[static_cast<std::size_t>(l - 1)] = off;
      belief[static_cast<std::size_t>(2 * tau + 1 - l)] = on;
      off = problem.params.evolve(off);
      on = problem.params.evolve(on);
    }
    belief[static_cast<std::size_t>(tau)] = problem.params.stationary();
  }
  std::vector<int> idle(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) {
    idle[static_cast<std::size_t>(p)] = idle_successor(p, tau);
  }

  const int on_start = 2 * tau;
  const int reference = tau;
  std::vector<double> h(static_cast<std::size_t>(n), 0.0);
  if (options.warm_start.size() == h.size()) {
    std::copy(options.warm_start.begin(), options.warm_start.end(), h.begin());
  }
  std::vector<double> next(h.size());

  SubsidySolution out;
  double span = std::numeric_limits<double>::infinity();
  double lo = 0.0;
  double hi = 0.0;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    const double h_on = h[static_cast<std::size_t>(on_start)];
    const double h_off = h[0];
    for (std::size_t p = 0; p < h.size(); ++p) {
      const double b = belief[p];
      const double q_active = problem.weight * b + b * h_on + (1.0 - b) * h_off;
      const double q_passive = problem.subsidy + h[static_cast<std::size_t>(idle[p])];
      const double updated = kappa * std::max(q_active, q_passive) + (1.0 - kappa) * h[p];
      const double diff = updated - h[p];
      lo = std::min(lo, diff);
      hi = std::max(hi, diff);
      next[p] = updated;
    }
    span = hi - lo;
    const double shift = next[static_cast<std::size_t>(reference)];
    for (std::size_t p = 0; p < h.size(); ++p) {
      h[p] = next[p] - shift;
    }
    if (span < tolerance) {
      ++it;
      break;
    }
  }
  if (!(span < tolerance)) {
    throw ConvergenceError(it, span);
  }

  out.gain = 0.5 * (lo + hi) / kappa;
  out.iterations = it;
  out.span = span;
  out.bias = h;
  out.action_gap.resize(h.size());
  out.actions.resize(h.size());
  const double h_on = h[static_cast<std::size_t>(on_start)];
  const double h_off = h[0];
  for (std::size_t p = 0; p < h.size(); ++p) {
    const double b = belief[p];
    const double q_active = problem.weight * b + b * h_on + (1.0 - b) * h_off;
    const double q_passive = problem.subsidy + h[static_cast<std::size_t>(idle[p])];
    const double gap = q_active - q_passive;
    out.action_gap[p] = gap;
    if (std::abs(gap) < 10.0 * tolerance) {
      out.actions[p] = Preference::Indifferent;
    } else {
      out.actions[p] = gap > 0.0 ? Preference::Active : Preference::Passive;
    }
  }
  return out;
}

std::vector<bool> passive_set(const SubsidySolution& solution) {
  std::vector<bool> passive(solution.actions.size());
  for (std::size_t p = 0; p < passive.size(); ++p) {
    passive[p] = solution.actions[p] != Preference::Active;
  }
  return passive;
}

double whittle_index_oracle(const ChannelParams& params, const BeliefState& state, int tau,
                            const IndexOracleOptions& options) {
  if (!(options.bisection_tolerance > 0.0)) {
    throw std::invalid_argument("bisection tolerance must be positive");
  }
  const auto position = static_cast<std::size_t>(belief_order(state, tau));
  SubsidyProblem problem{params, tau, 0.0, 1.0};
  std::vector<double> warm;

  auto idles = [&](double subsidy) {
    problem.subsidy = subsidy;
    ValueIterationOptions vi;
    vi.warm_start = warm;
    SubsidySolution solution =
        subsidy_value_iteration(problem, options.value_iteration_tolerance, vi);
    warm = std::move(solution.bias);
    return solution.actions[position] != Preference::Active;
  };

  double lo = 0.0;
  double hi = 1.0;
  if (idles(lo) || !idles(hi)) {
    throw std::runtime_error("index oracle: state " + to_string(state) +
                             " does not switch within [0, 1]");
  }
  while (hi - lo >= options.bisection_tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (idles(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace schedsim
