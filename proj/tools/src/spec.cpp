#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <set>

#include "schedsim/experiment.hpp"

namespace schedsim::cli {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Command, std::string_view>, 6> kCommands{{
    {Command::Validate, "validate"},
    {Command::IndexTable, "index-table"},
    {Command::RateRegion, "rate-region"},
    {Command::Simulate, "simulate"},
    {Command::StabilitySweep, "stability-sweep"},
    {Command::TruncationSweep, "truncation-sweep"},
}};

void reject_unknown(const json& object, const std::set<std::string>& allowed,
                    const std::string& where) {
  if (!object.is_object()) {
    throw SpecError(where + " must be an object");
  }
  for (const auto& item : object.items()) {
    if (!allowed.contains(item.key())) {
      throw SpecError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <typename T>
T read(const json& object, const char* key, T fallback) {
  const auto it = object.find(key);
  if (it == object.end()) {
    return fallback;
  }
  return it->get<T>();
}

ArrivalSpec::Kind arrival_kind(const std::string& name) {
  if (name == "bernoulli") {
    return ArrivalSpec::Kind::Bernoulli;
  }
  if (name == "poisson") {
    return ArrivalSpec::Kind::Poisson;
  }
  throw SpecError("arrival kind must be 'bernoulli' or 'poisson', got '" + name + "'");
}

std::string arrival_kind_name(ArrivalSpec::Kind kind) {
  return kind == ArrivalSpec::Kind::Bernoulli ? "bernoulli" : "poisson";
}

ExperimentSpec parse_fields(const json& doc) {
  reject_unknown(doc,
                 {"kind", "channels", "tau", "frame_length", "budget", "backoff", "arrivals",
                  "arrival_kind", "horizon", "replications", "seed", "policy", "mode",
                  "initial_belief", "sample_interval", "stability", "oracle_index",
                  "directions", "fan_size", "direction", "load_scalings", "tau_list",
                  "tau_ref", "weights", "validate"},
                 "spec");
  ExperimentSpec spec;
  if (doc.contains("kind")) {
    const auto kind = parse_command(doc.at("kind").get<std::string>());
    if (!kind) {
      throw SpecError("unknown experiment kind '" + doc.at("kind").get<std::string>() + "'");
    }
    spec.kind = kind;
  }

  SimConfig& sim = spec.sim;
  if (!doc.contains("channels") || !doc.at("channels").is_array() || doc.at("channels").empty()) {
    throw SpecError("'channels' must be a non-empty array");
  }
  for (const auto& c : doc.at("channels")) {
    reject_unknown(c, {"p11", "p01"}, "channel");
    try {
      sim.channels.emplace_back(c.at("p11").get<double>(), c.at("p01").get<double>());
    } catch (const std::invalid_argument& e) {
      throw SpecError(std::string("channel: ") + e.what());
    }
  }
  const std::size_t n = sim.channels.size();

  sim.tau = doc.contains("tau") ? doc.at("tau").get<int>() : default_truncation(sim.channels);
  sim.frame_length = read<std::int64_t>(doc, "frame_length", 1000);
  sim.budget = read<double>(doc, "budget", 1.0);
  sim.backoff = read<double>(doc, "backoff", 0.02 * sim.budget);
  sim.horizon = read<std::int64_t>(doc, "horizon", 100000);
  sim.replications = read<int>(doc, "replications", 4);
  sim.master_seed = read<std::uint64_t>(doc, "seed", 1);
  sim.sample_interval = read<std::int64_t>(doc, "sample_interval", sim.frame_length);
  spec.arrival_kind = arrival_kind(read<std::string>(doc, "arrival_kind", "bernoulli"));

  const std::string mode = read<std::string>(doc, "mode", "queued");
  if (mode == "queued") {
    sim.mode = SimMode::Queued;
  } else if (mode == "backlogged") {
    sim.mode = SimMode::Backlogged;
  } else {
    throw SpecError("mode must be 'queued' or 'backlogged'");
  }
  const std::string initial = read<std::string>(doc, "initial_belief", "stationary");
  if (initial == "stationary") {
    sim.initial_belief = InitialBelief::Stationary;
  } else if (initial == "observed") {
    sim.initial_belief = InitialBelief::Observed;
  } else {
    throw SpecError("initial_belief must be 'stationary' or 'observed'");
  }

  if (doc.contains("arrivals")) {
    for (const auto& a : doc.at("arrivals")) {
      if (a.is_number()) {
        sim.arrivals.push_back({spec.arrival_kind, a.get<double>()});
      } else {
        reject_unknown(a, {"kind", "rate"}, "arrival");
        sim.arrivals.push_back(
            {arrival_kind(read<std::string>(a, "kind", arrival_kind_name(spec.arrival_kind))),
             a.at("rate").get<double>()});
      }
    }
    if (sim.arrivals.size() != n) {
      throw SpecError("'arrivals' must list one entry per channel");
    }
  } else {
    sim.arrivals.assign(n, {spec.arrival_kind, 0.0});
  }

  if (doc.contains("policy")) {
    const json& p = doc.at("policy");
    if (p.is_string()) {
      sim.policy.name = p.get<std::string>();
    } else {
      reject_unknown(p, {"name", "weights"}, "policy");
      sim.policy.name = read<std::string>(p, "name", "qwi");
      sim.policy.weights = read<std::vector<double>>(p, "weights", {});
    }
  }
  static const std::set<std::string> policies{"index", "qwi", "round-robin", "myopic-belief",
                                              "random"};
  if (!policies.contains(sim.policy.name)) {
    throw SpecError("unknown policy '" + sim.policy.name + "'");
  }

  if (doc.contains("stability")) {
    const json& s = doc.at("stability");
    reject_unknown(s, {"drift_tolerance", "queue_ceiling"}, "stability");
    spec.stability.drift_tolerance = read<double>(s, "drift_tolerance", 1e-3);
    spec.stability.queue_ceiling = read<std::int64_t>(s, "queue_ceiling", 1'000'000);
  }

  spec.oracle_index = read<bool>(doc, "oracle_index", false);
  spec.directions = read<std::vector<std::vector<double>>>(doc, "directions", {});
  spec.fan_size = read<int>(doc, "fan_size", 9);
  spec.direction = read<std::vector<double>>(doc, "direction", std::vector<double>(n, 1.0));
  spec.load_scalings = read<std::vector<double>>(doc, "load_scalings", spec.load_scalings);
  spec.tau_list = read<std::vector<int>>(doc, "tau_list", spec.tau_list);
  spec.tau_ref = read<int>(doc, "tau_ref", 320);
  spec.weights = read<std::vector<double>>(doc, "weights", std::vector<double>(n, 1.0));

  if (doc.contains("validate")) {
    const json& v = doc.at("validate");
    reject_unknown(v,
                   {"random_channels", "random_seed", "rho_steps", "omega_grid",
                    "index_states_off", "index_states_on", "closed_form_tolerance",
                    "index_tolerance", "property_tolerance"},
                   "validate");
    ValidateOptions& o = spec.validate;
    o.random_channels = read<int>(v, "random_channels", o.random_channels);
    o.random_seed = read<std::uint64_t>(v, "random_seed", o.random_seed);
    o.rho_steps = read<int>(v, "rho_steps", o.rho_steps);
    o.omega_grid = read<int>(v, "omega_grid", o.omega_grid);
    o.index_states_off = read<int>(v, "index_states_off", o.index_states_off);
    o.index_states_on = read<int>(v, "index_states_on", o.index_states_on);
    o.closed_form_tolerance = read<double>(v, "closed_form_tolerance", o.closed_form_tolerance);
    o.index_tolerance = read<double>(v, "index_tolerance", o.index_tolerance);
    o.property_tolerance = read<double>(v, "property_tolerance", o.property_tolerance);
    if (o.random_channels < 0 || o.rho_steps < 1 || o.omega_grid < 2 ||
        o.index_states_off < 0 || o.index_states_on < 0) {
      throw SpecError("validate: counts out of range");
    }
  }
  return spec;
}

void check_consistency(const ExperimentSpec& spec) {
  const std::size_t n = spec.sim.users();
  try {
    validate_config(spec.sim);
  } catch (const std::invalid_argument& e) {
    throw SpecError(e.what());
  }
  if (spec.sim.sample_interval < 1) {
    throw SpecError("sample_interval must be >= 1");
  }
  auto check_weights = [n](const std::vector<double>& w, const std::string& what) {
    if (w.size() != n) {
      throw SpecError(what + " must have one entry per channel");
    }
    for (double x : w) {
      if (!std::isfinite(x) || x < 0.0) {
        throw SpecError(what + " entries must be finite and nonnegative");
      }
    }
  };
  for (const auto& d : spec.directions) {
    check_weights(d, "each direction");
  }
  check_weights(spec.direction, "'direction'");
  check_weights(spec.weights, "'weights'");
  if (spec.fan_size < 2) {
    throw SpecError("fan_size must be >= 2");
  }
  for (double s : spec.load_scalings) {
    if (!std::isfinite(s) || s < 0.0) {
      throw SpecError("load_scalings must be finite and nonnegative");
    }
  }
  if (spec.tau_list.empty() || spec.tau_list.front() < 1 ||
      !std::is_sorted(spec.tau_list.begin(), spec.tau_list.end()) ||
      spec.tau_ref < spec.tau_list.back()) {
    throw SpecError("tau_list must be ascending, >= 1, and not exceed tau_ref");
  }
  if (spec.stability.drift_tolerance <= 0.0 || spec.stability.queue_ceiling < 1) {
    throw SpecError("stability options out of range");
  }
}

}  // namespace

std::optional<Command> parse_command(std::string_view name) {
  for (const auto& [command, text] : kCommands) {
    if (text == name) {
      return command;
    }
  }
  return std::nullopt;
}

std::string_view command_name(Command command) {
  for (const auto& [c, text] : kCommands) {
    if (c == command) {
      return text;
    }
  }
  return "unknown";
}

ExperimentSpec parse_spec(const json& document) {
  const json& doc = document.contains("resolved_spec") ? document.at("resolved_spec") : document;
  try {
    ExperimentSpec spec = parse_fields(doc);
    check_consistency(spec);
    return spec;
  } catch (const json::exception& e) {
    throw SpecError(std::string("spec: ") + e.what());
  }
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw SpecError("cannot read spec file " + path.string());
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SpecError(std::string("spec is not valid JSON: ") + e.what());
  }
  return parse_spec(doc);
}

json resolved_spec(const ExperimentSpec& spec) {
  const SimConfig& sim = spec.sim;
  json doc;
  if (spec.kind) {
    doc["kind"] = command_name(*spec.kind);
  }
  doc["channels"] = json::array();
  for (const auto& c : sim.channels) {
    doc["channels"].push_back({{"p11", c.p11()}, {"p01", c.p01()}});
  }
  doc["tau"] = sim.tau;
  doc["frame_length"] = sim.frame_length;
  doc["budget"] = sim.budget;
  doc["backoff"] = sim.resolved_backoff();
  doc["arrival_kind"] = arrival_kind_name(spec.arrival_kind);
  doc["arrivals"] = json::array();
  for (const auto& a : sim.arrivals) {
    doc["arrivals"].push_back({{"kind", arrival_kind_name(a.kind)}, {"rate", a.rate}});
  }
  doc["horizon"] = sim.horizon;
  doc["replications"] = sim.replications;
  doc["seed"] = sim.master_seed;
  doc["policy"] = {{"name", sim.policy.name}, {"weights", sim.policy.weights}};
  doc["mode"] = sim.mode == SimMode::Queued ? "queued" : "backlogged";
  doc["initial_belief"] = sim.initial_belief == InitialBelief::Stationary ? "stationary" : "observed";
  doc["sample_interval"] = sim.resolved_sample_interval();
  doc["stability"] = {{"drift_tolerance", spec.stability.drift_tolerance},
                      {"queue_ceiling", spec.stability.queue_ceiling}};
  doc["oracle_index"] = spec.oracle_index;
  doc["directions"] = spec.directions;
  doc["fan_size"] = spec.fan_size;
  doc["direction"] = spec.direction;
  doc["load_scalings"] = spec.load_scalings;
  doc["tau_list"] = spec.tau_list;
  doc["tau_ref"] = spec.tau_ref;
  doc["weights"] = spec.weights;
  const ValidateOptions& v = spec.validate;
  doc["validate"] = {{"random_channels", v.random_channels},
                     {"random_seed", v.random_seed},
                     {"rho_steps", v.rho_steps},
                     {"omega_grid", v.omega_grid},
                     {"index_states_off", v.index_states_off},
                     {"index_states_on", v.index_states_on},
                     {"closed_form_tolerance", v.closed_form_tolerance},
                     {"index_tolerance", v.index_tolerance},
                     {"property_tolerance", v.property_tolerance}};
  return doc;
}

}  // namespace schedsim::cli
