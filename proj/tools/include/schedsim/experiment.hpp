#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "schedsim/simulator.hpp"

namespace schedsim::cli {

/// Malformed or inconsistent experiment spec (exit status 2).
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kVersion = "0.1.0";

enum class Command { Validate, IndexTable, RateRegion, Simulate, StabilitySweep, TruncationSweep };

std::optional<Command> parse_command(std::string_view name);
std::string_view command_name(Command command);

struct ValidateOptions {
  int random_channels = 20;
  std::uint64_t random_seed = 7;
  /// Rho grid 1/k, 2/k, ..., 1.
  int rho_steps = 20;
  int omega_grid = 50;
  int index_states_off = 10;
  int index_states_on = 3;
  double closed_form_tolerance = 1e-9;
  double index_tolerance = 1e-6;
  double property_tolerance = 1e-12;
};

struct ExperimentSpec {
  /// Optional "kind" entry; must match the command when present.
  std::optional<Command> kind;
  SimConfig sim;
  StabilityOptions stability;
  bool oracle_index = false;
  /// Weight directions for rate-region; empty means a generated fan.
  std::vector<std::vector<double>> directions;
  int fan_size = 9;
  /// Stability sweep.
  std::vector<double> direction;
  std::vector<double> load_scalings{0.5, 0.7, 0.9, 1.1, 1.3};
  ArrivalSpec::Kind arrival_kind = ArrivalSpec::Kind::Bernoulli;
  /// Truncation sweep.
  std::vector<int> tau_list{10, 20, 40, 80};
  int tau_ref = 320;
  std::vector<double> weights;
  ValidateOptions validate;
};

/// Parses a spec document. A sidecar metadata document is also accepted, in
/// which case its recorded resolved spec is used. Throws SpecError.
ExperimentSpec parse_spec(const nlohmann::json& document);
ExperimentSpec load_spec(const std::filesystem::path& path);

/// Every field with defaults filled in; parse_spec(resolved_spec(s)) == s.
nlohmann::json resolved_spec(const ExperimentSpec& spec);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  CsvWriter& cell(double value);
  CsvWriter& cell(std::int64_t value);
  CsvWriter& cell(int value) { return cell(static_cast<std::int64_t>(value)); }
  CsvWriter& cell(std::size_t value) { return cell(static_cast<std::int64_t>(value)); }
  CsvWriter& cell(std::string_view text);
  CsvWriter& cell(const char* text) { return cell(std::string_view(text)); }
  CsvWriter& empty();
  void end_row();

 private:
  void separator();

  std::ofstream out_;
  std::size_t columns_;
  std::size_t current_ = 0;
};

struct CheckResult {
  std::string name;
  enum class Status { Pass, Fail, Skipped } status = Status::Pass;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::int64_t cases = 0;
  std::string note;
};

std::string_view to_string(CheckResult::Status status);

/// Oracle and property suite behind the validate command.
std::vector<CheckResult> run_validation(const ExperimentSpec& spec);

struct RunOptions {
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

/// Executes one command, writing CSV and `<command>.meta.json` into
/// out_dir. Returns the process exit status (0 ok, 1 suite failure).
int execute(Command command, ExperimentSpec spec, const RunOptions& options);

}  // namespace schedsim::cli
