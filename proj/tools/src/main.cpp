#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "schedsim/experiment.hpp"

int main(int argc, char** argv) {
  using namespace schedsim::cli;

  CLI::App app{"Index scheduling simulator and experiment runner"};
  app.require_subcommand(1, 1);
  std::string spec_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int jobs = 1;

  for (const char* name : {"validate", "index-table", "rate-region", "simulate",
                           "stability-sweep", "truncation-sweep"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--spec", spec_path, "experiment spec (JSON) or a .meta.json sidecar")
        ->required();
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--seed", seed, "master seed (overrides the spec)");
    sub->add_option("--jobs", jobs, "parallel replications")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  RunOptions options;
  options.out_dir = out_dir;
  options.jobs = jobs;
  const auto* sub = app.get_subcommands().front();
  if (const char* env = std::getenv("SCHEDSIM_JOBS")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || value < 1) {
      std::cerr << "error: SCHEDSIM_JOBS must be a positive integer\n";
      return 2;
    }
    if (sub->count("--jobs") == 0) {
      options.jobs = static_cast<int>(value);
    }
  }
  if (sub->count("--seed") > 0) {
    options.seed = seed;
  }

  try {
    const Command command = *parse_command(sub->get_name());
    return execute(command, load_spec(spec_path), options);
  } catch (const SpecError& e) {
    std::cerr << "spec error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
