#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "schedsim/experiment.hpp"

namespace schedsim::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("schedsim_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_spec(const std::string& name, const std::string& text) {
    const fs::path path = dir_ / name;
    std::ofstream(path) << text;
    return path;
  }

  int run_binary(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + SCHEDSIM_BINARY + " " + args + " >" +
                            (dir_ / "stdout.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static std::vector<std::string> lines(const fs::path& path) {
    std::ifstream in(path);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) {
      out.push_back(line);
    }
    return out;
  }

  fs::path dir_;
};

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(0.2 / 0.28), "0.7142857142857143");
  for (double x : {1e-300, 3.141592653589793, -2.5e17, 0.30000000000000004}) {
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
}

TEST(ParseSpec, RejectsUnknownKeysAndBadValues) {
  const json base = {{"channels", {{{"p11", 0.8}, {"p01", 0.2}}}}};
  EXPECT_NO_THROW(parse_spec(base));
  json extra = base;
  extra["colour"] = "blue";
  EXPECT_THROW(parse_spec(extra), SpecError);
  json nested = base;
  nested["channels"][0]["p10"] = 0.1;
  EXPECT_THROW(parse_spec(nested), SpecError);
  json bad_channel = {{"channels", {{{"p11", 0.2}, {"p01", 0.8}}}}};
  EXPECT_THROW(parse_spec(bad_channel), SpecError);
  json wrong_type = base;
  wrong_type["budget"] = "lots";
  EXPECT_THROW(parse_spec(wrong_type), SpecError);
  json no_channels = json::object();
  EXPECT_THROW(parse_spec(no_channels), SpecError);
  json policy = base;
  policy["policy"] = "oracle";
  EXPECT_THROW(parse_spec(policy), SpecError);
}

TEST(ParseSpec, DefaultsAndRoundTrip) {
  const json doc = {{"channels", {{{"p11", 0.8}, {"p01", 0.2}}, {{"p11", 0.6}, {"p01", 0.1}}}},
                    {"budget", 1.5}};
  const ExperimentSpec spec = parse_spec(doc);
  EXPECT_EQ(spec.sim.tau, 25);
  EXPECT_EQ(spec.sim.frame_length, 1000);
  EXPECT_DOUBLE_EQ(spec.sim.resolved_backoff(), 0.03);
  EXPECT_EQ(spec.sim.policy.name, "qwi");
  const json resolved = resolved_spec(spec);
  EXPECT_EQ(resolved_spec(parse_spec(resolved)), resolved);
  EXPECT_EQ(resolved_spec(parse_spec({{"resolved_spec", resolved}})), resolved);
}

TEST_F(CliTest, IndexTableHasTwoTauPlusOneRowsPerUser) {
  const auto spec = write_spec(
      "s.json", R"({"channels":[{"p11":0.8,"p01":0.2},{"p11":0.7,"p01":0.1}],"tau":5,"oracle_index":true})");
  ASSERT_EQ(run_binary("index-table --spec " + spec.string() + " --out " + (dir_ / "o").string()),
            0);
  const auto rows = lines(dir_ / "o" / "index_table.csv");
  ASSERT_EQ(rows.size(), 1u + 2u * 11u);
  EXPECT_EQ(rows[0], "user,position,kind,last,age,belief,whittle_index,oracle_index");
  double previous = -1.0;
  for (std::size_t k = 1; k <= 11; ++k) {
    std::stringstream row(rows[k]);
    std::vector<std::string> cells;
    for (std::string cell; std::getline(row, cell, ',');) {
      cells.push_back(cell);
    }
    const double index = std::stod(cells[6]);
    EXPECT_GE(index, previous);
    EXPECT_NEAR(std::stod(cells[7]), index, 1e-6);
    previous = index;
  }
  EXPECT_TRUE(fs::exists(dir_ / "o" / "index-table.meta.json"));
}

TEST_F(CliTest, ExitStatusContract) {
  const auto good = write_spec("good.json", R"({"channels":[{"p11":0.8,"p01":0.2}],"tau":30,
      "validate":{"random_channels":2}})");
  EXPECT_EQ(run_binary("validate --spec " + good.string() + " --out " + (dir_ / "v").string()), 0);
  const auto corrupt = write_spec("bad.json", R"({"channels":[{"p11":0.8,"p01":)");
  EXPECT_EQ(run_binary("validate --spec " + corrupt.string() + " --out " + (dir_ / "v").string()),
            2);
  const auto unknown = write_spec("unk.json", R"({"channels":[{"p11":0.8,"p01":0.2}],"speed":3})");
  EXPECT_EQ(run_binary("simulate --spec " + unknown.string() + " --out " + (dir_ / "v").string()),
            2);
  EXPECT_EQ(run_binary("frobnicate --spec " + good.string() + " --out x"), 2);
  EXPECT_EQ(run_binary("simulate --out x"), 2);
  const auto mismatch = write_spec("kind.json", R"({"kind":"simulate","channels":[{"p11":0.8,"p01":0.2}]})");
  EXPECT_EQ(run_binary("validate --spec " + mismatch.string() + " --out " + (dir_ / "v").string()),
            2);
  EXPECT_EQ(run_binary("simulate --spec " + good.string() + " --out " + (dir_ / "v").string(),
                       "SCHEDSIM_JOBS=zero"),
            2);
}

TEST_F(CliTest, ValidateFailureGivesExitOne) {
  const auto strict = write_spec("strict.json", R"({"channels":[{"p11":0.8,"p01":0.2}],"tau":30,
      "validate":{"random_channels":0,"index_tolerance":1e-15}})");
  EXPECT_EQ(run_binary("validate --spec " + strict.string() + " --out " + (dir_ / "v").string()),
            1);
}

TEST_F(CliTest, ValidateSkipsPropertyChecksBelowTau0) {
  ExperimentSpec spec = parse_spec(json::parse(
      R"({"channels":[{"p11":0.8,"p01":0.2}],"tau":10,"validate":{"random_channels":1}})"));
  int skipped = 0;
  for (const auto& check : run_validation(spec)) {
    if (check.name == "threshold_monotone_in_rho" || check.name == "rate_lipschitz_in_activation") {
      EXPECT_EQ(check.status, CheckResult::Status::Skipped);
      ++skipped;
    } else {
      EXPECT_EQ(check.status, CheckResult::Status::Pass) << check.name;
    }
  }
  EXPECT_EQ(skipped, 2);

  spec.sim.tau = 16;
  for (const auto& check : run_validation(spec)) {
    EXPECT_EQ(check.status, CheckResult::Status::Pass) << check.name;
  }
}

TEST_F(CliTest, RerunFromMetadataIsByteIdentical) {
  const auto spec = write_spec("sim.json", R"({"channels":[{"p11":0.8,"p01":0.2},{"p11":0.7,"p01":0.1}],
      "arrivals":[0.2,0.15],"horizon":20000,"frame_length":500,"replications":3})");
  const fs::path first = dir_ / "first";
  const fs::path second = dir_ / "second";
  ASSERT_EQ(run_binary("simulate --spec " + spec.string() + " --out " + first.string() +
                       " --seed 99 --jobs 1"),
            0);
  ASSERT_EQ(run_binary("simulate --spec " + (first / "simulate.meta.json").string() + " --out " +
                           second.string(),
                       "SCHEDSIM_JOBS=3"),
            0);
  for (const char* file : {"simulate_summary.csv", "simulate_users.csv",
                           "simulate_replications.csv", "simulate_queues.csv",
                           "simulate.meta.json"}) {
    EXPECT_EQ(slurp(first / file), slurp(second / file)) << file;
  }
  const json meta = json::parse(slurp(first / "simulate.meta.json"));
  EXPECT_EQ(meta["seed"], 99);
  EXPECT_EQ(meta["resolved_spec"]["seed"], 99);
  EXPECT_TRUE(meta.contains("tau0"));
}

TEST_F(CliTest, TruncationSweepRows) {
  ExperimentSpec spec = parse_spec(json::parse(
      R"({"channels":[{"p11":0.5,"p01":0.05},{"p11":0.4,"p01":0.1}],"budget":0.6,
          "weights":[1.0,3.0],"tau_list":[10,20,40,80]})"));
  RunOptions options;
  options.out_dir = dir_ / "t";
  ASSERT_EQ(execute(Command::TruncationSweep, spec, options), 0);
  const auto rows = lines(dir_ / "t" / "truncation_sweep.csv");
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "tau,f,g,v_tau,v_ref,gap,bound,slack,holds");
  for (std::size_t k = 1; k < rows.size(); ++k) {
    EXPECT_EQ(rows[k].back(), '1');
  }
}

TEST_F(CliTest, RateRegionSymmetricChannels) {
  ExperimentSpec spec = parse_spec(json::parse(
      R"({"channels":[{"p11":0.8,"p01":0.2},{"p11":0.8,"p01":0.2}],"budget":1.0,"tau":25,
          "horizon":100000,"replications":2,"fan_size":5})"));
  RunOptions options;
  options.out_dir = dir_ / "r";
  ASSERT_EQ(execute(Command::RateRegion, spec, options), 0);
  const auto rows = lines(dir_ / "r" / "rate_region.csv");
  ASSERT_EQ(rows.size(), 1u + 5u * 2u);
  auto rate = [&](std::size_t direction, std::size_t user) {
    std::stringstream row(rows[1 + 2 * direction + user]);
    std::string cell;
    for (int k = 0; k <= 3; ++k) {
      std::getline(row, cell, ',');
    }
    return std::stod(cell);
  };
  // The middle direction sits on a flat face where ties decide the split.
  for (std::size_t d : {0u, 1u, 3u, 4u}) {
    EXPECT_NEAR(rate(d, 0), rate(4 - d, 1), 0.01);
  }
}

TEST_F(CliTest, StabilitySweepRowsPerScaling) {
  ExperimentSpec spec = parse_spec(json::parse(
      R"({"channels":[{"p11":0.8,"p01":0.3},{"p11":0.6,"p01":0.1}],"budget":1.0,
          "horizon":40000,"frame_length":250,"replications":2,"load_scalings":[0.3,1.5]})"));
  RunOptions options;
  options.out_dir = dir_ / "s";
  ASSERT_EQ(execute(Command::StabilitySweep, spec, options), 0);
  const auto rows = lines(dir_ / "s" / "stability_sweep.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_NE(rows[1].find("stable"), std::string::npos);
  EXPECT_NE(rows[2].find("unstable"), std::string::npos);
  EXPECT_EQ(lines(dir_ / "s" / "stability_boundary.csv").size(), 3u);
}

}  // namespace
}  // namespace schedsim::cli
