#include <filesystem>

#include <gtest/gtest.h>

#include "commands.h"
#include "json.hpp"
#include "popsynth/csv.h"
#include "popsynth/error.h"
#include "support.h"

namespace popsynth {
namespace {

namespace fs = std::filesystem;
using testing::run_cli;

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_file(p)); }

TEST(Cli, PipelineWritesEveryArtifact) {
  const fs::path dir = testing::scratch_dir("cli-pipeline");
  ASSERT_EQ(testing::run_small_pipeline(dir), 0);
  for (const char* f :
       {"populations/toy.csv", "populations/toy_joint.json", "populations/prepared.csv",
        "populations/balanced.csv", "populations/synthetic.csv", "schema/schema.json",
        "models/checkpoint.json", "reports/loss_log.csv", "reports/validation.json",
        "reports/cells_order1.csv", "reports/scatter_order2.svg",
        "reports/bland_altman_order1.svg", "reports/fringe.json", "reports/fringe.csv",
        "reports/dropped_columns.csv", "reports/train.conf", "reports/generate.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(read_csv(dir / "populations/synthetic.csv").rows.size(), 300u);
  EXPECT_EQ(read_csv(dir / "reports/loss_log.csv").rows.size(), 3u);
}

TEST(Cli, PipelineIsByteIdentical) {
  const fs::path a = testing::scratch_dir("cli-repro-a");
  const fs::path b = testing::scratch_dir("cli-repro-b");
  ASSERT_EQ(testing::run_small_pipeline(a), 0);
  ASSERT_EQ(testing::run_small_pipeline(b), 0);
  for (const char* f : {"populations/toy.csv", "populations/balanced.csv",
                        "models/checkpoint.json", "populations/synthetic.csv",
                        "reports/validation.json", "reports/fringe.json"}) {
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  }
}

TEST(Cli, ValidateAgainstItself) {
  const fs::path dir = testing::scratch_dir("cli-self");
  const std::string out = "--out=" + dir.string();
  ASSERT_EQ(run_cli({"toycensus", out, "--n=300"}).code, 0);
  const std::string toy = (dir / "populations/toy.csv").string();
  const auto r = run_cli({"validate", out, "--original=" + toy, "--synthetic=" + toy});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = read_json(dir / "reports/validation.json");
  for (const auto& m : j["metrics"]) {
    EXPECT_EQ(m["srmse"].get<double>(), 0.0);
    EXPECT_NEAR(m["pearson"].get<double>(), 1.0, 1e-12);
    EXPECT_EQ(m["r_squared"].get<double>(), 1.0);
    EXPECT_EQ(m["bland_altman"]["n_outliers"].get<int>(), 0);
  }
}

TEST(Cli, DuplicateWithWeightTwoDoubles) {
  const fs::path dir = testing::scratch_dir("cli-double");
  const std::string out = "--out=" + dir.string();
  ASSERT_EQ(run_cli({"toycensus", out, "--n=150", "--weights=constant", "--weight-constant=2"}).code, 0);
  ASSERT_EQ(run_cli({"prepare", out, "--input=" + (dir / "populations/toy.csv").string(),
                     "--weight-column=weight"})
                .code,
            0);
  const auto r = run_cli({"balance", out, "--approach=duplicate", "--reduction-factor=1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_csv(dir / "populations/balanced.csv").rows.size(), 300u);
}

TEST(Cli, GenerateWithRegionKeepsOnlyThatRegion) {
  const fs::path dir = testing::scratch_dir("cli-region");
  ASSERT_EQ(testing::run_small_pipeline(dir, 1), 0);
  const auto r = run_cli({"generate", "--out=" + dir.string(), "--n=120", "--region=region=R3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const CsvTable t = read_csv(dir / "populations/synthetic.csv");
  ASSERT_EQ(t.rows.size(), 120u);
  const auto col = std::find(t.header.begin(), t.header.end(), "region") - t.header.begin();
  for (const auto& row : t.rows) EXPECT_EQ(row[static_cast<std::size_t>(col)], "R3");
  EXPECT_GE(read_json(dir / "reports/generate.json")["draws"].get<int>(), 120);
}

TEST(Cli, EchoedConfigReproducesRun) {
  const fs::path dir = testing::scratch_dir("cli-config");
  ASSERT_EQ(testing::run_small_pipeline(dir, 2), 0);
  const std::string first = read_file(dir / "models/checkpoint.json");
  const fs::path conf = dir / "train.conf";
  fs::copy_file(dir / "reports/train.conf", conf);
  fs::remove(dir / "models/checkpoint.json");
  const auto r = run_cli({"train", "--config", conf.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(dir / "models/checkpoint.json"), first);
}

TEST(Cli, CommandLineOverridesConfig) {
  const fs::path dir = testing::scratch_dir("cli-override");
  ASSERT_EQ(testing::run_small_pipeline(dir, 2), 0);
  const fs::path conf = dir / "train.conf";
  fs::copy_file(dir / "reports/train.conf", conf);
  ASSERT_EQ(run_cli({"train", "--config", conf.string(), "--iterations=1"}).code, 0);
  EXPECT_EQ(read_csv(dir / "reports/loss_log.csv").rows.size(), 1u);
}

TEST(Cli, ResumeMatchesUninterruptedTraining) {
  const fs::path dir = testing::scratch_dir("cli-resume");
  ASSERT_EQ(testing::run_small_pipeline(dir, 4), 0);
  const std::string full = read_file(dir / "models/checkpoint.json");
  const std::string out = "--out=" + dir.string();
  const std::vector<std::string> train = {"train", out, "--batch-size=32", "--latent-dim=8",
                                          "--widths=16,16,16,16", "--learning-rate=0.001",
                                          "--seed=5"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = train;
    args.insert(args.end(), extra.begin(), extra.end());
    return run_cli(args);
  };
  ASSERT_EQ(with({"--iterations=2", "--checkpoint=" + (dir / "half.json").string()}).code, 0);
  const auto r = with({"--iterations=4", "--resume=" + (dir / "half.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(dir / "models/checkpoint.json"), full);
}

TEST(Cli, ParseConfig) {
  const auto m = cli::parse_config("# comment\nseed = 4\n\nname = \"a b\"\nempty =\n");
  EXPECT_EQ(m.at("seed"), "4");
  EXPECT_EQ(m.at("name"), "a b");
  EXPECT_EQ(m.at("empty"), "");
  EXPECT_THROW(cli::parse_config("novalue\n"), ConfigError);
  EXPECT_THROW(cli::parse_config("a=1\na=2\n"), ConfigError);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = testing::scratch_dir("cli-exit");
  const std::string out = "--out=" + dir.string();
  EXPECT_EQ(run_cli({}).code, cli::kConfigError);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kConfigError);
  EXPECT_EQ(run_cli({"--help"}).code, cli::kOk);
  EXPECT_EQ(run_cli({"train", "--help"}).code, cli::kOk);
  const auto missing = run_cli({"prepare", out, "--input=/nonexistent/x.csv"});
  EXPECT_EQ(missing.code, cli::kDataError);
  EXPECT_EQ(missing.err.rfind("error[data]: ", 0), 0u) << missing.err;
  ASSERT_EQ(testing::run_small_pipeline(dir, 1), 0);
  const auto bad = run_cli({"train", out, "--iterations=0"});
  EXPECT_EQ(bad.code, cli::kConfigError);
  EXPECT_EQ(bad.err.rfind("error[config]: ", 0), 0u) << bad.err;
  EXPECT_EQ(run_cli({"train", out, "--optimizer=sgd"}).code, cli::kConfigError);
  EXPECT_EQ(run_cli({"generate", out, "--region=region=R9"}).code, cli::kConfigError);
  EXPECT_EQ(run_cli({"audit", out, "--original=" + (dir / "populations/prepared.csv").string(),
                     "--synthetic=" + (dir / "populations/synthetic.csv").string(),
                     "--key-variables=nope", "--target=health"})
                .code,
            cli::kDataError);
}

TEST(Cli, DivergentTrainingIsNumericError) {
  const fs::path dir = testing::scratch_dir("cli-numeric");
  ASSERT_EQ(testing::run_small_pipeline(dir, 1), 0);
  const auto r = run_cli({"train", "--out=" + dir.string(), "--learning-rate=1e300",
                          "--iterations=20", "--optimizer=rmsprop"});
  EXPECT_EQ(r.code, cli::kNumericError) << r.err;
}

}  // namespace
}  // namespace popsynth
