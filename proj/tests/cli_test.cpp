#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "lmd/cli.hpp"
#include "lmd/mock_llm.hpp"
#include "lmd/prompt.hpp"

using namespace lmd;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("lmd-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    args.insert(args.begin(), {"--data-dir", (dir_ / "data").string()});
    return run_cli(args, out_, err_);
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

}  // namespace

TEST_F(CliTest, PipelineCreatesRunDirectory) {
  ASSERT_EQ(run({"--mock", "pipeline", "two pandas in a forest", "--seed", "7"}), kExitOk) << err_.str();
  const auto summary = nlohmann::json::parse(out_.str());
  EXPECT_EQ(summary.at("status"), "image_done");
  const fs::path run_dir = summary.at("run_dir").get<std::string>();
  EXPECT_TRUE(fs::exists(run_dir / "run.json"));
  EXPECT_TRUE(fs::exists(run_dir / "image.png"));
  EXPECT_TRUE(fs::exists(run_dir / "layout.json"));
}

TEST_F(CliTest, LayoutPrintsJson) {
  ASSERT_EQ(run({"--mock", "layout", "two pandas in a forest"}), kExitOk) << err_.str();
  const auto j = nlohmann::json::parse(out_.str());
  EXPECT_EQ(j.at("objects").size(), 2u);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({"layout"}), kExitUsage);
  EXPECT_EQ(run({"bogus"}), kExitUsage);
  EXPECT_EQ(run({}), kExitUsage);
  EXPECT_EQ(run({"--mock", "pipeline", "a cat", "--r", "2"}), kExitUsage);
  EXPECT_EQ(run({"--mock", "layout", "a cat", "--language", "xx"}), kExitUsage);
  EXPECT_EQ(run({"--help"}), kExitOk);
}

TEST_F(CliTest, BenchmarkMock) {
  ASSERT_EQ(run({"--mock", "benchmark", "--kind", "negation", "--n", "5"}), kExitOk) << err_.str();
  EXPECT_NE(out_.str().find("Negation                100%"), std::string::npos) << out_.str();
  const fs::path report = dir_ / "report.json";
  ASSERT_EQ(run({"--mock", "benchmark", "--kind", "numeracy", "--n", "5", "--json", report.string()}), kExitOk);
  EXPECT_EQ(nlohmann::json::parse(std::ifstream(report)).at("accuracy_by_kind").at("numeracy"), 1.0);
}

TEST_F(CliTest, RenderAndGenerateFromFiles) {
  const fs::path layout_json = dir_ / "layout.json";
  std::ofstream(layout_json) << nlohmann::json(skier_example().layout).dump();
  const fs::path svg = dir_ / "out.svg";
  ASSERT_EQ(run({"render", "--layout", layout_json.string(), "--out", svg.string()}), kExitOk) << err_.str();
  ASSERT_TRUE(fs::exists(svg));

  const fs::path layout_txt = dir_ / "layout.txt";
  std::ofstream(layout_txt) << completion_for(skier_example().layout);
  ASSERT_EQ(run({"generate", "--layout", layout_txt.string(), "--steps", "5", "--seed", "2"}), kExitOk)
      << err_.str();
  EXPECT_EQ(nlohmann::json::parse(out_.str()).at("status"), "image_done");

  EXPECT_EQ(run({"generate", "--layout", (dir_ / "missing.json").string()}), kExitUsage);
}

TEST_F(CliTest, FailedStageExitsOne) {
  const fs::path bad = dir_ / "bad.json";
  std::ofstream(bad) << R"({"objects":[{"description":"a cat","box":[600,600,10,10]}],"background_prompt":"x"})";
  EXPECT_EQ(run({"generate", "--layout", bad.string()}), kExitStageFailure);
}
