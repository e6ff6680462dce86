#include <filesystem>
#include <thread>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "lmd/run_store.hpp"

using namespace lmd;
namespace fs = std::filesystem;

namespace {

class RunStoreTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("lmd-run-store-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

}  // namespace

TEST(RunRecord, StatusTransitions) {
  RunRecord r = RunRecord::create("a cat", nlohmann::json::object());
  EXPECT_EQ(r.status, RunStatus::Pending);
  r.advance(RunStatus::LayoutDone);
  r.advance(RunStatus::ImageDone);
  EXPECT_THROW(r.advance(RunStatus::LayoutDone), std::logic_error);
  EXPECT_THROW(r.fail(RunError{"image", "x", "y"}), std::logic_error);

  RunRecord f = RunRecord::create("a cat", nlohmann::json::object());
  f.fail(RunError{"layout", "llm_error", "down"});
  EXPECT_EQ(f.status, RunStatus::Failed);
  EXPECT_EQ(to_string(f.status), "failed");
  EXPECT_EQ(run_status_from_string("layout_done"), RunStatus::LayoutDone);
}

TEST(RunRecord, JsonRoundTrip) {
  RunRecord r = RunRecord::create("two pandas", nlohmann::json{{"seed", 7}});
  r.layout = Layout::make({ObjectSpec::make("a panda", {1, 2, 3, 4})}, "a forest");
  r.timings_ms["layout"] = 12.5;
  r.artifacts = {"layout.json"};
  r.warnings = {"w"};
  r.advance(RunStatus::LayoutDone);
  const nlohmann::json j = r;
  EXPECT_EQ(j.at("status"), "layout_done");
  EXPECT_EQ(j.get<RunRecord>(), r);
}

TEST(RunId, Validation) {
  EXPECT_TRUE(is_valid_run_id("abc-DEF_123"));
  EXPECT_FALSE(is_valid_run_id(""));
  EXPECT_FALSE(is_valid_run_id("../etc"));
  EXPECT_FALSE(is_valid_run_id("a/b"));
  EXPECT_FALSE(is_valid_run_id(std::string(200, 'a')));
}

TEST_F(RunStoreTest, StoreThenLoad) {
  const RunStore store(dir_);
  RunRecord r = RunRecord::create("a cat", nlohmann::json{{"r", 0.3}});
  store.store(r);
  EXPECT_TRUE(store.exists(r.id));
  EXPECT_EQ(store.load(r.id), r);
  EXPECT_TRUE(fs::exists(store.run_dir(r.id) / "run.json"));
}

TEST_F(RunStoreTest, MissingRun) {
  const RunStore store(dir_);
  EXPECT_THROW((void)store.load("nope"), RunNotFound);
  EXPECT_THROW((void)store.load("../../x"), RunNotFound);
  EXPECT_FALSE(store.exists("nope"));
}

TEST_F(RunStoreTest, CorruptFile) {
  const RunStore store(dir_);
  fs::create_directories(store.run_dir("bad"));
  write_file_atomic(store.run_dir("bad") / "run.json", "{not json");
  EXPECT_THROW((void)store.load("bad"), CorruptRunFile);
}

TEST_F(RunStoreTest, Artifacts) {
  const RunStore store(dir_);
  const RunRecord r = RunRecord::create("a cat", nlohmann::json::object());
  store.store(r);
  store.write_artifact(r.id, "assets/0/mask.pbm", "P1\n1 1\n1\n");
  EXPECT_EQ(store.read_artifact(r.id, "assets/0/mask.pbm"), "P1\n1 1\n1\n");
  EXPECT_THROW((void)store.read_artifact(r.id, "missing.png"), RunNotFound);
  EXPECT_ANY_THROW(store.write_artifact(r.id, "../escape.txt", "x"));
}

TEST_F(RunStoreTest, ConcurrentStoresOfDistinctRuns) {
  const RunStore store(dir_);
  std::vector<RunRecord> records;
  for (int i = 0; i < 16; ++i) records.push_back(RunRecord::create("run " + std::to_string(i), nlohmann::json::object()));
  {
    std::vector<std::jthread> threads;
    for (const auto& r : records) {
      threads.emplace_back([&store, &r] {
        RunRecord copy = r;
        for (int k = 0; k < 20; ++k) {
          copy.timings_ms["k"] = k;
          store.store(copy);
        }
      });
    }
  }
  for (const auto& r : records) {
    const RunRecord back = store.load(r.id);
    EXPECT_EQ(back.caption, r.caption);
    EXPECT_EQ(back.timings_ms.at("k"), 19.0);
  }
}

TEST_F(RunStoreTest, ConcurrentStoresOfOneRunStayReadable) {
  const RunStore store(dir_);
  const RunRecord base = RunRecord::create("shared", nlohmann::json::object());
  store.store(base);
  std::atomic<bool> done{false};
  std::jthread reader([&] {
    while (!done) EXPECT_NO_THROW((void)store.load(base.id));
  });
  {
    std::vector<std::jthread> writers;
    for (int w = 0; w < 4; ++w) {
      writers.emplace_back([&, w] {
        RunRecord r = base;
        for (int k = 0; k < 50; ++k) {
          r.warnings = {std::to_string(w * 100 + k)};
          store.store(r);
        }
      });
    }
  }
  done = true;
}
