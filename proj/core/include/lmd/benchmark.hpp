#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lmd/layout.hpp"
#include "lmd/llm_client.hpp"
#include "lmd/prompt.hpp"

namespace lmd {

enum class TaskKind { Negation, Numeracy, AttributeAssignment, SpatialRelationship };
enum class Location { Left, Right, Top, Bottom };

[[nodiscard]] std::string_view to_string(TaskKind kind);
/// Accepts "negation", "numeracy", "attribute", "spatial" and the to_string forms.
[[nodiscard]] TaskKind task_kind_from_string(std::string_view name);
/// Row label in the accuracy table, e.g. "Generative Numeracy".
[[nodiscard]] std::string_view table_label(TaskKind kind);
[[nodiscard]] std::string_view to_string(Location loc);
[[nodiscard]] Location opposite(Location loc);

[[nodiscard]] std::span<const std::string_view> object_vocabulary();
[[nodiscard]] std::span<const std::string_view> color_vocabulary();

/// English plural for the benchmark vocabulary ("cat" -> "cats", "bus" -> "buses").
[[nodiscard]] std::string pluralize(std::string_view noun);

struct NegationExpectation {
  std::string object;
  friend bool operator==(const NegationExpectation&, const NegationExpectation&) = default;
};
struct NumeracyExpectation {
  std::string object;
  int count = 1;
  friend bool operator==(const NumeracyExpectation&, const NumeracyExpectation&) = default;
};
struct AttributePair {
  std::string modifier;
  std::string object;
  friend bool operator==(const AttributePair&, const AttributePair&) = default;
};
struct AttributeExpectation {
  AttributePair first;
  AttributePair second;
  friend bool operator==(const AttributeExpectation&, const AttributeExpectation&) = default;
};
struct SpatialExpectation {
  std::string object1;
  Location location1 = Location::Left;
  std::string object2;
  Location location2 = Location::Right;
  friend bool operator==(const SpatialExpectation&, const SpatialExpectation&) = default;
};

using Expectation =
    std::variant<NegationExpectation, NumeracyExpectation, AttributeExpectation, SpatialExpectation>;

struct BenchmarkTask {
  TaskKind kind = TaskKind::Negation;
  std::string prompt;
  Expectation expected;
  friend bool operator==(const BenchmarkTask&, const BenchmarkTask&) = default;
};

/// Deterministic in (kind, n, seed); samples with replacement.
[[nodiscard]] std::vector<BenchmarkTask> generate_tasks(TaskKind kind, int n, std::uint64_t seed);

/// Prompt text for an expectation, following the benchmark templates.
[[nodiscard]] std::string task_prompt(const Expectation& expected);

/// Boxes whose description contains `object_name` (case-insensitive, after
/// collapsing whitespace). "a hot dog stand" matches "dog".
[[nodiscard]] int count_matching(const Layout& layout, std::string_view object_name);

[[nodiscard]] bool check_negation(const Layout& layout, std::string_view object_name);
[[nodiscard]] bool check_numeracy(const Layout& layout, std::string_view object_name, int n);
[[nodiscard]] bool check_attribute(const Layout& layout, const AttributePair& first,
                                   const AttributePair& second);
/// Box centers must lie strictly inside the named canvas half-planes; each
/// object must match exactly one box.
[[nodiscard]] bool check_spatial(const Layout& layout, std::string_view object1, Location loc1,
                                 std::string_view object2, Location loc2);

struct TaskResult {
  std::size_t index = 0;
  BenchmarkTask task;
  std::optional<Layout> layout;
  bool passed = false;
  std::optional<std::string> failure_reason;
};

/// Runs the checker for the task's kind and explains failures
/// ("ambiguous match", "expected 3 'cat' boxes, found 1", ...).
[[nodiscard]] TaskResult evaluate_task(const BenchmarkTask& task, const Layout& layout);

struct BenchmarkReport {
  std::vector<TaskResult> per_task;
  std::map<TaskKind, double> accuracy_by_kind;
  int n_per_kind = 0;

  /// Two-column table: "Benchmarks" / "Accuracy (%)".
  [[nodiscard]] std::string to_table() const;
};

void to_json(nlohmann::json& j, const BenchmarkReport& report);

struct BenchmarkOptions {
  std::vector<TaskKind> kinds;
  int n = 100;
  std::uint64_t seed = 0;
  int parallelism = 1;
};

/// The flattened task list run_benchmark() evaluates, kinds in the given
/// order; each kind draws from its own stream derived from `seed`.
[[nodiscard]] std::vector<BenchmarkTask> generate_benchmark_tasks(const BenchmarkOptions& options);

/// Build prompt, request, extract, parse, check, for every task. Per-task
/// transport or parse failures become failed results; invalid configuration
/// throws before any request is sent.
[[nodiscard]] BenchmarkReport run_benchmark(ChatBackend& backend, const LlmConfig& config,
                                            const PromptTemplate& tmpl,
                                            const BenchmarkOptions& options);

/// A layout that satisfies the task exactly.
[[nodiscard]] Layout oracle_layout(const BenchmarkTask& task);

/// Parses a benchmark caption back into an expectation; nullopt for other text.
[[nodiscard]] std::optional<Expectation> parse_task_prompt(std::string_view prompt);

/// Offline backend that answers every benchmark caption with oracle_layout().
/// Non-benchmark captions raise ApiError(404) unless a fallback is given.
class BenchmarkOracleLlm final : public ChatBackend {
 public:
  explicit BenchmarkOracleLlm(std::shared_ptr<ChatBackend> fallback = nullptr)
      : fallback_(std::move(fallback)) {}
  std::string complete(std::span<const ChatMessage> messages, const LlmConfig& config) override;

 private:
  std::shared_ptr<ChatBackend> fallback_;
};

/// Scripted-failure fixture: a mock table keyed by exact caption where exactly
/// `numeracy_failures` numeracy tasks get a single plural box and exactly
/// `spatial_flips` spatial tasks get swapped locations; every other task gets
/// its oracle layout. Throws when the task list cannot realize the counts.
[[nodiscard]] std::shared_ptr<ChatBackend> make_scripted_failure_llm(
    std::span<const BenchmarkTask> tasks, int numeracy_failures, int spatial_flips);

}  // namespace lmd
