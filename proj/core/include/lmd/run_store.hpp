#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lmd/dialog.hpp"
#include "lmd/layout.hpp"

namespace lmd {

enum class RunStatus { Pending, LayoutDone, ImageDone, Failed };

[[nodiscard]] std::string_view to_string(RunStatus status);
[[nodiscard]] RunStatus run_status_from_string(std::string_view name);

struct RunError {
  /// "layout" or "image".
  std::string stage;
  std::string code;
  std::string message;
  friend bool operator==(const RunError&, const RunError&) = default;
};

struct RunRecord {
  std::string id;
  std::string caption;
  std::optional<Layout> layout;
  nlohmann::json config = nlohmann::json::object();
  RunStatus status = RunStatus::Pending;
  std::optional<RunError> error;
  Timestamp created_at{};
  Timestamp updated_at{};
  std::map<std::string, double> timings_ms;
  /// File names inside the run directory.
  std::vector<std::string> artifacts;
  std::vector<std::string> warnings;

  /// New pending record with a fresh id and timestamps.
  [[nodiscard]] static RunRecord create(std::string caption, nlohmann::json config);

  /// Moves the status forward (Pending -> LayoutDone -> ImageDone). Throws
  /// std::logic_error on a backward move.
  void advance(RunStatus next);
  /// Marks the run failed with `error`. Throws std::logic_error after ImageDone.
  void fail(RunError error);

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

void to_json(nlohmann::json& j, const RunRecord& record);
void from_json(const nlohmann::json& j, RunRecord& record);

class RunNotFound : public std::runtime_error {
 public:
  explicit RunNotFound(const std::string& id) : std::runtime_error("run not found: " + id) {}
};

class CorruptRunFile : public std::runtime_error {
 public:
  CorruptRunFile(const std::filesystem::path& path, const std::string& detail)
      : std::runtime_error("corrupt run file " + path.string() + ": " + detail), path_(path) {}
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

[[nodiscard]] std::string read_file(const std::filesystem::path& path);

/// Run ids are non-empty and use only [A-Za-z0-9_-].
[[nodiscard]] bool is_valid_run_id(std::string_view id);
/// Artifact names are relative paths without "." or ".." components.
[[nodiscard]] bool is_valid_artifact_name(std::string_view name);

/// One directory per run under <data_dir>/runs/<id>/, holding run.json and
/// the run's artifacts.
class RunStore {
 public:
  /// Creates the runs directory and checks that it is writable.
  explicit RunStore(std::filesystem::path data_dir);

  [[nodiscard]] std::filesystem::path run_dir(const std::string& id) const;
  /// Atomically replaces run.json.
  void store(const RunRecord& record) const;
  /// Throws RunNotFound or CorruptRunFile.
  [[nodiscard]] RunRecord load(const std::string& id) const;
  [[nodiscard]] bool exists(const std::string& id) const;
  /// Writes an artifact into the run directory atomically.
  void write_artifact(const std::string& id, const std::string& name, std::string_view bytes) const;
  /// Throws RunNotFound when the run or the artifact is missing.
  [[nodiscard]] std::string read_artifact(const std::string& id, const std::string& name) const;

  [[nodiscard]] const std::filesystem::path& data_dir() const { return data_dir_; }

 private:
  std::filesystem::path data_dir_;
};

}  // namespace lmd
