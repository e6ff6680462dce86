#include "lmd/run_store.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace lmd {

namespace fs = std::filesystem;

namespace {

int rank(RunStatus s) {
  switch (s) {
    case RunStatus::Pending: return 0;
    case RunStatus::LayoutDone: return 1;
    case RunStatus::ImageDone: return 2;
    case RunStatus::Failed: return 3;
  }
  return 0;
}

}  // namespace

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Pending: return "pending";
    case RunStatus::LayoutDone: return "layout_done";
    case RunStatus::ImageDone: return "image_done";
    case RunStatus::Failed: return "failed";
  }
  return "pending";
}

RunStatus run_status_from_string(std::string_view name) {
  for (const auto s : {RunStatus::Pending, RunStatus::LayoutDone, RunStatus::ImageDone, RunStatus::Failed}) {
    if (to_string(s) == name) {
      return s;
    }
  }
  throw std::invalid_argument("unknown run status: " + std::string(name));
}

RunRecord RunRecord::create(std::string caption, nlohmann::json config) {
  RunRecord r;
  r.id = make_unique_id();
  r.caption = std::move(caption);
  r.config = std::move(config);
  r.created_at = now_ms();
  r.updated_at = r.created_at;
  return r;
}

void RunRecord::advance(RunStatus next) {
  if (next == RunStatus::Failed) {
    throw std::logic_error("use RunRecord::fail to mark a run failed");
  }
  if (status == RunStatus::Failed || rank(next) < rank(status)) {
    throw std::logic_error("run status cannot move from " + std::string(to_string(status)) + " to " +
                           std::string(to_string(next)));
  }
  status = next;
  updated_at = now_ms();
}

void RunRecord::fail(RunError err) {
  if (status == RunStatus::ImageDone) {
    throw std::logic_error("a finished run cannot fail");
  }
  status = RunStatus::Failed;
  error = std::move(err);
  updated_at = now_ms();
}

void to_json(nlohmann::json& j, const RunRecord& r) {
  j = nlohmann::json{{"id", r.id},
                     {"caption", r.caption},
                     {"layout", nullptr},
                     {"config", r.config},
                     {"status", to_string(r.status)},
                     {"error", nullptr},
                     {"created_at", format_timestamp(r.created_at)},
                     {"updated_at", format_timestamp(r.updated_at)},
                     {"timings_ms", r.timings_ms},
                     {"artifacts", r.artifacts},
                     {"warnings", r.warnings}};
  if (r.layout) {
    j["layout"] = *r.layout;
  }
  if (r.error) {
    j["error"] = {{"stage", r.error->stage}, {"code", r.error->code}, {"message", r.error->message}};
  }
}

void from_json(const nlohmann::json& j, RunRecord& r) {
  r.id = j.at("id").get<std::string>();
  r.caption = j.at("caption").get<std::string>();
  r.layout.reset();
  if (!j.at("layout").is_null()) {
    r.layout = j.at("layout").get<Layout>();
  }
  r.config = j.at("config");
  r.status = run_status_from_string(j.at("status").get<std::string>());
  r.error.reset();
  if (!j.at("error").is_null()) {
    const auto& e = j.at("error");
    r.error = RunError{e.at("stage").get<std::string>(), e.at("code").get<std::string>(),
                       e.at("message").get<std::string>()};
  }
  r.created_at = parse_timestamp(j.at("created_at").get<std::string>());
  r.updated_at = parse_timestamp(j.at("updated_at").get<std::string>());
  r.timings_ms = j.at("timings_ms").get<std::map<std::string, double>>();
  r.artifacts = j.at("artifacts").get<std::vector<std::string>>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  if (r.status == RunStatus::Failed && !r.error) {
    throw std::invalid_argument("failed run without an error");
  }
}

bool is_valid_artifact_name(std::string_view name) {
  if (name.empty()) {
    return false;
  }
  const fs::path p{std::string(name)};
  if (p.is_absolute()) {
    return false;
  }
  for (const auto& part : p) {
    if (part == ".." || part == ".") {
      return false;
    }
  }
  return true;
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp-" + make_unique_id();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cannot rename into " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool is_valid_run_id(std::string_view id) {
  return !id.empty() && id.size() <= 128 && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-';
  });
}

RunStore::RunStore(fs::path data_dir) : data_dir_(std::move(data_dir)) {
  const fs::path runs = data_dir_ / "runs";
  std::error_code ec;
  fs::create_directories(runs, ec);
  if (ec) {
    throw std::runtime_error("cannot create " + runs.string() + ": " + ec.message());
  }
  write_file_atomic(runs / ".write-check", "ok");
  fs::remove(runs / ".write-check", ec);
}

fs::path RunStore::run_dir(const std::string& id) const {
  if (!is_valid_run_id(id)) {
    throw std::invalid_argument("invalid run id: " + id);
  }
  return data_dir_ / "runs" / id;
}

void RunStore::store(const RunRecord& record) const {
  const fs::path dir = run_dir(record.id);
  fs::create_directories(dir);
  write_file_atomic(dir / "run.json", nlohmann::json(record).dump(2) + "\n");
}

bool RunStore::exists(const std::string& id) const {
  return is_valid_run_id(id) && fs::exists(run_dir(id) / "run.json");
}

RunRecord RunStore::load(const std::string& id) const {
  if (!exists(id)) {
    throw RunNotFound(id);
  }
  const fs::path path = run_dir(id) / "run.json";
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error&) {
    throw RunNotFound(id);
  }
  try {
    return nlohmann::json::parse(text).get<RunRecord>();
  } catch (const std::exception& e) {
    throw CorruptRunFile(path, e.what());
  }
}

void RunStore::write_artifact(const std::string& id, const std::string& name,
                              std::string_view bytes) const {
  if (!is_valid_artifact_name(name)) {
    throw std::invalid_argument("invalid artifact name: " + name);
  }
  const fs::path path = run_dir(id) / name;
  fs::create_directories(path.parent_path());
  write_file_atomic(path, bytes);
}

std::string RunStore::read_artifact(const std::string& id, const std::string& name) const {
  if (!is_valid_run_id(id) || !is_valid_artifact_name(name)) {
    throw RunNotFound(id + "/" + name);
  }
  const fs::path path = run_dir(id) / name;
  if (!fs::is_regular_file(path)) {
    throw RunNotFound(id + "/" + name);
  }
  return read_file(path);
}

}  // namespace lmd
