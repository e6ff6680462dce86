#include "lmd/benchmark.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "lmd/dialog.hpp"
#include "lmd/mock_llm.hpp"
#include "lmd/rng.hpp"

namespace lmd {

namespace {

constexpr std::array<std::string_view, 10> kObjects = {
    "backpack", "book", "bottle", "bowl", "car", "cat", "chair", "cup", "dog", "laptop"};

constexpr std::array<std::string_view, 11> kColors = {
    "red", "orange", "yellow", "green", "blue", "purple", "pink", "brown", "black", "white", "gray"};

constexpr std::string_view kScenePrefix = "A realistic photo of a scene";

constexpr std::array<TaskKind, 4> kAllKinds = {TaskKind::Negation, TaskKind::Numeracy,
                                               TaskKind::AttributeAssignment,
                                               TaskKind::SpatialRelationship};

std::string normalize(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (const char c : text) {
    if (std::isspace(static_cast<unsigned char>(c)) != 0) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

bool contains(const std::string& haystack_normalized, std::string_view needle) {
  const std::string n = normalize(needle);
  return !n.empty() && haystack_normalized.find(n) != std::string::npos;
}

std::string with_article(std::string_view phrase) {
  const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(phrase.front())));
  const bool vowel = c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
  return (vowel ? "an " : "a ") + std::string(phrase);
}

std::string_view pick(Rng& rng, std::span<const std::string_view> items) {
  return items[rng.index(items.size())];
}

// Two distinct items.
std::pair<std::string_view, std::string_view> pick_two(Rng& rng,
                                                       std::span<const std::string_view> items) {
  const auto a = rng.index(items.size());
  auto b = rng.index(items.size() - 1);
  if (b >= a) {
    ++b;
  }
  return {items[a], items[b]};
}

// Indices of boxes matching `object`.
std::vector<std::size_t> matching_boxes(const Layout& layout, std::string_view object) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < layout.objects.size(); ++i) {
    if (contains(normalize(layout.objects[i].description), object)) {
      out.push_back(i);
    }
  }
  return out;
}

bool in_half_plane(const Layout& layout, const BoundingBox& box, Location loc) {
  const Point c = box_center(box);
  const double half_w = layout.canvas.width / 2.0;
  const double half_h = layout.canvas.height / 2.0;
  switch (loc) {
    case Location::Left: return c.x < half_w;
    case Location::Right: return c.x > half_w;
    case Location::Top: return c.y < half_h;
    case Location::Bottom: return c.y > half_h;
  }
  return false;
}

std::optional<std::string> spatial_failure(const Layout& layout, const SpatialExpectation& e) {
  const auto m1 = matching_boxes(layout, e.object1);
  const auto m2 = matching_boxes(layout, e.object2);
  if (m1.size() > 1 || m2.size() > 1) {
    return "ambiguous match";
  }
  if (m1.empty() || m2.empty()) {
    return "missing object '" + std::string(m1.empty() ? e.object1 : e.object2) + "'";
  }
  if (!in_half_plane(layout, layout.objects[m1[0]].box, e.location1)) {
    return "'" + e.object1 + "' is not on the " + std::string(to_string(e.location1));
  }
  if (!in_half_plane(layout, layout.objects[m2[0]].box, e.location2)) {
    return "'" + e.object2 + "' is not on the " + std::string(to_string(e.location2));
  }
  return std::nullopt;
}

BoundingBox location_box(Location loc) {
  switch (loc) {
    case Location::Left: return {32, 176, 192, 160};
    case Location::Right: return {288, 176, 192, 160};
    case Location::Top: return {176, 32, 160, 192};
    case Location::Bottom: return {176, 288, 160, 192};
  }
  return {};
}

std::string singular_of(std::string_view word) {
  for (const auto obj : kObjects) {
    if (word == obj || word == pluralize(obj)) {
      return std::string(obj);
    }
  }
  return std::string(word);
}

Location location_from_string(std::string_view s) {
  if (s == "left") return Location::Left;
  if (s == "right") return Location::Right;
  if (s == "top") return Location::Top;
  if (s == "bottom") return Location::Bottom;
  throw std::invalid_argument("unknown location: " + std::string(s));
}

std::string format_percent(double accuracy) {
  const double pct = std::round(accuracy * 1000.0) / 10.0;
  std::ostringstream os;
  if (pct == std::floor(pct)) {
    os << static_cast<long long>(pct) << "%";
  } else {
    os.setf(std::ios::fixed);
    os.precision(1);
    os << pct << "%";
  }
  return os.str();
}

}  // namespace

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::Negation: return "negation";
    case TaskKind::Numeracy: return "numeracy";
    case TaskKind::AttributeAssignment: return "attribute";
    case TaskKind::SpatialRelationship: return "spatial";
  }
  return "negation";
}

TaskKind task_kind_from_string(std::string_view name) {
  const std::string n = normalize(name);
  for (const auto kind : kAllKinds) {
    if (n == to_string(kind) || n == normalize(table_label(kind))) {
      return kind;
    }
  }
  if (n == "attribute_assignment" || n == "attributes") return TaskKind::AttributeAssignment;
  if (n == "spatial_relationship" || n == "spatial_relationships") return TaskKind::SpatialRelationship;
  if (n == "generative_numeracy") return TaskKind::Numeracy;
  throw std::invalid_argument("unknown benchmark kind: " + std::string(name));
}

std::string_view table_label(TaskKind kind) {
  switch (kind) {
    case TaskKind::Negation: return "Negation";
    case TaskKind::Numeracy: return "Generative Numeracy";
    case TaskKind::AttributeAssignment: return "Attribute Assignment";
    case TaskKind::SpatialRelationship: return "Spatial Relationships";
  }
  return "";
}

std::string_view to_string(Location loc) {
  switch (loc) {
    case Location::Left: return "left";
    case Location::Right: return "right";
    case Location::Top: return "top";
    case Location::Bottom: return "bottom";
  }
  return "left";
}

Location opposite(Location loc) {
  switch (loc) {
    case Location::Left: return Location::Right;
    case Location::Right: return Location::Left;
    case Location::Top: return Location::Bottom;
    case Location::Bottom: return Location::Top;
  }
  return Location::Left;
}

std::span<const std::string_view> object_vocabulary() { return kObjects; }
std::span<const std::string_view> color_vocabulary() { return kColors; }

std::string pluralize(std::string_view noun) {
  std::string s(noun);
  auto ends_with = [&](std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with("s") || ends_with("x") || ends_with("z") || ends_with("ch") || ends_with("sh")) {
    return s + "es";
  }
  if (s.size() >= 2 && ends_with("y") && std::string_view("aeiou").find(s[s.size() - 2]) == std::string_view::npos) {
    return s.substr(0, s.size() - 1) + "ies";
  }
  return s + "s";
}

std::string task_prompt(const Expectation& expected) {
  const std::string prefix(kScenePrefix);
  return std::visit(
      [&](const auto& e) -> std::string {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, NegationExpectation>) {
          return prefix + " without " + pluralize(e.object);
        } else if constexpr (std::is_same_v<T, NumeracyExpectation>) {
          return prefix + " with " + std::to_string(e.count) + " " +
                 (e.count == 1 ? e.object : pluralize(e.object));
        } else if constexpr (std::is_same_v<T, AttributeExpectation>) {
          return prefix + " with " + with_article(e.first.modifier + " " + e.first.object) + " and " +
                 with_article(e.second.modifier + " " + e.second.object);
        } else {
          return prefix + " with " + with_article(e.object1) + " on the " +
                 std::string(to_string(e.location1)) + " and " + with_article(e.object2) +
                 " on the " + std::string(to_string(e.location2));
        }
      },
      expected);
}

std::vector<BenchmarkTask> generate_tasks(TaskKind kind, int n, std::uint64_t seed) {
  if (n < 1) {
    throw std::invalid_argument("generate_tasks needs n >= 1");
  }
  Rng rng(seed);
  std::vector<BenchmarkTask> tasks;
  tasks.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Expectation e;
    switch (kind) {
      case TaskKind::Negation:
        e = NegationExpectation{std::string(pick(rng, kObjects))};
        break;
      case TaskKind::Numeracy: {
        const auto obj = pick(rng, kObjects);
        const int count = 1 + static_cast<int>(rng.index(5));
        e = NumeracyExpectation{std::string(obj), count};
        break;
      }
      case TaskKind::AttributeAssignment: {
        const auto [o1, o2] = pick_two(rng, kObjects);
        const auto [c1, c2] = pick_two(rng, kColors);
        e = AttributeExpectation{{std::string(c1), std::string(o1)}, {std::string(c2), std::string(o2)}};
        break;
      }
      case TaskKind::SpatialRelationship: {
        const auto [o1, o2] = pick_two(rng, kObjects);
        constexpr std::array<Location, 4> locs = {Location::Left, Location::Right, Location::Top,
                                                  Location::Bottom};
        const Location loc = locs[rng.index(locs.size())];
        e = SpatialExpectation{std::string(o1), loc, std::string(o2), opposite(loc)};
        break;
      }
    }
    tasks.push_back(BenchmarkTask{kind, task_prompt(e), std::move(e)});
  }
  return tasks;
}

int count_matching(const Layout& layout, std::string_view object_name) {
  return static_cast<int>(matching_boxes(layout, object_name).size());
}

bool check_negation(const Layout& layout, std::string_view object_name) {
  return count_matching(layout, object_name) == 0;
}

bool check_numeracy(const Layout& layout, std::string_view object_name, int n) {
  return count_matching(layout, object_name) == n;
}

bool check_attribute(const Layout& layout, const AttributePair& first, const AttributePair& second) {
  auto has_box_with = [&](std::string_view modifier, std::string_view object) {
    return std::any_of(layout.objects.begin(), layout.objects.end(), [&](const ObjectSpec& o) {
      const std::string d = normalize(o.description);
      return contains(d, modifier) && contains(d, object);
    });
  };
  return has_box_with(first.modifier, first.object) && has_box_with(second.modifier, second.object) &&
         !has_box_with(second.modifier, first.object) && !has_box_with(first.modifier, second.object);
}

bool check_spatial(const Layout& layout, std::string_view object1, Location loc1,
                   std::string_view object2, Location loc2) {
  return !spatial_failure(layout, SpatialExpectation{std::string(object1), loc1,
                                                     std::string(object2), loc2});
}

TaskResult evaluate_task(const BenchmarkTask& task, const Layout& layout) {
  TaskResult r;
  r.task = task;
  r.layout = layout;
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, NegationExpectation>) {
          const int c = count_matching(layout, e.object);
          r.passed = c == 0;
          if (!r.passed) {
            r.failure_reason = "found " + std::to_string(c) + " '" + e.object + "' boxes, expected none";
          }
        } else if constexpr (std::is_same_v<T, NumeracyExpectation>) {
          const int c = count_matching(layout, e.object);
          r.passed = c == e.count;
          if (!r.passed) {
            r.failure_reason = "expected " + std::to_string(e.count) + " '" + e.object +
                               "' boxes, found " + std::to_string(c);
          }
        } else if constexpr (std::is_same_v<T, AttributeExpectation>) {
          r.passed = check_attribute(layout, e.first, e.second);
          if (!r.passed) {
            r.failure_reason = "attributes not assigned as '" + e.first.modifier + " " +
                               e.first.object + "' and '" + e.second.modifier + " " +
                               e.second.object + "'";
          }
        } else {
          r.failure_reason = spatial_failure(layout, e);
          r.passed = !r.failure_reason;
        }
      },
      task.expected);
  return r;
}

std::string BenchmarkReport::to_table() const {
  constexpr int kLabelWidth = 24;
  std::ostringstream os;
  const std::string header = "Benchmarks";
  os << header << std::string(kLabelWidth - header.size(), ' ') << "Accuracy (%)\n";
  for (const auto kind : kAllKinds) {
    const auto it = accuracy_by_kind.find(kind);
    if (it == accuracy_by_kind.end()) {
      continue;
    }
    const std::string label(table_label(kind));
    os << label << std::string(kLabelWidth - label.size(), ' ') << format_percent(it->second) << "\n";
  }
  return os.str();
}

void to_json(nlohmann::json& j, const BenchmarkReport& report) {
  nlohmann::json acc = nlohmann::json::object();
  for (const auto& [kind, value] : report.accuracy_by_kind) {
    acc[std::string(to_string(kind))] = value;
  }
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& r : report.per_task) {
    nlohmann::json t{{"index", r.index},
                     {"kind", to_string(r.task.kind)},
                     {"prompt", r.task.prompt},
                     {"passed", r.passed},
                     {"layout", nullptr},
                     {"failure_reason", nullptr}};
    if (r.layout) t["layout"] = *r.layout;
    if (r.failure_reason) t["failure_reason"] = *r.failure_reason;
    tasks.push_back(std::move(t));
  }
  j = nlohmann::json{{"n_per_kind", report.n_per_kind},
                     {"accuracy_by_kind", acc},
                     {"per_task", tasks},
                     {"table", report.to_table()}};
}

std::vector<BenchmarkTask> generate_benchmark_tasks(const BenchmarkOptions& options) {
  std::vector<BenchmarkTask> all;
  if (options.n <= 0) {
    return all;
  }
  for (const auto kind : options.kinds) {
    auto tasks = generate_tasks(kind, options.n,
                                mix_seed(options.seed, static_cast<std::uint64_t>(kind)));
    all.insert(all.end(), std::make_move_iterator(tasks.begin()),
               std::make_move_iterator(tasks.end()));
  }
  return all;
}

BenchmarkReport run_benchmark(ChatBackend& backend, const LlmConfig& config,
                              const PromptTemplate& tmpl, const BenchmarkOptions& options) {
  config.validate();
  if (options.n < 0) {
    throw std::invalid_argument("benchmark n must be >= 0");
  }
  if (options.parallelism < 1) {
    throw std::invalid_argument("benchmark parallelism must be >= 1");
  }
  BenchmarkReport report;
  report.n_per_kind = options.n;
  const auto tasks = generate_benchmark_tasks(options);
  report.per_task.resize(tasks.size());

  auto run_one = [&](std::size_t i) {
    const auto& task = tasks[i];
    TaskResult result;
    try {
      const RawCompletion raw = request_layout(backend, config, build_prompt(tmpl, task.prompt));
      const ParseResult parsed = parse_completion(raw.text, Canvas{});
      if (parsed.ok()) {
        result = evaluate_task(task, parsed.layout());
      } else {
        result.task = task;
        result.failure_reason = "parse error (" + std::string(to_string(parsed.error().kind)) +
                                "): " + parsed.error().message;
      }
    } catch (const LlmError& e) {
      result.task = task;
      result.failure_reason = std::string("request failed: ") + e.what();
    }
    result.index = i;
    report.per_task[i] = std::move(result);
  };

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(options.parallelism), tasks.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) run_one(i);
      });
    }
  }

  std::map<TaskKind, std::pair<int, int>> tally;  // passes, total
  for (const auto& r : report.per_task) {
    auto& [passes, total] = tally[r.task.kind];
    passes += r.passed ? 1 : 0;
    ++total;
  }
  for (const auto& [kind, pt] : tally) {
    report.accuracy_by_kind[kind] = static_cast<double>(pt.first) / pt.second;
  }
  return report;
}

Layout oracle_layout(const BenchmarkTask& task) {
  const std::string background(kScenePrefix);
  return std::visit(
      [&](const auto& e) -> Layout {
        using T = std::decay_t<decltype(e)>;
        std::vector<ObjectSpec> objects;
        if constexpr (std::is_same_v<T, NumeracyExpectation>) {
          const int slot = 512 / e.count;
          for (int i = 0; i < e.count; ++i) {
            objects.push_back(ObjectSpec::make(with_article(e.object), {i * slot + 8, 176, slot - 16, 160}));
          }
        } else if constexpr (std::is_same_v<T, AttributeExpectation>) {
          objects.push_back(ObjectSpec::make(with_article(e.first.modifier + " " + e.first.object),
                                             location_box(Location::Left)));
          objects.push_back(ObjectSpec::make(with_article(e.second.modifier + " " + e.second.object),
                                             location_box(Location::Right)));
        } else if constexpr (std::is_same_v<T, SpatialExpectation>) {
          objects.push_back(ObjectSpec::make(with_article(e.object1), location_box(e.location1)));
          objects.push_back(ObjectSpec::make(with_article(e.object2), location_box(e.location2)));
        }
        return Layout::make(std::move(objects), background);
      },
      task.expected);
}

std::optional<Expectation> parse_task_prompt(std::string_view prompt) {
  static const std::regex negation(R"(^A realistic photo of a scene without (\w+)$)");
  static const std::regex numeracy(R"(^A realistic photo of a scene with ([1-9]) (\w+)$)");
  static const std::regex spatial(
      R"(^A realistic photo of a scene with an? (\w+) on the (left|right|top|bottom) and an? (\w+) on the (left|right|top|bottom)$)");
  static const std::regex attribute(
      R"(^A realistic photo of a scene with an? (\w+) (\w+) and an? (\w+) (\w+)$)");
  const std::string text = trim(prompt);
  std::smatch m;
  if (std::regex_match(text, m, negation)) {
    return NegationExpectation{singular_of(m[1].str())};
  }
  if (std::regex_match(text, m, numeracy)) {
    return NumeracyExpectation{singular_of(m[2].str()), std::stoi(m[1].str())};
  }
  if (std::regex_match(text, m, spatial)) {
    return SpatialExpectation{m[1].str(), location_from_string(m[2].str()), m[3].str(),
                              location_from_string(m[4].str())};
  }
  if (std::regex_match(text, m, attribute)) {
    return AttributeExpectation{{m[1].str(), m[2].str()}, {m[3].str(), m[4].str()}};
  }
  return std::nullopt;
}

std::string BenchmarkOracleLlm::complete(std::span<const ChatMessage> messages,
                                         const LlmConfig& config) {
  const std::string caption = mock_lookup_key(messages);
  if (auto expected = parse_task_prompt(caption)) {
    const TaskKind kind = static_cast<TaskKind>(expected->index());
    return completion_for(oracle_layout(BenchmarkTask{kind, caption, *expected}));
  }
  if (fallback_) {
    return fallback_->complete(messages, config);
  }
  throw ApiError(404, R"({"error":{"message":"not a benchmark caption"}})");
}

namespace {

// Picks caption groups (in first-appearance order) whose sizes sum to exactly
// `target`. Returns the chosen captions.
std::vector<std::string> choose_captions(const std::vector<std::pair<std::string, int>>& groups,
                                         int target) {
  const std::size_t n = groups.size();
  // reachable[i][s]: sum s is reachable using groups [i, n).
  std::vector<std::vector<char>> reachable(n + 1, std::vector<char>(static_cast<std::size_t>(target) + 1, 0));
  reachable[n][0] = 1;
  for (std::size_t i = n; i-- > 0;) {
    for (int s = 0; s <= target; ++s) {
      const int w = groups[i].second;
      reachable[i][s] = reachable[i + 1][s] || (s >= w && reachable[i + 1][s - w]);
    }
  }
  if (!reachable[0][target]) {
    throw std::invalid_argument("task list cannot realize exactly " + std::to_string(target) +
                                " scripted failures");
  }
  std::vector<std::string> chosen;
  int s = target;
  for (std::size_t i = 0; i < n && s > 0; ++i) {
    const int w = groups[i].second;
    if (s >= w && reachable[i + 1][s - w]) {
      chosen.push_back(groups[i].first);
      s -= w;
    }
  }
  return chosen;
}

std::vector<std::pair<std::string, int>> caption_groups(std::span<const BenchmarkTask> tasks,
                                                        const std::function<bool(const BenchmarkTask&)>& eligible) {
  std::vector<std::pair<std::string, int>> groups;
  for (const auto& t : tasks) {
    if (!eligible(t)) continue;
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == t.prompt; });
    if (it == groups.end()) {
      groups.emplace_back(t.prompt, 1);
    } else {
      ++it->second;
    }
  }
  return groups;
}

}  // namespace

std::shared_ptr<ChatBackend> make_scripted_failure_llm(std::span<const BenchmarkTask> tasks,
                                                       int numeracy_failures, int spatial_flips) {
  const auto plural_failures = choose_captions(
      caption_groups(tasks,
                     [](const BenchmarkTask& t) {
                       const auto* e = std::get_if<NumeracyExpectation>(&t.expected);
                       return e != nullptr && e->count >= 2;
                     }),
      numeracy_failures);
  const auto flips = choose_captions(
      caption_groups(tasks, [](const BenchmarkTask& t) { return t.kind == TaskKind::SpatialRelationship; }),
      spatial_flips);

  std::vector<MockLlm::Entry> entries;
  std::vector<std::string> seen;
  for (const auto& t : tasks) {
    if (std::find(seen.begin(), seen.end(), t.prompt) != seen.end()) continue;
    seen.push_back(t.prompt);
    Layout layout = oracle_layout(t);
    if (std::find(plural_failures.begin(), plural_failures.end(), t.prompt) != plural_failures.end()) {
      const auto& e = std::get<NumeracyExpectation>(t.expected);
      layout.objects = {ObjectSpec::make(pluralize(e.object), {96, 128, 320, 256})};
    } else if (std::find(flips.begin(), flips.end(), t.prompt) != flips.end()) {
      const auto& e = std::get<SpatialExpectation>(t.expected);
      layout.objects[0].box = location_box(e.location2);
      layout.objects[1].box = location_box(e.location1);
    }
    entries.push_back(MockLlm::exact(t.prompt, completion_for(layout)));
  }
  return std::make_shared<MockLlm>(std::move(entries));
}

}  // namespace lmd
