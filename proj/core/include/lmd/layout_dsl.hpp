#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lmd/layout.hpp"

namespace lmd {

/// Verbatim LLM completion, starting at (or just before) the "Objects:" list.
struct RawCompletion {
  std::string text;
};

enum class DiagnosticKind {
  MalformedList,
  MalformedTuple,
  MalformedBox,
  MissingBackground,
  TrailingGarbage,
};

[[nodiscard]] std::string_view to_string(DiagnosticKind kind);

struct ParseDiagnostic {
  DiagnosticKind kind = DiagnosticKind::MalformedList;
  std::size_t begin = 0;  // character offsets into the raw text, [begin, end)
  std::size_t end = 0;
  std::string message;
};

/// Either a layout (possibly with non-fatal TrailingGarbage warnings) or the
/// first fatal diagnostic.
class ParseResult {
 public:
  static ParseResult success(Layout layout, std::vector<ParseDiagnostic> warnings = {});
  static ParseResult failure(ParseDiagnostic diagnostic);

  [[nodiscard]] bool ok() const { return std::holds_alternative<Layout>(value_); }
  explicit operator bool() const { return ok(); }

  [[nodiscard]] const Layout& layout() const;
  [[nodiscard]] const ParseDiagnostic& error() const;
  [[nodiscard]] const std::vector<ParseDiagnostic>& warnings() const { return warnings_; }

 private:
  std::variant<Layout, ParseDiagnostic> value_;
  std::vector<ParseDiagnostic> warnings_;
};

/// Parses the textual layout format:
///
///   [('a panda eating bambooo', [30, 133, 212, 226]), ...]
///   Background prompt: A watercolor painting of a forest
///
/// An optional "Objects:" prefix is accepted. Descriptions may be single- or
/// double-quoted and contain commas; backslash escapes the quote character.
/// Never throws.
[[nodiscard]] ParseResult parse_layout(const RawCompletion& raw, Canvas canvas = {});

/// Canonical two-line form: "Objects: [...]\nBackground prompt: ...".
[[nodiscard]] std::string serialize_layout(const Layout& layout);

/// Just the bracketed list, as the LLM would emit it after "Objects: ".
[[nodiscard]] std::string serialize_objects(const std::vector<ObjectSpec>& objects);

/// Cuts the first object list and its "Background prompt:" line out of a
/// chatty response. Returns MalformedList when no list is present.
[[nodiscard]] std::variant<RawCompletion, ParseDiagnostic> extract_layout_block(
    std::string_view full_response);

}  // namespace lmd
