#include "lmd/layout_dsl.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <stdexcept>

namespace lmd {

std::string_view to_string(DiagnosticKind kind) {
  switch (kind) {
    case DiagnosticKind::MalformedList: return "MalformedList";
    case DiagnosticKind::MalformedTuple: return "MalformedTuple";
    case DiagnosticKind::MalformedBox: return "MalformedBox";
    case DiagnosticKind::MissingBackground: return "MissingBackground";
    case DiagnosticKind::TrailingGarbage: return "TrailingGarbage";
  }
  return "Unknown";
}

ParseResult ParseResult::success(Layout layout, std::vector<ParseDiagnostic> warnings) {
  ParseResult r;
  r.value_ = std::move(layout);
  r.warnings_ = std::move(warnings);
  return r;
}

ParseResult ParseResult::failure(ParseDiagnostic diagnostic) {
  ParseResult r;
  r.value_ = std::move(diagnostic);
  return r;
}

const Layout& ParseResult::layout() const {
  if (!ok()) {
    throw std::logic_error("ParseResult holds a diagnostic: " + error().message);
  }
  return std::get<Layout>(value_);
}

const ParseDiagnostic& ParseResult::error() const {
  if (ok()) {
    throw std::logic_error("ParseResult holds a layout, not a diagnostic");
  }
  return std::get<ParseDiagnostic>(value_);
}

namespace {

constexpr std::string_view kObjectsPrefix = "Objects:";
constexpr std::string_view kBackgroundPrefix = "background prompt:";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool starts_with_ci(std::string_view text, std::string_view prefix) {
  if (text.size() < prefix.size()) {
    return false;
  }
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

struct ParseFailure {
  ParseDiagnostic diagnostic;
};

class Cursor {
 public:
  explicit Cursor(std::string_view text) : text_(text) {}

  [[nodiscard]] std::size_t pos() const { return pos_; }
  [[nodiscard]] bool at_end() const { return pos_ >= text_.size(); }
  [[nodiscard]] char peek() const { return at_end() ? '\0' : text_[pos_]; }
  [[nodiscard]] std::string_view rest() const { return text_.substr(std::min(pos_, text_.size())); }

  void advance(std::size_t n = 1) { pos_ = std::min(pos_ + n, text_.size()); }

  void skip_ws() {
    while (!at_end() && is_space(text_[pos_])) {
      ++pos_;
    }
  }

  // Horizontal whitespace only; newlines are significant after the list.
  void skip_inline_ws() {
    while (!at_end() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r')) {
      ++pos_;
    }
  }

  bool consume(char c) {
    skip_ws();
    if (peek() == c) {
      advance();
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(DiagnosticKind kind, std::size_t begin, std::string message) const {
    const std::size_t b = std::min(begin, text_.size());
    const std::size_t e = std::min(std::max(pos_ + 1, b), text_.size());
    throw ParseFailure{ParseDiagnostic{kind, b, e, std::move(message)}};
  }

  void expect(char c, DiagnosticKind kind, std::size_t begin, std::string_view what) {
    if (!consume(c)) {
      fail(kind, begin, "expected '" + std::string(1, c) + "' " + std::string(what));
    }
  }

  std::string quoted_string(std::size_t tuple_begin) {
    skip_ws();
    const char quote = peek();
    if (quote != '\'' && quote != '"') {
      fail(DiagnosticKind::MalformedTuple, tuple_begin, "expected a quoted description");
    }
    advance();
    std::string out;
    while (!at_end()) {
      const char c = text_[pos_];
      if (c == '\\' && pos_ + 1 < text_.size()) {
        out.push_back(text_[pos_ + 1]);
        advance(2);
        continue;
      }
      if (c == quote) {
        advance();
        return out;
      }
      out.push_back(c);
      advance();
    }
    fail(DiagnosticKind::MalformedTuple, tuple_begin, "unterminated description string");
  }

  int integer(std::size_t box_begin) {
    skip_ws();
    const std::size_t start = pos_;
    if (peek() == '+' || peek() == '-') {
      advance();
    }
    while (!at_end() && std::isdigit(static_cast<unsigned char>(peek())) != 0) {
      advance();
    }
    std::string_view token = text_.substr(start, pos_ - start);
    if (!at_end() && (peek() == '.' || peek() == 'e' || peek() == 'E')) {
      fail(DiagnosticKind::MalformedBox, box_begin, "box coordinates must be integers");
    }
    if (!token.empty() && token.front() == '+') {
      token.remove_prefix(1);
    }
    int value = 0;
    const auto* first = token.data();
    const auto* last = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (token.empty() || ec != std::errc{} || ptr != last) {
      fail(DiagnosticKind::MalformedBox, box_begin, "expected an integer coordinate");
    }
    return value;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

BoundingBox parse_box(Cursor& cur) {
  cur.skip_ws();
  const std::size_t begin = cur.pos();
  cur.expect('[', DiagnosticKind::MalformedBox, begin, "to open the box");
  std::array<int, 4> v{};
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0 && !cur.consume(',')) {
      cur.fail(DiagnosticKind::MalformedBox, begin,
               "box needs 4 coordinates, found " + std::to_string(i));
    }
    cur.skip_ws();
    if (cur.peek() == ']') {
      cur.fail(DiagnosticKind::MalformedBox, begin,
               "box needs 4 coordinates, found " + std::to_string(i));
    }
    v[i] = cur.integer(begin);
  }
  if (!cur.consume(']')) {
    cur.fail(DiagnosticKind::MalformedBox, begin, "box has more than 4 coordinates");
  }
  if (v[2] <= 0 || v[3] <= 0) {
    cur.fail(DiagnosticKind::MalformedBox, begin, "box width and height must be positive");
  }
  return BoundingBox{v[0], v[1], v[2], v[3]};
}

ObjectSpec parse_tuple(Cursor& cur) {
  cur.skip_ws();
  const std::size_t begin = cur.pos();
  cur.expect('(', DiagnosticKind::MalformedTuple, begin, "to open an object tuple");
  std::string description = cur.quoted_string(begin);
  if (trim(description).empty()) {
    cur.fail(DiagnosticKind::MalformedTuple, begin, "object description is blank");
  }
  cur.expect(',', DiagnosticKind::MalformedTuple, begin, "after the description");
  BoundingBox box = parse_box(cur);
  cur.consume(',');  // tolerate ('x', [..],)
  cur.expect(')', DiagnosticKind::MalformedTuple, begin, "to close the object tuple");
  return ObjectSpec{std::move(description), box};
}

std::vector<ObjectSpec> parse_list(Cursor& cur) {
  cur.skip_ws();
  const std::size_t begin = cur.pos();
  if (!cur.consume('[')) {
    cur.fail(DiagnosticKind::MalformedList, begin, "expected '[' to open the object list");
  }
  std::vector<ObjectSpec> objects;
  if (cur.consume(']')) {
    return objects;
  }
  while (true) {
    objects.push_back(parse_tuple(cur));
    if (cur.consume(']')) {
      return objects;
    }
    if (!cur.consume(',')) {
      if (cur.at_end()) {
        cur.fail(DiagnosticKind::MalformedList, begin, "object list is not closed");
      }
      cur.fail(DiagnosticKind::MalformedList, cur.pos(), "expected ',' or ']' in object list");
    }
    if (cur.consume(']')) {  // trailing comma
      return objects;
    }
  }
}

// Finds the index of the ']' matching the '[' at `open`, skipping quoted text.
std::optional<std::size_t> matching_bracket(std::string_view text, std::size_t open) {
  int depth = 0;
  char quote = '\0';
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (quote != '\0') {
      if (c == '\\') {
        ++i;
      } else if (c == quote) {
        quote = '\0';
      }
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == '[') {
      ++depth;
    } else if (c == ']') {
      if (--depth == 0) {
        return i;
      }
    }
  }
  return std::nullopt;
}

std::string escape_description(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (const char c : text) {
    if (c == '\\' || c == '\'') {
      out.push_back('\\');
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace

ParseResult parse_layout(const RawCompletion& raw, Canvas canvas) {
  const std::string_view text = raw.text;
  try {
    Cursor cur(text);
    cur.skip_ws();
    if (starts_with_ci(cur.rest(), kObjectsPrefix)) {
      cur.advance(kObjectsPrefix.size());
    }
    std::vector<ObjectSpec> objects = parse_list(cur);

    std::vector<ParseDiagnostic> warnings;
    cur.skip_inline_ws();
    if (!cur.at_end() && cur.peek() != '\n') {
      const std::size_t begin = cur.pos();
      const auto nl = text.find('\n', begin);
      const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
      warnings.push_back({DiagnosticKind::TrailingGarbage, begin, end,
                          "unexpected text after the object list"});
    }

    std::optional<std::string> background;
    std::size_t line_start = text.find('\n', cur.pos());
    while (line_start != std::string_view::npos) {
      ++line_start;
      const auto nl = text.find('\n', line_start);
      const std::size_t line_end = nl == std::string_view::npos ? text.size() : nl;
      const std::string_view line = text.substr(line_start, line_end - line_start);
      const std::size_t indent = line.find_first_not_of(" \t\r");
      if (indent != std::string_view::npos) {
        const std::string_view body = line.substr(indent);
        if (!background && starts_with_ci(body, kBackgroundPrefix)) {
          background = trim(body.substr(kBackgroundPrefix.size()));
        } else {
          warnings.push_back({DiagnosticKind::TrailingGarbage, line_start + indent, line_end,
                              "unrecognized line ignored"});
        }
      }
      line_start = nl;
    }

    if (!background || background->empty()) {
      return ParseResult::failure({DiagnosticKind::MissingBackground, text.size(), text.size(),
                                   "no non-empty 'Background prompt:' line found"});
    }
    return ParseResult::success(Layout{std::move(objects), std::move(*background), canvas},
                                std::move(warnings));
  } catch (const ParseFailure& failure) {
    return ParseResult::failure(failure.diagnostic);
  }
}

std::string serialize_objects(const std::vector<ObjectSpec>& objects) {
  std::string out = "[";
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& o = objects[i];
    if (i > 0) {
      out += ", ";
    }
    out += "('" + escape_description(o.description) + "', [" + std::to_string(o.box.x) + ", " +
           std::to_string(o.box.y) + ", " + std::to_string(o.box.w) + ", " +
           std::to_string(o.box.h) + "])";
  }
  out += "]";
  return out;
}

std::string serialize_layout(const Layout& layout) {
  return "Objects: " + serialize_objects(layout.objects) +
         "\nBackground prompt: " + layout.background_prompt;
}

std::variant<RawCompletion, ParseDiagnostic> extract_layout_block(std::string_view full_response) {
  // The first '[' that opens a list of tuples (or an empty list).
  std::size_t open = full_response.find('[');
  std::optional<std::size_t> close;
  while (open != std::string_view::npos) {
    std::size_t next = open + 1;
    while (next < full_response.size() && is_space(full_response[next])) {
      ++next;
    }
    if (next < full_response.size() && (full_response[next] == '(' || full_response[next] == ']')) {
      close = matching_bracket(full_response, open);
      if (close) {
        break;
      }
    }
    open = full_response.find('[', open + 1);
  }
  if (open == std::string_view::npos || !close) {
    return ParseDiagnostic{DiagnosticKind::MalformedList, 0, full_response.size(),
                           "no bracketed object list found in the response"};
  }

  std::size_t start = open;
  {
    // Keep an "Objects:" label sitting directly in front of the list.
    std::size_t p = open;
    while (p > 0 && (full_response[p - 1] == ' ' || full_response[p - 1] == '\t')) {
      --p;
    }
    if (p >= kObjectsPrefix.size() &&
        starts_with_ci(full_response.substr(p - kObjectsPrefix.size()), kObjectsPrefix)) {
      start = p - kObjectsPrefix.size();
    }
  }

  std::string block(full_response.substr(start, *close + 1 - start));
  std::size_t line_start = full_response.find('\n', *close);
  while (line_start != std::string_view::npos) {
    ++line_start;
    const auto nl = full_response.find('\n', line_start);
    const std::size_t line_end = nl == std::string_view::npos ? full_response.size() : nl;
    std::string_view line = full_response.substr(line_start, line_end - line_start);
    const std::size_t indent = line.find_first_not_of(" \t");
    if (indent != std::string_view::npos && starts_with_ci(line.substr(indent), kBackgroundPrefix)) {
      line = line.substr(indent);
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
        line.remove_suffix(1);
      }
      block += "\n";
      block += line;
      break;
    }
    line_start = nl;
  }
  return RawCompletion{std::move(block)};
}

}  // namespace lmd
