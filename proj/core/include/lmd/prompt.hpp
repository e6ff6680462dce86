#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lmd/layout.hpp"

namespace lmd {

struct InContextExample {
  std::string caption;
  Layout layout;

  friend bool operator==(const InContextExample&, const InContextExample&) = default;
};

/// The in-context prompt: instructions, worked examples, then a completion cue.
///
/// The three instruction parts are joined with single spaces into one
/// paragraph. `additional_examples` is a raw slot printed after the examples;
/// the stock template carries the literal "[Additional Examples]" marker there.
class PromptTemplate {
 public:
  PromptTemplate(std::string task_specification, std::string supporting_details,
                 std::string guessing_attitude, std::vector<InContextExample> examples,
                 std::string additional_examples = {});

  [[nodiscard]] const std::string& task_specification() const { return task_specification_; }
  [[nodiscard]] const std::string& supporting_details() const { return supporting_details_; }
  [[nodiscard]] const std::string& guessing_attitude() const { return guessing_attitude_; }
  [[nodiscard]] const std::vector<InContextExample>& examples() const { return examples_; }
  [[nodiscard]] const std::string& additional_examples() const { return additional_examples_; }

  [[nodiscard]] PromptTemplate with_examples(std::vector<InContextExample> examples) const;
  [[nodiscard]] PromptTemplate with_additional_examples(std::string additional) const;

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;

 private:
  std::string task_specification_;
  std::string supporting_details_;
  std::string guessing_attitude_;
  std::vector<InContextExample> examples_;
  std::string additional_examples_;
};

/// The stock layout-generation template with the four-skiers example.
[[nodiscard]] PromptTemplate default_template();

[[nodiscard]] InContextExample skier_example();
[[nodiscard]] InContextExample panda_example();

/// Renders one "Caption: ...\nObjects: ...\nBackground prompt: ..." block.
[[nodiscard]] std::string render_example(const InContextExample& example);

/// Full prompt text ending with "Caption: {caption}\nObjects: ".
[[nodiscard]] std::string build_prompt(const PromptTemplate& tmpl, std::string_view caption);

/// Replaces the caption of the last example, leaving its layout intact. Used
/// to teach the model to answer non-English captions with English layouts.
[[nodiscard]] PromptTemplate make_multilingual_template(const PromptTemplate& tmpl,
                                                        std::string translated_last_caption);

/// Translation of the stock example caption for a language code ("zh", "fr",
/// "de", "es", "ja"); nullopt for other codes.
[[nodiscard]] std::optional<std::string> translated_example_caption(std::string_view language);

/// make_multilingual_template() with translated_example_caption(). Throws
/// std::invalid_argument for unsupported languages.
[[nodiscard]] PromptTemplate template_for_language(const PromptTemplate& tmpl,
                                                   std::string_view language);

}  // namespace lmd
