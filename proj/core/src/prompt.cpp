#include "lmd/prompt.hpp"

#include <map>
#include <stdexcept>

#include "lmd/layout_dsl.hpp"

namespace lmd {

namespace {

constexpr const char* kTaskSpecification =
    "You are an intelligent bounding box generator. I will provide you with a caption for a "
    "photo, image, or painting. Your task is to generate the bounding boxes for the objects "
    "mentioned in the caption, along with a background prompt describing the scene.";

constexpr const char* kSupportingDetails =
    "The images are of size 512x512, and the bounding boxes should not overlap or go beyond the "
    "image boundaries. Each bounding box should be in the format of (object name, [top-left x "
    "coordinate, top-left y coordinate, box width, box height]) and include exactly one object. "
    "Do not put objects that are already provided in the bounding boxes into the background "
    "prompt.";

constexpr const char* kGuessingAttitude =
    "If needed, you can make reasonable guesses. Please refer to the example below for the "
    "desired format.";

constexpr const char* kAdditionalExamplesMarker = "[Additional Examples]";

}  // namespace

PromptTemplate::PromptTemplate(std::string task_specification, std::string supporting_details,
                               std::string guessing_attitude,
                               std::vector<InContextExample> examples,
                               std::string additional_examples)
    : task_specification_(std::move(task_specification)),
      supporting_details_(std::move(supporting_details)),
      guessing_attitude_(std::move(guessing_attitude)),
      examples_(std::move(examples)),
      additional_examples_(std::move(additional_examples)) {
  if (examples_.empty()) {
    throw std::invalid_argument("a prompt template needs at least one in-context example");
  }
}

PromptTemplate PromptTemplate::with_examples(std::vector<InContextExample> examples) const {
  return PromptTemplate(task_specification_, supporting_details_, guessing_attitude_,
                        std::move(examples), additional_examples_);
}

PromptTemplate PromptTemplate::with_additional_examples(std::string additional) const {
  return PromptTemplate(task_specification_, supporting_details_, guessing_attitude_, examples_,
                        std::move(additional));
}

InContextExample skier_example() {
  return {"A realistic image of four skiers standing in a line on the snow near a palm tree",
          Layout::make({ObjectSpec::make("a skier", {5, 152, 139, 168}),
                        ObjectSpec::make("a skier", {278, 192, 121, 158}),
                        ObjectSpec::make("a skier", {148, 173, 124, 155}),
                        ObjectSpec::make("a palm tree", {404, 180, 103, 180})},
                       "A realistic image of an outdoor scene with snow")};
}

InContextExample panda_example() {
  // "bambooo" is intentionally misspelled; the golden prompt contains it.
  return {"A watercolor painting of two pandas eating bamboo in a forest",
          Layout::make({ObjectSpec::make("a panda eating bambooo", {30, 133, 212, 226}),
                        ObjectSpec::make("a panda eating bambooo", {262, 137, 222, 221})},
                       "A watercolor painting of a forest")};
}

PromptTemplate default_template() {
  return PromptTemplate(kTaskSpecification, kSupportingDetails, kGuessingAttitude,
                        {skier_example()}, kAdditionalExamplesMarker);
}

std::string render_example(const InContextExample& example) {
  return "Caption: " + example.caption + "\n" + serialize_layout(example.layout);
}

std::string build_prompt(const PromptTemplate& tmpl, std::string_view caption) {
  if (trim(caption).empty()) {
    throw std::invalid_argument("caption must not be empty");
  }
  std::string out = tmpl.task_specification() + " " + tmpl.supporting_details() + " " +
                    tmpl.guessing_attitude() + "\n\n";
  for (const auto& example : tmpl.examples()) {
    out += render_example(example);
    out += "\n\n";
  }
  if (!tmpl.additional_examples().empty()) {
    out += tmpl.additional_examples();
    out += "\n\n";
  }
  out += "Caption: ";
  out += caption;
  out += "\nObjects: ";
  return out;
}

PromptTemplate make_multilingual_template(const PromptTemplate& tmpl,
                                          std::string translated_last_caption) {
  auto examples = tmpl.examples();
  examples.back().caption = std::move(translated_last_caption);
  return tmpl.with_examples(std::move(examples));
}

std::optional<std::string> translated_example_caption(std::string_view language) {
  static const std::map<std::string, std::string, std::less<>> kCaptions = {
      {"zh", "一张逼真的图片，四名滑雪者在雪地上站成一排，旁边有一棵棕榈树"},
      {"fr", "Une image réaliste de quatre skieurs alignés sur la neige près d'un palmier"},
      {"de", "Ein realistisches Bild von vier Skifahrern, die in einer Reihe im Schnee neben einer Palme stehen"},
      {"es", "Una imagen realista de cuatro esquiadores de pie en fila sobre la nieve cerca de una palmera"},
      {"ja", "ヤシの木の近くの雪の上に一列に並んで立つ4人のスキーヤーのリアルな画像"},
  };
  const auto it = kCaptions.find(language);
  if (it == kCaptions.end()) {
    return std::nullopt;
  }
  return it->second;
}

PromptTemplate template_for_language(const PromptTemplate& tmpl, std::string_view language) {
  auto caption = translated_example_caption(language);
  if (!caption) {
    throw std::invalid_argument("unsupported language: " + std::string(language));
  }
  return make_multilingual_template(tmpl, std::move(*caption));
}

}  // namespace lmd
