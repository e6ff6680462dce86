#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "lmd/prompt.hpp"

using namespace lmd;

namespace {

std::string read_golden(const std::string& name) {
  std::ifstream in(std::string(LMD_TEST_DATA_DIR) + "/" + name, std::ios::binary);
  if (!in) throw std::runtime_error("missing test data " + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(BuildPrompt, DefaultTemplateMatchesGolden) {
  EXPECT_EQ(build_prompt(default_template(), "[User Prompt]"), read_golden("default_prompt.txt"));
}

TEST(BuildPrompt, EndsWithCaptionCue) {
  const std::string prompt = build_prompt(default_template(), "A dog on a bench");
  const std::string suffix = "Caption: A dog on a bench\nObjects: ";
  ASSERT_GE(prompt.size(), suffix.size());
  EXPECT_EQ(prompt.substr(prompt.size() - suffix.size()), suffix);
}

TEST(BuildPrompt, RejectsBlankCaption) {
  EXPECT_THROW((void)build_prompt(default_template(), "  "), std::invalid_argument);
}

TEST(PromptTemplate, RequiresAnExample) {
  EXPECT_THROW(PromptTemplate("a", "b", "c", {}), std::invalid_argument);
}

TEST(PromptTemplate, AdditionalExamplesReplaceTheSlot) {
  const auto tmpl = default_template().with_additional_examples(render_example(panda_example()));
  const std::string prompt = build_prompt(tmpl, "two cats");
  EXPECT_EQ(prompt.find("[Additional Examples]"), std::string::npos);
  EXPECT_NE(prompt.find("a panda eating bambooo"), std::string::npos);
}

TEST(RenderExample, SkierBlock) {
  EXPECT_EQ(render_example(skier_example()),
            "Caption: A realistic image of four skiers standing in a line on the snow near a palm "
            "tree\nObjects: [('a skier', [5, 152, 139, 168]), ('a skier', [278, 192, 121, 158]), "
            "('a skier', [148, 173, 124, 155]), ('a palm tree', [404, 180, 103, 180])]\nBackground "
            "prompt: A realistic image of an outdoor scene with snow");
}

TEST(MultilingualTemplate, KeepsLayoutsAndFirstExample) {
  const PromptTemplate base =
      default_template().with_examples({panda_example(), skier_example()});
  const auto zh = make_multilingual_template(base, *translated_example_caption("zh"));
  EXPECT_EQ(zh.examples().front(), base.examples().front());
  EXPECT_EQ(zh.examples().back().layout, base.examples().back().layout);
  EXPECT_NE(zh.examples().back().caption, base.examples().back().caption);
}

TEST(MultilingualTemplate, SameCaptionIsIdentity) {
  const PromptTemplate base = default_template();
  EXPECT_EQ(make_multilingual_template(base, base.examples().back().caption), base);
}

TEST(MultilingualTemplate, LanguageLookup) {
  for (const char* lang : {"zh", "fr", "de", "es", "ja"}) {
    EXPECT_TRUE(translated_example_caption(lang).has_value()) << lang;
  }
  EXPECT_FALSE(translated_example_caption("xx").has_value());
  EXPECT_THROW((void)template_for_language(default_template(), "xx"), std::invalid_argument);
  const std::string prompt = build_prompt(template_for_language(default_template(), "fr"), "deux chats");
  EXPECT_NE(prompt.find("skieurs"), std::string::npos);
  EXPECT_NE(prompt.find("('a skier', [5, 152, 139, 168])"), std::string::npos);
}
