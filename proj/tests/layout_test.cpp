#include <cmath>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "lmd/layout.hpp"

using namespace lmd;

namespace {

Layout skier_layout() {
  return Layout::make({ObjectSpec::make("a skier", {5, 152, 139, 168}),
                       ObjectSpec::make("a skier", {278, 192, 121, 158}),
                       ObjectSpec::make("a skier", {148, 173, 124, 155}),
                       ObjectSpec::make("a palm tree", {404, 180, 103, 180})},
                      "A realistic image of an outdoor scene with snow");
}

}  // namespace

TEST(BoundingBox, RejectsNonPositiveExtent) {
  EXPECT_THROW(BoundingBox::make(0, 0, 0, 10), std::invalid_argument);
  EXPECT_THROW(BoundingBox::make(0, 0, 10, -1), std::invalid_argument);
  EXPECT_NO_THROW(BoundingBox::make(-5, -5, 1, 1));
}

TEST(ObjectSpec, RejectsEmptyDescription) {
  EXPECT_THROW(ObjectSpec::make("", {0, 0, 1, 1}), std::invalid_argument);
  EXPECT_THROW(ObjectSpec::make("   ", {0, 0, 1, 1}), std::invalid_argument);
}

TEST(ValidateLayout, SkierLayoutIsClean) {
  EXPECT_TRUE(validate_layout(skier_layout()).is_clean());
}

TEST(ValidateLayout, ReportsOutOfBounds) {
  const auto report = validate_layout(Layout::make({ObjectSpec::make("a ball", {400, 400, 200, 200})}, "bg"));
  ASSERT_EQ(report.out_of_bounds.size(), 1u);
  EXPECT_EQ(report.out_of_bounds[0], 0u);
}

TEST(ValidateLayout, ReportsOverlap) {
  const auto report = validate_layout(Layout::make(
      {ObjectSpec::make("a", {0, 0, 100, 100}), ObjectSpec::make("b", {50, 50, 100, 100})}, "bg"));
  ASSERT_EQ(report.overlapping_pairs.size(), 1u);
  EXPECT_EQ(report.overlapping_pairs[0], std::make_pair(std::size_t{0}, std::size_t{1}));
}

TEST(ValidateLayout, TouchingBoxesDoNotOverlap) {
  const auto report = validate_layout(Layout::make(
      {ObjectSpec::make("a", {0, 0, 100, 100}), ObjectSpec::make("b", {100, 0, 100, 100})}, "bg"));
  EXPECT_TRUE(report.overlapping_pairs.empty());
}

TEST(BoxCenter, Values) {
  const Point a = box_center({0, 0, 100, 100});
  EXPECT_DOUBLE_EQ(a.x, 50.0);
  EXPECT_DOUBLE_EQ(a.y, 50.0);
  const Point b = box_center({5, 152, 139, 168});
  EXPECT_DOUBLE_EQ(b.x, 74.5);
  EXPECT_DOUBLE_EQ(b.y, 236.0);
  const Point c = box_center({404, 180, 103, 180});
  EXPECT_DOUBLE_EQ(c.x, 455.5);
  EXPECT_DOUBLE_EQ(c.y, 270.0);
}

TEST(IntersectionArea, Values) {
  EXPECT_DOUBLE_EQ(intersection_area({0, 0, 10, 10}, {20, 20, 5, 5}), 0.0);
  EXPECT_DOUBLE_EQ(intersection_area({0, 0, 10, 10}, {0, 0, 10, 10}), 100.0);
  EXPECT_DOUBLE_EQ(intersection_area({0, 0, 10, 10}, {5, 5, 10, 10}), 25.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {5, 5, 10, 10}), 25.0 / 175.0);
}

TEST(ScaleLayout, UniformEighth) {
  const Layout in = Layout::make({ObjectSpec::make("a ball", {0, 0, 256, 256})}, "bg");
  const Layout out = scale_layout(in, Canvas{64, 64});
  EXPECT_EQ(out.objects[0].box, (BoundingBox{0, 0, 32, 32}));
  EXPECT_EQ(out.canvas, (Canvas{64, 64}));
}

TEST(ScaleLayout, RoundsEachCoordinate) {
  const Layout in = Layout::make({ObjectSpec::make("a ball", {5, 152, 139, 168})}, "bg");
  const Layout out = scale_layout(in, Canvas{64, 64});
  // Independent oracle: round(v / 8) for every coordinate.
  const int expected[4] = {5, 152, 139, 168};
  int oracle[4];
  for (int i = 0; i < 4; ++i) oracle[i] = static_cast<int>(std::lround(expected[i] / 8.0));
  EXPECT_EQ(out.objects[0].box, (BoundingBox{oracle[0], oracle[1], oracle[2], oracle[3]}));
  EXPECT_EQ(out.objects[0].box, (BoundingBox{1, 19, 17, 21}));
}

TEST(ScaleLayout, SameCanvasIsIdentity) {
  EXPECT_EQ(scale_layout(skier_layout(), Canvas{512, 512}), skier_layout());
}

TEST(ScaleLayout, CollapsedExtentClampsToOne) {
  const Layout in = Layout::make({ObjectSpec::make("a dot", {0, 0, 2, 2})}, "bg");
  const Layout out = scale_layout(in, Canvas{64, 64});
  EXPECT_EQ(out.objects[0].box.w, 1);
  EXPECT_EQ(out.objects[0].box.h, 1);
}

TEST(LayoutJson, RoundTrip) {
  const Layout in = skier_layout();
  const nlohmann::json j = in;
  EXPECT_EQ(j.at("canvas"), nlohmann::json::array({512, 512}));
  EXPECT_EQ(j.at("objects").at(0).at("box"), nlohmann::json::array({5, 152, 139, 168}));
  EXPECT_EQ(j.get<Layout>(), in);
}

TEST(LayoutJson, RejectsBadBox) {
  const auto j = nlohmann::json::parse(
      R"({"background_prompt":"x","objects":[{"description":"a","box":[1,2,3]}]})");
  EXPECT_ANY_THROW((void)j.get<Layout>());
}

TEST(Trim, StripsAsciiWhitespace) {
  EXPECT_EQ(trim("  a b \t\n"), "a b");
  EXPECT_EQ(trim(""), "");
}
