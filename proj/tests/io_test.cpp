#include <regex>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "lmd/image_io.hpp"
#include "lmd/prompt.hpp"
#include "lmd/rng.hpp"
#include "lmd/svg.hpp"
#include "lmd/trajectory_io.hpp"

using namespace lmd;

namespace {

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST(Latent, MaskHelpers) {
  const auto a = box_mask({2, 2, 4, 4}, 10, 10);
  const auto b = box_mask({4, 4, 4, 4}, 10, 10);
  EXPECT_EQ(mask_area(a), 16u);
  EXPECT_EQ(mask_bounds(a), (BoundingBox{2, 2, 4, 4}));
  EXPECT_FALSE(mask_bounds(BinaryMask(3, 3, 0)).has_value());
  EXPECT_DOUBLE_EQ(mask_iou(a, b), 4.0 / 28.0);
  EXPECT_EQ(mask_area(box_mask({-2, -2, 4, 4}, 10, 10)), 4u);
}

TEST(Latent, ColorEncoding) {
  const auto v = encode_color(Rgb{1.0, 0.0, 0.5}, 5);
  ASSERT_EQ(v.size(), 5u);
  EXPECT_DOUBLE_EQ(v[0], 1.0);
  EXPECT_DOUBLE_EQ(v[1], -1.0);
  EXPECT_DOUBLE_EQ(v[2], 0.0);
  EXPECT_DOUBLE_EQ(v[4], 0.0);
  const auto img = solid_latent(Rgb{0.2, 0.4, 0.6}, LatentShape{4, 2, 2});
  const Rgb back = decode_pixel(img, 1, 1);
  EXPECT_NEAR(back.r, 0.2, 1e-15);
  EXPECT_NEAR(back.g, 0.4, 1e-15);
  EXPECT_NEAR(back.b, 0.6, 1e-15);
}

TEST(Latent, RequireFinite) {
  LatentImage img(LatentShape{1, 2, 2});
  EXPECT_NO_THROW(img.require_finite("x"));
  img.at(0, 1, 1) = std::nan("");
  EXPECT_THROW(img.require_finite("x"), std::domain_error);
  EXPECT_THROW(LatentShape({0, 1, 1}).validate(), std::invalid_argument);
}

TEST(Latent, UpsampleToRgb) {
  LatentImage img = solid_latent(Rgb{0, 0, 0}, LatentShape{3, 2, 2});
  img.at(0, 0, 1) = 1.0;  // red channel of the top-right latent pixel
  const RgbImage rgb = latent_to_rgb(img, 4, 4);
  ASSERT_EQ(rgb.pixels.size(), 48u);
  EXPECT_EQ(rgb.pixels[(0 * 4 + 3) * 3], 255);
  EXPECT_EQ(rgb.pixels[(0 * 4 + 2) * 3], 255);
  EXPECT_EQ(rgb.pixels[(0 * 4 + 1) * 3], 0);
  EXPECT_EQ(rgb.pixels[(3 * 4 + 3) * 3], 0);
}

TEST(TrajectoryIo, RoundTripAtFloatPrecision) {
  Rng rng(5);
  Trajectory t;
  t.timesteps = {0, 500, 1000};
  for (int i = 0; i < 3; ++i) t.latents.push_back(LatentImage::gaussian(LatentShape{2, 3, 4}, rng));
  std::stringstream ss;
  write_trajectory(ss, t, 1000, 42);
  const std::string bytes = ss.str();
  const auto nl = bytes.find('\n');
  ASSERT_NE(nl, std::string::npos);
  const auto header = nlohmann::json::parse(bytes.substr(0, nl));
  EXPECT_EQ(header.at("shape"), nlohmann::json::array({2, 3, 4}));
  EXPECT_EQ(header.at("steps"), nlohmann::json::array({0, 500, 1000}));
  EXPECT_EQ(header.at("seed"), 42);
  EXPECT_EQ(bytes.size() - nl - 1, 3u * 24u * 4u);

  DumpHeader h;
  const Trajectory back = read_trajectory(ss, &h);
  EXPECT_EQ(h.T, 1000);
  EXPECT_EQ(back.timesteps, t.timesteps);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < t.latents[k].size(); ++i) {
      EXPECT_EQ(back.latents[k].data()[i], static_cast<double>(static_cast<float>(t.latents[k].data()[i])));
    }
  }
}

TEST(TrajectoryIo, LittleEndianFloats) {
  LatentImage one(LatentShape{1, 1, 1}, 1.0);
  std::stringstream ss;
  write_latent(ss, one, 10, 0);
  const std::string bytes = ss.str();
  const std::string payload = bytes.substr(bytes.find('\n') + 1);
  ASSERT_EQ(payload.size(), 4u);
  // 1.0f is 0x3f800000.
  EXPECT_EQ(static_cast<unsigned char>(payload[0]), 0x00);
  EXPECT_EQ(static_cast<unsigned char>(payload[3]), 0x3f);
}

TEST(TrajectoryIo, TruncatedDumpThrows) {
  LatentImage one(LatentShape{1, 2, 2}, 1.0);
  std::stringstream ss;
  write_latent(ss, one, 10, 0);
  std::string bytes = ss.str();
  bytes.pop_back();
  std::stringstream cut(bytes);
  EXPECT_THROW((void)read_trajectory(cut), std::runtime_error);
  std::stringstream garbage("nope\n");
  EXPECT_THROW((void)read_trajectory(garbage), std::runtime_error);
}

TEST(Png, RoundTripAndDeterminism) {
  RgbImage img{3, 2, {}};
  for (int i = 0; i < 18; ++i) img.pixels.push_back(static_cast<std::uint8_t>(i * 13));
  const auto a = encode_png(img);
  EXPECT_EQ(a, encode_png(img));
  ASSERT_GE(a.size(), 8u);
  EXPECT_EQ(a[1], 'P');
  const RgbImage back = decode_png(a);
  EXPECT_EQ(back.width, 3);
  EXPECT_EQ(back.height, 2);
  EXPECT_EQ(back.pixels, img.pixels);
  const std::vector<std::uint8_t> junk{1, 2, 3};
  EXPECT_THROW((void)decode_png(junk), std::runtime_error);
}

TEST(Pbm, RoundTrip) {
  BinaryMask m(2, 3, 0);
  m.at(0, 1) = 1;
  m.at(1, 2) = 1;
  const std::string text = encode_pbm(m);
  EXPECT_EQ(text, "P1\n3 2\n0 1 0\n0 0 1\n");
  EXPECT_EQ(decode_pbm(text), m);
}

TEST(Svg, SkierLayoutHasFourRects) {
  const std::string svg = render_layout_svg(skier_example().layout);
  EXPECT_EQ(count_of(svg, "<rect"), 4u);
  EXPECT_EQ(count_of(svg, ">a skier</text>"), 3u);
  EXPECT_NE(svg.find("viewBox=\"0 0 512 512\""), std::string::npos);
  EXPECT_EQ(svg, render_layout_svg(skier_example().layout));
}

TEST(Svg, EmptyLayoutHasNoRects) {
  EXPECT_EQ(count_of(render_layout_svg(Layout::make({}, "a forest")), "<rect"), 0u);
}

TEST(Svg, EscapesLabels) {
  const std::string svg =
      render_layout_svg(Layout::make({ObjectSpec::make("a <b> & 'c'", {0, 0, 10, 10})}, "x"));
  EXPECT_NE(svg.find("a &lt;b&gt; &amp; &apos;c&apos;"), std::string::npos);
}
