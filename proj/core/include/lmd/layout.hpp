#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace lmd {

/// Axis-aligned box in integer canvas pixels, (x, y) is the top-left corner.
///
/// Only w > 0 and h > 0 are enforced here. Whether the box fits its canvas
/// is a property of the layout and is reported by validate_layout().
struct BoundingBox {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  static BoundingBox make(int x, int y, int w, int h);

  [[nodiscard]] int right() const { return x + w; }
  [[nodiscard]] int bottom() const { return y + h; }
  [[nodiscard]] long long area() const { return static_cast<long long>(w) * h; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Canvas {
  int width = 512;
  int height = 512;

  friend bool operator==(const Canvas&, const Canvas&) = default;
};

struct ObjectSpec {
  std::string description;
  BoundingBox box;

  static ObjectSpec make(std::string description, BoundingBox box);

  friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

/// Captioned boxes plus a background prompt. Object order is significant:
/// later objects are drawn over earlier ones during composition.
struct Layout {
  std::vector<ObjectSpec> objects;
  std::string background_prompt;
  Canvas canvas;

  static Layout make(std::vector<ObjectSpec> objects, std::string background_prompt,
                     Canvas canvas = {});

  friend bool operator==(const Layout&, const Layout&) = default;
};

struct ValidationReport {
  std::vector<std::size_t> out_of_bounds;
  std::vector<std::pair<std::size_t, std::size_t>> overlapping_pairs;

  [[nodiscard]] bool is_clean() const { return out_of_bounds.empty() && overlapping_pairs.empty(); }
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

[[nodiscard]] ValidationReport validate_layout(const Layout& layout);
[[nodiscard]] Point box_center(const BoundingBox& box);
[[nodiscard]] double intersection_area(const BoundingBox& a, const BoundingBox& b);
[[nodiscard]] double iou(const BoundingBox& a, const BoundingBox& b);

/// Proportional rescale onto another canvas. Coordinates are rounded half-up
/// independently; widths/heights that collapse are clamped to 1.
[[nodiscard]] Layout scale_layout(const Layout& layout, Canvas target);

/// Trims ASCII whitespace from both ends.
[[nodiscard]] std::string trim(std::string_view text);

// JSON: {"canvas":[w,h],"background_prompt":"...","objects":[{"description":..,"box":[x,y,w,h]}]}
void to_json(nlohmann::json& j, const BoundingBox& box);
void from_json(const nlohmann::json& j, BoundingBox& box);
void to_json(nlohmann::json& j, const ObjectSpec& spec);
void from_json(const nlohmann::json& j, ObjectSpec& spec);
void to_json(nlohmann::json& j, const Layout& layout);
void from_json(const nlohmann::json& j, Layout& layout);
void to_json(nlohmann::json& j, const ValidationReport& report);

}  // namespace lmd
