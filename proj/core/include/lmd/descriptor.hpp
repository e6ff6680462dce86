#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "lmd/latent.hpp"

namespace lmd {

enum class ShapeKind { Circle, Square, Triangle };

[[nodiscard]] std::string_view to_string(ShapeKind shape);

/// Procedural stand-in for an object description.
struct ObjectDescriptor {
  ShapeKind shape = ShapeKind::Circle;
  Rgb color{0.5, 0.5, 0.5};
  std::string color_name = "gray";
  /// Set when a shape or color keyword was missing and a default was used.
  std::vector<std::string> warnings;
};

struct BackgroundDescriptor {
  Rgb color{0.95, 0.95, 0.95};
  std::string color_name = "white";
  std::vector<std::string> warnings;
};

/// Named colors understood by the descriptor lookup, e.g. "red" or "gray".
[[nodiscard]] const std::vector<std::pair<std::string, Rgb>>& named_colors();

/// Color for a name from named_colors() ("grey" is accepted for "gray").
/// Throws std::invalid_argument for unknown names.
[[nodiscard]] Rgb color_by_name(std::string_view name);

/// Keyword lookup over the words of `description`. The first color word and
/// the first shape word win; missing ones default to a gray circle.
[[nodiscard]] ObjectDescriptor describe_object(std::string_view description);

/// Color words take precedence; otherwise scene words ("forest", "snow",
/// "sky", ...) pick a color; otherwise white.
[[nodiscard]] BackgroundDescriptor describe_background(std::string_view background_prompt);

/// Name of the named color closest to `color` in RGB distance.
[[nodiscard]] std::string nearest_color_name(const Rgb& color);

}  // namespace lmd
