#include "lmd/descriptor.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <stdexcept>

namespace lmd {

namespace {

std::vector<std::string> words_of(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (const char ch : text) {
    if (std::isalpha(static_cast<unsigned char>(ch)) != 0) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) {
    words.push_back(std::move(cur));
  }
  return words;
}

std::string canonical_color(const std::string& word) { return word == "grey" ? "gray" : word; }

bool is_color_word(const std::string& word) {
  const std::string name = canonical_color(word);
  const auto& colors = named_colors();
  return std::any_of(colors.begin(), colors.end(), [&](const auto& c) { return c.first == name; });
}

struct ShapeWord {
  std::string_view word;
  ShapeKind shape;
};

constexpr ShapeWord kShapeWords[] = {
    {"circle", ShapeKind::Circle},   {"circles", ShapeKind::Circle},  {"ball", ShapeKind::Circle},
    {"balls", ShapeKind::Circle},    {"disk", ShapeKind::Circle},     {"disc", ShapeKind::Circle},
    {"sphere", ShapeKind::Circle},   {"round", ShapeKind::Circle},    {"square", ShapeKind::Square},
    {"squares", ShapeKind::Square},  {"box", ShapeKind::Square},      {"cube", ShapeKind::Square},
    {"rectangle", ShapeKind::Square}, {"block", ShapeKind::Square},   {"triangle", ShapeKind::Triangle},
    {"triangles", ShapeKind::Triangle}, {"pyramid", ShapeKind::Triangle}, {"cone", ShapeKind::Triangle},
};

struct SceneWord {
  std::string_view word;
  std::string_view color;
};

constexpr SceneWord kSceneWords[] = {
    {"forest", "green"}, {"grass", "green"}, {"jungle", "green"}, {"park", "green"},
    {"meadow", "green"}, {"field", "green"}, {"sky", "blue"},     {"sea", "blue"},
    {"ocean", "blue"},   {"lake", "blue"},   {"water", "blue"},   {"river", "blue"},
    {"snow", "white"},   {"ice", "white"},   {"winter", "white"}, {"desert", "yellow"},
    {"beach", "yellow"}, {"sand", "yellow"}, {"night", "black"},  {"space", "black"},
    {"room", "gray"},    {"street", "gray"}, {"city", "gray"},    {"kitchen", "gray"},
};

// The word itself, its plural, or its "-y" adjective ("snowy", "grassy").
bool is_scene_word(std::string_view word, std::string_view scene) {
  if (word.substr(0, scene.size()) != scene) return false;
  const std::string_view rest = word.substr(scene.size());
  return rest.empty() || rest == "s" || rest == "es" || rest == "y";
}

}  // namespace

std::string_view to_string(ShapeKind shape) {
  switch (shape) {
    case ShapeKind::Circle: return "circle";
    case ShapeKind::Square: return "square";
    case ShapeKind::Triangle: return "triangle";
  }
  return "circle";
}

const std::vector<std::pair<std::string, Rgb>>& named_colors() {
  static const std::vector<std::pair<std::string, Rgb>> colors = {
      {"red", {0.9, 0.1, 0.1}},     {"orange", {1.0, 0.55, 0.0}}, {"yellow", {0.95, 0.85, 0.1}},
      {"green", {0.1, 0.6, 0.2}},   {"blue", {0.1, 0.3, 0.9}},    {"purple", {0.5, 0.2, 0.7}},
      {"pink", {1.0, 0.5, 0.7}},    {"brown", {0.55, 0.35, 0.15}}, {"black", {0.05, 0.05, 0.05}},
      {"white", {0.95, 0.95, 0.95}}, {"gray", {0.5, 0.5, 0.5}},
  };
  return colors;
}

Rgb color_by_name(std::string_view name) {
  const std::string key = canonical_color(std::string(name));
  for (const auto& [n, rgb] : named_colors()) {
    if (n == key) {
      return rgb;
    }
  }
  throw std::invalid_argument("unknown color: " + std::string(name));
}

ObjectDescriptor describe_object(std::string_view description) {
  ObjectDescriptor d;
  bool have_color = false;
  bool have_shape = false;
  for (const auto& word : words_of(description)) {
    if (!have_color && is_color_word(word)) {
      d.color_name = canonical_color(word);
      d.color = color_by_name(d.color_name);
      have_color = true;
    }
    if (!have_shape) {
      for (const auto& sw : kShapeWords) {
        if (word == sw.word) {
          d.shape = sw.shape;
          have_shape = true;
          break;
        }
      }
    }
  }
  if (!have_shape) {
    d.warnings.push_back("no shape keyword in '" + std::string(description) + "', using circle");
  }
  if (!have_color) {
    d.warnings.push_back("no color keyword in '" + std::string(description) + "', using gray");
  }
  return d;
}

BackgroundDescriptor describe_background(std::string_view background_prompt) {
  BackgroundDescriptor d;
  const auto words = words_of(background_prompt);
  for (const auto& word : words) {
    if (is_color_word(word)) {
      d.color_name = canonical_color(word);
      d.color = color_by_name(d.color_name);
      return d;
    }
  }
  for (const auto& word : words) {
    for (const auto& sw : kSceneWords) {
      if (is_scene_word(word, sw.word)) {
        d.color_name = std::string(sw.color);
        d.color = color_by_name(d.color_name);
        return d;
      }
    }
  }
  d.warnings.push_back("no color or scene keyword in '" + std::string(background_prompt) +
                       "', using white");
  return d;
}

std::string nearest_color_name(const Rgb& color) {
  std::string best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& [name, rgb] : named_colors()) {
    const double dr = rgb.r - color.r;
    const double dg = rgb.g - color.g;
    const double db = rgb.b - color.b;
    const double dist = dr * dr + dg * dg + db * db;
    if (dist < best_d) {
      best_d = dist;
      best = name;
    }
  }
  return best;
}

}  // namespace lmd
