#include "lmd/layout.hpp"

#include <algorithm>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace lmd {

namespace {

long long floor_div(long long num, long long den) {
  long long q = num / den;
  if ((num % den != 0) && ((num < 0) != (den < 0))) {
    --q;
  }
  return q;
}

// round_half_up(value * to / from) without going through floating point.
int rescale(int value, int from, int to) {
  const long long num = 2LL * value * to + from;
  return static_cast<int>(floor_div(num, 2LL * from));
}

}  // namespace

BoundingBox BoundingBox::make(int x, int y, int w, int h) {
  if (w <= 0 || h <= 0) {
    throw std::invalid_argument("bounding box needs positive width and height, got " +
                                std::to_string(w) + "x" + std::to_string(h));
  }
  return BoundingBox{x, y, w, h};
}

ObjectSpec ObjectSpec::make(std::string description, BoundingBox box) {
  if (trim(description).empty()) {
    throw std::invalid_argument("object description must not be blank");
  }
  (void)BoundingBox::make(box.x, box.y, box.w, box.h);
  return ObjectSpec{std::move(description), box};
}

Layout Layout::make(std::vector<ObjectSpec> objects, std::string background_prompt, Canvas canvas) {
  if (trim(background_prompt).empty()) {
    throw std::invalid_argument("background prompt must not be blank");
  }
  if (canvas.width <= 0 || canvas.height <= 0) {
    throw std::invalid_argument("canvas dimensions must be positive");
  }
  return Layout{std::move(objects), std::move(background_prompt), canvas};
}

std::string trim(std::string_view text) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  const auto first = text.find_first_not_of(ws);
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = text.find_last_not_of(ws);
  return std::string(text.substr(first, last - first + 1));
}

ValidationReport validate_layout(const Layout& layout) {
  ValidationReport report;
  const auto& objs = layout.objects;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const auto& b = objs[i].box;
    if (b.x < 0 || b.y < 0 || b.right() > layout.canvas.width ||
        b.bottom() > layout.canvas.height) {
      report.out_of_bounds.push_back(i);
    }
  }
  for (std::size_t i = 0; i < objs.size(); ++i) {
    for (std::size_t j = i + 1; j < objs.size(); ++j) {
      // Edge-touching boxes have zero area and are not overlaps.
      if (intersection_area(objs[i].box, objs[j].box) > 0.0) {
        report.overlapping_pairs.emplace_back(i, j);
      }
    }
  }
  return report;
}

Point box_center(const BoundingBox& box) {
  return {box.x + box.w / 2.0, box.y + box.h / 2.0};
}

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const long long w = std::min<long long>(a.right(), b.right()) - std::max(a.x, b.x);
  const long long h = std::min<long long>(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (w <= 0 || h <= 0) {
    return 0.0;
  }
  return static_cast<double>(w * h);
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  const double uni = static_cast<double>(a.area() + b.area()) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

Layout scale_layout(const Layout& layout, Canvas target) {
  if (target.width <= 0 || target.height <= 0) {
    throw std::invalid_argument("target canvas dimensions must be positive");
  }
  if (target == layout.canvas) {
    return layout;
  }
  Layout out = layout;
  out.canvas = target;
  const int sw = layout.canvas.width;
  const int sh = layout.canvas.height;
  for (auto& obj : out.objects) {
    auto& b = obj.box;
    b = BoundingBox{rescale(b.x, sw, target.width), rescale(b.y, sh, target.height),
                    std::max(1, rescale(b.w, sw, target.width)),
                    std::max(1, rescale(b.h, sh, target.height))};
  }
  return out;
}

void to_json(nlohmann::json& j, const BoundingBox& box) {
  j = nlohmann::json::array({box.x, box.y, box.w, box.h});
}

void from_json(const nlohmann::json& j, BoundingBox& box) {
  if (!j.is_array() || j.size() != 4) {
    throw std::invalid_argument("box must be an array [x, y, w, h]");
  }
  for (const auto& v : j) {
    if (!v.is_number_integer()) {
      throw std::invalid_argument("box coordinates must be integers");
    }
  }
  box = BoundingBox::make(j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>());
}

void to_json(nlohmann::json& j, const ObjectSpec& spec) {
  j = nlohmann::json{{"description", spec.description}, {"box", spec.box}};
}

void from_json(const nlohmann::json& j, ObjectSpec& spec) {
  spec = ObjectSpec::make(j.at("description").get<std::string>(), j.at("box").get<BoundingBox>());
}

void to_json(nlohmann::json& j, const Layout& layout) {
  j = nlohmann::json{{"canvas", {layout.canvas.width, layout.canvas.height}},
                     {"background_prompt", layout.background_prompt},
                     {"objects", layout.objects}};
}

void from_json(const nlohmann::json& j, Layout& layout) {
  Canvas canvas;
  if (j.contains("canvas")) {
    const auto& c = j.at("canvas");
    if (!c.is_array() || c.size() != 2) {
      throw std::invalid_argument("canvas must be an array [width, height]");
    }
    canvas = Canvas{c[0].get<int>(), c[1].get<int>()};
  }
  std::vector<ObjectSpec> objects;
  if (j.contains("objects")) {
    objects = j.at("objects").get<std::vector<ObjectSpec>>();
  }
  layout = Layout::make(std::move(objects), j.at("background_prompt").get<std::string>(), canvas);
}

void to_json(nlohmann::json& j, const ValidationReport& report) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [a, b] : report.overlapping_pairs) {
    pairs.push_back({a, b});
  }
  j = nlohmann::json{{"out_of_bounds", report.out_of_bounds},
                     {"overlapping_pairs", pairs},
                     {"is_clean", report.is_clean()}};
}

}  // namespace lmd
