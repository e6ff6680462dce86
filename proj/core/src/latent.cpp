#include "lmd/latent.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <nlohmann/json.hpp>

#include "lmd/rng.hpp"

namespace lmd {

void LatentShape::validate() const {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw std::invalid_argument("latent shape extents must be positive, got " +
                                std::to_string(channels) + "x" + std::to_string(height) + "x" +
                                std::to_string(width));
  }
}

void to_json(nlohmann::json& j, const LatentShape& shape) {
  j = nlohmann::json::array({shape.channels, shape.height, shape.width});
}

void from_json(const nlohmann::json& j, LatentShape& shape) {
  if (!j.is_array() || j.size() != 3) {
    throw std::invalid_argument("latent shape must be [channels, height, width]");
  }
  shape = LatentShape{j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()};
  shape.validate();
}

std::size_t mask_area(const BinaryMask& mask) {
  return static_cast<std::size_t>(
      std::count_if(mask.data().begin(), mask.data().end(), [](std::uint8_t v) { return v != 0; }));
}

std::optional<BoundingBox> mask_bounds(const BinaryMask& mask) {
  int x0 = mask.width();
  int y0 = mask.height();
  int x1 = -1;
  int y1 = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(y, x) != 0) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 < 0) {
    return std::nullopt;
  }
  return BoundingBox{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

BinaryMask box_mask(const BoundingBox& box, int height, int width) {
  BinaryMask mask(height, width, 0);
  for (int y = std::max(0, box.y); y < std::min(height, box.bottom()); ++y) {
    for (int x = std::max(0, box.x); x < std::min(width, box.right()); ++x) {
      mask.at(y, x) = 1;
    }
  }
  return mask;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw std::invalid_argument("mask_iou needs masks of equal size");
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const bool pa = a.data()[i] != 0;
    const bool pb = b.data()[i] != 0;
    inter += (pa && pb) ? 1 : 0;
    uni += (pa || pb) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

LatentImage::LatentImage(LatentShape shape, double fill) : shape_(shape) {
  shape.validate();
  data_.assign(shape.size(), fill);
}

LatentImage LatentImage::gaussian(LatentShape shape, Rng& rng) {
  LatentImage out(shape);
  for (double& v : out.data_) {
    v = rng.gaussian();
  }
  return out;
}

void LatentImage::require_finite(const std::string& what) const {
  const auto it = std::find_if(data_.begin(), data_.end(), [](double v) { return !std::isfinite(v); });
  if (it != data_.end()) {
    throw std::domain_error(what + ": non-finite value at flat index " +
                            std::to_string(it - data_.begin()));
  }
}

void require_same_shape(const LatentImage& a, const LatentImage& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(what) + ": latent shapes differ");
  }
}

double max_abs_diff(const LatentImage& a, const LatentImage& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  }
  return m;
}

std::vector<double> encode_color(const Rgb& color, int channels) {
  const double luma = 0.299 * color.r + 0.587 * color.g + 0.114 * color.b;
  const std::array<double, 4> values = {2.0 * color.r - 1.0, 2.0 * color.g - 1.0,
                                        2.0 * color.b - 1.0, 2.0 * luma - 1.0};
  std::vector<double> out(static_cast<std::size_t>(std::max(channels, 0)), 0.0);
  for (std::size_t c = 0; c < out.size() && c < values.size(); ++c) {
    out[c] = values[c];
  }
  return out;
}

LatentImage solid_latent(const Rgb& color, LatentShape shape) {
  LatentImage out(shape);
  const auto values = encode_color(color, shape.channels);
  for (int c = 0; c < shape.channels; ++c) {
    for (int y = 0; y < shape.height; ++y) {
      for (int x = 0; x < shape.width; ++x) {
        out.at(c, y, x) = values[static_cast<std::size_t>(c)];
      }
    }
  }
  return out;
}

Rgb decode_pixel(const LatentImage& latent, int y, int x) {
  auto channel = [&](int c) {
    const int src = std::min(c, latent.shape().channels - 1);
    return std::clamp((latent.at(src, y, x) + 1.0) / 2.0, 0.0, 1.0);
  };
  return Rgb{channel(0), channel(1), channel(2)};
}

RgbImage latent_to_rgb(const LatentImage& latent, int width, int height) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("image extents must be positive");
  }
  const auto& shape = latent.shape();
  RgbImage img{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3)};
  auto to_byte = [](double v) { return static_cast<std::uint8_t>(std::lround(v * 255.0)); };
  for (int py = 0; py < height; ++py) {
    const int ly = static_cast<int>(static_cast<long long>(py) * shape.height / height);
    for (int px = 0; px < width; ++px) {
      const int lx = static_cast<int>(static_cast<long long>(px) * shape.width / width);
      const Rgb c = decode_pixel(latent, ly, lx);
      const std::size_t o = (static_cast<std::size_t>(py) * width + px) * 3;
      img.pixels[o] = to_byte(c.r);
      img.pixels[o + 1] = to_byte(c.g);
      img.pixels[o + 2] = to_byte(c.b);
    }
  }
  return img;
}

}  // namespace lmd
