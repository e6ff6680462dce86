#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lmd/layout.hpp"

namespace lmd {

class Rng;

struct LatentShape {
  int channels = 4;
  int height = 64;
  int width = 64;

  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width);
  }
  /// Throws std::invalid_argument unless every extent is positive.
  void validate() const;

  friend bool operator==(const LatentShape&, const LatentShape&) = default;
};

void to_json(nlohmann::json& j, const LatentShape& shape);
void from_json(const nlohmann::json& j, LatentShape& shape);

/// Row-major (height, width) grid.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width),
        data_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill) {
    if (height < 0 || width < 0) {
      throw std::invalid_argument("grid extents must be non-negative");
    }
  }

  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] bool contains(int y, int x) const {
    return y >= 0 && y < height_ && x >= 0 && x < width_;
  }
  [[nodiscard]] T& at(int y, int x) { return data_[index(y, x)]; }
  [[nodiscard]] const T& at(int y, int x) const { return data_[index(y, x)]; }
  [[nodiscard]] std::vector<T>& data() { return data_; }
  [[nodiscard]] const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  [[nodiscard]] std::size_t index(int y, int x) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

using RealGrid = Grid<double>;
using BinaryMask = Grid<std::uint8_t>;

/// Number of set pixels.
[[nodiscard]] std::size_t mask_area(const BinaryMask& mask);
/// Tight bounds of the set pixels; nullopt for an empty mask.
[[nodiscard]] std::optional<BoundingBox> mask_bounds(const BinaryMask& mask);
/// Mask of the pixels inside `box`, clipped to the grid.
[[nodiscard]] BinaryMask box_mask(const BoundingBox& box, int height, int width);
/// Intersection over union of two masks of equal size.
[[nodiscard]] double mask_iou(const BinaryMask& a, const BinaryMask& b);

/// (channels, height, width) grid of doubles, channel-major.
class LatentImage {
 public:
  LatentImage() = default;
  explicit LatentImage(LatentShape shape, double fill = 0.0);

  [[nodiscard]] static LatentImage gaussian(LatentShape shape, Rng& rng);

  [[nodiscard]] const LatentShape& shape() const { return shape_; }
  [[nodiscard]] double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  [[nodiscard]] double at(int c, int y, int x) const { return data_[index(c, y, x)]; }
  [[nodiscard]] std::vector<double>& data() { return data_; }
  [[nodiscard]] const std::vector<double>& data() const { return data_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  /// Throws std::domain_error naming `what` if any value is NaN or infinite.
  void require_finite(const std::string& what) const;

  friend bool operator==(const LatentImage&, const LatentImage&) = default;

 private:
  [[nodiscard]] std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * static_cast<std::size_t>(shape_.height) +
            static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(shape_.width) +
           static_cast<std::size_t>(x);
  }

  LatentShape shape_{0, 0, 0};
  std::vector<double> data_;
};

/// Throws std::invalid_argument when shapes differ.
void require_same_shape(const LatentImage& a, const LatentImage& b, const char* what);

[[nodiscard]] double max_abs_diff(const LatentImage& a, const LatentImage& b);

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Per-channel latent values of a color: RGB as 2c-1, then 2*luma-1, then zeros.
[[nodiscard]] std::vector<double> encode_color(const Rgb& color, int channels);

/// Flat latent of one color.
[[nodiscard]] LatentImage solid_latent(const Rgb& color, LatentShape shape);

/// Color of one latent pixel, read from channels 0..2 and clamped to [0,1].
[[nodiscard]] Rgb decode_pixel(const LatentImage& latent, int y, int x);

/// 8-bit RGB image, row-major, interleaved.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Decodes channels 0..2 and upsamples by nearest neighbour to (width, height).
[[nodiscard]] RgbImage latent_to_rgb(const LatentImage& latent, int width, int height);

}  // namespace lmd
