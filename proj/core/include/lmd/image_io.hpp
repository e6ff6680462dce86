#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lmd/latent.hpp"

namespace lmd {

/// 8-bit RGB PNG without timestamps, so equal images give equal bytes.
[[nodiscard]] std::vector<std::uint8_t> encode_png(const RgbImage& image);
/// Decodes an 8-bit RGB PNG. Throws std::runtime_error otherwise.
[[nodiscard]] RgbImage decode_png(std::span<const std::uint8_t> bytes);

/// Plain (P1) PBM; 1 is a set pixel.
[[nodiscard]] std::string encode_pbm(const BinaryMask& mask);
[[nodiscard]] BinaryMask decode_pbm(std::string_view text);

}  // namespace lmd
