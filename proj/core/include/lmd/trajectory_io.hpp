#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "lmd/diffusion.hpp"

namespace lmd {

/// Dump framing: one line of JSON {"shape":[C,H,W],"T":..,"steps":[..],"seed":..}
/// terminated by '\n', then the latents in `steps` order as little-endian
/// float32, each channel-major.
struct DumpHeader {
  LatentShape shape;
  int T = 0;
  std::vector<int> steps;
  std::uint64_t seed = 0;
};

void write_trajectory(std::ostream& out, const Trajectory& trajectory, int T, std::uint64_t seed);

/// A single latent, framed as a one-step dump with steps = [0].
void write_latent(std::ostream& out, const LatentImage& latent, int T, std::uint64_t seed);

/// Reads a dump; values come back rounded to float32. Throws
/// std::runtime_error on malformed input.
[[nodiscard]] Trajectory read_trajectory(std::istream& in, DumpHeader* header = nullptr);

}  // namespace lmd
