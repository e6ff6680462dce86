#include "lmd/trajectory_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace lmd {

namespace {

void write_header(std::ostream& out, const DumpHeader& h) {
  const nlohmann::json j{{"shape", h.shape}, {"T", h.T}, {"steps", h.steps}, {"seed", h.seed}};
  out << j.dump() << '\n';
}

void write_values(std::ostream& out, const LatentImage& latent) {
  std::vector<char> buf(latent.size() * 4);
  for (std::size_t i = 0; i < latent.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(latent.data()[i]));
    for (int b = 0; b < 4; ++b) {
      buf[i * 4 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) {
    throw std::runtime_error("failed to write latent dump");
  }
}

}  // namespace

void write_trajectory(std::ostream& out, const Trajectory& trajectory, int T, std::uint64_t seed) {
  if (trajectory.latents.empty() || trajectory.latents.size() != trajectory.timesteps.size()) {
    throw std::invalid_argument("trajectory latents and timesteps disagree");
  }
  write_header(out, DumpHeader{trajectory.clean().shape(), T, trajectory.timesteps, seed});
  for (const auto& latent : trajectory.latents) {
    write_values(out, latent);
  }
}

void write_latent(std::ostream& out, const LatentImage& latent, int T, std::uint64_t seed) {
  write_header(out, DumpHeader{latent.shape(), T, {0}, seed});
  write_values(out, latent);
}

Trajectory read_trajectory(std::istream& in, DumpHeader* header) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("latent dump: missing header line");
  }
  DumpHeader h;
  try {
    const auto j = nlohmann::json::parse(line);
    h.shape = j.at("shape").get<LatentShape>();
    h.T = j.at("T").get<int>();
    h.steps = j.at("steps").get<std::vector<int>>();
    h.seed = j.at("seed").get<std::uint64_t>();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("latent dump: bad header: ") + e.what());
  }
  Trajectory traj;
  traj.timesteps = h.steps;
  std::vector<char> buf(h.shape.size() * 4);
  for (std::size_t k = 0; k < h.steps.size(); ++k) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
      throw std::runtime_error("latent dump: truncated data");
    }
    LatentImage latent(h.shape);
    for (std::size_t i = 0; i < latent.size(); ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i * 4 + static_cast<std::size_t>(b)]))
                << (8 * b);
      }
      latent.data()[i] = std::bit_cast<float>(bits);
    }
    traj.latents.push_back(std::move(latent));
  }
  if (header != nullptr) {
    *header = std::move(h);
  }
  return traj;
}

}  // namespace lmd
