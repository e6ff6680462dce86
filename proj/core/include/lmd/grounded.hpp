#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lmd/descriptor.hpp"
#include "lmd/diffusion.hpp"
#include "lmd/latent.hpp"
#include "lmd/layout.hpp"

namespace lmd {

struct GenerationConfig {
  /// Fraction of sampling steps left free at the end.
  double r = 0.3;
  int n_steps = 50;
  std::uint64_t seed = 0;
  /// Weight of an object term outside its box.
  double attenuation = 0.1;
  /// Saliency threshold for the mask, relative to the saliency maximum.
  double mask_threshold = 0.25;
  LatentShape latent_shape;
  Canvas canvas;
  int T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  /// Spread of the analytic predictor's data distribution around its target.
  double data_std = 0.25;
  /// Fixed-point passes per inversion step.
  int inversion_iters = 5;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
  [[nodiscard]] NoiseSchedule schedule() const;
  /// floor(r * n_steps), computed with a small tolerance for products like 0.7 * 50.
  [[nodiscard]] int free_steps() const;
  [[nodiscard]] int frozen_steps() const { return n_steps - free_steps(); }
};

void to_json(nlohmann::json& j, const GenerationConfig& config);
/// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, GenerationConfig& config);

/// A canvas box mapped onto the latent grid (rounded half-up, extents at least 1).
[[nodiscard]] BoundingBox to_latent_box(const BoundingBox& box, Canvas canvas, LatentShape shape);

/// Fraction of each pixel covered by the shape drawn centered in `box` at 80%
/// of its extent, estimated with 4x4 subsamples per pixel.
[[nodiscard]] RealGrid shape_coverage(ShapeKind shape, const BoundingBox& box, int height, int width);

/// Background fill with the object's shape blended in by coverage. `box` is in
/// latent pixels. Throws std::domain_error when the box misses the grid.
[[nodiscard]] LatentImage render_target(const ObjectDescriptor& object, const BoundingBox& box,
                                        const BackgroundDescriptor& background, LatentShape shape);

/// Object term whose target is render_target() inside `box` and the flat
/// object color outside it, weighted 1 inside and `attenuation` outside.
[[nodiscard]] ObjectTerm make_object_term(const ObjectDescriptor& object, const BoundingBox& box,
                                          const BackgroundDescriptor& background, LatentShape shape,
                                          double attenuation);

/// Background plus one term per layout object, in layout order.
[[nodiscard]] Condition composite_condition(const Layout& layout, const GenerationConfig& config);

struct SingleObjectResult {
  LatentImage sample;
  /// Accumulated object-term contribution magnitude, normalized to max 1.
  RealGrid saliency;
  Condition condition;
  BoundingBox latent_box;
};

/// Samples a scene holding only `spec`, from x_T drawn with config.seed.
[[nodiscard]] SingleObjectResult generate_single_object(const ObjectSpec& spec,
                                                        std::string_view background_prompt,
                                                        const GenerationConfig& config);

/// The same sampler with no object terms.
[[nodiscard]] LatentImage generate_background_only(std::string_view background_prompt,
                                                   const GenerationConfig& config);

struct MaskResult {
  BinaryMask mask;
  BoundingBox outer_box;
};

/// Turns a saliency map into a foreground mask.
class MaskRefiner {
 public:
  virtual ~MaskRefiner() = default;
  [[nodiscard]] virtual MaskResult refine(const RealGrid& saliency, double threshold) const = 0;
};

/// Seed at the saliency maximum (first in row-major order), then the
/// 4-connected component of pixels >= threshold * max containing it.
/// Throws std::domain_error unless the maximum is positive.
[[nodiscard]] MaskResult refine_mask(const RealGrid& saliency, double threshold);

class FloodFillRefiner final : public MaskRefiner {
 public:
  [[nodiscard]] MaskResult refine(const RealGrid& saliency, double threshold) const override {
    return refine_mask(saliency, threshold);
  }
};

struct ForegroundAsset {
  /// Unmasked inversion of the single-object sample; latents[0] is the sample.
  Trajectory trajectory;
  BinaryMask mask;
  BoundingBox mask_outer_box;
  ObjectSpec spec;
  BoundingBox latent_box;
  RealGrid saliency;
  /// Max-abs error of sampling back from the inverted latent.
  double roundtrip_error = 0.0;
};

[[nodiscard]] ForegroundAsset build_foreground_asset(const ObjectSpec& spec,
                                                     std::string_view background_prompt,
                                                     const GenerationConfig& config,
                                                     const MaskRefiner& refiner = FloodFillRefiner{});

/// Assets for every layout object, built by up to `parallelism` threads.
/// Object k uses the seed mix_seed(config.seed, k + 1).
[[nodiscard]] std::vector<ForegroundAsset> build_assets(const Layout& layout,
                                                        const GenerationConfig& config,
                                                        int parallelism = 1,
                                                        const MaskRefiner& refiner = FloodFillRefiner{});

struct Offset {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

/// Integer shift moving the mask's outer-box center onto the spec-box
/// center, rounded half-up per axis.
[[nodiscard]] Offset placement_offset(const ForegroundAsset& asset);

/// The asset mask translated by placement_offset(), clipped to the grid.
[[nodiscard]] BinaryMask placed_mask(const ForegroundAsset& asset);

/// Copies `step_latent` under the translated mask onto `background_latent`.
[[nodiscard]] LatentImage place_foreground(const LatentImage& background_latent,
                                           const ForegroundAsset& asset,
                                           const LatentImage& step_latent);

struct ComposeRecord {
  std::uint64_t seed = 0;
  int n_steps = 0;
  int frozen_steps = 0;
  int free_steps = 0;
  std::vector<Offset> offsets;
};

void to_json(nlohmann::json& j, const ComposeRecord& record);

/// Called after every sampling step with the 0-based step index, the
/// timestep reached and the working latent (after any foreground overwrite).
using StepObserver = std::function<void(int step, int t, const LatentImage& latent)>;

struct ComposeResult {
  LatentImage image;
  /// x_T after the foreground latents were placed.
  LatentImage composed_noise;
  ComposeRecord record;
};

/// Draws x_T with config.seed, places each asset's noisiest latent, then runs
/// frozen steps (foregrounds pinned to their trajectories) followed by free
/// steps under the composite condition.
[[nodiscard]] ComposeResult compose_and_generate(const Layout& layout,
                                                 const std::vector<ForegroundAsset>& assets,
                                                 const GenerationConfig& config,
                                                 const StepObserver& observer = {});

}  // namespace lmd
