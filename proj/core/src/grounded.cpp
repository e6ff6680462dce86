#include "lmd/grounded.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "lmd/rng.hpp"

namespace lmd {

namespace {

constexpr int kSubsamples = 4;
constexpr double kShapeExtent = 0.8;

bool shape_contains(ShapeKind shape, double px, double py, double cx, double cy, double hw,
                    double hh) {
  switch (shape) {
    case ShapeKind::Circle: {
      const double u = (px - cx) / hw;
      const double v = (py - cy) / hh;
      return u * u + v * v <= 1.0;
    }
    case ShapeKind::Square:
      return std::abs(px - cx) <= hw && std::abs(py - cy) <= hh;
    case ShapeKind::Triangle: {
      // Apex at the top center, base along the bottom edge.
      const double top = cy - hh;
      const double bottom = cy + hh;
      if (py < top || py > bottom) {
        return false;
      }
      return std::abs(px - cx) <= hw * (py - top) / (bottom - top);
    }
  }
  return false;
}

void require_generation_shape(const LatentShape& shape) {
  shape.validate();
}

}  // namespace

void GenerationConfig::validate() const {
  if (!(r >= 0.0 && r <= 1.0)) {
    throw std::invalid_argument("r must lie in [0, 1]");
  }
  if (!(attenuation >= 0.0 && attenuation <= 1.0)) {
    throw std::invalid_argument("attenuation must lie in [0, 1]");
  }
  if (!(mask_threshold > 0.0 && mask_threshold < 1.0)) {
    throw std::invalid_argument("mask_threshold must lie in (0, 1)");
  }
  if (T < 1 || n_steps < 1 || n_steps > T) {
    throw std::invalid_argument("need 1 <= n_steps <= T");
  }
  if (!(data_std > 0.0 && std::isfinite(data_std))) {
    throw std::invalid_argument("data_std must be positive");
  }
  if (inversion_iters < 0) {
    throw std::invalid_argument("inversion_iters must be >= 0");
  }
  if (canvas.width <= 0 || canvas.height <= 0) {
    throw std::invalid_argument("canvas extents must be positive");
  }
  latent_shape.validate();
  (void)make_schedule(T, beta_start, beta_end);
}

NoiseSchedule GenerationConfig::schedule() const { return make_schedule(T, beta_start, beta_end); }

int GenerationConfig::free_steps() const {
  return static_cast<int>(std::floor(r * n_steps + 1e-9));
}

void to_json(nlohmann::json& j, const GenerationConfig& c) {
  j = nlohmann::json{{"r", c.r},
                     {"n_steps", c.n_steps},
                     {"seed", c.seed},
                     {"attenuation", c.attenuation},
                     {"mask_threshold", c.mask_threshold},
                     {"latent_shape", c.latent_shape},
                     {"canvas", {c.canvas.width, c.canvas.height}},
                     {"T", c.T},
                     {"beta_start", c.beta_start},
                     {"beta_end", c.beta_end},
                     {"data_std", c.data_std},
                     {"inversion_iters", c.inversion_iters}};
}

void from_json(const nlohmann::json& j, GenerationConfig& c) {
  if (!j.is_object()) {
    throw std::invalid_argument("generation config must be a JSON object");
  }
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) {
      j.at(key).get_to(field);
    }
  };
  read("r", c.r);
  read("n_steps", c.n_steps);
  read("seed", c.seed);
  read("attenuation", c.attenuation);
  read("mask_threshold", c.mask_threshold);
  read("latent_shape", c.latent_shape);
  if (j.contains("canvas")) {
    const auto& cv = j.at("canvas");
    c.canvas = Canvas{cv.at(0).get<int>(), cv.at(1).get<int>()};
  }
  read("T", c.T);
  read("beta_start", c.beta_start);
  read("beta_end", c.beta_end);
  read("data_std", c.data_std);
  read("inversion_iters", c.inversion_iters);
}

BoundingBox to_latent_box(const BoundingBox& box, Canvas canvas, LatentShape shape) {
  Layout one;
  one.objects.push_back(ObjectSpec{"box", box});
  one.canvas = canvas;
  return scale_layout(one, Canvas{shape.width, shape.height}).objects.front().box;
}

RealGrid shape_coverage(ShapeKind shape, const BoundingBox& box, int height, int width) {
  RealGrid cov(height, width, 0.0);
  const double cx = box.x + box.w / 2.0;
  const double cy = box.y + box.h / 2.0;
  const double hw = kShapeExtent * box.w / 2.0;
  const double hh = kShapeExtent * box.h / 2.0;
  const int y0 = std::max(0, box.y);
  const int y1 = std::min(height, box.bottom());
  const int x0 = std::max(0, box.x);
  const int x1 = std::min(width, box.right());
  constexpr double kTotal = kSubsamples * kSubsamples;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSubsamples; ++sy) {
        for (int sx = 0; sx < kSubsamples; ++sx) {
          const double px = x + (sx + 0.5) / kSubsamples;
          const double py = y + (sy + 0.5) / kSubsamples;
          hits += shape_contains(shape, px, py, cx, cy, hw, hh) ? 1 : 0;
        }
      }
      cov.at(y, x) = hits / kTotal;
    }
  }
  return cov;
}

LatentImage render_target(const ObjectDescriptor& object, const BoundingBox& box,
                          const BackgroundDescriptor& background, LatentShape shape) {
  require_generation_shape(shape);
  if (box.w < 1 || box.h < 1 || box.right() <= 0 || box.bottom() <= 0 || box.x >= shape.width ||
      box.y >= shape.height) {
    throw std::domain_error("object box is degenerate or outside the latent grid");
  }
  const auto bg = encode_color(background.color, shape.channels);
  const auto fg = encode_color(object.color, shape.channels);
  const RealGrid cov = shape_coverage(object.shape, box, shape.height, shape.width);
  LatentImage out(shape);
  for (int c = 0; c < shape.channels; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    for (int y = 0; y < shape.height; ++y) {
      for (int x = 0; x < shape.width; ++x) {
        const double k = cov.at(y, x);
        out.at(c, y, x) = k == 0.0 ? bg[uc] : k == 1.0 ? fg[uc] : bg[uc] + k * (fg[uc] - bg[uc]);
      }
    }
  }
  return out;
}

ObjectTerm make_object_term(const ObjectDescriptor& object, const BoundingBox& box,
                            const BackgroundDescriptor& background, LatentShape shape,
                            double attenuation) {
  ObjectTerm term{render_target(object, box, background, shape), box,
                  RealGrid(shape.height, shape.width, attenuation)};
  const auto fg = encode_color(object.color, shape.channels);
  const BinaryMask inside = box_mask(box, shape.height, shape.width);
  for (int y = 0; y < shape.height; ++y) {
    for (int x = 0; x < shape.width; ++x) {
      if (inside.at(y, x) != 0) {
        term.attenuation_mask->at(y, x) = 1.0;
      } else {
        for (int c = 0; c < shape.channels; ++c) {
          term.target.at(c, y, x) = fg[static_cast<std::size_t>(c)];
        }
      }
    }
  }
  return term;
}

Condition composite_condition(const Layout& layout, const GenerationConfig& config) {
  const BackgroundDescriptor bg = describe_background(layout.background_prompt);
  Condition cond{solid_latent(bg.color, config.latent_shape), {}};
  for (const auto& obj : layout.objects) {
    const BoundingBox box = to_latent_box(obj.box, layout.canvas, config.latent_shape);
    cond.object_terms.push_back(make_object_term(describe_object(obj.description), box, bg,
                                                 config.latent_shape, config.attenuation));
  }
  return cond;
}

SingleObjectResult generate_single_object(const ObjectSpec& spec, std::string_view background_prompt,
                                          const GenerationConfig& config) {
  config.validate();
  const auto schedule = config.schedule();
  const BackgroundDescriptor bg = describe_background(background_prompt);
  const BoundingBox box = to_latent_box(spec.box, config.canvas, config.latent_shape);
  Condition cond{solid_latent(bg.color, config.latent_shape),
                 {make_object_term(describe_object(spec.description), box, bg, config.latent_shape,
                                   config.attenuation)}};
  const CompositePredictor predictor(schedule, config.data_std);
  Rng rng(config.seed);
  const LatentImage x_T = LatentImage::gaussian(config.latent_shape, rng);
  Trajectory traj = ddim_sample(x_T, schedule, predictor, cond, config.n_steps);

  RealGrid saliency(config.latent_shape.height, config.latent_shape.width, 0.0);
  for (std::size_t k = 1; k < traj.timesteps.size(); ++k) {
    const RealGrid step = predictor.term_contribution(cond, 0, traj.timesteps[k]);
    for (std::size_t i = 0; i < step.data().size(); ++i) {
      saliency.data()[i] += step.data()[i];
    }
  }
  const double peak = *std::max_element(saliency.data().begin(), saliency.data().end());
  if (peak > 0.0) {
    for (double& v : saliency.data()) {
      v /= peak;
    }
  }
  return SingleObjectResult{std::move(traj.latents.front()), std::move(saliency), std::move(cond), box};
}

LatentImage generate_background_only(std::string_view background_prompt,
                                     const GenerationConfig& config) {
  config.validate();
  const auto schedule = config.schedule();
  const BackgroundDescriptor bg = describe_background(background_prompt);
  const Condition cond{solid_latent(bg.color, config.latent_shape), {}};
  const CompositePredictor predictor(schedule, config.data_std);
  Rng rng(config.seed);
  const LatentImage x_T = LatentImage::gaussian(config.latent_shape, rng);
  return ddim_sample(x_T, schedule, predictor, cond, config.n_steps).latents.front();
}

MaskResult refine_mask(const RealGrid& saliency, double threshold) {
  if (saliency.data().empty()) {
    throw std::domain_error("refine_mask: empty saliency map");
  }
  int sy = 0;
  int sx = 0;
  double peak = saliency.at(0, 0);
  for (int y = 0; y < saliency.height(); ++y) {
    for (int x = 0; x < saliency.width(); ++x) {
      if (saliency.at(y, x) > peak) {
        peak = saliency.at(y, x);
        sy = y;
        sx = x;
      }
    }
  }
  if (!(peak > 0.0) || !std::isfinite(peak)) {
    throw std::domain_error("refine_mask: saliency maximum must be positive");
  }
  const double level = threshold * peak;
  BinaryMask mask(saliency.height(), saliency.width(), 0);
  std::vector<std::pair<int, int>> stack{{sy, sx}};
  mask.at(sy, sx) = 1;
  while (!stack.empty()) {
    const auto [y, x] = stack.back();
    stack.pop_back();
    constexpr int kDy[] = {-1, 1, 0, 0};
    constexpr int kDx[] = {0, 0, -1, 1};
    for (int d = 0; d < 4; ++d) {
      const int ny = y + kDy[d];
      const int nx = x + kDx[d];
      if (mask.contains(ny, nx) && mask.at(ny, nx) == 0 && saliency.at(ny, nx) >= level) {
        mask.at(ny, nx) = 1;
        stack.emplace_back(ny, nx);
      }
    }
  }
  const auto bounds = mask_bounds(mask);
  return MaskResult{std::move(mask), *bounds};
}

ForegroundAsset build_foreground_asset(const ObjectSpec& spec, std::string_view background_prompt,
                                       const GenerationConfig& config, const MaskRefiner& refiner) {
  SingleObjectResult single = generate_single_object(spec, background_prompt, config);
  const auto& sal = single.saliency.data();
  // An object drawn in its background's color leaves no saliency; use its box.
  MaskResult refined =
      std::any_of(sal.begin(), sal.end(), [](double v) { return v > 0.0; })
          ? refiner.refine(single.saliency, config.mask_threshold)
          : MaskResult{box_mask(single.latent_box, single.saliency.height(), single.saliency.width()),
                       single.latent_box};
  const auto bounds = mask_bounds(refined.mask);
  if (!bounds) {
    throw std::domain_error("mask refiner returned an empty mask for '" + spec.description + "'");
  }
  const auto schedule = config.schedule();
  const CompositePredictor predictor(schedule, config.data_std);
  ForegroundAsset asset;
  asset.trajectory = ddim_invert(single.sample, schedule, predictor, single.condition,
                                 config.n_steps, InversionOptions{config.inversion_iters});
  const LatentImage back =
      ddim_sample(asset.trajectory.noisiest(), schedule, predictor, single.condition, config.n_steps)
          .latents.front();
  asset.roundtrip_error = max_abs_diff(back, single.sample);
  asset.mask = std::move(refined.mask);
  asset.mask_outer_box = *bounds;
  asset.spec = spec;
  asset.latent_box = single.latent_box;
  asset.saliency = std::move(single.saliency);
  return asset;
}

std::vector<ForegroundAsset> build_assets(const Layout& layout, const GenerationConfig& config,
                                          int parallelism, const MaskRefiner& refiner) {
  if (parallelism < 1) {
    throw std::invalid_argument("parallelism must be >= 1");
  }
  const std::size_t n = layout.objects.size();
  std::vector<ForegroundAsset> assets(n);
  std::vector<std::exception_ptr> errors(n);
  auto build_one = [&](std::size_t k) {
    try {
      GenerationConfig cfg = config;
      cfg.canvas = layout.canvas;
      cfg.seed = mix_seed(config.seed, k + 1);
      assets[k] = build_foreground_asset(layout.objects[k], layout.background_prompt, cfg, refiner);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(parallelism), n);
  if (workers <= 1) {
    for (std::size_t k = 0; k < n; ++k) build_one(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < n; k = next++) build_one(k);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return assets;
}

Offset placement_offset(const ForegroundAsset& asset) {
  const Point target = box_center(asset.latent_box);
  const Point current = box_center(asset.mask_outer_box);
  return Offset{static_cast<int>(std::floor(target.x - current.x + 0.5)),
                static_cast<int>(std::floor(target.y - current.y + 0.5))};
}

BinaryMask placed_mask(const ForegroundAsset& asset) {
  const Offset off = placement_offset(asset);
  BinaryMask out(asset.mask.height(), asset.mask.width(), 0);
  for (int y = 0; y < asset.mask.height(); ++y) {
    for (int x = 0; x < asset.mask.width(); ++x) {
      if (asset.mask.at(y, x) != 0 && out.contains(y + off.dy, x + off.dx)) {
        out.at(y + off.dy, x + off.dx) = 1;
      }
    }
  }
  return out;
}

LatentImage place_foreground(const LatentImage& background_latent, const ForegroundAsset& asset,
                             const LatentImage& step_latent) {
  require_same_shape(background_latent, step_latent, "place_foreground");
  const auto& shape = background_latent.shape();
  if (asset.mask.height() != shape.height || asset.mask.width() != shape.width) {
    throw std::invalid_argument("place_foreground: mask does not match the latent grid");
  }
  const Offset off = placement_offset(asset);
  LatentImage out = background_latent;
  for (int y = 0; y < shape.height; ++y) {
    for (int x = 0; x < shape.width; ++x) {
      const int ty = y + off.dy;
      const int tx = x + off.dx;
      if (asset.mask.at(y, x) == 0 || ty < 0 || ty >= shape.height || tx < 0 || tx >= shape.width) {
        continue;
      }
      for (int c = 0; c < shape.channels; ++c) {
        out.at(c, ty, tx) = step_latent.at(c, y, x);
      }
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const ComposeRecord& record) {
  nlohmann::json offsets = nlohmann::json::array();
  for (const auto& o : record.offsets) {
    offsets.push_back({o.dx, o.dy});
  }
  j = nlohmann::json{{"seed", record.seed},
                     {"n_steps", record.n_steps},
                     {"frozen_steps", record.frozen_steps},
                     {"free_steps", record.free_steps},
                     {"offsets", offsets}};
}

ComposeResult compose_and_generate(const Layout& layout, const std::vector<ForegroundAsset>& assets,
                                   const GenerationConfig& config, const StepObserver& observer) {
  config.validate();
  if (assets.size() != layout.objects.size()) {
    throw std::invalid_argument("compose_and_generate: " + std::to_string(assets.size()) +
                                " assets for " + std::to_string(layout.objects.size()) +
                                " layout objects");
  }
  for (std::size_t k = 0; k < assets.size(); ++k) {
    const auto& a = assets[k];
    if (a.spec != layout.objects[k]) {
      throw std::invalid_argument("compose_and_generate: asset " + std::to_string(k) +
                                  " was built for a different object");
    }
    if (a.trajectory.n_steps() != static_cast<std::size_t>(config.n_steps) ||
        a.trajectory.clean().shape() != config.latent_shape) {
      throw std::invalid_argument("compose_and_generate: asset " + std::to_string(k) +
                                  " trajectory does not match the generation config");
    }
  }
  const auto schedule = config.schedule();
  const CompositePredictor predictor(schedule, config.data_std);
  const Condition cond = composite_condition(layout, config);
  const std::vector<int> grid = step_grid(schedule.T, config.n_steps);

  ComposeResult result;
  result.record.seed = config.seed;
  result.record.n_steps = config.n_steps;
  result.record.frozen_steps = config.frozen_steps();
  result.record.free_steps = config.free_steps();

  Rng rng(config.seed);
  LatentImage x = LatentImage::gaussian(config.latent_shape, rng);
  for (const auto& a : assets) {
    x = place_foreground(x, a, a.trajectory.noisiest());
    result.record.offsets.push_back(placement_offset(a));
  }
  result.composed_noise = x;

  for (int k = config.n_steps; k >= 1; --k) {
    const int step = config.n_steps - k;
    const auto uk = static_cast<std::size_t>(k);
    x = ddim_step(x, grid[uk], grid[uk - 1], schedule, predictor, cond);
    if (step < result.record.frozen_steps) {
      for (const auto& a : assets) {
        x = place_foreground(x, a, a.trajectory.latents[uk - 1]);
      }
    }
    if (observer) {
      observer(step, grid[uk - 1], x);
    }
  }
  result.image = std::move(x);
  return result;
}

}  // namespace lmd
