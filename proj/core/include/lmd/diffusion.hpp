#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lmd/latent.hpp"
#include "lmd/layout.hpp"

namespace lmd {

/// Variance schedule. Index conventions: betas, alphas and alpha_bars hold
/// the values for t = 1..T at positions 0..T-1; alpha_bar(0) is 1.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;

  [[nodiscard]] double beta(int t) const;
  [[nodiscard]] double alpha(int t) const;
  /// Cumulative product up to t, for t in 0..T.
  [[nodiscard]] double alpha_bar(int t) const;
};

/// Linear betas from beta_start to beta_end over T steps. Throws
/// std::domain_error unless 0 < beta_start <= beta_end < 1 and T >= 1.
[[nodiscard]] NoiseSchedule make_schedule(int T, double beta_start = 1e-4, double beta_end = 0.02);

/// One object contribution in a composite condition. `box` is in latent
/// pixels. `attenuation_mask` weights the object term per pixel; without it
/// the term applies with weight 1 everywhere.
struct ObjectTerm {
  LatentImage target;
  BoundingBox box;
  std::optional<RealGrid> attenuation_mask;
};

struct Condition {
  LatentImage background_target;
  std::vector<ObjectTerm> object_terms;

  /// Throws std::invalid_argument when grids disagree in shape.
  void validate() const;
};

/// Estimates the noise in x_t.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;
  [[nodiscard]] virtual LatentImage predict(const LatentImage& x_t, int t,
                                            const Condition& condition) const = 0;
};

/// Exact noise estimate when the clean data is distributed as
/// N(mean, data_std^2) per element:
///   eps(x, t) = s (x - a mean) / (a^2 data_std^2 + s^2),  a = sqrt(abar_t), s = sqrt(1 - abar_t).
/// With data_std = 0 this is (x - a mean) / s, which needs abar_t < 1.
[[nodiscard]] LatentImage gaussian_prior_eps(const LatentImage& x_t, const LatentImage& mean,
                                             double alpha_bar, double data_std);

/// Weight of the data mean in gaussian_prior_eps, a s / (a^2 data_std^2 + s^2).
[[nodiscard]] double gaussian_prior_mean_coefficient(double alpha_bar, double data_std);

/// Predictor for a fixed target, ignoring the condition.
[[nodiscard]] std::shared_ptr<NoisePredictor> make_analytic_predictor(
    const NoiseSchedule& schedule, LatentImage target, double data_std = 0.0);

/// Predictor for a composite condition. The data mean is
///   G = B + sum_k m_k (O_k - B)
/// with B the background target, O_k the object targets and m_k their
/// attenuation masks.
class CompositePredictor final : public NoisePredictor {
 public:
  CompositePredictor(NoiseSchedule schedule, double data_std);

  [[nodiscard]] LatentImage predict(const LatentImage& x_t, int t,
                                    const Condition& condition) const override;

  /// The composite data mean G.
  [[nodiscard]] static LatentImage composite_mean(const Condition& condition);

  /// Per-pixel L2 norm over channels of object term k's contribution to the
  /// noise estimate at step t.
  [[nodiscard]] RealGrid term_contribution(const Condition& condition, std::size_t k, int t) const;

  [[nodiscard]] const NoiseSchedule& schedule() const { return schedule_; }
  [[nodiscard]] double data_std() const { return data_std_; }

 private:
  NoiseSchedule schedule_;
  double data_std_;
};

/// Sum of squared element differences.
[[nodiscard]] double ddpm_loss(const LatentImage& eps_true, const LatentImage& eps_pred);

/// sqrt(abar_t) x0 + sqrt(1 - abar_t) noise, for t in 1..T.
[[nodiscard]] LatentImage forward_diffuse(const LatentImage& x0, int t, const NoiseSchedule& schedule,
                                          const LatentImage& noise);

/// Ancestral step t -> t-1 with sigma_t = sqrt(beta_t) and caller-supplied z.
[[nodiscard]] LatentImage ddpm_step(const LatentImage& x_t, int t, const NoiseSchedule& schedule,
                                    const NoisePredictor& predictor, const Condition& condition,
                                    const LatentImage& z);

/// Deterministic move of x between noise levels given a noise estimate:
///   x_to = sqrt(abar_to) (x - sqrt(1 - abar_from) eps) / sqrt(abar_from) + sqrt(1 - abar_to) eps.
/// Works in either direction.
[[nodiscard]] LatentImage ddim_transfer(const LatentImage& x, double alpha_bar_from,
                                        double alpha_bar_to, const LatentImage& eps);

/// Deterministic denoising step t_from -> t_to, t_from > t_to >= 0.
[[nodiscard]] LatentImage ddim_step(const LatentImage& x_t, int t_from, int t_to,
                                    const NoiseSchedule& schedule, const NoisePredictor& predictor,
                                    const Condition& condition);

/// Timesteps round_half_up(k T / n) for k = 0..n, increasing. n = 0 gives {0}.
[[nodiscard]] std::vector<int> step_grid(int T, int n_steps);

/// Latents at the grid timesteps: latents[k] is at timesteps[k], so
/// latents[0] is the clean end and latents.back() the noisiest.
struct Trajectory {
  std::vector<int> timesteps;
  std::vector<LatentImage> latents;

  [[nodiscard]] std::size_t n_steps() const { return latents.empty() ? 0 : latents.size() - 1; }
  [[nodiscard]] const LatentImage& clean() const { return latents.front(); }
  [[nodiscard]] const LatentImage& noisiest() const { return latents.back(); }
};

/// DDIM sampling from x_T (at timestep T) down to 0 over n_steps steps.
[[nodiscard]] Trajectory ddim_sample(const LatentImage& x_T, const NoiseSchedule& schedule,
                                     const NoisePredictor& predictor, const Condition& condition,
                                     int n_steps);

struct InversionOptions {
  /// Extra fixed-point passes per step. 0 evaluates the noise at the current
  /// latent; k > 0 re-evaluates it at the tentative next latent k times, so
  /// that the matching denoising step maps the result back to its input.
  int fixed_point_iters = 0;
};

/// DDIM in increasing-noise order from x0 to timestep T.
[[nodiscard]] Trajectory ddim_invert(const LatentImage& x0, const NoiseSchedule& schedule,
                                     const NoisePredictor& predictor, const Condition& condition,
                                     int n_steps, InversionOptions options = {});

}  // namespace lmd
