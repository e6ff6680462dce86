#include "lmd/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lmd {

namespace {

void require_timestep(const NoiseSchedule& schedule, int t, int lowest, const char* what) {
  if (t < lowest || t > schedule.T) {
    throw std::out_of_range(std::string(what) + ": timestep " + std::to_string(t) +
                            " outside [" + std::to_string(lowest) + ", " +
                            std::to_string(schedule.T) + "]");
  }
}

void require_n_steps(const NoiseSchedule& schedule, int n_steps) {
  if (n_steps < 0 || n_steps > schedule.T) {
    throw std::out_of_range("n_steps " + std::to_string(n_steps) + " outside [0, " +
                            std::to_string(schedule.T) + "]");
  }
}

LatentImage predict_checked(const NoisePredictor& predictor, const LatentImage& x, int t,
                            const Condition& condition) {
  LatentImage eps = predictor.predict(x, t, condition);
  require_same_shape(eps, x, "noise predictor output");
  eps.require_finite("noise predictor output");
  return eps;
}

class AnalyticPredictor final : public NoisePredictor {
 public:
  AnalyticPredictor(NoiseSchedule schedule, LatentImage target, double data_std)
      : schedule_(std::move(schedule)), target_(std::move(target)), data_std_(data_std) {}

  LatentImage predict(const LatentImage& x_t, int t, const Condition&) const override {
    return gaussian_prior_eps(x_t, target_, schedule_.alpha_bar(t), data_std_);
  }

 private:
  NoiseSchedule schedule_;
  LatentImage target_;
  double data_std_;
};

}  // namespace

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > T) {
    throw std::out_of_range("beta index " + std::to_string(t) + " outside [1, " + std::to_string(T) + "]");
  }
  return betas[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha(int t) const {
  if (t < 1 || t > T) {
    throw std::out_of_range("alpha index " + std::to_string(t) + " outside [1, " + std::to_string(T) + "]");
  }
  return alphas[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > T) {
    throw std::out_of_range("alpha_bar index " + std::to_string(t) + " outside [0, " +
                            std::to_string(T) + "]");
  }
  return t == 0 ? 1.0 : alpha_bars[static_cast<std::size_t>(t - 1)];
}

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
  if (T < 1) {
    throw std::domain_error("schedule needs T >= 1");
  }
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw std::domain_error("schedule needs 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.T = T;
  s.betas.resize(static_cast<std::size_t>(T));
  s.alphas.resize(static_cast<std::size_t>(T));
  s.alpha_bars.resize(static_cast<std::size_t>(T));
  double bar = 1.0;
  for (int i = 0; i < T; ++i) {
    const double beta =
        T == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / static_cast<double>(T - 1);
    s.betas[static_cast<std::size_t>(i)] = beta;
    s.alphas[static_cast<std::size_t>(i)] = 1.0 - beta;
    bar *= 1.0 - beta;
    s.alpha_bars[static_cast<std::size_t>(i)] = bar;
  }
  return s;
}

void Condition::validate() const {
  for (const auto& term : object_terms) {
    require_same_shape(term.target, background_target, "condition object term");
    if (term.attenuation_mask &&
        (term.attenuation_mask->height() != background_target.shape().height ||
         term.attenuation_mask->width() != background_target.shape().width)) {
      throw std::invalid_argument("condition attenuation mask does not match the latent grid");
    }
  }
}

double gaussian_prior_mean_coefficient(double alpha_bar, double data_std) {
  const double a = std::sqrt(alpha_bar);
  const double s = std::sqrt(1.0 - alpha_bar);
  const double denom = a * a * data_std * data_std + s * s;
  return denom == 0.0 ? 0.0 : a * s / denom;
}

LatentImage gaussian_prior_eps(const LatentImage& x_t, const LatentImage& mean, double alpha_bar,
                               double data_std) {
  require_same_shape(x_t, mean, "gaussian_prior_eps");
  if (!(alpha_bar > 0.0 && alpha_bar <= 1.0)) {
    throw std::domain_error("alpha_bar must lie in (0, 1]");
  }
  const double a = std::sqrt(alpha_bar);
  const double s = std::sqrt(1.0 - alpha_bar);
  LatentImage eps(x_t.shape());
  auto& out = eps.data();
  const auto& x = x_t.data();
  const auto& mu = mean.data();
  if (data_std == 0.0) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double r = x[i] - a * mu[i];
      if (s == 0.0) {
        // On the data point the noise is zero in the limit; elsewhere undefined.
        if (r != 0.0) {
          throw std::domain_error("point-mass noise estimate is undefined off the target at t = 0");
        }
        out[i] = 0.0;
      } else {
        out[i] = r / s;
      }
    }
  } else {
    const double denom = a * a * data_std * data_std + s * s;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = s * (x[i] - a * mu[i]) / denom;
    }
  }
  eps.require_finite("gaussian_prior_eps");
  return eps;
}

std::shared_ptr<NoisePredictor> make_analytic_predictor(const NoiseSchedule& schedule,
                                                        LatentImage target, double data_std) {
  if (data_std < 0.0 || !std::isfinite(data_std)) {
    throw std::domain_error("data_std must be finite and non-negative");
  }
  target.require_finite("analytic predictor target");
  return std::make_shared<AnalyticPredictor>(schedule, std::move(target), data_std);
}

CompositePredictor::CompositePredictor(NoiseSchedule schedule, double data_std)
    : schedule_(std::move(schedule)), data_std_(data_std) {
  if (data_std < 0.0 || !std::isfinite(data_std)) {
    throw std::domain_error("data_std must be finite and non-negative");
  }
}

LatentImage CompositePredictor::composite_mean(const Condition& condition) {
  condition.validate();
  LatentImage g = condition.background_target;
  const auto& shape = g.shape();
  const auto& b = condition.background_target;
  for (const auto& term : condition.object_terms) {
    for (int c = 0; c < shape.channels; ++c) {
      for (int y = 0; y < shape.height; ++y) {
        for (int x = 0; x < shape.width; ++x) {
          const double m = term.attenuation_mask ? term.attenuation_mask->at(y, x) : 1.0;
          g.at(c, y, x) += m * (term.target.at(c, y, x) - b.at(c, y, x));
        }
      }
    }
  }
  return g;
}

LatentImage CompositePredictor::predict(const LatentImage& x_t, int t,
                                        const Condition& condition) const {
  return gaussian_prior_eps(x_t, composite_mean(condition), schedule_.alpha_bar(t), data_std_);
}

RealGrid CompositePredictor::term_contribution(const Condition& condition, std::size_t k,
                                               int t) const {
  condition.validate();
  const auto& term = condition.object_terms.at(k);
  const auto& b = condition.background_target;
  const auto& shape = b.shape();
  const double coef = gaussian_prior_mean_coefficient(schedule_.alpha_bar(t), data_std_);
  RealGrid out(shape.height, shape.width, 0.0);
  for (int y = 0; y < shape.height; ++y) {
    for (int x = 0; x < shape.width; ++x) {
      double sq = 0.0;
      for (int c = 0; c < shape.channels; ++c) {
        const double d = term.target.at(c, y, x) - b.at(c, y, x);
        sq += d * d;
      }
      const double m = term.attenuation_mask ? term.attenuation_mask->at(y, x) : 1.0;
      out.at(y, x) = std::abs(m) * coef * std::sqrt(sq);
    }
  }
  return out;
}

double ddpm_loss(const LatentImage& eps_true, const LatentImage& eps_pred) {
  require_same_shape(eps_true, eps_pred, "ddpm_loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < eps_true.size(); ++i) {
    const double d = eps_true.data()[i] - eps_pred.data()[i];
    sum += d * d;
  }
  if (!std::isfinite(sum)) {
    throw std::domain_error("ddpm_loss: non-finite result");
  }
  return sum;
}

LatentImage forward_diffuse(const LatentImage& x0, int t, const NoiseSchedule& schedule,
                            const LatentImage& noise) {
  require_timestep(schedule, t, 1, "forward_diffuse");
  require_same_shape(x0, noise, "forward_diffuse");
  const double bar = schedule.alpha_bar(t);
  const double a = std::sqrt(bar);
  const double s = std::sqrt(1.0 - bar);
  LatentImage out(x0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = a * x0.data()[i] + s * noise.data()[i];
  }
  out.require_finite("forward_diffuse");
  return out;
}

LatentImage ddpm_step(const LatentImage& x_t, int t, const NoiseSchedule& schedule,
                      const NoisePredictor& predictor, const Condition& condition,
                      const LatentImage& z) {
  require_timestep(schedule, t, 1, "ddpm_step");
  require_same_shape(x_t, z, "ddpm_step");
  const LatentImage eps = predict_checked(predictor, x_t, t, condition);
  const double alpha = schedule.alpha(t);
  const double coef = (1.0 - alpha) / std::sqrt(1.0 - schedule.alpha_bar(t));
  const double sigma = std::sqrt(schedule.beta(t));
  const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
  LatentImage out(x_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = inv_sqrt_alpha * (x_t.data()[i] - coef * eps.data()[i]) + sigma * z.data()[i];
  }
  out.require_finite("ddpm_step");
  return out;
}

LatentImage ddim_transfer(const LatentImage& x, double alpha_bar_from, double alpha_bar_to,
                          const LatentImage& eps) {
  require_same_shape(x, eps, "ddim_transfer");
  if (!(alpha_bar_from > 0.0 && alpha_bar_from <= 1.0 && alpha_bar_to > 0.0 && alpha_bar_to <= 1.0)) {
    throw std::domain_error("ddim_transfer: alpha_bar must lie in (0, 1]");
  }
  const double s_from = std::sqrt(1.0 - alpha_bar_from);
  const double a_from = std::sqrt(alpha_bar_from);
  const double s_to = std::sqrt(1.0 - alpha_bar_to);
  const double a_to = std::sqrt(alpha_bar_to);
  LatentImage out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double e = eps.data()[i];
    out.data()[i] = a_to * ((x.data()[i] - s_from * e) / a_from) + s_to * e;
  }
  out.require_finite("ddim_transfer");
  return out;
}

LatentImage ddim_step(const LatentImage& x_t, int t_from, int t_to, const NoiseSchedule& schedule,
                      const NoisePredictor& predictor, const Condition& condition) {
  require_timestep(schedule, t_from, 1, "ddim_step");
  if (!(t_to >= 0 && t_to < t_from)) {
    throw std::invalid_argument("ddim_step needs t_from > t_to >= 0, got " +
                                std::to_string(t_from) + " -> " + std::to_string(t_to));
  }
  const LatentImage eps = predict_checked(predictor, x_t, t_from, condition);
  return ddim_transfer(x_t, schedule.alpha_bar(t_from), schedule.alpha_bar(t_to), eps);
}

std::vector<int> step_grid(int T, int n_steps) {
  if (T < 1 || n_steps < 0 || n_steps > T) {
    throw std::out_of_range("step_grid needs 0 <= n_steps <= T");
  }
  std::vector<int> grid(static_cast<std::size_t>(n_steps) + 1, 0);
  for (int k = 1; k <= n_steps; ++k) {
    // round_half_up(k T / n) in integers.
    const long long num = 2LL * k * T + n_steps;
    grid[static_cast<std::size_t>(k)] = static_cast<int>(num / (2LL * n_steps));
  }
  return grid;
}

Trajectory ddim_sample(const LatentImage& x_T, const NoiseSchedule& schedule,
                       const NoisePredictor& predictor, const Condition& condition, int n_steps) {
  require_n_steps(schedule, n_steps);
  x_T.require_finite("ddim_sample input");
  Trajectory traj;
  traj.timesteps = step_grid(schedule.T, n_steps);
  traj.latents.resize(traj.timesteps.size());
  traj.latents.back() = x_T;
  for (int k = n_steps; k >= 1; --k) {
    const auto uk = static_cast<std::size_t>(k);
    traj.latents[uk - 1] = ddim_step(traj.latents[uk], traj.timesteps[uk], traj.timesteps[uk - 1],
                                     schedule, predictor, condition);
  }
  return traj;
}

Trajectory ddim_invert(const LatentImage& x0, const NoiseSchedule& schedule,
                       const NoisePredictor& predictor, const Condition& condition, int n_steps,
                       InversionOptions options) {
  require_n_steps(schedule, n_steps);
  if (options.fixed_point_iters < 0) {
    throw std::invalid_argument("fixed_point_iters must be >= 0");
  }
  x0.require_finite("ddim_invert input");
  Trajectory traj;
  traj.timesteps = step_grid(schedule.T, n_steps);
  traj.latents.reserve(traj.timesteps.size());
  traj.latents.push_back(x0);
  for (std::size_t k = 0; k + 1 < traj.timesteps.size(); ++k) {
    const int t_cur = traj.timesteps[k];
    const int t_next = traj.timesteps[k + 1];
    const double bar_cur = schedule.alpha_bar(t_cur);
    const double bar_next = schedule.alpha_bar(t_next);
    const LatentImage& x_cur = traj.latents[k];
    LatentImage x_next =
        ddim_transfer(x_cur, bar_cur, bar_next, predict_checked(predictor, x_cur, t_cur, condition));
    for (int i = 0; i < options.fixed_point_iters; ++i) {
      x_next = ddim_transfer(x_cur, bar_cur, bar_next,
                             predict_checked(predictor, x_next, t_next, condition));
    }
    traj.latents.push_back(std::move(x_next));
  }
  return traj;
}

}  // namespace lmd
