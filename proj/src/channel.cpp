#include "uavsim/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace uavsim {

std::vector<std::string> ChannelConfig::validate() const {
  if (!(beta0 > 0.0)) throw std::invalid_argument("channel.beta0 must be > 0");
  if (!(kappa >= 0.0)) throw std::invalid_argument("channel.kappa must be >= 0");
  if (!(noise_psd > 0.0)) {
    throw std::invalid_argument("channel.noise_psd must be > 0");
  }
  if (!std::isfinite(alpha_los) || !std::isfinite(alpha_nlos)) {
    throw std::invalid_argument("channel path-loss exponents must be finite");
  }
  std::vector<std::string> warnings;
  if (alpha_los < 2.0) warnings.emplace_back("channel.alpha_los < 2");
  if (alpha_nlos < alpha_los) {
    warnings.emplace_back("channel.alpha_nlos < channel.alpha_los");
  }
  return warnings;
}

double link_distance(Vec2 uav, Vec2 user, double altitude) {
  return std::sqrt((uav - user).squared_norm() + altitude * altitude);
}

double large_scale_gain(double distance, bool is_los, const ChannelConfig& cfg) {
  const double alpha = is_los ? cfg.alpha_los : cfg.alpha_nlos;
  return cfg.beta0 * std::pow(distance, -alpha);
}

double sample_fading_power(bool is_los, const ChannelConfig& cfg, Rng& rng) {
  // Scatter component: CN(0, sigma2) has real/imag parts N(0, sigma2/2).
  if (!is_los) {
    const double re = rng.normal() * std::numbers::sqrt2 / 2.0;
    const double im = rng.normal() * std::numbers::sqrt2 / 2.0;
    return re * re + im * im;
  }
  const double k = cfg.kappa;
  const double los_amp = std::sqrt(k / (k + 1.0));
  const double scatter_std = std::sqrt(1.0 / (2.0 * (k + 1.0)));
  const double phase = rng.angle();
  const double re = los_amp * std::cos(phase) + scatter_std * rng.normal();
  const double im = los_amp * std::sin(phase) + scatter_std * rng.normal();
  return re * re + im * im;
}

double achievable_rate(double bandwidth, double power, double snr_coeff) {
  if (bandwidth <= 0.0) return 0.0;
  return bandwidth * std::log2(1.0 + snr_coeff * power / bandwidth);
}

LinkBudget compute_link(Vec2 uav, double altitude, Vec2 user,
                        const UrbanMap& map, const ChannelConfig& cfg, Rng& rng) {
  LinkBudget link;
  link.distance = link_distance(uav, user, altitude);
  link.is_los = classify_link({uav.x, uav.y, altitude}, user, map).is_los;
  link.large_scale = large_scale_gain(link.distance, link.is_los, cfg);
  const double sampled = sample_fading_power(link.is_los, cfg, rng);
  link.fading_power =
      cfg.fading_mode == FadingMode::kInstantaneous ? sampled : 1.0;
  link.snr_coeff = link.large_scale * link.fading_power / cfg.noise_psd;
  return link;
}

}  // namespace uavsim
