#ifndef UAVSIM_CHANNEL_HPP_
#define UAVSIM_CHANNEL_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "uavsim/geometry.hpp"
#include "uavsim/rng.hpp"

namespace uavsim {

// Which small-scale gain the allocator and rate computation see.
enum class FadingMode {
  kInstantaneous,  // the slot's sampled |g|^2
  kMean,           // E[|g|^2] = 1
};

struct ChannelConfig {
  double beta0 = 1e-5;       // linear gain at 1 m (-50 dB)
  double alpha_los = 2.2;
  double alpha_nlos = 3.5;
  double kappa = 10.0;       // linear Rician K-factor
  double noise_psd = 1e-20;  // W/Hz (-170 dBm/Hz)
  FadingMode fading_mode = FadingMode::kInstantaneous;

  // Throws on hard violations; returns human-readable warnings for soft ones
  // (exponents below 2, alpha_nlos < alpha_los).
  std::vector<std::string> validate() const;
};

struct LinkBudget {
  double distance = 0.0;     // m
  bool is_los = true;
  double large_scale = 0.0;  // beta_k
  double fading_power = 1.0; // |g_k|^2
  double snr_coeff = 0.0;    // a_k = beta_k |g_k|^2 / N0, Hz/W
};

double link_distance(Vec2 uav, Vec2 user, double altitude);

double large_scale_gain(double distance, bool is_los, const ChannelConfig& cfg);

// |g|^2 for one draw: Rician with K-factor kappa for LoS, Rayleigh for NLoS.
// Both branches have unit mean power.
double sample_fading_power(bool is_los, const ChannelConfig& cfg, Rng& rng);

// b log2(1 + a p / b), with the b -> 0 limit taken as 0.
double achievable_rate(double bandwidth, double power, double snr_coeff);

// Full per-user link budget for one slot. Fading is always drawn (so the
// random stream does not depend on the fading mode) but only used in
// instantaneous mode.
LinkBudget compute_link(Vec2 uav, double altitude, Vec2 user,
                        const UrbanMap& map, const ChannelConfig& cfg, Rng& rng);

// dB helpers for config values.
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_per_hz_to_watt_per_hz(double dbm) {
  return std::pow(10.0, (dbm - 30.0) / 10.0);
}

}  // namespace uavsim

#endif  // UAVSIM_CHANNEL_HPP_
