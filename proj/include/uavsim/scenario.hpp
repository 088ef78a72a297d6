#ifndef UAVSIM_SCENARIO_HPP_
#define UAVSIM_SCENARIO_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "uavsim/allocation.hpp"
#include "uavsim/channel.hpp"
#include "uavsim/geometry.hpp"
#include "uavsim/mobility.hpp"

namespace uavsim {

// Weights of the per-slot reward. Rates enter in Mbit/s, so eps, lambda and
// eta are per Mbit/s; mu_action multiplies the squared displacement in m^2.
struct RewardWeights {
  double eps = 1.0;
  double lambda_qos = 1.0;
  double eta_fronthaul = 1.0;
  double mu_action = 1e-3;
  // Terminal penalty on an infeasible slot, in multiples of the floor
  // reward K |log(eps + R_min)|.
  double penalty_factor = 1e3;

  void validate() const;
};

struct PpoConfig {
  double gamma = 0.99;
  double lambda_gae = 0.95;
  double clip = 0.2;
  double learning_rate = 3e-4;
  int epochs = 10;
  int minibatch = 64;
  double entropy_coef = 0.01;
  int episodes_per_update = 4;
  int iterations = 300;  // M
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  std::vector<int> hidden = {128, 128};
  double init_log_std = 0.0;  // in units of v_max * delta

  void validate() const;
};

struct ScenarioConfig {
  std::string name = "custom";
  UrbanMap map;
  std::vector<std::size_t> group_sizes;
  std::size_t individuals = 0;
  MobilityConfig mobility;
  ChannelConfig channel;
  AllocParams alloc;
  double altitude = 100.0;      // m
  double v_max = 16.0;          // m/s
  double slot_duration = 1.0;   // s
  int horizon = 120;            // slots
  RewardWeights reward;
  PpoConfig ppo;
  std::uint64_t seed = 1;

  std::size_t num_users() const;
  double max_step() const { return v_max * slot_duration; }
  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

inline constexpr int kScenarioSchemaVersion = 1;

// Buildings on a jittered rows x cols grid with heights in [h_lo, h_hi],
// reproducible from `seed`.
UrbanMap generate_grid_map(double x_max, double y_max, int rows, int cols,
                           double h_lo, double h_hi, std::uint64_t seed);

// Built-in presets: "paper-s4" (K = 22) and "paper-s4-k20" (two groups of 4
// plus 12 individuals). Throws std::invalid_argument for unknown names.
ScenarioConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// Reads a JSON scenario, overlaying it on `base`. Unknown keys and invalid
// values are rejected with the offending field named. Throws
// std::invalid_argument (schema) or std::runtime_error (I/O).
ScenarioConfig load_scenario(const std::string& path, const ScenarioConfig& base);
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig scenario_from_json_text(const std::string& text,
                                       const ScenarioConfig& base);

// Canonical JSON text (sorted keys, fixed formatting).
std::string scenario_to_json(const ScenarioConfig& cfg);

// 64-bit hash of the canonical JSON with the seed and PPO block removed, as
// 16 hex digits. Identifies the environment a policy was trained on.
std::string scenario_fingerprint(const ScenarioConfig& cfg);

}  // namespace uavsim

#endif  // UAVSIM_SCENARIO_HPP_
