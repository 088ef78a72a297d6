#ifndef UAVSIM_RL_HPP_
#define UAVSIM_RL_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uavsim/allocation.hpp"
#include "uavsim/channel.hpp"
#include "uavsim/geometry.hpp"
#include "uavsim/mlp.hpp"
#include "uavsim/mobility.hpp"
#include "uavsim/rng.hpp"
#include "uavsim/scenario.hpp"

namespace uavsim {

// ---------------------------------------------------------------- MDP pieces

// (x_q, y_q, x_1, y_1, ..., x_K, y_K) divided by the map extent.
using MdpState = Eigen::VectorXd;

MdpState build_state(Vec2 uav, const std::vector<Vec2>& users, const UrbanMap& map);
// Inverse of build_state: the UAV position followed by the users.
std::vector<Vec2> denormalize_state(const MdpState& state, const UrbanMap& map);

// Radial projection onto the disc of radius v_max * delta.
Vec2 clip_action(Vec2 raw, double v_max, double delta);

// Proportional-fair reward with QoS, fronthaul and motion penalties. Rates
// and slacks in bit/s are converted to Mbit/s; the action is in metres.
double compute_reward(const std::vector<double>& rates,
                      const std::vector<double>& slacks, Vec2 action,
                      const RewardWeights& weights, const AllocParams& params);

// Reward assigned to a slot whose allocation is infeasible.
double infeasible_penalty(const RewardWeights& weights, const AllocParams& params,
                          std::size_t num_users);

// Single-cluster K-means: the user centroid, moved out of any building
// footprint it lands in.
Vec2 kmeans_init(const std::vector<Vec2>& users, const UrbanMap& map);

// ---------------------------------------------------------------- world

enum class AllocatorKind { kHeuristic, kDualAscent };

struct SlotRecord {
  int slot = 0;
  Vec2 uav;     // after the move
  Vec2 action;  // executed displacement
  std::vector<UserState> users;
  std::vector<LinkBudget> links;
  SlotAllocation alloc;
  double reward = 0.0;
  bool terminal = false;  // allocation infeasible and termination enabled
};

// One episode of the scenario: user mobility, UAV kinematics, channel
// sampling and per-slot allocation. All randomness comes from streams
// derived from `seed` (initial placement, mobility, fading, UAV rejection).
class UavEnvironment {
 public:
  UavEnvironment(const ScenarioConfig& cfg, std::uint64_t seed,
                 AllocatorKind allocator = AllocatorKind::kHeuristic,
                 bool terminate_on_infeasible = true);

  const ScenarioConfig& config() const { return cfg_; }
  Vec2 uav() const { return uav_; }
  const MobilityWorld& world() const { return world_; }
  std::vector<Vec2> user_positions() const;
  MdpState state() const;
  int slot() const { return slot_; }
  bool done() const { return done_; }

  // Clips `raw_action`, moves the UAV, advances users, samples channels,
  // allocates and scores the slot.
  SlotRecord step(Vec2 raw_action);

 private:
  Vec2 move_uav(Vec2 action);

  ScenarioConfig cfg_;
  UrbanMap tall_;  // buildings reaching the UAV altitude
  AllocatorKind allocator_;
  bool terminate_on_infeasible_;
  Rng mobility_rng_;
  Rng fading_rng_;
  Rng uav_rng_;
  MobilityWorld world_;
  Vec2 uav_;
  int slot_ = 0;
  bool done_ = false;
};

// ---------------------------------------------------------------- policy

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t t = 0;
};

// Welford accumulator for the scale of discounted returns.
struct RunningStats {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x);
  double stddev() const;
};

// Gaussian actor (mean from an MLP, state-independent log std) and MLP
// critic. Actions are produced in units of action_scale = v_max * delta.
struct PolicyParameters {
  Mlp actor;
  Mlp critic;
  Eigen::Vector2d log_std = Eigen::Vector2d::Zero();
  double action_scale = 1.0;
  double learning_rate = 3e-4;
  AdamState adam;
  std::int64_t updates = 0;
  RunningStats return_stats;

  std::size_t num_params() const;
  // actor | log_std | critic
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& theta);
};

PolicyParameters make_policy(std::size_t num_users, double action_scale,
                             const PpoConfig& cfg, Rng& rng);

// Deterministic action: the clipped actor mean, in metres.
Vec2 act_online(const PolicyParameters& policy, const MdpState& state);

double value_estimate(const PolicyParameters& policy, const MdpState& state);

// log N(u; mean, diag(exp(log_std))^2).
double gaussian_log_prob(const Eigen::Vector2d& u, const Eigen::Vector2d& mean,
                         const Eigen::Vector2d& log_std);

enum class BaselineKind { kStationaryCentroid, kFollowCentroid };

const char* to_string(BaselineKind kind);
BaselineKind baseline_from_string(const std::string& s);

// Displacement chosen by a baseline for the environment's current slot.
Vec2 baseline_action(BaselineKind kind, const UavEnvironment& env);

// ---------------------------------------------------------------- rollouts

struct Transition {
  MdpState state;
  Eigen::Vector2d sample;  // pre-clip Gaussian draw, action units
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;  // terminal (no bootstrap)
};

struct Trajectory {
  std::vector<Transition> steps;
  std::vector<SlotRecord> slots;
  MdpState final_state;  // bootstrap state when the horizon truncates
  bool terminated = false;

  double total_reward() const;
};

// Runs the policy for up to the scenario horizon. With `deterministic` the
// actor mean is used and nothing is sampled from `policy_rng`.
Trajectory rollout_episode(const PolicyParameters& policy, UavEnvironment& env,
                           Rng& policy_rng, bool deterministic = false);

// ---------------------------------------------------------------- PPO

// Flattened minibatch: one column per sample.
struct PpoBatch {
  Eigen::MatrixXd states;
  Eigen::MatrixXd samples;  // 2 x N
  Eigen::VectorXd old_log_prob;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  Eigen::Index size() const { return states.cols(); }
};

struct LossTerms {
  double policy = 0.0;  // negated clipped surrogate
  double value = 0.0;
  double entropy = 0.0;
  double total = 0.0;
};

// PPO loss on a batch and its gradient with respect to flatten().
LossTerms ppo_loss(const PolicyParameters& policy, const PpoBatch& batch,
                   const PpoConfig& cfg, Eigen::VectorXd* grad = nullptr);

// GAE over one trajectory given the value estimates of every state and of
// the bootstrap state (ignored when the trajectory terminated). Rewards are
// divided by `reward_scale` first.
void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                 double bootstrap_value, bool terminated, double gamma,
                 double lambda, double reward_scale, std::vector<double>& advantages,
                 std::vector<double>& returns);

struct UpdateStats {
  LossTerms loss;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  bool aborted = false;
};

// One PPO update over the gathered trajectories. On a non-finite loss the
// parameters are restored, the learning rate halved and `aborted` set.
UpdateStats ppo_update(const std::vector<Trajectory>& buffer,
                       PolicyParameters& policy, const PpoConfig& cfg, Rng& rng);

struct TrainResult {
  PolicyParameters policy;
  std::vector<double> curve;  // mean episode reward per iteration
  std::vector<UpdateStats> stats;
};

using TrainProgress = std::function<void(int iteration, double mean_reward,
                                         const UpdateStats& stats)>;

// Outer training loop: each iteration draws fresh episodes (new user
// placements), collects rollouts and runs one update. Throws
// std::runtime_error after three consecutive aborted updates.
TrainResult train(const ScenarioConfig& scenario, std::uint64_t seed,
                  const TrainProgress& progress = {});

// ---------------------------------------------------------------- checkpoints

// Binary container: magic, version, scenario fingerprint, layer shapes,
// scalars, parameters and optimizer moments, all little-endian.
void save_checkpoint(const std::string& path, const PolicyParameters& policy,
                     const std::string& fingerprint);
// Throws std::runtime_error on a malformed file or when the stored shapes
// differ from `expected_layers_actor` / `expected_layers_critic` (if given).
PolicyParameters load_checkpoint(const std::string& path,
                                 std::string* fingerprint = nullptr,
                                 const std::vector<int>* expected_actor = nullptr,
                                 const std::vector<int>* expected_critic = nullptr);

}  // namespace uavsim

#endif  // UAVSIM_RL_HPP_
