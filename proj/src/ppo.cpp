#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "uavsim/rl.hpp"

namespace uavsim {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

}  // namespace

void RunningStats::push(double x) {
  count += 1.0;
  const double d = x - mean;
  mean += d / count;
  m2 += d * (x - mean);
}

double RunningStats::stddev() const {
  if (count < 2.0) return 1.0;
  const double s = std::sqrt(m2 / (count - 1.0));
  return s > 1e-8 ? s : 1.0;
}

std::size_t PolicyParameters::num_params() const {
  return actor.num_params() + 2 + critic.num_params();
}

Eigen::VectorXd PolicyParameters::flatten() const {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(num_params()));
  const auto na = static_cast<Eigen::Index>(actor.num_params());
  const auto nc = static_cast<Eigen::Index>(critic.num_params());
  theta.head(na) = actor.params();
  theta.segment(na, 2) = log_std;
  theta.tail(nc) = critic.params();
  return theta;
}

void PolicyParameters::unflatten(const Eigen::VectorXd& theta) {
  if (theta.size() != static_cast<Eigen::Index>(num_params())) {
    throw std::invalid_argument("parameter vector size mismatch");
  }
  const auto na = static_cast<Eigen::Index>(actor.num_params());
  const auto nc = static_cast<Eigen::Index>(critic.num_params());
  actor.params() = theta.head(na);
  log_std = theta.segment(na, 2);
  critic.params() = theta.tail(nc);
}

PolicyParameters make_policy(std::size_t num_users, double action_scale,
                             const PpoConfig& cfg, Rng& rng) {
  const int in = 2 + 2 * static_cast<int>(num_users);
  PolicyParameters p;
  p.actor = Mlp(layer_sizes(in, cfg.hidden, 2));
  p.critic = Mlp(layer_sizes(in, cfg.hidden, 1));
  p.actor.initialize(rng, 0.01);
  p.critic.initialize(rng, 1.0);
  p.log_std.setConstant(cfg.init_log_std);
  p.action_scale = action_scale;
  p.learning_rate = cfg.learning_rate;
  const auto n = static_cast<Eigen::Index>(p.num_params());
  p.adam.m = Eigen::VectorXd::Zero(n);
  p.adam.v = Eigen::VectorXd::Zero(n);
  return p;
}

Vec2 act_online(const PolicyParameters& policy, const MdpState& state) {
  const Eigen::VectorXd mean = policy.actor.forward_one(state);
  const Vec2 raw{policy.action_scale * mean[0], policy.action_scale * mean[1]};
  return clip_action(raw, policy.action_scale, 1.0);
}

double value_estimate(const PolicyParameters& policy, const MdpState& state) {
  return policy.critic.forward_one(state)[0];
}

double gaussian_log_prob(const Eigen::Vector2d& u, const Eigen::Vector2d& mean,
                         const Eigen::Vector2d& log_std) {
  double lp = -kLog2Pi;
  for (int d = 0; d < 2; ++d) {
    const double z = (u[d] - mean[d]) * std::exp(-log_std[d]);
    lp += -0.5 * z * z - log_std[d];
  }
  return lp;
}

double Trajectory::total_reward() const {
  double r = 0.0;
  for (const Transition& t : steps) r += t.reward;
  return r;
}

Trajectory rollout_episode(const PolicyParameters& policy, UavEnvironment& env,
                           Rng& policy_rng, bool deterministic) {
  Trajectory traj;
  const Eigen::Vector2d sigma = policy.log_std.array().exp();
  while (!env.done()) {
    Transition t;
    t.state = env.state();
    const Eigen::VectorXd mean = policy.actor.forward_one(t.state);
    t.sample = mean.head<2>();
    if (!deterministic) {
      for (int d = 0; d < 2; ++d) t.sample[d] += sigma[d] * policy_rng.normal();
    }
    t.log_prob = gaussian_log_prob(t.sample, mean.head<2>(), policy.log_std);
    t.value = value_estimate(policy, t.state);
    const Vec2 raw{policy.action_scale * t.sample[0], policy.action_scale * t.sample[1]};
    SlotRecord rec = env.step(raw);
    t.reward = rec.reward;
    t.done = rec.terminal;
    traj.terminated = rec.terminal;
    traj.steps.push_back(std::move(t));
    traj.slots.push_back(std::move(rec));
  }
  traj.final_state = env.state();
  return traj;
}

LossTerms ppo_loss(const PolicyParameters& policy, const PpoBatch& batch,
                   const PpoConfig& cfg, Eigen::VectorXd* grad) {
  const Eigen::Index n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  Mlp::Cache actor_cache;
  Mlp::Cache critic_cache;
  const Eigen::MatrixXd mean = policy.actor.forward(batch.states, &actor_cache);
  const Eigen::MatrixXd value = policy.critic.forward(batch.states, &critic_cache);
  const Eigen::Array2d inv_var = (-2.0 * policy.log_std.array()).exp();

  LossTerms loss;
  Eigen::MatrixXd d_mean = Eigen::MatrixXd::Zero(2, n);
  Eigen::Vector2d d_log_std = Eigen::Vector2d::Zero();
  Eigen::MatrixXd d_value(1, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2d u = batch.samples.col(i);
    const Eigen::Vector2d m = mean.col(i);
    const double lp = gaussian_log_prob(u, m, policy.log_std);
    const double ratio = std::exp(lp - batch.old_log_prob[i]);
    const double adv = batch.advantages[i];
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
    loss.policy -= std::min(unclipped, clipped) * inv_n;
    if (unclipped <= clipped) {
      const double g = -adv * ratio * inv_n;  // dL/dlogp
      for (int d = 0; d < 2; ++d) {
        const double diff = u[d] - m[d];
        d_mean(d, i) = g * diff * inv_var[d];
        d_log_std[d] += g * (diff * diff * inv_var[d] - 1.0);
      }
    }
    const double err = value(0, i) - batch.returns[i];
    loss.value += cfg.value_coef * err * err * inv_n;
    d_value(0, i) = 2.0 * cfg.value_coef * err * inv_n;
  }
  loss.entropy = policy.log_std.sum() + (1.0 + kLog2Pi);
  loss.total = loss.policy + loss.value - cfg.entropy_coef * loss.entropy;

  if (grad != nullptr) {
    grad->setZero(static_cast<Eigen::Index>(policy.num_params()));
    const auto na = static_cast<Eigen::Index>(policy.actor.num_params());
    const auto nc = static_cast<Eigen::Index>(policy.critic.num_params());
    policy.actor.backward(actor_cache, d_mean, grad->head(na));
    grad->segment(na, 2) = d_log_std - cfg.entropy_coef * Eigen::Vector2d::Ones();
    policy.critic.backward(critic_cache, d_value, grad->tail(nc));
  }
  return loss;
}

void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                 double bootstrap_value, bool terminated, double gamma,
                 double lambda, double reward_scale, std::vector<double>& advantages,
                 std::vector<double>& returns) {
  const std::size_t n = rewards.size();
  advantages.assign(n, 0.0);
  returns.assign(n, 0.0);
  double next_value = terminated ? 0.0 : bootstrap_value;
  double running = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double delta = rewards[t] / reward_scale + gamma * next_value - values[t];
    running = delta + gamma * lambda * running;
    advantages[t] = running;
    returns[t] = running + values[t];
    next_value = values[t];
  }
}

UpdateStats ppo_update(const std::vector<Trajectory>& buffer,
                       PolicyParameters& policy, const PpoConfig& cfg, Rng& rng) {
  std::size_t total = 0;
  for (const Trajectory& t : buffer) total += t.steps.size();
  if (total == 0) throw std::invalid_argument("ppo_update needs a nonempty buffer");

  // Reward scale: spread of the discounted returns seen so far.
  const RunningStats return_stats0 = policy.return_stats;
  for (const Trajectory& t : buffer) {
    double g = 0.0;
    for (std::size_t i = t.steps.size(); i-- > 0;) {
      g = t.steps[i].reward + cfg.gamma * g;
      policy.return_stats.push(g);
    }
  }
  const double scale = policy.return_stats.stddev();

  const Eigen::Index dim = policy.actor.input_size();
  PpoBatch all;
  all.states.resize(dim, static_cast<Eigen::Index>(total));
  all.samples.resize(2, static_cast<Eigen::Index>(total));
  all.old_log_prob.resize(static_cast<Eigen::Index>(total));
  all.advantages.resize(static_cast<Eigen::Index>(total));
  all.returns.resize(static_cast<Eigen::Index>(total));
  Eigen::Index col = 0;
  for (const Trajectory& t : buffer) {
    const auto len = static_cast<Eigen::Index>(t.steps.size());
    if (len == 0) continue;
    Eigen::MatrixXd states(dim, len + 1);
    for (Eigen::Index i = 0; i < len; ++i) states.col(i) = t.steps[static_cast<std::size_t>(i)].state;
    states.col(len) = t.final_state;
    const Eigen::MatrixXd v = policy.critic.forward(states);
    std::vector<double> rewards, values, adv, ret;
    for (Eigen::Index i = 0; i < len; ++i) {
      rewards.push_back(t.steps[static_cast<std::size_t>(i)].reward);
      values.push_back(v(0, i));
    }
    compute_gae(rewards, values, v(0, len), t.terminated, cfg.gamma, cfg.lambda_gae,
                scale, adv, ret);
    for (Eigen::Index i = 0; i < len; ++i) {
      const Transition& tr = t.steps[static_cast<std::size_t>(i)];
      all.states.col(col) = tr.state;
      all.samples.col(col) = tr.sample;
      all.old_log_prob[col] = tr.log_prob;
      all.advantages[col] = adv[static_cast<std::size_t>(i)];
      all.returns[col] = ret[static_cast<std::size_t>(i)];
      ++col;
    }
  }
  const double adv_mean = all.advantages.mean();
  const double adv_var =
      (all.advantages.array() - adv_mean).square().sum() / static_cast<double>(total);
  all.advantages = (all.advantages.array() - adv_mean) / (std::sqrt(adv_var) + 1e-8);

  const Eigen::VectorXd theta0 = policy.flatten();
  const AdamState adam0 = policy.adam;
  UpdateStats stats;
  std::vector<Eigen::Index> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = static_cast<Eigen::Index>(i);
  const auto mb = static_cast<std::size_t>(cfg.minibatch);
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kAdamEps = 1e-8;
  Eigen::VectorXd grad;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = total; i-- > 1;) {
      std::swap(order[i], order[static_cast<std::size_t>(rng.below(i + 1))]);
    }
    for (std::size_t start = 0; start < total; start += mb) {
      const std::size_t end = std::min(total, start + mb);
      PpoBatch b;
      const auto m = static_cast<Eigen::Index>(end - start);
      b.states.resize(dim, m);
      b.samples.resize(2, m);
      b.old_log_prob.resize(m);
      b.advantages.resize(m);
      b.returns.resize(m);
      for (Eigen::Index j = 0; j < m; ++j) {
        const Eigen::Index src = order[start + static_cast<std::size_t>(j)];
        b.states.col(j) = all.states.col(src);
        b.samples.col(j) = all.samples.col(src);
        b.old_log_prob[j] = all.old_log_prob[src];
        b.advantages[j] = all.advantages[src];
        b.returns[j] = all.returns[src];
      }
      stats.loss = ppo_loss(policy, b, cfg, &grad);
      if (!std::isfinite(stats.loss.total) || !grad.allFinite()) {
        policy.unflatten(theta0);
        policy.adam = adam0;
        policy.return_stats = return_stats0;
        policy.learning_rate *= 0.5;
        stats.aborted = true;
        return stats;
      }
      const double gnorm = grad.norm();
      if (cfg.max_grad_norm > 0.0 && gnorm > cfg.max_grad_norm) {
        grad *= cfg.max_grad_norm / gnorm;
      }
      AdamState& a = policy.adam;
      ++a.t;
      a.m = kBeta1 * a.m + (1.0 - kBeta1) * grad;
      a.v = kBeta2 * a.v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(a.t));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(a.t));
      const Eigen::VectorXd step =
          (a.m / c1).array() / ((a.v / c2).array().sqrt() + kAdamEps);
      policy.unflatten(policy.flatten() - policy.learning_rate * step);
    }
  }

  // Diagnostics on the whole buffer with the updated parameters.
  const Eigen::MatrixXd mean = policy.actor.forward(all.states);
  double kl = 0.0;
  double clipped = 0.0;
  for (Eigen::Index i = 0; i < all.size(); ++i) {
    const double lp = gaussian_log_prob(all.samples.col(i), mean.col(i), policy.log_std);
    kl += all.old_log_prob[i] - lp;
    if (std::abs(std::exp(lp - all.old_log_prob[i]) - 1.0) > cfg.clip) clipped += 1.0;
  }
  stats.approx_kl = kl / static_cast<double>(total);
  stats.clip_fraction = clipped / static_cast<double>(total);
  ++policy.updates;
  return stats;
}

TrainResult train(const ScenarioConfig& scenario, std::uint64_t seed,
                  const TrainProgress& progress) {
  scenario.validate();
  const PpoConfig& cfg = scenario.ppo;
  Rng init_rng(derive_seed(seed, "policy-init"));
  TrainResult result;
  result.policy = make_policy(scenario.num_users(), scenario.max_step(), cfg, init_rng);
  const auto episodes = static_cast<std::size_t>(cfg.episodes_per_update);
  const unsigned workers =
      std::max(1u, std::min(std::thread::hardware_concurrency(),
                            static_cast<unsigned>(episodes)));
  int consecutive_aborts = 0;
  for (int m = 0; m < cfg.iterations; ++m) {
    std::vector<Trajectory> buffer(episodes);
    auto run = [&](std::size_t e) {
      const std::uint64_t index = static_cast<std::uint64_t>(m) * episodes + e;
      UavEnvironment env(scenario, derive_seed(seed, "train-episode", index));
      Rng policy_rng(derive_seed(seed, "train-policy", index));
      buffer[e] = rollout_episode(result.policy, env, policy_rng);
    };
    if (workers <= 1) {
      for (std::size_t e = 0; e < episodes; ++e) run(e);
    } else {
      std::vector<std::thread> pool;
      for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          for (std::size_t e = w; e < episodes; e += workers) run(e);
        });
      }
      for (std::thread& t : pool) t.join();
    }
    double mean_reward = 0.0;
    for (const Trajectory& t : buffer) mean_reward += t.total_reward();
    mean_reward /= static_cast<double>(episodes);
    result.curve.push_back(mean_reward);

    Rng shuffle(derive_seed(seed, "ppo-shuffle", static_cast<std::uint64_t>(m)));
    UpdateStats stats = ppo_update(buffer, result.policy, cfg, shuffle);
    consecutive_aborts = stats.aborted ? consecutive_aborts + 1 : 0;
    if (consecutive_aborts >= 3) {
      throw std::runtime_error("ppo update aborted three times in a row (non-finite loss)");
    }
    result.stats.push_back(stats);
    if (progress) progress(m, mean_reward, stats);
  }
  return result;
}

}  // namespace uavsim
