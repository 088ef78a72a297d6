#ifndef UAVSIM_TESTS_SUPPORT_PPO_TOY_HPP_
#define UAVSIM_TESTS_SUPPORT_PPO_TOY_HPP_

#include "uavsim/rl.hpp"

namespace uavsim::oracle {

// Small policy and a 3-transition buffer with ratios on both sides of the
// clip range and one inside it.
struct Toy {
  PpoConfig cfg;
  PolicyParameters policy;
  PpoBatch batch;
};

inline Toy make_toy() {
  Toy t;
  t.cfg.hidden = {6, 5};
  t.cfg.entropy_coef = 0.01;
  Rng rng(77);
  t.policy = make_policy(2, 16.0, t.cfg, rng);
  t.policy.actor.initialize(rng, 1.0);
  t.policy.log_std = Eigen::Vector2d(-0.3, 0.2);
  const int dim = t.policy.actor.input_size();
  t.batch.states = Eigen::MatrixXd::Random(dim, 3).cwiseAbs();
  t.batch.samples = Eigen::MatrixXd::Random(2, 3);
  t.batch.advantages = Eigen::Vector3d(1.3, -0.7, 0.4);
  t.batch.returns = Eigen::Vector3d(0.5, -1.0, 2.0);
  const Eigen::MatrixXd mean = t.policy.actor.forward(t.batch.states);
  t.batch.old_log_prob.resize(3);
  const double shift[3] = {0.05, -0.6, 0.6};  // inside, clipped low, clipped high
  for (int i = 0; i < 3; ++i) {
    t.batch.old_log_prob[i] =
        gaussian_log_prob(t.batch.samples.col(i), mean.col(i), t.policy.log_std) + shift[i];
  }
  return t;
}

}  // namespace uavsim::oracle

#endif  // UAVSIM_TESTS_SUPPORT_PPO_TOY_HPP_
