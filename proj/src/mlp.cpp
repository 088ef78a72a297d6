#include "uavsim/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace uavsim {

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("mlp needs at least two layer sizes");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) {
      throw std::invalid_argument("mlp layer sizes must be positive");
    }
    offsets_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l + 1]) * static_cast<std::size_t>(sizes_[l] + 1);
  }
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
}

void Mlp::initialize(Rng& rng, double output_gain) {
  const std::size_t layers = offsets_.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const int fan_in = sizes_[l];
    const int fan_out = sizes_[l + 1];
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    if (l + 1 == layers) limit *= output_gain;
    const std::size_t n = static_cast<std::size_t>(fan_in) * static_cast<std::size_t>(fan_out);
    for (std::size_t i = 0; i < n; ++i) {
      params_[static_cast<Eigen::Index>(offsets_[l] + i)] = rng.uniform(-limit, limit);
    }
    for (int i = 0; i < fan_out; ++i) {
      params_[static_cast<Eigen::Index>(offsets_[l] + n + static_cast<std::size_t>(i))] = 0.0;
    }
  }
}

Eigen::Map<const Eigen::MatrixXd> Mlp::weight(std::size_t layer) const {
  return {params_.data() + offsets_[layer], sizes_[layer + 1], sizes_[layer]};
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(std::size_t layer) const {
  const std::size_t n = static_cast<std::size_t>(sizes_[layer + 1]) *
                        static_cast<std::size_t>(sizes_[layer]);
  return {params_.data() + offsets_[layer] + n, sizes_[layer + 1]};
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache* cache) const {
  if (x.rows() != sizes_.front()) throw std::invalid_argument("mlp input size mismatch");
  const std::size_t layers = offsets_.size();
  if (cache != nullptr) {
    cache->activations.clear();
    cache->activations.push_back(x);
  }
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = weight(l) * h;
    z.colwise() += bias(l);
    if (l + 1 < layers) z = z.array().tanh().matrix();
    h = std::move(z);
    if (cache != nullptr) cache->activations.push_back(h);
  }
  return h;
}

Eigen::VectorXd Mlp::forward_one(const Eigen::VectorXd& x) const {
  return forward(x).col(0);
}

void Mlp::backward(const Cache& cache, const Eigen::MatrixXd& d_out,
                   Eigen::Ref<Eigen::VectorXd> grad) const {
  const std::size_t layers = offsets_.size();
  Eigen::MatrixXd delta = d_out;  // dL/dz of the current layer
  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::MatrixXd& input = cache.activations[l];
    const std::size_t n = static_cast<std::size_t>(sizes_[l + 1]) *
                          static_cast<std::size_t>(sizes_[l]);
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets_[l] + n, sizes_[l + 1]);
    gw.noalias() += delta * input.transpose();
    gb += delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = weight(l).transpose() * delta;
    // input = tanh(z) of the previous layer, so dtanh = 1 - input^2.
    delta = back.array() * (1.0 - input.array().square());
  }
}

}  // namespace uavsim
