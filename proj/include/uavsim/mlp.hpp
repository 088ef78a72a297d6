#ifndef UAVSIM_MLP_HPP_
#define UAVSIM_MLP_HPP_

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "uavsim/rng.hpp"

namespace uavsim {

// Fully connected network with tanh hidden layers and a linear output.
// All weights live in one flat vector (layer by layer, weight matrix in
// column-major order followed by the bias) so that optimizers and
// checkpoints can treat the network as a single parameter block.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> sizes);

  // Scaled-uniform init (fan-in); the last layer is multiplied by
  // `output_gain`.
  void initialize(Rng& rng, double output_gain = 1.0);

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t num_params() const { return static_cast<std::size_t>(params_.size()); }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  // Activations of every layer for a batch laid out as columns.
  struct Cache {
    std::vector<Eigen::MatrixXd> activations;
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;
  Eigen::VectorXd forward_one(const Eigen::VectorXd& x) const;

  // Adds dL/dparams to `grad` given dL/doutput for the cached batch.
  void backward(const Cache& cache, const Eigen::MatrixXd& d_out,
                Eigen::Ref<Eigen::VectorXd> grad) const;

 private:
  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;

  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;  // start of each layer's block
  Eigen::VectorXd params_;
};

}  // namespace uavsim

#endif  // UAVSIM_MLP_HPP_
