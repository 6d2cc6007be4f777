#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

#include "fedledger/nn/dataset.hpp"

namespace fedledger::nn {

// Architecture descriptor for the fixed-shape classifier:
//
//   [3x3 conv (conv_filters) -> relu -> max-pool] -> dense(hidden) -> relu
//   [-> dropout] -> dense(num_classes) -> softmax
//
// conv_filters == 0 drops the convolution stage (dense on raw pixels);
// hidden_units == 0 drops the hidden layer (softmax regression). Those
// degenerate shapes exist for small oracle tests; the simulator default is
// the full conv+pool+dense shape.
//
// The flat parameter layout (canonical wire order, see FORMATS.md):
//   conv W [filter][ky][kx][c], conv b, dense1 W [unit][feature], dense1 b,
//   dense2 W [class][feature], dense2 b.
struct ModelConfig {
  int height = 16;
  int width = 16;
  int channels = 1;
  int conv_filters = 8;
  int conv_kernel = 3;
  int pool = 2;
  int hidden_units = 64;
  int num_classes = 10;
  float dropout = 0.0f;

  bool has_conv() const { return conv_filters > 0; }
  bool has_hidden() const { return hidden_units > 0; }
  int conv_out_h() const { return height - conv_kernel + 1; }
  int conv_out_w() const { return width - conv_kernel + 1; }
  int pool_out_h() const { return conv_out_h() / pool; }
  int pool_out_w() const { return conv_out_w() / pool; }
  int input_dim() const { return height * width * channels; }

  // Feature width entering the dense stage.
  int feature_dim() const {
    return has_conv() ? conv_filters * pool_out_h() * pool_out_w()
                      : input_dim();
  }

  Eigen::Index param_dim() const;
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

struct Model {
  ModelConfig config;
  Eigen::VectorXf params;

  // Seeded uniform(-0.05, 0.05) initialization.
  static Model init(const ModelConfig& config, std::uint64_t seed);
};

// Softmax class probabilities for one flattened image. Throws ShapeError on
// dimension mismatch.
Eigen::VectorXf forward(const Model& model,
                        const Eigen::Ref<const Eigen::VectorXf>& input);

// Row-per-sample probabilities.
Eigen::MatrixXf forward_batch(const Model& model,
                              const Eigen::Ref<const Eigen::MatrixXf>& inputs);

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

// Mean cross-entropy over the batch and its gradient, computed in double.
// Throws PreconditionError on an empty batch.
LossGrad loss_and_grad(const Model& model, const LabeledDataset& batch);

double eval_loss(const Model& model, const LabeledDataset& data);
double eval_accuracy(const Model& model, const LabeledDataset& data);

struct SgdOptions {
  int epochs = 1;
  int batch_size = 1;
  float lr = 0.01f;
  std::uint64_t seed = 0;
};

// Plain minibatch SGD. Deterministic given the seed: the shuffle order and
// any dropout masks derive from it. Returns a new Model; the input is not
// touched. Throws DivergenceError (with the step index) if the loss goes
// non-finite.
Model sgd_train(const Model& model, const LabeledDataset& data,
                const SgdOptions& options);

// Mean over samples of the element-wise square of d log p(label|input) / dw:
// the diagonal empirical Fisher information for the labels carried by the
// dataset. Computed per sample in double; all entries >= 0.
Eigen::VectorXd per_sample_sq_grad(const Model& model,
                                   const LabeledDataset& data);

}  // namespace fedledger::nn
