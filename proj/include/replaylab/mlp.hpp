// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "replaylab/core.hpp"

namespace replaylab {

struct DenseLayer {
  Matrix weight;  // (in x out)
  std::vector<double> bias;
  Matrix grad_weight;
  std::vector<double> grad_bias;

  std::size_t inputs() const { return weight.rows; }
  std::size_t outputs() const { return weight.cols; }
};

// Activations kept by forward() for the matching backward() call.
struct ForwardCache {
  std::vector<Matrix> inputs;        // inputs[l] is the input of layer l
  std::vector<Matrix> preactivations; // per hidden layer, before ReLU
  Matrix logits;
  std::uint64_t generation = 0;       // model generation the cache belongs to
  bool valid = false;
};

struct LossResult {
  double mean = 0.0;
  std::vector<double> per_example;
  Matrix dlogits;  // gradient of `mean` w.r.t. the logits
};

// Test-only fault injection for the gradient checker.
enum class BackwardFault { None, FlipReluMask };

// Fully connected ReLU network with a linear head, trained by plain SGD.
class Mlp {
 public:
  Mlp() = default;

  // He-style initialization: weights ~ N(0, 2 / fan_in), biases zero.
  static Mlp init(std::span<const std::size_t> layer_dims, Rng& rng);
  // All parameters zero; used by tests and checkpoint loading.
  static Mlp zeros(std::span<const std::size_t> layer_dims);

  // Logits only; no cache is produced.
  Matrix forward(const Matrix& inputs) const;
  Matrix forward(const Matrix& inputs, ForwardCache& cache) const;

  // Accumulates parameter gradients of the loss whose logit gradient is dlogits.
  void backward(ForwardCache& cache, const Matrix& dlogits, BackwardFault fault = BackwardFault::None);

  // theta -= lr * grad, then grads are cleared.
  void sgd_step(double learning_rate);
  void zero_grad();

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t parameter_count() const;
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t input_dim() const { return dims_.front(); }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  // Flattened parameters (per layer: weights then bias) and their gradients.
  std::vector<double> parameters() const;
  std::vector<double> gradients() const;
  void set_parameters(std::span<const double> values);

  std::uint64_t parameter_checksum() const;

  void save(const std::filesystem::path& path) const;
  static Mlp load(const std::filesystem::path& path);

 private:
  explicit Mlp(std::vector<std::size_t> dims);

  std::vector<std::size_t> dims_;
  std::vector<DenseLayer> layers_;
  std::uint64_t generation_ = 1;
};

// Mean softmax cross-entropy with max-subtraction for stability.
LossResult softmax_cross_entropy(const Matrix& logits, std::span<const int> labels);

// Row-wise softmax.
Matrix softmax(const Matrix& logits);

// Matrix of stacked feature vectors.
Matrix stack_features(std::span<const Example> examples);
std::vector<int> labels_of(std::span<const Example> examples);

}  // namespace replaylab
