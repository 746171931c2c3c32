// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "replaylab/core.hpp"
#include "replaylab/mlp.hpp"
#include "replaylab/sampling.hpp"

namespace replaylab {

// q_k = alpha * o_k + beta on the classes of the most recent task.
struct BicLayer {
  double alpha = 1.0;
  double beta = 0.0;
  std::vector<int> last_task_classes;
};

// q_k = o_k + betas[task_of_class[k]]. Entries of task_of_class are -1 for
// classes that no fitted task covers yet.
struct CbicLayer {
  std::vector<double> betas;
  std::vector<int> task_of_class;
};

using Correction = std::variant<std::monostate, BicLayer, CbicLayer>;

struct BiasFitConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
};

Matrix apply_bic(const BicLayer& layer, const Matrix& logits);
Matrix apply_cbic(const CbicLayer& layer, const Matrix& logits);
// Identity for std::monostate.
Matrix apply_correction(const Correction& correction, const Matrix& logits);

// Mean cross-entropy of corrected logits; only columns in `classes` take
// part in the softmax and labels must be among them.
double corrected_loss(const Correction& correction, const Matrix& logits, std::span<const int> labels,
                      std::span<const int> classes);

// Fits (alpha, beta) from (1, 0) by minibatch gradient descent on the
// cross-entropy over precomputed logits. The softmax runs over the columns
// listed in `classes` (all columns when empty).
BicLayer fit_bic_on_logits(const Matrix& logits, std::span<const int> labels, std::vector<int> last_task_classes,
                           std::span<const int> classes, const BiasFitConfig& config, Rng& rng);

// Same for per-task offsets; betas start at zero and the first task's offset
// stays pinned at zero. `task_of_class` also defines which columns are active.
CbicLayer fit_cbic_on_logits(const Matrix& logits, std::span<const int> labels, std::vector<int> task_of_class,
                             const BiasFitConfig& config, Rng& rng);

// Buffer-driven fits. The model is only evaluated, never modified.
BicLayer fit_bic(const Mlp& model, const ReplayBuffer& buffer, std::vector<int> last_task_classes,
                 std::span<const int> seen_classes, const BiasFitConfig& config, Rng& rng);
CbicLayer fit_cbic(const Mlp& model, const ReplayBuffer& buffer, std::vector<int> task_of_class,
                   const BiasFitConfig& config, Rng& rng);

}  // namespace replaylab
