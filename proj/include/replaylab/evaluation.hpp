// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>
#include <vector>

#include "replaylab/bias_correction.hpp"
#include "replaylab/core.hpp"
#include "replaylab/datasets.hpp"
#include "replaylab/mlp.hpp"
#include "replaylab/sampling.hpp"

namespace replaylab {

// Anything mapping an (n x d) input batch to (n x K) logits.
using LogitFn = std::function<Matrix(const Matrix&)>;

LogitFn logits_of(const Mlp& model, const Correction& correction = {});

struct AccuracyReport {
  std::vector<double> per_task;
  double average = 0.0;
};

// Single-head accuracy on each task's test set; argmax over all outputs,
// ties resolved towards the lowest class id.
AccuracyReport average_final_accuracy(const LogitFn& logits, const TaskStream& stream);
AccuracyReport average_final_accuracy(const Mlp& model, const Correction& correction, const TaskStream& stream);

// Softmax mass per task, summed within each task and averaged over the
// pooled test sets of all tasks, then renormalized.
std::vector<double> task_prediction_distribution(const LogitFn& logits, const TaskStream& stream);
std::vector<double> task_prediction_distribution(const Mlp& model, const Correction& correction,
                                                 const TaskStream& stream);

// Mean over classes of (count - ideal)^2.
double buffer_balance_mse(std::span<const std::size_t> class_counts, double ideal_per_class);
double buffer_balance_mse(const ReplayBuffer& buffer, double ideal_per_class);

// KL(p || uniform) = sum p_i ln(p_i n), with 0 ln 0 = 0.
double kl_to_uniform(std::span<const double> distribution);

// Lowest index of the maximum entry.
std::size_t argmax(std::span<const double> values);

}  // namespace replaylab
