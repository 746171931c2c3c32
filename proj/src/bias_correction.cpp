// SPDX-License-Identifier: Apache-2.0
#include "replaylab/bias_correction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace replaylab {
namespace {

void check_class(int k, std::size_t cols) {
  if (k < 0 || static_cast<std::size_t>(k) >= cols)
    throw Error("bias correction: class id " + std::to_string(k) + " outside " + std::to_string(cols) + " logits");
}

std::vector<int> all_columns(std::size_t cols) {
  std::vector<int> c(cols);
  std::iota(c.begin(), c.end(), 0);
  return c;
}

// Softmax over `classes` of one corrected row, written into probs (same order).
void softmax_over(std::span<const double> row, std::span<const int> classes, std::vector<double>& probs) {
  probs.resize(classes.size());
  double top = -INFINITY;
  for (int k : classes) top = std::max(top, row[static_cast<std::size_t>(k)]);
  double z = 0.0;
  for (std::size_t j = 0; j < classes.size(); ++j) z += (probs[j] = std::exp(row[static_cast<std::size_t>(classes[j])] - top));
  for (double& p : probs) p /= z;
}

// Position of each label within `classes`.
std::vector<std::size_t> label_positions(std::span<const int> labels, std::span<const int> classes) {
  std::vector<std::size_t> pos(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = std::find(classes.begin(), classes.end(), labels[i]);
    if (it == classes.end()) throw DataError("bias correction: label " + std::to_string(labels[i]) + " is not an active class");
    pos[i] = static_cast<std::size_t>(it - classes.begin());
  }
  return pos;
}

// Shared minibatch loop. `grad` accumulates d(loss)/d(params) for one example
// given its corrected-row softmax gradient g (over `classes`).
template <class Apply, class Accumulate, class Step>
void minibatch_descent(const Matrix& logits, std::span<const int> labels, std::span<const int> classes,
                       const BiasFitConfig& config, Rng& rng, Apply apply_row, Accumulate accumulate, Step step) {
  const std::size_t n = logits.rows;
  if (n == 0) throw Error("bias correction: no fitting examples");
  if (labels.size() != n) throw Error("bias correction: label count does not match logits");
  if (config.batch_size == 0) throw ConfigError("bias correction batch size must be positive");
  const std::vector<std::size_t> positions = label_positions(labels, classes);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> row(logits.cols), probs;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        apply_row(logits.row(i), row);
        softmax_over(row, classes, probs);
        probs[positions[i]] -= 1.0;
        accumulate(logits.row(i), probs);
      }
      step(static_cast<double>(end - start));
    }
  }
}

Matrix model_logits(const Mlp& model, const ReplayBuffer& buffer, std::vector<int>& labels) {
  if (buffer.empty()) throw Error("bias correction: empty replay buffer");
  std::vector<Example> items;
  items.reserve(buffer.size());
  for (std::size_t i : buffer.filled_slots()) {
    const StoredExample& s = buffer.slot(i);
    items.push_back(Example{s.features, s.label});
  }
  labels = labels_of(items);
  return model.forward(stack_features(items));
}

}  // namespace

Matrix apply_bic(const BicLayer& layer, const Matrix& logits) {
  Matrix q = logits;
  for (int k : layer.last_task_classes) check_class(k, logits.cols);
  for (std::size_t i = 0; i < q.rows; ++i)
    for (int k : layer.last_task_classes) {
      double& v = q(i, static_cast<std::size_t>(k));
      v = layer.alpha * v + layer.beta;
    }
  return q;
}

Matrix apply_cbic(const CbicLayer& layer, const Matrix& logits) {
  if (layer.task_of_class.size() < logits.cols)
    throw Error("apply_cbic: class " + std::to_string(layer.task_of_class.size()) + " has no task");
  for (std::size_t k = 0; k < logits.cols; ++k) {
    const int t = layer.task_of_class[k];
    if (t < 0 || static_cast<std::size_t>(t) >= layer.betas.size())
      throw Error("apply_cbic: class " + std::to_string(k) + " has no task");
  }
  Matrix q = logits;
  for (std::size_t i = 0; i < q.rows; ++i)
    for (std::size_t k = 0; k < q.cols; ++k) q(i, k) += layer.betas[static_cast<std::size_t>(layer.task_of_class[k])];
  return q;
}

Matrix apply_correction(const Correction& correction, const Matrix& logits) {
  if (const auto* bic = std::get_if<BicLayer>(&correction)) return apply_bic(*bic, logits);
  if (const auto* cbic = std::get_if<CbicLayer>(&correction)) return apply_cbic(*cbic, logits);
  return logits;
}

double corrected_loss(const Correction& correction, const Matrix& logits, std::span<const int> labels,
                      std::span<const int> classes) {
  const std::vector<int> cols = classes.empty() ? all_columns(logits.cols) : std::vector<int>(classes.begin(), classes.end());
  Matrix q;
  if (const auto* cbic = std::get_if<CbicLayer>(&correction)) {
    // Only active columns need a task.
    q = logits;
    for (std::size_t i = 0; i < q.rows; ++i)
      for (int k : cols) {
        const int t = cbic->task_of_class.at(static_cast<std::size_t>(k));
        if (t < 0) throw Error("corrected_loss: active class without task");
        q(i, static_cast<std::size_t>(k)) += cbic->betas.at(static_cast<std::size_t>(t));
      }
  } else {
    q = apply_correction(correction, logits);
  }
  const std::vector<std::size_t> pos = label_positions(labels, cols);
  std::vector<double> probs;
  double total = 0.0;
  for (std::size_t i = 0; i < q.rows; ++i) {
    softmax_over(q.row(i), cols, probs);
    total += -std::log(std::max(probs[pos[i]], 1e-300));
  }
  return q.rows ? total / static_cast<double>(q.rows) : 0.0;
}

BicLayer fit_bic_on_logits(const Matrix& logits, std::span<const int> labels, std::vector<int> last_task_classes,
                           std::span<const int> classes, const BiasFitConfig& config, Rng& rng) {
  if (last_task_classes.empty()) throw Error("fit_bic: last task has no classes");
  for (int k : last_task_classes) check_class(k, logits.cols);
  const std::vector<int> cols = classes.empty() ? all_columns(logits.cols) : std::vector<int>(classes.begin(), classes.end());

  BicLayer layer{1.0, 0.0, std::move(last_task_classes)};
  std::vector<bool> corrected(logits.cols, false);
  for (int k : layer.last_task_classes) corrected[static_cast<std::size_t>(k)] = true;

  double g_alpha = 0.0, g_beta = 0.0;
  minibatch_descent(
      logits, labels, cols, config, rng,
      [&](std::span<const double> o, std::vector<double>& q) {
        for (std::size_t k = 0; k < o.size(); ++k) q[k] = corrected[k] ? layer.alpha * o[k] + layer.beta : o[k];
      },
      [&](std::span<const double> o, const std::vector<double>& g) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
          const auto k = static_cast<std::size_t>(cols[j]);
          if (!corrected[k]) continue;
          g_alpha += g[j] * o[k];
          g_beta += g[j];
        }
      },
      [&](double batch) {
        layer.alpha -= config.learning_rate * g_alpha / batch;
        layer.beta -= config.learning_rate * g_beta / batch;
        g_alpha = g_beta = 0.0;
      });
  return layer;
}

CbicLayer fit_cbic_on_logits(const Matrix& logits, std::span<const int> labels, std::vector<int> task_of_class,
                             const BiasFitConfig& config, Rng& rng) {
  if (task_of_class.size() > logits.cols) throw Error("fit_cbic: partition covers more classes than logits");
  std::vector<int> cols;
  int task_count = 0;
  for (std::size_t k = 0; k < task_of_class.size(); ++k)
    if (task_of_class[k] >= 0) {
      cols.push_back(static_cast<int>(k));
      task_count = std::max(task_count, task_of_class[k] + 1);
    }
  if (cols.empty()) throw Error("fit_cbic: empty task partition");

  CbicLayer layer{std::vector<double>(static_cast<std::size_t>(task_count), 0.0), std::move(task_of_class)};
  std::vector<double> grads(layer.betas.size(), 0.0);
  minibatch_descent(
      logits, labels, cols, config, rng,
      [&](std::span<const double> o, std::vector<double>& q) {
        for (std::size_t k = 0; k < o.size(); ++k) {
          const int t = k < layer.task_of_class.size() ? layer.task_of_class[k] : -1;
          q[k] = t >= 0 ? o[k] + layer.betas[static_cast<std::size_t>(t)] : o[k];
        }
      },
      [&](std::span<const double>, const std::vector<double>& g) {
        for (std::size_t j = 0; j < cols.size(); ++j)
          grads[static_cast<std::size_t>(layer.task_of_class[static_cast<std::size_t>(cols[j])])] += g[j];
      },
      [&](double batch) {
        // betas[0] is pinned.
        for (std::size_t t = 1; t < layer.betas.size(); ++t) layer.betas[t] -= config.learning_rate * grads[t] / batch;
        std::fill(grads.begin(), grads.end(), 0.0);
      });
  return layer;
}

BicLayer fit_bic(const Mlp& model, const ReplayBuffer& buffer, std::vector<int> last_task_classes,
                 std::span<const int> seen_classes, const BiasFitConfig& config, Rng& rng) {
  std::vector<int> labels;
  const Matrix logits = model_logits(model, buffer, labels);
  return fit_bic_on_logits(logits, labels, std::move(last_task_classes), seen_classes, config, rng);
}

CbicLayer fit_cbic(const Mlp& model, const ReplayBuffer& buffer, std::vector<int> task_of_class,
                   const BiasFitConfig& config, Rng& rng) {
  std::vector<int> labels;
  const Matrix logits = model_logits(model, buffer, labels);
  return fit_cbic_on_logits(logits, labels, std::move(task_of_class), config, rng);
}

}  // namespace replaylab
