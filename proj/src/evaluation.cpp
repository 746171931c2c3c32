// SPDX-License-Identifier: Apache-2.0
#include "replaylab/evaluation.hpp"

#include <algorithm>
#include <cmath>

namespace replaylab {
namespace {

constexpr std::size_t kEvalChunk = 512;

// Calls fn(example index, logit row) for every test example of a task.
template <class Fn>
void for_each_test_logit(const LogitFn& logits, const TaskStream& stream, const Task& task, Fn fn) {
  const auto& test = stream.test->examples;
  for (std::size_t start = 0; start < task.test.size(); start += kEvalChunk) {
    const std::size_t end = std::min(task.test.size(), start + kEvalChunk);
    Matrix x(end - start, stream.test->feature_dim());
    for (std::size_t i = start; i < end; ++i) {
      const auto& f = test[task.test[i]].features;
      std::copy(f.begin(), f.end(), x.row(i - start).begin());
    }
    const Matrix out = logits(x);
    for (std::size_t i = start; i < end; ++i) fn(task.test[i], out.row(i - start));
  }
}

}  // namespace

LogitFn logits_of(const Mlp& model, const Correction& correction) {
  return [&model, correction](const Matrix& x) { return apply_correction(correction, model.forward(x)); };
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

AccuracyReport average_final_accuracy(const LogitFn& logits, const TaskStream& stream) {
  AccuracyReport r;
  for (const Task& task : stream.tasks) {
    if (task.test.empty()) throw DataError("average_final_accuracy: task without test examples");
    std::size_t correct = 0;
    for_each_test_logit(logits, stream, task, [&](std::size_t idx, std::span<const double> row) {
      if (static_cast<int>(argmax(row)) == stream.test->examples[idx].label) ++correct;
    });
    r.per_task.push_back(static_cast<double>(correct) / static_cast<double>(task.test.size()));
  }
  double sum = 0.0;
  for (double a : r.per_task) sum += a;
  r.average = r.per_task.empty() ? 0.0 : sum / static_cast<double>(r.per_task.size());
  return r;
}

AccuracyReport average_final_accuracy(const Mlp& model, const Correction& correction, const TaskStream& stream) {
  return average_final_accuracy(logits_of(model, correction), stream);
}

std::vector<double> task_prediction_distribution(const LogitFn& logits, const TaskStream& stream) {
  const std::vector<int> task_of = stream.task_of_class();
  std::vector<double> mass(stream.tasks.size(), 0.0);
  std::size_t pooled = 0;
  std::vector<double> probs;
  for (const Task& task : stream.tasks) {
    for_each_test_logit(logits, stream, task, [&](std::size_t, std::span<const double> row) {
      const double top = *std::max_element(row.begin(), row.end());
      probs.resize(row.size());
      double z = 0.0;
      for (std::size_t k = 0; k < row.size(); ++k) z += (probs[k] = std::exp(row[k] - top));
      for (std::size_t k = 0; k < row.size() && k < task_of.size(); ++k)
        if (task_of[k] >= 0) mass[static_cast<std::size_t>(task_of[k])] += probs[k] / z;
      ++pooled;
    });
  }
  if (pooled == 0) throw DataError("task_prediction_distribution: no test examples");
  double total = 0.0;
  for (double& m : mass) total += (m /= static_cast<double>(pooled));
  for (double& m : mass) m /= total;
  return mass;
}

std::vector<double> task_prediction_distribution(const Mlp& model, const Correction& correction,
                                                 const TaskStream& stream) {
  return task_prediction_distribution(logits_of(model, correction), stream);
}

double buffer_balance_mse(std::span<const std::size_t> class_counts, double ideal_per_class) {
  if (class_counts.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t c : class_counts) {
    const double d = static_cast<double>(c) - ideal_per_class;
    s += d * d;
  }
  return s / static_cast<double>(class_counts.size());
}

double buffer_balance_mse(const ReplayBuffer& buffer, double ideal_per_class) {
  const std::vector<std::size_t> counts = buffer.class_counts();
  return buffer_balance_mse(counts, ideal_per_class);
}

double kl_to_uniform(std::span<const double> distribution) {
  const auto n = static_cast<double>(distribution.size());
  double kl = 0.0;
  for (double p : distribution) {
    if (p < 0.0) throw Error("kl_to_uniform: negative probability");
    if (p > 0.0) kl += p * std::log(p * n);
  }
  return std::max(kl, 0.0);
}

}  // namespace replaylab
