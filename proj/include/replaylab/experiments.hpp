// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "replaylab/gradcheck.hpp"
#include "replaylab/sampling.hpp"

namespace replaylab {

// Buffer-balance toy: 6 classes x 170 items in random order streamed into a
// 12-slot buffer (ideal: 2 per class). Loss-aware buffers see uniform random
// item losses since no model is trained.
struct BalanceToyConfig {
  std::size_t classes = 6;
  std::size_t per_class = 170;
  std::size_t capacity = 12;
  std::size_t repetitions = 500;
  std::size_t batch_size = 10;  // repetitions per comparison batch
  std::uint64_t seed = 0;
};

struct BalanceToyStats {
  Strategy strategy = Strategy::Reservoir;
  std::vector<double> mean_counts;  // per class, over repetitions
  std::vector<double> std_counts;   // per class, sample std over repetitions
  double mse_mean = 0.0;
  double mse_std = 0.0;
  std::vector<double> mse;          // per repetition
};

// One buffer-balance MSE per repetition for each strategy. Repetition r uses
// the same label stream for every strategy.
std::vector<BalanceToyStats> balance_toy(const BalanceToyConfig& config, const std::vector<Strategy>& strategies);

// Fraction of consecutive batches of `batch_size` repetitions whose mean MSE
// under `a` is strictly below that under `b`.
double batch_win_fraction(const BalanceToyStats& a, const BalanceToyStats& b, std::size_t batch_size);

// Frequency with which class 0 is absent from `capacity` uniform draws over
// `class_count` classes.
double omission_monte_carlo(std::size_t class_count, std::size_t capacity, std::size_t trials, std::uint64_t seed);

// Per-item counts over independent runs of an N-item stream with labels drawn
// uniformly from `class_count` classes and uniform random losses.
struct InclusionStudy {
  std::size_t runs = 0;
  std::vector<std::size_t> admitted;  // item entered the buffer on arrival
  std::vector<std::size_t> retained;  // item still stored after the last update
};

InclusionStudy inclusion_study(Strategy strategy, std::size_t items, std::size_t capacity, std::size_t class_count,
                               std::size_t runs, std::uint64_t seed);

// Probability that item n (0-based) is admitted on arrival.
double admission_probability(std::size_t n, std::size_t capacity);

// Fraction of items whose count lies within `sigmas` binomial standard
// deviations of runs * p(n).
double within_binomial_band(const std::vector<std::size_t>& counts, std::size_t runs,
                            const std::vector<double>& probabilities, double sigmas);

struct GradcheckNet {
  std::vector<std::size_t> dims;
  std::size_t batch = 0;
  GradcheckResult result;
};

// Random tiny nets: 1-2 hidden layers of width 1-8, 2-4 outputs, batch 1-6.
std::vector<GradcheckNet> gradcheck_suite(std::size_t nets, std::uint64_t seed,
                                          BackwardFault fault = BackwardFault::None);

}  // namespace replaylab
