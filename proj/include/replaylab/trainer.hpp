// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "replaylab/augmentation.hpp"
#include "replaylab/bias_correction.hpp"
#include "replaylab/datasets.hpp"
#include "replaylab/mlp.hpp"
#include "replaylab/sampling.hpp"
#include "replaylab/schedule.hpp"

namespace replaylab {

struct Tricks {
  bool iba = false;
  bool bic = false;
  bool cbic = false;
  bool elrd = false;
  bool brs = false;
  bool lars = false;  // combined loss-aware balanced reservoir; takes precedence over brs

  // "none" or the enabled tricks joined by '+', in canonical order.
  std::string label() const;
  bool any() const { return iba || bic || cbic || elrd || brs || lars; }
  bool operator==(const Tricks&) const = default;
};

// Parses a comma list of {iba,bic,cbic,elrd,brs,lars} or "none".
Tricks parse_tricks(const std::string& list);

struct TrainConfig {
  std::size_t buffer_capacity = 500;
  std::size_t replay_batch_size = 32;
  std::size_t stream_batch_size = 10;
  std::size_t epochs_per_task = 1;
  double lr0 = 0.1;
  double decay_fraction = 1.0 / 6.0;
  Tricks tricks;
  // When false the buffer is still filled but never rehearsed, so bias
  // corrections can be fitted on top of plain fine-tuning.
  bool replay = true;
  bool ring_buffer = false;
  bool stream_augment = false;
  std::size_t aug_max_shift = 2;
  double aug_hflip_prob = 0.5;
  std::vector<std::size_t> hidden{256, 256};
  BiasFitConfig bias_fit;
  std::uint64_t seed = 0;

  Strategy strategy() const;
  void validate() const;
  // "joint", "sgd" (no rehearsal) or "er".
  std::string method(bool joint = false) const;
};

// Generators of one run, split so that ablating one component leaves the
// draws of the others unchanged.
struct RunRngs {
  Rng init, shuffle, buffer, stream_aug, iba, bias;
  explicit RunRngs(std::uint64_t seed);
};

struct TrainState {
  Mlp model;
  ReplayBuffer buffer;
  ExpDecaySchedule schedule;
  AugPolicy aug;
  RunRngs rngs;
  std::uint64_t examples_seen = 0;
  std::size_t task_index = 0;
  Correction correction;
};

// Builds the initial state. decay_horizon is the examples_seen value at the
// final optimization step; the schedule reaches lr0 * decay_fraction there.
TrainState make_train_state(const TrainConfig& config, const Dataset& geometry, std::uint64_t decay_horizon);

struct StepResult {
  double lr = 0.0;
  double stream_loss = 0.0;
  double replay_loss = 0.0;  // 0 when nothing was replayed
  double total_loss = 0.0;   // the optimized objective
  std::size_t replayed = 0;
  std::vector<double> stream_losses;
};

// One rehearsal step: loss = mean CE(stream) + mean CE(replay), one SGD
// update, loss refresh of the drawn slots, then buffer insertion of the
// stream items with their losses.
StepResult er_train_step(TrainState& state, std::span<const Example> stream_batch, const TrainConfig& config);

struct StepLog {
  std::size_t task = 0;
  std::uint64_t examples_seen = 0;  // before the step
  double lr = 0.0;
  double stream_loss = 0.0;
  double replay_loss = 0.0;
  double total_loss = 0.0;
};

struct FittedCorrection {
  std::size_t after_task = 0;
  Correction correction;
};

struct BufferSlotRecord {
  std::size_t slot = 0;
  int label = 0;
  double loss_score = 0.0;
};

struct RunReport {
  std::string method;
  std::string tricks;
  std::uint64_t seed = 0;
  std::vector<double> per_task_accuracy;
  double average_accuracy = 0.0;
  std::vector<double> task_pred_distribution;
  double task_pred_kl = 0.0;
  std::vector<std::size_t> buffer_class_counts;
  double buffer_balance_mse = 0.0;
  std::vector<BufferSlotRecord> buffer_slots;
  std::vector<FittedCorrection> corrections;
  std::uint64_t examples_seen = 0;
  std::uint64_t parameter_checksum = 0;
  double wall_clock_seconds = 0.0;
  TrainConfig config;
  std::vector<StepLog> steps;
};

// Wiring check between the stored-item audit and the raw stream, exposed
// for tests: the final state of a run.
struct RunResult {
  RunReport report;
  TrainState state;
};

RunResult run_class_il_full(const TaskStream& stream, const TrainConfig& config);
RunReport run_class_il(const TaskStream& stream, const TrainConfig& config);
RunReport run_sgd_baseline(const TaskStream& stream, const TrainConfig& config);
RunReport run_joint_baseline(const TaskStream& stream, const TrainConfig& config);

// Total stream examples processed over a run and the examples_seen value at
// its final step.
std::uint64_t total_stream_examples(const TaskStream& stream, const TrainConfig& config);
std::uint64_t final_step_offset(const TaskStream& stream, const TrainConfig& config);

struct AblationRow {
  std::string label;
  TrainConfig config;
  std::vector<RunReport> runs;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
};

// ER, then cumulatively +IBA (only with stream augmentation), +BiC, +ELrD,
// +BRS, +LARS. Each config differs from the previous one by one flag.
std::vector<TrainConfig> ablation_configs(const TrainConfig& base);
std::vector<AblationRow> ablation_suite(const TaskStream& stream, const TrainConfig& base,
                                        std::span<const std::uint64_t> seeds);

// Sample mean and standard deviation (n - 1 denominator; 0 for n < 2).
std::pair<double, double> mean_std(std::span<const double> values);

}  // namespace replaylab
