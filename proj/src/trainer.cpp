// SPDX-License-Identifier: Apache-2.0
#include "replaylab/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "replaylab/evaluation.hpp"

namespace replaylab {

std::string Tricks::label() const {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += '+';
    s += name;
  };
  add(iba, "iba");
  add(bic, "bic");
  add(cbic, "cbic");
  add(elrd, "elrd");
  add(brs, "brs");
  add(lars, "lars");
  return s.empty() ? "none" : s;
}

Tricks parse_tricks(const std::string& list) {
  Tricks t;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty() || item == "none") continue;
    if (item == "iba") t.iba = true;
    else if (item == "bic") t.bic = true;
    else if (item == "cbic") t.cbic = true;
    else if (item == "elrd") t.elrd = true;
    else if (item == "brs") t.brs = true;
    else if (item == "lars") t.lars = true;
    else throw ConfigError("unknown trick '" + item + "' (expected iba, bic, cbic, elrd, brs, lars or none)");
  }
  return t;
}

Strategy TrainConfig::strategy() const {
  if (ring_buffer) return Strategy::Ring;
  if (tricks.lars) return Strategy::LossAwareBalancedReservoir;
  if (tricks.brs) return Strategy::BalancedReservoir;
  return Strategy::Reservoir;
}

void TrainConfig::validate() const {
  if (stream_batch_size == 0) throw ConfigError("stream_batch must be positive");
  if (replay_batch_size == 0) throw ConfigError("replay_batch must be positive");
  if (epochs_per_task == 0) throw ConfigError("epochs_per_task must be positive");
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
  if (!(decay_fraction > 0.0 && decay_fraction <= 1.0)) throw ConfigError("decay_fraction must lie in (0, 1]");
  if (tricks.bic && tricks.cbic) throw ConfigError("bic and cbic are alternative corrections; enable one");
  if ((tricks.bic || tricks.cbic) && buffer_capacity == 0)
    throw ConfigError("bias correction is fitted on the replay buffer and needs buffer > 0");
  if (ring_buffer && (tricks.brs || tricks.lars)) throw ConfigError("ring_buffer excludes brs and lars");
  for (std::size_t h : hidden)
    if (h == 0) throw ConfigError("hidden layer widths must be positive");
}

std::string TrainConfig::method(bool joint) const {
  if (joint) return "joint";
  if (buffer_capacity == 0 || !replay) return "sgd";
  return "er";
}

RunRngs::RunRngs(std::uint64_t seed)
    : init(make_rng(seed, 1)),
      shuffle(make_rng(seed, 2)),
      buffer(make_rng(seed, 3)),
      stream_aug(make_rng(seed, 4)),
      iba(make_rng(seed, 5)),
      bias(make_rng(seed, 6)) {}

TrainState make_train_state(const TrainConfig& config, const Dataset& geometry, std::uint64_t decay_horizon) {
  config.validate();
  RunRngs rngs(config.seed);
  std::vector<std::size_t> dims{geometry.feature_dim()};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(geometry.class_count);
  Mlp model = Mlp::init(dims, rngs.init);

  const double gamma = config.tricks.elrd && decay_horizon > 0
                           ? gamma_for_final_fraction(config.decay_fraction, decay_horizon)
                           : 1.0;
  AugPolicy aug;
  aug.max_shift = config.aug_max_shift;
  aug.hflip_prob = config.aug_hflip_prob;
  aug.height = geometry.height;
  aug.width = geometry.width;
  aug.channels = geometry.channels;
  aug.enabled = config.stream_augment;
  if (aug.enabled || config.tricks.iba) aug.validate();

  return TrainState{std::move(model),
                    ReplayBuffer(config.buffer_capacity, config.strategy(), geometry.class_count),
                    ExpDecaySchedule(config.lr0, gamma),
                    aug,
                    std::move(rngs),
                    0,
                    0,
                    {}};
}

StepResult er_train_step(TrainState& state, std::span<const Example> stream_batch, const TrainConfig& config) {
  if (stream_batch.empty()) throw Error("er_train_step: empty stream batch");
  StepResult r;

  std::vector<Example> stream(stream_batch.begin(), stream_batch.end());
  if (state.aug.enabled)
    for (Example& e : stream) e.features = augment(state.aug, e.features, state.rngs.stream_aug);

  ReplayDraw replay;
  const bool rehearse = config.replay && !state.buffer.empty();
  if (rehearse) {
    AugPolicy replay_aug = state.aug;
    replay_aug.enabled = config.tricks.iba;
    replay = replay_with_iba(state.buffer, config.replay_batch_size, replay_aug, state.rngs.buffer, state.rngs.iba);
    r.replayed = replay.slots.size();
  }

  r.lr = state.schedule.lr_at(state.examples_seen);

  ForwardCache stream_cache;
  const Matrix stream_logits = state.model.forward(stack_features(stream), stream_cache);
  const std::vector<int> stream_labels = labels_of(stream);
  LossResult stream_loss = softmax_cross_entropy(stream_logits, stream_labels);

  LossResult replay_loss;
  ForwardCache replay_cache;
  if (rehearse) {
    const Matrix replay_logits = state.model.forward(stack_features(replay.examples), replay_cache);
    replay_loss = softmax_cross_entropy(replay_logits, labels_of(replay.examples));
  }

  state.model.backward(stream_cache, stream_loss.dlogits);
  if (rehearse) state.model.backward(replay_cache, replay_loss.dlogits);
  state.model.sgd_step(r.lr);

  r.stream_loss = stream_loss.mean;
  r.replay_loss = rehearse ? replay_loss.mean : 0.0;
  r.total_loss = r.stream_loss + r.replay_loss;

  if (rehearse) state.buffer.refresh_loss_scores(replay.slots, replay_loss.per_example);

  // IBA keeps stored items raw; otherwise the buffer holds what was trained on.
  const bool store_raw = config.tricks.iba;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    StoredExample item{store_raw ? stream_batch[i].features : stream[i].features, stream[i].label,
                       stream_loss.per_example[i]};
    state.buffer.update(std::move(item), state.rngs.buffer);
  }
  state.examples_seen += stream.size();
  r.stream_losses = std::move(stream_loss.per_example);
  return r;
}

namespace {

// Classes of tasks [0, upto].
std::vector<int> seen_classes(const TaskStream& stream, std::size_t upto) {
  std::vector<int> out;
  for (std::size_t t = 0; t <= upto; ++t) out.insert(out.end(), stream.tasks[t].classes.begin(), stream.tasks[t].classes.end());
  std::sort(out.begin(), out.end());
  return out;
}

void fit_correction(TrainState& state, const TaskStream& stream, const TrainConfig& config, std::size_t task,
                    RunReport& report) {
  if (config.tricks.bic && task >= 1) {
    const std::vector<int> seen = seen_classes(stream, task);
    state.correction = fit_bic(state.model, state.buffer, stream.tasks[task].classes, seen, config.bias_fit, state.rngs.bias);
  } else if (config.tricks.cbic) {
    std::vector<int> task_of(stream.class_count(), -1);
    for (std::size_t t = 0; t <= task; ++t)
      for (int c : stream.tasks[t].classes) task_of[static_cast<std::size_t>(c)] = static_cast<int>(t);
    state.correction = fit_cbic(state.model, state.buffer, std::move(task_of), config.bias_fit, state.rngs.bias);
  } else {
    return;
  }
  report.corrections.push_back(FittedCorrection{task, state.correction});
}

// Trains on `train_view` task by task and evaluates on `eval_stream`.
RunResult train_and_evaluate(const TaskStream& train_view, const TaskStream& eval_stream, const TrainConfig& config,
                             const std::string& method) {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset& data = *train_view.train;
  TrainState state = make_train_state(config, data, final_step_offset(train_view, config));

  RunReport report;
  report.method = method;
  report.tricks = config.tricks.label();
  report.seed = config.seed;
  report.config = config;

  std::vector<Example> batch;
  batch.reserve(config.stream_batch_size);
  for (std::size_t t = 0; t < train_view.tasks.size(); ++t) {
    state.task_index = t;
    std::vector<std::size_t> order = train_view.tasks[t].train;
    for (std::size_t epoch = 0; epoch < config.epochs_per_task; ++epoch) {
      std::shuffle(order.begin(), order.end(), state.rngs.shuffle);
      for (std::size_t start = 0; start < order.size(); start += config.stream_batch_size) {
        const std::size_t end = std::min(order.size(), start + config.stream_batch_size);
        batch.clear();
        for (std::size_t i = start; i < end; ++i) batch.push_back(data.examples[order[i]]);
        const std::uint64_t before = state.examples_seen;
        const StepResult step = er_train_step(state, batch, config);
        report.steps.push_back(StepLog{t, before, step.lr, step.stream_loss, step.replay_loss, step.total_loss});
      }
    }
    fit_correction(state, train_view, config, t, report);
  }

  const AccuracyReport acc = average_final_accuracy(state.model, state.correction, eval_stream);
  report.per_task_accuracy = acc.per_task;
  report.average_accuracy = acc.average;
  report.task_pred_distribution = task_prediction_distribution(state.model, state.correction, eval_stream);
  report.task_pred_kl = kl_to_uniform(report.task_pred_distribution);
  report.buffer_class_counts = state.buffer.class_counts();
  const double ideal = static_cast<double>(state.buffer.capacity()) / static_cast<double>(data.class_count);
  report.buffer_balance_mse = buffer_balance_mse(report.buffer_class_counts, ideal);
  for (std::size_t i : state.buffer.filled_slots()) {
    const StoredExample& s = state.buffer.slot(i);
    report.buffer_slots.push_back(BufferSlotRecord{i, s.label, s.loss_score});
  }
  report.examples_seen = state.examples_seen;
  report.parameter_checksum = state.model.parameter_checksum();
  report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return RunResult{std::move(report), std::move(state)};
}

}  // namespace

std::uint64_t total_stream_examples(const TaskStream& stream, const TrainConfig& config) {
  return static_cast<std::uint64_t>(stream.train_examples()) * config.epochs_per_task;
}

std::uint64_t final_step_offset(const TaskStream& stream, const TrainConfig& config) {
  const std::uint64_t total = total_stream_examples(stream, config);
  if (total == 0 || stream.tasks.empty()) return 0;
  const std::size_t n_last = stream.tasks.back().train.size();
  if (n_last == 0) return total;
  const std::size_t rem = n_last % config.stream_batch_size;
  const std::size_t last_batch = rem == 0 ? config.stream_batch_size : rem;
  return total - last_batch;
}

RunResult run_class_il_full(const TaskStream& stream, const TrainConfig& config) {
  return train_and_evaluate(stream, stream, config, config.method());
}

RunReport run_class_il(const TaskStream& stream, const TrainConfig& config) {
  return run_class_il_full(stream, config).report;
}

RunReport run_sgd_baseline(const TaskStream& stream, const TrainConfig& config) {
  TrainConfig c = config;
  c.buffer_capacity = 0;
  c.tricks = Tricks{};
  return run_class_il(stream, c);
}

RunReport run_joint_baseline(const TaskStream& stream, const TrainConfig& config) {
  TrainConfig c = config;
  c.buffer_capacity = 0;
  c.tricks = Tricks{};
  TaskStream joint;
  joint.train = stream.train;
  joint.test = stream.test;
  Task all;
  for (const Task& t : stream.tasks) {
    all.classes.insert(all.classes.end(), t.classes.begin(), t.classes.end());
    all.train.insert(all.train.end(), t.train.begin(), t.train.end());
    all.test.insert(all.test.end(), t.test.begin(), t.test.end());
  }
  joint.tasks.push_back(std::move(all));
  return train_and_evaluate(joint, stream, c, c.method(true)).report;
}

std::vector<TrainConfig> ablation_configs(const TrainConfig& base) {
  std::vector<TrainConfig> out;
  TrainConfig c = base;
  c.tricks = Tricks{};
  out.push_back(c);
  if (base.stream_augment) {
    c.tricks.iba = true;
    out.push_back(c);
  }
  c.tricks.bic = true;
  out.push_back(c);
  c.tricks.elrd = true;
  out.push_back(c);
  c.tricks.brs = true;
  out.push_back(c);
  c.tricks.lars = true;
  out.push_back(c);
  return out;
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

std::vector<AblationRow> ablation_suite(const TaskStream& stream, const TrainConfig& base,
                                        std::span<const std::uint64_t> seeds) {
  std::vector<AblationRow> rows;
  for (const TrainConfig& cfg : ablation_configs(base)) {
    AblationRow row;
    row.config = cfg;
    row.label = cfg.tricks.any() ? "er+" + cfg.tricks.label() : "er";
    std::vector<double> acc;
    for (std::uint64_t seed : seeds) {
      TrainConfig c = cfg;
      c.seed = seed;
      row.runs.push_back(run_class_il(stream, c));
      acc.push_back(row.runs.back().average_accuracy);
    }
    std::tie(row.mean_accuracy, row.std_accuracy) = mean_std(acc);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace replaylab
