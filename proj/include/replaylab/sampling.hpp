// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "replaylab/core.hpp"

namespace replaylab {

enum class Strategy { Reservoir, BalancedReservoir, LossAwareBalancedReservoir, Ring };

std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view name);

struct StoredExample {
  std::vector<double> features;
  int label = 0;
  double loss_score = 0.0;  // most recent training loss
};

// Score vectors behind one loss-aware eviction decision.
struct ScoreVectors {
  std::vector<double> balance;  // per slot: buffer count of that slot's class
  std::vector<double> loss;     // per slot: negated loss score
  double alpha = 0.0;           // L1 magnitude equalizer
  std::vector<double> combined; // loss * alpha + balance
  std::vector<double> probs;    // eviction distribution
};

struct ReplayDraw {
  std::vector<std::size_t> slots;
  std::vector<Example> examples;
};

// Fixed-capacity rehearsal memory.
//
// For the reservoir family the filled slots are [0, size()) and
// size() == min(seen_count(), capacity()). The Ring strategy instead splits the
// storage into class_count segments of capacity / class_count slots, each a
// FIFO for one class; trailing remainder slots are never used.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, Strategy strategy, std::size_t class_count);

  // Offers one stream item to the buffer using the configured strategy.
  void update(StoredExample item, Rng& rng);

  // Strategy-specific entry points. Each requires the matching strategy.
  void reservoir_update(StoredExample item, Rng& rng);
  void balanced_reservoir_update(StoredExample item, Rng& rng);
  void lars_update(StoredExample item, Rng& rng);
  void ring_update(StoredExample item);

  void refresh_loss_scores(std::span<const std::size_t> indices, std::span<const double> losses);

  // batch_size slots drawn uniformly with replacement among filled slots.
  ReplayDraw draw(std::size_t batch_size, Rng& rng) const;

  std::size_t capacity() const { return capacity_; }
  std::size_t class_count() const { return class_count_; }
  std::uint64_t seen_count() const { return seen_; }
  Strategy strategy() const { return strategy_; }
  std::size_t size() const { return filled_.size(); }
  bool empty() const { return filled_.empty(); }

  // Filled slot ids in ascending order.
  const std::vector<std::size_t>& filled_slots() const { return filled_; }
  const StoredExample& slot(std::size_t index) const;

  // Number of filled slots per class id.
  std::vector<std::size_t> class_counts() const;

  // Ring segment length (capacity / class_count, floored).
  std::size_t ring_segment() const;

 private:
  bool admit(Rng& rng);
  void append(StoredExample item);
  void check_label(int label) const;

  std::size_t capacity_;
  Strategy strategy_;
  std::size_t class_count_;
  std::uint64_t seen_ = 0;
  std::vector<StoredExample> slots_;
  std::vector<std::size_t> filled_;
  // Ring bookkeeping: items inserted per class so far.
  std::vector<std::uint64_t> ring_inserted_;
};

// Eviction scores over the filled slots of a buffer. Throws on an empty buffer.
ScoreVectors lars_scores(const ReplayBuffer& buffer);

// Probability that a particular class is absent from a uniform sample of
// `capacity` items drawn from `class_count` equally frequent classes.
double omission_probability(std::size_t class_count, std::size_t capacity);

}  // namespace replaylab
