// SPDX-License-Identifier: Apache-2.0
#include "replaylab/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace replaylab {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Reservoir: return "reservoir";
    case Strategy::BalancedReservoir: return "brs";
    case Strategy::LossAwareBalancedReservoir: return "lars";
    case Strategy::Ring: return "ring";
  }
  return "?";
}

Strategy strategy_from_string(std::string_view name) {
  if (name == "reservoir") return Strategy::Reservoir;
  if (name == "brs") return Strategy::BalancedReservoir;
  if (name == "lars") return Strategy::LossAwareBalancedReservoir;
  if (name == "ring") return Strategy::Ring;
  throw ConfigError("unknown buffer strategy '" + std::string(name) + "'");
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, Strategy strategy, std::size_t class_count)
    : capacity_(capacity), strategy_(strategy), class_count_(class_count) {
  if (class_count == 0) throw ConfigError("replay buffer needs at least one class");
  if (strategy == Strategy::Ring) {
    slots_.resize(capacity);
    ring_inserted_.assign(class_count, 0);
  } else {
    slots_.reserve(capacity);
  }
  filled_.reserve(capacity);
}

void ReplayBuffer::check_label(int label) const {
  if (label < 0 || static_cast<std::size_t>(label) >= class_count_)
    throw DataError("label " + std::to_string(label) + " outside the declared " +
                    std::to_string(class_count_) + " classes");
}

const StoredExample& ReplayBuffer::slot(std::size_t index) const {
  if (index >= slots_.size()) throw Error("replay buffer slot " + std::to_string(index) + " out of range");
  return slots_[index];
}

std::size_t ReplayBuffer::ring_segment() const { return capacity_ / class_count_; }

std::vector<std::size_t> ReplayBuffer::class_counts() const {
  std::vector<std::size_t> counts(class_count_, 0);
  for (std::size_t i : filled_) ++counts[static_cast<std::size_t>(slots_[i].label)];
  return counts;
}

void ReplayBuffer::update(StoredExample item, Rng& rng) {
  switch (strategy_) {
    case Strategy::Reservoir: reservoir_update(std::move(item), rng); break;
    case Strategy::BalancedReservoir: balanced_reservoir_update(std::move(item), rng); break;
    case Strategy::LossAwareBalancedReservoir: lars_update(std::move(item), rng); break;
    case Strategy::Ring: ring_update(std::move(item)); break;
  }
}

void ReplayBuffer::append(StoredExample item) {
  filled_.push_back(slots_.size());
  slots_.push_back(std::move(item));
}

// Shared admission rule. Returns true when the item must replace a slot;
// the fill phase is handled by the caller.
bool ReplayBuffer::admit(Rng& rng) {
  const std::uint64_t j = std::uniform_int_distribution<std::uint64_t>(0, seen_)(rng);
  return j < capacity_;
}

void ReplayBuffer::reservoir_update(StoredExample item, Rng& rng) {
  if (strategy_ != Strategy::Reservoir) throw Error("reservoir_update on a non-reservoir buffer");
  check_label(item.label);
  if (seen_ < capacity_) {
    append(std::move(item));
  } else {
    // The slot index is the same draw that decided admission.
    const std::uint64_t j = std::uniform_int_distribution<std::uint64_t>(0, seen_)(rng);
    if (j < capacity_) slots_[static_cast<std::size_t>(j)] = std::move(item);
  }
  ++seen_;
}

void ReplayBuffer::balanced_reservoir_update(StoredExample item, Rng& rng) {
  if (strategy_ != Strategy::BalancedReservoir) throw Error("balanced_reservoir_update on a non-BRS buffer");
  check_label(item.label);
  if (seen_ < capacity_) {
    append(std::move(item));
  } else if (admit(rng)) {
    // Victim class: uniformly among the most represented ones. The incoming
    // label is not counted.
    const std::vector<std::size_t> counts = class_counts();
    const std::size_t top = *std::max_element(counts.begin(), counts.end());
    std::vector<std::size_t> tied;
    for (std::size_t c = 0; c < counts.size(); ++c)
      if (counts[c] == top) tied.push_back(c);
    const auto victim_class = static_cast<int>(tied[tied.size() == 1 ? 0 : uniform_index(rng, tied.size())]);
    std::vector<std::size_t> pool;
    pool.reserve(top);
    for (std::size_t i = 0; i < slots_.size(); ++i)
      if (slots_[i].label == victim_class) pool.push_back(i);
    slots_[pool[uniform_index(rng, pool.size())]] = std::move(item);
  }
  ++seen_;
}

void ReplayBuffer::lars_update(StoredExample item, Rng& rng) {
  if (strategy_ != Strategy::LossAwareBalancedReservoir) throw Error("lars_update on a non-LARS buffer");
  check_label(item.label);
  if (item.loss_score < 0.0) throw DataError("loss score must be non-negative");
  if (seen_ < capacity_) {
    append(std::move(item));
  } else if (admit(rng)) {
    const ScoreVectors scores = lars_scores(*this);
    std::discrete_distribution<std::size_t> pick(scores.probs.begin(), scores.probs.end());
    slots_[pick(rng)] = std::move(item);
  }
  ++seen_;
}

void ReplayBuffer::ring_update(StoredExample item) {
  if (strategy_ != Strategy::Ring) throw Error("ring_update on a non-ring buffer");
  check_label(item.label);
  ++seen_;
  const std::size_t segment = ring_segment();
  if (segment == 0) return;
  const auto c = static_cast<std::size_t>(item.label);
  const std::size_t index = c * segment + static_cast<std::size_t>(ring_inserted_[c] % segment);
  if (ring_inserted_[c] < segment) filled_.insert(std::upper_bound(filled_.begin(), filled_.end(), index), index);
  slots_[index] = std::move(item);
  ++ring_inserted_[c];
}

void ReplayBuffer::refresh_loss_scores(std::span<const std::size_t> indices, std::span<const double> losses) {
  if (indices.size() != losses.size()) throw Error("refresh_loss_scores: indices and losses differ in length");
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const std::size_t i = indices[n];
    if (!std::binary_search(filled_.begin(), filled_.end(), i))
      throw Error("refresh_loss_scores: slot " + std::to_string(i) + " is not filled");
    if (losses[n] < 0.0) throw DataError("refresh_loss_scores: negative loss");
    slots_[i].loss_score = losses[n];
  }
}

ReplayDraw ReplayBuffer::draw(std::size_t batch_size, Rng& rng) const {
  if (filled_.empty()) throw Error("cannot draw from an empty replay buffer");
  ReplayDraw out;
  out.slots.reserve(batch_size);
  out.examples.reserve(batch_size);
  for (std::size_t n = 0; n < batch_size; ++n) {
    const std::size_t i = filled_[uniform_index(rng, filled_.size())];
    out.slots.push_back(i);
    out.examples.push_back(Example{slots_[i].features, slots_[i].label});
  }
  return out;
}

ScoreVectors lars_scores(const ReplayBuffer& buffer) {
  if (buffer.empty()) throw Error("lars_scores: empty buffer");
  const auto& filled = buffer.filled_slots();
  const std::size_t n = filled.size();
  const std::vector<std::size_t> counts = buffer.class_counts();

  ScoreVectors s;
  s.balance.resize(n);
  s.loss.resize(n);
  double balance_mass = 0.0, loss_mass = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const StoredExample& item = buffer.slot(filled[k]);
    s.balance[k] = static_cast<double>(counts[static_cast<std::size_t>(item.label)]);
    s.loss[k] = -item.loss_score;
    balance_mass += std::abs(s.balance[k]);
    loss_mass += std::abs(s.loss[k]);
  }
  s.alpha = loss_mass > 0.0 ? balance_mass / loss_mass : 0.0;

  s.combined.resize(n);
  for (std::size_t k = 0; k < n; ++k) s.combined[k] = s.loss[k] * s.alpha + s.balance[k];

  // The combined scores sum to zero for non-negative losses, so they are
  // shifted to start at zero before normalizing.
  const double floor = *std::min_element(s.combined.begin(), s.combined.end());
  s.probs.resize(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    s.probs[k] = std::max(s.combined[k] - floor, 0.0);
    total += s.probs[k];
  }
  if (total > 0.0) {
    for (double& p : s.probs) p /= total;
  } else {
    std::fill(s.probs.begin(), s.probs.end(), 1.0 / static_cast<double>(n));
  }
  return s;
}

double omission_probability(std::size_t class_count, std::size_t capacity) {
  if (class_count == 0) throw ConfigError("omission_probability: class count must be positive");
  return std::pow(1.0 - 1.0 / static_cast<double>(class_count), static_cast<double>(capacity));
}

}  // namespace replaylab
