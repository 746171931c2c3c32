// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "replaylab/core.hpp"
#include "replaylab/sampling.hpp"

namespace replaylab {

struct AugPolicy {
  std::size_t max_shift = 0;
  double hflip_prob = 0.0;
  std::size_t height = 28;
  std::size_t width = 28;
  std::size_t channels = 1;
  bool enabled = false;

  void validate() const;
};

// Translate by (shift_rows, shift_cols) with zero padding, then optionally
// mirror columns. Features are HWC-flattened.
std::vector<double> shift_and_flip(const AugPolicy& policy, std::span<const double> features, int shift_rows,
                                   int shift_cols, bool flip);

// Random translation in [-max_shift, max_shift] per axis, then a horizontal
// flip with probability hflip_prob. A disabled policy returns the input.
std::vector<double> augment(const AugPolicy& policy, std::span<const double> features, Rng& rng);

// Replay draw whose examples are augmented independently of each other and
// of the stored items, which stay untouched.
ReplayDraw replay_with_iba(const ReplayBuffer& buffer, std::size_t batch_size, const AugPolicy& policy,
                           Rng& draw_rng, Rng& aug_rng);

}  // namespace replaylab
