// SPDX-License-Identifier: Apache-2.0
#include "replaylab/augmentation.hpp"

#include <algorithm>

namespace replaylab {

void AugPolicy::validate() const {
  if (height == 0 || width == 0 || channels == 0) throw ConfigError("augmentation image dims must be positive");
  if (max_shift >= std::min(height, width)) throw ConfigError("aug.max_shift must be smaller than the image side");
  if (hflip_prob < 0.0 || hflip_prob > 1.0) throw ConfigError("aug.hflip_prob must lie in [0, 1]");
}

std::vector<double> shift_and_flip(const AugPolicy& policy, std::span<const double> features, int shift_rows,
                                   int shift_cols, bool flip) {
  const std::size_t h = policy.height, w = policy.width, c = policy.channels;
  if (features.size() != h * w * c)
    throw DataError("augment: feature length " + std::to_string(features.size()) + " does not match " +
                    std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c));
  std::vector<double> out(features.size(), 0.0);
  const auto hi = static_cast<int>(h), wi = static_cast<int>(w);
  for (int r = 0; r < hi; ++r) {
    const int src_r = r - shift_rows;
    if (src_r < 0 || src_r >= hi) continue;
    for (int col = 0; col < wi; ++col) {
      const int shifted = col - shift_cols;
      if (shifted < 0 || shifted >= wi) continue;
      const int dst_col = flip ? wi - 1 - col : col;
      const double* src = features.data() + (static_cast<std::size_t>(src_r) * w + static_cast<std::size_t>(shifted)) * c;
      double* dst = out.data() + (static_cast<std::size_t>(r) * w + static_cast<std::size_t>(dst_col)) * c;
      std::copy_n(src, c, dst);
    }
  }
  return out;
}

std::vector<double> augment(const AugPolicy& policy, std::span<const double> features, Rng& rng) {
  if (!policy.enabled) return {features.begin(), features.end()};
  const auto s = static_cast<int>(policy.max_shift);
  std::uniform_int_distribution<int> shift(-s, s);
  const int dr = shift(rng);
  const int dc = shift(rng);
  const bool flip = policy.hflip_prob > 0.0 && uniform_unit(rng) < policy.hflip_prob;
  return shift_and_flip(policy, features, dr, dc, flip);
}

ReplayDraw replay_with_iba(const ReplayBuffer& buffer, std::size_t batch_size, const AugPolicy& policy,
                           Rng& draw_rng, Rng& aug_rng) {
  ReplayDraw draw = buffer.draw(batch_size, draw_rng);
  if (policy.enabled)
    for (Example& e : draw.examples) e.features = augment(policy, e.features, aug_rng);
  return draw;
}

}  // namespace replaylab
