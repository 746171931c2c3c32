// SPDX-License-Identifier: Apache-2.0
#include "replaylab/schedule.hpp"

#include <cmath>
#include <string>

#include "replaylab/core.hpp"

namespace replaylab {

ExpDecaySchedule::ExpDecaySchedule(double lr0, double gamma) : lr0_(lr0), gamma_(gamma) {
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive, got " + std::to_string(lr0));
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1], got " + std::to_string(gamma));
}

double ExpDecaySchedule::lr_at(std::uint64_t examples_seen) const {
  if (gamma_ == 1.0) return lr0_;
  return lr0_ * std::exp(static_cast<double>(examples_seen) * std::log(gamma_));
}

double gamma_for_final_fraction(double fraction, std::uint64_t total_examples) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ConfigError("decay fraction must lie in (0, 1], got " + std::to_string(fraction));
  if (total_examples == 0) throw ConfigError("decay horizon must cover at least one example");
  return std::exp(std::log(fraction) / static_cast<double>(total_examples));
}

}  // namespace replaylab
