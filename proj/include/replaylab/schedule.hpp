// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace replaylab {

// lr(n) = lr0 * gamma^n where n counts stream examples seen over the whole
// run. The schedule has no notion of task boundaries.
class ExpDecaySchedule {
 public:
  ExpDecaySchedule(double lr0, double gamma);

  static ExpDecaySchedule constant(double lr0) { return {lr0, 1.0}; }

  double lr_at(std::uint64_t examples_seen) const;

  double lr0() const { return lr0_; }
  double gamma() const { return gamma_; }

 private:
  double lr0_;
  double gamma_;
};

// gamma such that lr_at(total_examples) == lr0 * fraction.
double gamma_for_final_fraction(double fraction, std::uint64_t total_examples);

}  // namespace replaylab
