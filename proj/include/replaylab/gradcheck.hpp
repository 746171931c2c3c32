// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "replaylab/core.hpp"
#include "replaylab/mlp.hpp"

namespace replaylab {

struct GradcheckTolerance {
  double relative = 1e-4;
  double absolute_floor = 1e-7;
  double step = 1e-5;
};

struct GradcheckResult {
  std::size_t parameters = 0;
  std::size_t failures = 0;
  double worst_relative = 0.0;  // among entries above the absolute floor
  bool passed() const { return failures == 0; }
};

// Compares backward() gradients of the mean cross-entropy against central
// finite differences of forward() over every parameter.
GradcheckResult gradient_check(Mlp& model, const Matrix& inputs, std::span<const int> labels,
                               const GradcheckTolerance& tol = {}, BackwardFault fault = BackwardFault::None);

// Random net of the given dims and a random batch, then gradient_check.
GradcheckResult gradient_check_random(std::span<const std::size_t> dims, std::size_t batch, Rng& rng,
                                      const GradcheckTolerance& tol = {}, BackwardFault fault = BackwardFault::None);

}  // namespace replaylab
