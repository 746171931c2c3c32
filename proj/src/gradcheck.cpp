// SPDX-License-Identifier: Apache-2.0
#include "replaylab/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace replaylab {

GradcheckResult gradient_check(Mlp& model, const Matrix& inputs, std::span<const int> labels,
                               const GradcheckTolerance& tol, BackwardFault fault) {
  model.zero_grad();
  ForwardCache cache;
  const Matrix logits = model.forward(inputs, cache);
  model.backward(cache, softmax_cross_entropy(logits, labels).dlogits, fault);
  const std::vector<double> analytic = model.gradients();
  model.zero_grad();

  std::vector<double> theta = model.parameters();
  auto loss_at = [&](std::size_t i, double value) {
    const double saved = theta[i];
    theta[i] = value;
    model.set_parameters(theta);
    theta[i] = saved;
    return softmax_cross_entropy(model.forward(inputs), labels).mean;
  };

  GradcheckResult r;
  r.parameters = theta.size();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double numeric = (loss_at(i, theta[i] + tol.step) - loss_at(i, theta[i] - tol.step)) / (2.0 * tol.step);
    const double diff = std::abs(analytic[i] - numeric);
    if (diff <= tol.absolute_floor) continue;
    const double rel = diff / std::max(std::abs(analytic[i]), std::abs(numeric));
    r.worst_relative = std::max(r.worst_relative, rel);
    if (rel > tol.relative) ++r.failures;
  }
  model.set_parameters(theta);
  return r;
}

GradcheckResult gradient_check_random(std::span<const std::size_t> dims, std::size_t batch, Rng& rng,
                                      const GradcheckTolerance& tol, BackwardFault fault) {
  Mlp model = Mlp::init(dims, rng);
  // Non-zero biases so that every parameter sees a generic operating point.
  std::vector<double> theta = model.parameters();
  std::normal_distribution<double> gauss(0.0, 0.3);
  for (double& v : theta) v += gauss(rng) * 0.1;
  model.set_parameters(theta);

  Matrix x(batch, dims.front());
  for (double& v : x.data) v = uniform_unit(rng);
  std::vector<int> labels(batch);
  for (int& y : labels) y = static_cast<int>(uniform_index(rng, dims.back()));
  return gradient_check(model, x, labels, tol, fault);
}

}  // namespace replaylab
