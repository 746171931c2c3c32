// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "replaylab/core.hpp"

// Dense kernels behind the MLP. The default namespace holds the OpenMP
// parallel, cache-blocked versions used for training; `reference` keeps the
// plain serial loops they are tested and benchmarked against.
//
// Weights are stored input-major: w is (in x out), so a layer computes
// y = x * w + b for a (batch x in) input.
namespace replaylab::kernels {

// y = x * w + b. y is resized to (x.rows x w.cols).
void affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y);

// dw += x^T * dy, db += column sums of dy.
void affine_backward_params(const Matrix& x, const Matrix& dy, Matrix& dw, std::span<double> db);

// dx = dy * w^T. dx is resized to (dy.rows x w.rows).
void affine_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx);

// post = max(pre, 0).
void relu_forward(const Matrix& pre, Matrix& post);

// grad[i] = 0 wherever pre[i] <= 0.
void relu_backward(const Matrix& pre, Matrix& grad);

// Number of OpenMP threads the parallel kernels will use.
int max_threads();

namespace reference {

void affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y);
void affine_backward_params(const Matrix& x, const Matrix& dy, Matrix& dw, std::span<double> db);
void affine_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx);
void relu_forward(const Matrix& pre, Matrix& post);
void relu_backward(const Matrix& pre, Matrix& grad);

}  // namespace reference
}  // namespace replaylab::kernels
