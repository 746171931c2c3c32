// SPDX-License-Identifier: Apache-2.0
#include "replaylab/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstddef>

namespace replaylab::kernels {
namespace {

// Below this many multiply-adds a kernel runs on the calling thread.
constexpr std::size_t kParallelWork = 1u << 16;

void check_forward(const Matrix& x, const Matrix& w, std::span<const double> b) {
  if (x.cols != w.rows || b.size() != w.cols) throw Error("affine_forward: shape mismatch");
}

void check_params(const Matrix& x, const Matrix& dy, const Matrix& dw, std::span<double> db) {
  if (x.rows != dy.rows || dw.rows != x.cols || dw.cols != dy.cols || db.size() != dy.cols)
    throw Error("affine_backward_params: shape mismatch");
}

void check_input(const Matrix& dy, const Matrix& w) {
  if (dy.cols != w.cols) throw Error("affine_backward_input: shape mismatch");
}

void resize(Matrix& m, std::size_t rows, std::size_t cols) {
  m.rows = rows;
  m.cols = cols;
  m.data.resize(rows * cols);
}

}  // namespace

int max_threads() { return omp_get_max_threads(); }

void affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y) {
  check_forward(x, w, b);
  const std::size_t batch = x.rows, in = x.cols, out = w.cols;
  resize(y, batch, out);
  const double* wp = w.data.data();
  const bool parallel = batch * in * out >= kParallelWork;

  // Four input rows share each pass over w.
  const std::ptrdiff_t blocks = static_cast<std::ptrdiff_t>((batch + 3) / 4);
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t i0 = static_cast<std::size_t>(blk) * 4;
    const std::size_t rows = std::min<std::size_t>(4, batch - i0);
    double* yr[4];
    const double* xr[4];
    for (std::size_t r = 0; r < 4; ++r) {
      const std::size_t i = i0 + std::min(r, rows - 1);
      yr[r] = y.data.data() + i * out;
      xr[r] = x.data.data() + i * in;
    }
    for (std::size_t r = 0; r < rows; ++r) std::copy(b.begin(), b.end(), yr[r]);
    if (rows == 4) {
      double* __restrict y0 = yr[0];
      double* __restrict y1 = yr[1];
      double* __restrict y2 = yr[2];
      double* __restrict y3 = yr[3];
      for (std::size_t k = 0; k < in; ++k) {
        const double a0 = xr[0][k], a1 = xr[1][k], a2 = xr[2][k], a3 = xr[3][k];
        if (a0 == 0.0 && a1 == 0.0 && a2 == 0.0 && a3 == 0.0) continue;
        const double* __restrict wr = wp + k * out;
#pragma omp simd
        for (std::size_t o = 0; o < out; ++o) {
          const double wv = wr[o];
          y0[o] += a0 * wv;
          y1[o] += a1 * wv;
          y2[o] += a2 * wv;
          y3[o] += a3 * wv;
        }
      }
    } else {
      for (std::size_t r = 0; r < rows; ++r) {
        double* __restrict yo = yr[r];
        for (std::size_t k = 0; k < in; ++k) {
          const double a = xr[r][k];
          if (a == 0.0) continue;
          const double* __restrict wr = wp + k * out;
#pragma omp simd
          for (std::size_t o = 0; o < out; ++o) yo[o] += a * wr[o];
        }
      }
    }
  }
}

void affine_backward_params(const Matrix& x, const Matrix& dy, Matrix& dw, std::span<double> db) {
  check_params(x, dy, dw, db);
  const std::size_t batch = x.rows, in = x.cols, out = dy.cols;
  const bool parallel = batch * in * out >= kParallelWork;

#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t ks = 0; ks < static_cast<std::ptrdiff_t>(in); ++ks) {
    const std::size_t k = static_cast<std::size_t>(ks);
    double* __restrict dwr = dw.data.data() + k * out;
    for (std::size_t i = 0; i < batch; ++i) {
      const double a = x.data[i * in + k];
      if (a == 0.0) continue;
      const double* __restrict g = dy.data.data() + i * out;
#pragma omp simd
      for (std::size_t o = 0; o < out; ++o) dwr[o] += a * g[o];
    }
  }
  for (std::size_t i = 0; i < batch; ++i) {
    const double* g = dy.data.data() + i * out;
    for (std::size_t o = 0; o < out; ++o) db[o] += g[o];
  }
}

void affine_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx) {
  check_input(dy, w);
  const std::size_t batch = dy.rows, in = w.rows, out = w.cols;
  resize(dx, batch, in);
  const bool parallel = batch * in * out >= kParallelWork;

#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t is = 0; is < static_cast<std::ptrdiff_t>(batch); ++is) {
    const std::size_t i = static_cast<std::size_t>(is);
    const double* __restrict g = dy.data.data() + i * out;
    double* __restrict dxr = dx.data.data() + i * in;
    for (std::size_t k = 0; k < in; ++k) {
      const double* __restrict wr = w.data.data() + k * out;
      double s = 0.0;
#pragma omp simd reduction(+ : s)
      for (std::size_t o = 0; o < out; ++o) s += g[o] * wr[o];
      dxr[k] = s;
    }
  }
}

void relu_forward(const Matrix& pre, Matrix& post) {
  resize(post, pre.rows, pre.cols);
  const std::size_t n = pre.data.size();
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) post.data[i] = pre.data[i] > 0.0 ? pre.data[i] : 0.0;
}

void relu_backward(const Matrix& pre, Matrix& grad) {
  if (pre.data.size() != grad.data.size()) throw Error("relu_backward: shape mismatch");
  const std::size_t n = pre.data.size();
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i)
    if (!(pre.data[i] > 0.0)) grad.data[i] = 0.0;
}

namespace reference {

void affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y) {
  check_forward(x, w, b);
  resize(y, x.rows, w.cols);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t o = 0; o < w.cols; ++o) {
      double s = b[o];
      for (std::size_t k = 0; k < x.cols; ++k) s += x(i, k) * w(k, o);
      y(i, o) = s;
    }
}

void affine_backward_params(const Matrix& x, const Matrix& dy, Matrix& dw, std::span<double> db) {
  check_params(x, dy, dw, db);
  for (std::size_t k = 0; k < x.cols; ++k)
    for (std::size_t o = 0; o < dy.cols; ++o) {
      double s = 0.0;
      for (std::size_t i = 0; i < x.rows; ++i) s += x(i, k) * dy(i, o);
      dw(k, o) += s;
    }
  for (std::size_t o = 0; o < dy.cols; ++o) {
    double s = 0.0;
    for (std::size_t i = 0; i < dy.rows; ++i) s += dy(i, o);
    db[o] += s;
  }
}

void affine_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx) {
  check_input(dy, w);
  resize(dx, dy.rows, w.rows);
  for (std::size_t i = 0; i < dy.rows; ++i)
    for (std::size_t k = 0; k < w.rows; ++k) {
      double s = 0.0;
      for (std::size_t o = 0; o < w.cols; ++o) s += dy(i, o) * w(k, o);
      dx(i, k) = s;
    }
}

void relu_forward(const Matrix& pre, Matrix& post) {
  resize(post, pre.rows, pre.cols);
  for (std::size_t i = 0; i < pre.data.size(); ++i) post.data[i] = std::max(pre.data[i], 0.0);
}

void relu_backward(const Matrix& pre, Matrix& grad) {
  if (pre.data.size() != grad.data.size()) throw Error("relu_backward: shape mismatch");
  for (std::size_t i = 0; i < pre.data.size(); ++i)
    if (pre.data[i] <= 0.0) grad.data[i] = 0.0;
}

}  // namespace reference
}  // namespace replaylab::kernels
