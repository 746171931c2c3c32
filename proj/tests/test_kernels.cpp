// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <array>
#include <cmath>

#include "replaylab/kernels.hpp"

using namespace replaylab;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double zero_fraction = 0.0) {
  Matrix m(r, c);
  std::normal_distribution<double> g(0.0, 1.0);
  for (double& v : m.data) v = uniform_unit(rng) < zero_fraction ? 0.0 : g(rng);
  return m;
}

void require_close(const Matrix& a, const Matrix& b, double tol = 1e-12) {
  REQUIRE(a.rows == b.rows);
  REQUIRE(a.cols == b.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double scale = std::max({1.0, std::abs(a.data[i]), std::abs(b.data[i])});
    REQUIRE(std::abs(a.data[i] - b.data[i]) <= tol * scale);
  }
}

}  // namespace

TEST_CASE("parallel affine kernels agree with the serial reference") {
  Rng rng = make_rng(7);
  // Batches that are and are not multiples of the 4-row block, and sparse inputs.
  using Shape = std::array<std::size_t, 3>;
  for (const auto& [batch, in, out] : {Shape{1, 3, 5}, Shape{4, 8, 8}, Shape{7, 33, 17}, Shape{64, 784, 256},
                                       Shape{13, 256, 10}}) {
    CAPTURE(batch);
    CAPTURE(in);
    const Matrix x = random_matrix(batch, in, rng, 0.5);
    const Matrix w = random_matrix(in, out, rng);
    std::vector<double> b(out);
    for (double& v : b) v = uniform_unit(rng);

    Matrix y_fast, y_ref;
    kernels::affine_forward(x, w, b, y_fast);
    kernels::reference::affine_forward(x, w, b, y_ref);
    require_close(y_fast, y_ref);

    const Matrix dy = random_matrix(batch, out, rng);
    Matrix dw_fast(in, out, 0.5), dw_ref(in, out, 0.5);
    std::vector<double> db_fast(out, 0.25), db_ref(out, 0.25);
    kernels::affine_backward_params(x, dy, dw_fast, db_fast);
    kernels::reference::affine_backward_params(x, dy, dw_ref, db_ref);
    require_close(dw_fast, dw_ref);
    for (std::size_t o = 0; o < out; ++o) CHECK(db_fast[o] == doctest::Approx(db_ref[o]).epsilon(1e-12));

    Matrix dx_fast, dx_ref;
    kernels::affine_backward_input(dy, w, dx_fast);
    kernels::reference::affine_backward_input(dy, w, dx_ref);
    require_close(dx_fast, dx_ref);
  }
}

TEST_CASE("relu kernels mask non-positive entries") {
  Matrix pre(1, 4);
  pre.data = {-1.0, 0.0, 2.0, 3.5};
  Matrix post, post_ref;
  kernels::relu_forward(pre, post);
  kernels::reference::relu_forward(pre, post_ref);
  CHECK(post.data == std::vector<double>{0.0, 0.0, 2.0, 3.5});
  CHECK(post.data == post_ref.data);

  Matrix g(1, 4, 1.0), g_ref(1, 4, 1.0);
  kernels::relu_backward(pre, g);
  kernels::reference::relu_backward(pre, g_ref);
  CHECK(g.data == std::vector<double>{0.0, 0.0, 1.0, 1.0});
  CHECK(g.data == g_ref.data);
}

TEST_CASE("kernels reject mismatched shapes") {
  Matrix x(2, 3), w(4, 5), y;
  std::vector<double> b(5);
  CHECK_THROWS_AS(kernels::affine_forward(x, w, b, y), Error);
  CHECK_THROWS_AS(kernels::reference::affine_forward(x, w, b, y), Error);
}

TEST_CASE("parallel kernels are deterministic across calls") {
  Rng rng = make_rng(3);
  const Matrix x = random_matrix(33, 100, rng), w = random_matrix(100, 40, rng);
  std::vector<double> b(40, 0.1);
  Matrix y1, y2;
  kernels::affine_forward(x, w, b, y1);
  kernels::affine_forward(x, w, b, y2);
  CHECK(y1.data == y2.data);
}
