// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <vector>

#include "replaylab/gradcheck.hpp"
#include "replaylab/mlp.hpp"

using namespace replaylab;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data) v = scale * (2.0 * uniform_unit(rng) - 1.0);
  return m;
}

// Nested-vector evaluator that shares no code with Mlp::forward.
std::vector<std::vector<double>> naive_forward(const Mlp& net, const Matrix& x) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < x.rows; ++i) {
    std::vector<double> a(x.row(i).begin(), x.row(i).end());
    const auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      std::vector<double> z(layers[l].outputs());
      for (std::size_t j = 0; j < z.size(); ++j) {
        double s = layers[l].bias[j];
        for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * layers[l].weight(k, j);
        z[j] = (l + 1 < layers.size() && s < 0.0) ? 0.0 : s;
      }
      a = z;
    }
    out.push_back(a);
  }
  return out;
}

}  // namespace

TEST_CASE("init") {
  const std::vector<std::size_t> dims{784, 256, 256, 10};
  Rng a = make_rng(3), b = make_rng(3);
  const Mlp m = Mlp::init(dims, a);
  CHECK(m.parameter_count() == 269322);
  CHECK(m.parameters().size() == 269322);
  for (const DenseLayer& l : m.layers())
    for (double v : l.bias) CHECK(v == 0.0);
  CHECK(Mlp::init(dims, b).parameters() == m.parameters());

  double sq = 0.0;
  for (double v : m.layers()[0].weight.data) sq += v * v;
  CHECK(sq / (784.0 * 256.0) == doctest::Approx(2.0 / 784.0).epsilon(0.02));

  CHECK_THROWS_AS(Mlp::zeros(std::vector<std::size_t>{5}), ConfigError);
  CHECK_THROWS_AS(Mlp::zeros(std::vector<std::size_t>{5, 0, 2}), ConfigError);
}

TEST_CASE("forward") {
  Rng rng = make_rng(4);
  SUBCASE("zero parameters give zero logits") {
    const Mlp m = Mlp::zeros(std::vector<std::size_t>{6, 4, 3});
    const Matrix y = m.forward(random_matrix(5, 6, rng));
    for (double v : y.data) CHECK(v == 0.0);
  }
  SUBCASE("a single layer is an affine map") {
    Mlp m = Mlp::init(std::vector<std::size_t>{3, 2}, rng);
    m.layers()[0].bias = {0.5, -1.0};
    const Matrix x = random_matrix(4, 3, rng);
    const Matrix y = m.forward(x);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        double s = m.layers()[0].bias[j];
        for (std::size_t k = 0; k < 3; ++k) s += x(i, k) * m.layers()[0].weight(k, j);
        CHECK(y(i, j) == doctest::Approx(s).epsilon(1e-14));
      }
  }
  SUBCASE("matches an independent evaluator") {
    for (int trial = 0; trial < 10; ++trial) {
      Mlp m = Mlp::init(std::vector<std::size_t>{7, 9, 5, 4}, rng);
      for (DenseLayer& l : m.layers())
        for (double& v : l.bias) v = uniform_unit(rng) - 0.5;
      const Matrix x = random_matrix(6, 7, rng);
      const Matrix y = m.forward(x);
      const auto ref = naive_forward(m, x);
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 4; ++j) REQUIRE(std::abs(y(i, j) - ref[i][j]) <= 1e-12);
    }
  }
  SUBCASE("pure and shape checked") {
    const Mlp m = Mlp::init(std::vector<std::size_t>{5, 8, 3}, rng);
    const Matrix x = random_matrix(3, 5, rng);
    CHECK(m.forward(x).data == m.forward(x).data);
    ForwardCache cache;
    CHECK(m.forward(x, cache).data == m.forward(x).data);
    CHECK_THROWS_AS(m.forward(random_matrix(3, 4, rng)), DataError);
  }
}

TEST_CASE("softmax cross-entropy") {
  SUBCASE("uniform logits") {
    const Matrix logits(3, 10, 0.7);
    const std::vector<int> labels{0, 4, 9};
    const LossResult r = softmax_cross_entropy(logits, labels);
    CHECK(r.mean == doctest::Approx(std::log(10.0)).epsilon(1e-14));
    CHECK(r.mean == doctest::Approx(2.302585).epsilon(1e-6));
  }
  SUBCASE("saturated correct prediction") {
    Matrix logits(1, 5);
    logits(0, 2) = 30.0;
    const std::vector<int> labels{2};
    CHECK(softmax_cross_entropy(logits, labels).mean < 1e-9);
  }
  SUBCASE("large logits stay finite") {
    Matrix logits(1, 3);
    logits(0, 0) = 1000.0;
    logits(0, 1) = -1000.0;
    const std::vector<int> labels{1};
    const LossResult r = softmax_cross_entropy(logits, labels);
    CHECK(r.mean == doctest::Approx(2000.0));
  }
  SUBCASE("dlogits match central differences") {
    Rng rng = make_rng(8);
    const Matrix logits = random_matrix(5, 6, rng, 3.0);
    const std::vector<int> labels{0, 5, 2, 2, 3};
    const LossResult r = softmax_cross_entropy(logits, labels);
    constexpr double h = 1e-4;
    double worst = 0.0;
    for (std::size_t k = 0; k < logits.data.size(); ++k) {
      Matrix up = logits, down = logits;
      up.data[k] += h;
      down.data[k] -= h;
      const double fd =
          (softmax_cross_entropy(up, labels).mean - softmax_cross_entropy(down, labels).mean) / (2 * h);
      worst = std::max(worst, std::abs(fd - r.dlogits.data[k]) / std::max(std::abs(fd), 1e-8));
    }
    CHECK(worst <= 1e-5);
  }
  SUBCASE("invariants") {
    Rng rng = make_rng(9);
    const Matrix logits = random_matrix(20, 7, rng, 10.0);
    std::vector<int> labels(20);
    for (int& y : labels) y = static_cast<int>(uniform_index(rng, 7));
    const LossResult r = softmax_cross_entropy(logits, labels);
    double sum = 0.0;
    for (double l : r.per_example) {
      CHECK(l >= 0.0);
      sum += l;
    }
    CHECK(std::abs(sum / 20.0 - r.mean) <= 1e-12);
    const Matrix p = softmax(logits);
    for (std::size_t i = 0; i < p.rows; ++i) {
      double row = 0.0;
      for (double v : p.row(i)) row += v;
      CHECK(std::abs(row - 1.0) <= 1e-9);
    }
  }
  SUBCASE("bad inputs") {
    const std::vector<int> labels{3};
    CHECK_THROWS_AS(softmax_cross_entropy(Matrix(1, 3), labels), DataError);
    CHECK_THROWS_AS(softmax_cross_entropy(Matrix(1, 0), std::vector<int>{0}), Error);
  }
}

TEST_CASE("backward") {
  Rng rng = make_rng(10);
  SUBCASE("zero dlogits give zero gradients") {
    Mlp m = Mlp::init(std::vector<std::size_t>{4, 6, 3}, rng);
    ForwardCache cache;
    const Matrix y = m.forward(random_matrix(5, 4, rng), cache);
    m.backward(cache, Matrix(y.rows, y.cols));
    for (double g : m.gradients()) CHECK(g == 0.0);
  }
  SUBCASE("dead unit gets no incoming gradient") {
    Mlp m = Mlp::init(std::vector<std::size_t>{4, 6, 3}, rng);
    m.layers()[0].bias[2] = -100.0;
    Matrix x = random_matrix(5, 4, rng);
    const std::vector<int> labels{0, 1, 2, 0, 1};
    ForwardCache cache;
    const Matrix y = m.forward(x, cache);
    m.backward(cache, softmax_cross_entropy(y, labels).dlogits);
    const DenseLayer& first = m.layers()[0];
    for (std::size_t k = 0; k < 4; ++k) CHECK(first.grad_weight(k, 2) == 0.0);
    CHECK(first.grad_bias[2] == 0.0);
    for (std::size_t c = 0; c < 3; ++c) CHECK(m.layers()[1].grad_weight(2, c) == 0.0);
  }
  SUBCASE("stale or reused caches are rejected") {
    Mlp m = Mlp::init(std::vector<std::size_t>{4, 3}, rng);
    ForwardCache cache;
    const Matrix y = m.forward(random_matrix(2, 4, rng), cache);
    const Matrix d(y.rows, y.cols, 0.1);
    m.backward(cache, d);
    CHECK_THROWS_AS(m.backward(cache, d), Error);
    m.forward(random_matrix(2, 4, rng), cache);
    m.sgd_step(0.1);
    CHECK_THROWS_AS(m.backward(cache, d), Error);
    ForwardCache empty;
    CHECK_THROWS_AS(m.backward(empty, d), Error);
  }
  SUBCASE("a three-layer net at batch four passes the finite-difference check") {
    const std::vector<std::size_t> dims{5, 4, 4, 3};
    const GradcheckResult r = gradient_check_random(dims, 4, rng);
    CHECK(r.parameters == 5 * 4 + 4 + 4 * 4 + 4 + 4 * 3 + 3);
    CHECK(r.passed());
  }
}

TEST_CASE("gradient check over twenty random nets") {
  Rng rng = make_rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> dims{1 + uniform_index(rng, 8)};
    const std::size_t hidden = uniform_index(rng, 3);
    for (std::size_t h = 0; h < hidden; ++h) dims.push_back(1 + uniform_index(rng, 8));
    dims.push_back(2 + uniform_index(rng, 3));
    const GradcheckResult r = gradient_check_random(dims, 1 + uniform_index(rng, 6), rng);
    CAPTURE(trial);
    CHECK(r.passed());
    CHECK(r.worst_relative <= 1e-4);
  }
}

TEST_CASE("corrupted backward is caught") {
  Rng rng = make_rng(6);
  const std::vector<std::size_t> dims{8, 8, 8, 4};
  const GradcheckResult r = gradient_check_random(dims, 4, rng, {}, BackwardFault::FlipReluMask);
  CHECK_FALSE(r.passed());
}

TEST_CASE("sgd step") {
  Rng rng = make_rng(12);
  SUBCASE("lr zero leaves parameters unchanged and clears gradients") {
    Mlp m = Mlp::init(std::vector<std::size_t>{3, 4, 2}, rng);
    const std::vector<double> before = m.parameters();
    ForwardCache cache;
    const Matrix y = m.forward(random_matrix(2, 3, rng), cache);
    m.backward(cache, Matrix(y.rows, y.cols, 0.3));
    m.sgd_step(0.0);
    CHECK(m.parameters() == before);
    for (double g : m.gradients()) CHECK(g == 0.0);
    CHECK_THROWS_AS(m.sgd_step(-1.0), ConfigError);
  }
  SUBCASE("one parameter, grad two, lr one tenth") {
    Mlp m = Mlp::zeros(std::vector<std::size_t>{1, 1});
    m.layers()[0].weight(0, 0) = 1.0;
    m.layers()[0].grad_weight(0, 0) = 2.0;
    m.sgd_step(0.1);
    CHECK(m.layers()[0].weight(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("descent on a convex quadratic decreases monotonically") {
    // f(w) = w^2 through the network output y = w * 1 with dL/dy = 2y.
    Mlp m = Mlp::zeros(std::vector<std::size_t>{1, 1});
    m.layers()[0].weight(0, 0) = 3.0;
    Matrix x(1, 1, 1.0);
    double prev = 9.0;
    for (int step = 0; step < 100; ++step) {
      ForwardCache cache;
      const Matrix y = m.forward(x, cache);
      m.backward(cache, Matrix(1, 1, 2.0 * y(0, 0)));
      m.layers()[0].grad_bias[0] = 0.0;
      m.sgd_step(0.05);
      const double w = m.layers()[0].weight(0, 0);
      REQUIRE(w * w < prev);
      prev = w * w;
    }
    CHECK(prev < 1e-6);
  }
}

TEST_CASE("checkpoint round trip") {
  Rng rng = make_rng(13);
  const Mlp m = Mlp::init(std::vector<std::size_t>{6, 5, 3}, rng);
  const auto path = std::filesystem::temp_directory_path() / "replaylab_test_checkpoint.bin";
  m.save(path);
  const Mlp back = Mlp::load(path);
  CHECK(back.layer_dims() == m.layer_dims());
  CHECK(back.parameters() == m.parameters());
  CHECK(back.parameter_checksum() == m.parameter_checksum());
  std::filesystem::resize_file(path, 20);
  CHECK_THROWS_AS(Mlp::load(path), DataError);
  std::filesystem::remove(path);
}
