// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <cmath>
#include <memory>
#include <vector>

#include "replaylab/evaluation.hpp"

using namespace replaylab;

namespace {

// Test set of `per_class` one-hot examples for each class; tasks of two classes.
TaskStream one_hot_stream(std::size_t classes, std::size_t per_class) {
  auto d = std::make_shared<Dataset>();
  d->class_count = classes;
  d->width = classes;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t n = 0; n < per_class; ++n) {
      Example e{std::vector<double>(classes, 0.0), static_cast<int>(c)};
      e.features[c] = 1.0;
      d->examples.push_back(e);
    }
  TaskStream s{d, d, {}};
  for (std::size_t c = 0; c < classes; c += 2) {
    Task t;
    t.classes = {static_cast<int>(c), static_cast<int>(c + 1)};
    for (std::size_t i = 0; i < d->size(); ++i)
      if (static_cast<std::size_t>(d->examples[i].label) / 2 == c / 2) t.test.push_back(i);
    s.tasks.push_back(t);
  }
  return s;
}

LogitFn constant(double v) {
  return [v](const Matrix& x) { return Matrix(x.rows, x.cols, v); };
}

}  // namespace

TEST_CASE("average_final_accuracy") {
  const TaskStream s = one_hot_stream(6, 5);
  SUBCASE("oracle model") {
    const AccuracyReport r = average_final_accuracy(
        [](const Matrix& x) {
          Matrix y = x;
          for (double& v : y.data) v *= 10.0;
          return y;
        },
        s);
    CHECK(r.per_task == std::vector<double>{1.0, 1.0, 1.0});
    CHECK(r.average == 1.0);
  }
  SUBCASE("constant logits pick class zero") {
    const AccuracyReport r = average_final_accuracy(constant(0.3), s);
    CHECK(r.per_task == std::vector<double>{0.5, 0.0, 0.0});
    CHECK(r.average == doctest::Approx(1.0 / 6.0));
  }
  SUBCASE("a task without test data is an error") {
    TaskStream broken = s;
    broken.tasks[1].test.clear();
    CHECK_THROWS_AS(average_final_accuracy(constant(0.0), broken), DataError);
  }
  SUBCASE("the model overload applies the correction") {
    Mlp identity = Mlp::zeros(std::vector<std::size_t>{6, 6});
    for (std::size_t k = 0; k < 6; ++k) identity.layers()[0].weight(k, k) = 1.0;
    CHECK(average_final_accuracy(identity, Correction{}, s).average == 1.0);
    const Correction push_last = BicLayer{1.0, 5.0, {4, 5}};
    const AccuracyReport r = average_final_accuracy(identity, push_last, s);
    CHECK(r.per_task[0] == 0.0);
    CHECK(r.per_task[2] == 1.0);
  }
}

TEST_CASE("task_prediction_distribution") {
  const TaskStream s = one_hot_stream(10, 3);
  SUBCASE("uniform logits") {
    const std::vector<double> p = task_prediction_distribution(constant(1.0), s);
    for (double v : p) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
  }
  SUBCASE("all mass on the last task") {
    const std::vector<double> p = task_prediction_distribution(
        [](const Matrix& x) {
          Matrix y(x.rows, x.cols, -1000.0);
          for (std::size_t i = 0; i < x.rows; ++i) y(i, 8) = y(i, 9) = 0.0;
          return y;
        },
        s);
    CHECK(p[4] == doctest::Approx(1.0));
    CHECK(argmax(p) == 4);
    CHECK(kl_to_uniform(p) == doctest::Approx(std::log(5.0)).epsilon(1e-9));
  }
  SUBCASE("sums to one and ignores per-example shifts") {
    Rng rng = make_rng(3);
    Matrix w(10, 10);
    for (double& v : w.data) v = 3.0 * uniform_unit(rng);
    const LogitFn base = [w](const Matrix& x) {
      Matrix y(x.rows, 10);
      for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < 10; ++j)
          for (std::size_t k = 0; k < 10; ++k) y(i, j) += x(i, k) * w(k, j);
      return y;
    };
    const LogitFn shifted = [base](const Matrix& x) {
      Matrix y = base(x);
      for (std::size_t i = 0; i < y.rows; ++i)
        for (double& v : y.row(i)) v += 7.0 * static_cast<double>(i);
      return y;
    };
    const std::vector<double> p = task_prediction_distribution(base, s);
    const std::vector<double> q = task_prediction_distribution(shifted, s);
    double total = 0.0;
    for (std::size_t t = 0; t < 5; ++t) {
      total += p[t];
      CHECK(std::abs(p[t] - q[t]) <= 1e-12);
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }
  SUBCASE("pooled averaging weights tasks by their test sizes") {
    // Task 0 examples predict task 0, all others predict uniformly.
    TaskStream uneven = s;
    uneven.tasks[0].test.resize(2);
    const LogitFn f = [](const Matrix& x) {
      Matrix y(x.rows, 10, 0.0);
      for (std::size_t i = 0; i < x.rows; ++i)
        if (x(i, 0) + x(i, 1) > 0) y(i, 0) = y(i, 1) = 1000.0;
      return y;
    };
    const std::vector<double> p = task_prediction_distribution(f, uneven);
    // 2 examples put mass 1 on task 0; 24 put 0.2 on every task.
    CHECK(p[0] == doctest::Approx((2.0 + 24.0 * 0.2) / 26.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(24.0 * 0.2 / 26.0).epsilon(1e-12));
  }
}

TEST_CASE("buffer_balance_mse") {
  CHECK(buffer_balance_mse(std::vector<std::size_t>{2, 2, 2, 2, 2, 2}, 2.0) == 0.0);
  CHECK(buffer_balance_mse(std::vector<std::size_t>{4, 4, 4, 0, 0, 0}, 2.0) == 4.0);
  ReplayBuffer b(4, Strategy::Reservoir, 2);
  Rng rng = make_rng(0);
  for (int i = 0; i < 3; ++i) b.update({{0.0}, 0, 0.0}, rng);
  CHECK(buffer_balance_mse(b, 2.0) == doctest::Approx((1.0 + 4.0) / 2.0));
}

TEST_CASE("kl_to_uniform") {
  CHECK(kl_to_uniform(std::vector<double>{0.25, 0.25, 0.25, 0.25}) == doctest::Approx(0.0));
  CHECK(kl_to_uniform(std::vector<double>{0, 0, 1, 0, 0}) == doctest::Approx(1.6094379124341003).epsilon(1e-14));
  Rng rng = make_rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(1 + uniform_index(rng, 8));
    double total = 0.0;
    for (double& v : p) total += (v = uniform_unit(rng));
    for (double& v : p) v /= total;
    REQUIRE(kl_to_uniform(p) >= 0.0);
  }
  CHECK_THROWS_AS(kl_to_uniform(std::vector<double>{1.5, -0.5}), Error);
}

TEST_CASE("argmax breaks ties towards the lowest index") {
  CHECK(argmax(std::vector<double>{1, 3, 3, 2}) == 1);
  CHECK(argmax(std::vector<double>{0, 0, 0}) == 0);
}
