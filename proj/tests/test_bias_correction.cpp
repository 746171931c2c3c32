// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "replaylab/bias_correction.hpp"
#include "replaylab/evaluation.hpp"

using namespace replaylab;

namespace {

// Logits whose softmax is the true label posterior, optionally with +bias on
// the classes listed in `biased`.
struct LogitSample {
  Matrix logits;
  std::vector<int> labels;
};

LogitSample calibrated(std::size_t n, std::size_t classes, Rng& rng, const std::vector<int>& biased = {},
                       double bias = 0.0) {
  LogitSample s{Matrix(n, classes), std::vector<int>(n)};
  std::normal_distribution<double> z(0.0, 2.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : s.logits.row(i)) v = z(rng);
    std::vector<double> w(s.logits.row(i).begin(), s.logits.row(i).end());
    double top = *std::max_element(w.begin(), w.end());
    for (double& v : w) v = std::exp(v - top);
    std::discrete_distribution<int> pick(w.begin(), w.end());
    s.labels[i] = pick(rng);
    for (int k : biased) s.logits(i, static_cast<std::size_t>(k)) += bias;
  }
  return s;
}

Matrix row_matrix(std::vector<double> values) {
  Matrix m(1, values.size());
  m.data = std::move(values);
  return m;
}

// Stream whose inputs are the logits themselves, so an identity network
// plus a correction can be evaluated through the standard metrics.
TaskStream logit_stream(const LogitSample& s, std::size_t classes_per_task) {
  auto data = std::make_shared<Dataset>();
  data->class_count = s.logits.cols;
  data->width = s.logits.cols;
  for (std::size_t i = 0; i < s.logits.rows; ++i)
    data->examples.push_back({std::vector<double>(s.logits.row(i).begin(), s.logits.row(i).end()), s.labels[i]});
  TaskStream stream{data, data, {}};
  for (std::size_t c = 0; c < s.logits.cols; c += classes_per_task) {
    Task t;
    for (std::size_t k = c; k < c + classes_per_task; ++k) t.classes.push_back(static_cast<int>(k));
    for (std::size_t i = 0; i < s.labels.size(); ++i)
      if (static_cast<std::size_t>(s.labels[i]) >= c && static_cast<std::size_t>(s.labels[i]) < c + classes_per_task)
        t.test.push_back(i);
    stream.tasks.push_back(t);
  }
  return stream;
}

LogitFn corrected(const Correction& c) {
  return [c](const Matrix& x) { return apply_correction(c, x); };
}

}  // namespace

TEST_CASE("apply_bic") {
  const Matrix o = row_matrix({1, 2, 3, 4});
  CHECK(apply_bic(BicLayer{1.0, 0.0, {2, 3}}, o).data == o.data);
  const Matrix q = apply_bic(BicLayer{0.5, -1.0, {2, 3}}, o);
  CHECK(q.data == std::vector<double>{1, 2, 0.5, 1});
  CHECK_THROWS_AS(apply_bic(BicLayer{1.0, 0.0, {4}}, o), Error);
}

TEST_CASE("apply_cbic") {
  const Matrix zero = row_matrix({0, 0, 0, 0});
  CHECK(apply_cbic(CbicLayer{{0.0, 0.0}, {0, 0, 1, 1}}, row_matrix({1, 2, 3, 4})).data ==
        std::vector<double>{1, 2, 3, 4});
  CHECK(apply_cbic(CbicLayer{{0.5, -0.5}, {0, 0, 1, 1}}, zero).data == std::vector<double>{0.5, 0.5, -0.5, -0.5});
  CHECK_THROWS_AS(apply_cbic(CbicLayer{{0.0}, {0, 0, -1, -1}}, zero), Error);

  SUBCASE("a common offset leaves predictions unchanged") {
    Rng rng = make_rng(1);
    const LogitSample s = calibrated(200, 6, rng);
    const CbicLayer a{{0.0, 0.7, -1.2}, {0, 0, 1, 1, 2, 2}};
    const CbicLayer b{{2.5, 3.2, 1.3}, {0, 0, 1, 1, 2, 2}};
    const Matrix qa = apply_cbic(a, s.logits), qb = apply_cbic(b, s.logits);
    for (std::size_t i = 0; i < s.logits.rows; ++i) CHECK(argmax(qa.row(i)) == argmax(qb.row(i)));
  }
  SUBCASE("BiC with unit slope equals a single corrected task") {
    Rng rng = make_rng(2);
    const LogitSample s = calibrated(50, 4, rng);
    const Matrix bic = apply_bic(BicLayer{1.0, 0.3, {2, 3}}, s.logits);
    const Matrix cbic = apply_cbic(CbicLayer{{0.0, 0.3}, {0, 0, 1, 1}}, s.logits);
    CHECK(bic.data == cbic.data);
  }
  SUBCASE("monostate is the identity") {
    CHECK(apply_correction(Correction{}, zero).data == zero.data);
  }
}

TEST_CASE("fit_bic_on_logits") {
  Rng rng = make_rng(3);
  const std::vector<int> last{4, 5};
  SUBCASE("calibrated logits stay near the identity") {
    const LogitSample s = calibrated(20000, 6, rng);
    const BicLayer l = fit_bic_on_logits(s.logits, s.labels, last, {}, {}, rng);
    CHECK(std::abs(l.alpha - 1.0) <= 0.1);
    CHECK(std::abs(l.beta) <= 0.1);
  }
  SUBCASE("biased logits: the fit lowers the buffer loss") {
    const LogitSample s = calibrated(500, 6, rng, last, 3.0);
    const std::vector<int> classes{0, 1, 2, 3, 4, 5};
    const double before = corrected_loss(Correction{}, s.logits, s.labels, classes);
    const BicLayer l = fit_bic_on_logits(s.logits, s.labels, last, classes, {}, rng);
    CHECK(corrected_loss(Correction{l}, s.logits, s.labels, classes) < before);
    CHECK(l.beta < 0.0);
  }
  SUBCASE("zero epochs return the identity") {
    const LogitSample s = calibrated(100, 6, rng, last, 3.0);
    BiasFitConfig cfg;
    cfg.epochs = 0;
    const BicLayer l = fit_bic_on_logits(s.logits, s.labels, last, {}, cfg, rng);
    CHECK(l.alpha == 1.0);
    CHECK(l.beta == 0.0);
  }
  SUBCASE("the softmax is restricted to the listed classes") {
    LogitSample s = calibrated(300, 6, rng, {2, 3}, 2.0);
    for (int& y : s.labels) y %= 4;
    for (std::size_t i = 0; i < s.logits.rows; ++i) s.logits(i, 5) = 50.0;
    const std::vector<int> seen{0, 1, 2, 3};
    const BicLayer l = fit_bic_on_logits(s.logits, s.labels, {2, 3}, seen, {}, rng);
    CHECK(std::isfinite(l.alpha));
    CHECK(corrected_loss(Correction{l}, s.logits, s.labels, seen) <
          corrected_loss(Correction{}, s.logits, s.labels, seen));
  }
}

TEST_CASE("fit_cbic_on_logits") {
  Rng rng = make_rng(4);
  const std::vector<int> partition{0, 0, 1, 1, 2, 2};
  SUBCASE("calibrated logits keep offsets near zero") {
    const LogitSample s = calibrated(20000, 6, rng);
    const CbicLayer l = fit_cbic_on_logits(s.logits, s.labels, partition, {}, rng);
    REQUIRE(l.betas.size() == 3);
    CHECK(l.betas[0] == 0.0);
    for (double b : l.betas) CHECK(std::abs(b) <= 0.1);
  }
  SUBCASE("last-task bias: the fitted offsets flatten the task distribution") {
    const LogitSample train = calibrated(600, 6, rng, {4, 5}, 3.0);
    const LogitSample test = calibrated(600, 6, rng, {4, 5}, 3.0);
    const CbicLayer l = fit_cbic_on_logits(train.logits, train.labels, partition, {}, rng);
    const TaskStream stream = logit_stream(test, 2);
    const double before = kl_to_uniform(task_prediction_distribution(corrected(Correction{}), stream));
    const double after = kl_to_uniform(task_prediction_distribution(corrected(Correction{l}), stream));
    CHECK(after < before);
    CHECK(l.betas[2] < 0.0);
  }
  SUBCASE("a single task is pinned") {
    const LogitSample s = calibrated(100, 2, rng);
    const CbicLayer l = fit_cbic_on_logits(s.logits, s.labels, {0, 0}, {}, rng);
    CHECK(l.betas == std::vector<double>{0.0});
    CHECK(apply_cbic(l, s.logits).data == s.logits.data);
  }
}

TEST_CASE("buffer-driven fits leave the backbone untouched") {
  Rng rng = make_rng(5);
  Mlp model = Mlp::init(std::vector<std::size_t>{3, 8, 4}, rng);
  ReplayBuffer buffer(40, Strategy::Reservoir, 4);
  for (int i = 0; i < 40; ++i)
    buffer.update({{uniform_unit(rng), uniform_unit(rng), uniform_unit(rng)}, i % 4, 0.0}, rng);
  const std::uint64_t before = model.parameter_checksum();
  const std::vector<int> seen{0, 1, 2, 3};
  const BicLayer bic = fit_bic(model, buffer, {2, 3}, seen, {}, rng);
  const CbicLayer cbic = fit_cbic(model, buffer, {0, 0, 1, 1}, {}, rng);
  CHECK(model.parameter_checksum() == before);
  CHECK(std::isfinite(bic.alpha));
  CHECK(cbic.betas.size() == 2);
  ReplayBuffer empty(4, Strategy::Reservoir, 4);
  CHECK_THROWS_AS(fit_cbic(model, empty, {0, 0, 1, 1}, {}, rng), Error);
}
