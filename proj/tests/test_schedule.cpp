// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <cmath>

#include "replaylab/core.hpp"
#include "replaylab/schedule.hpp"

using namespace replaylab;

TEST_CASE("lr_at") {
  const ExpDecaySchedule s(0.1, 0.9999);
  CHECK(s.lr_at(0) == 0.1);
  CHECK(s.lr_at(10000) == doctest::Approx(0.036786).epsilon(1e-5));
  CHECK(s.lr_at(10000) == doctest::Approx(0.1 * std::pow(0.9999, 10000)).epsilon(1e-12));
  CHECK(ExpDecaySchedule::constant(0.3).lr_at(123456) == 0.3);
}

TEST_CASE("gamma_for_final_fraction") {
  CHECK(gamma_for_final_fraction(1.0, 500) == 1.0);
  CHECK(gamma_for_final_fraction(0.5, 1) == doctest::Approx(0.5).epsilon(1e-15));
  const double g = gamma_for_final_fraction(1.0 / 6.0, 60000);
  CHECK(std::abs(g - 0.99997014) <= 5e-9);
  CHECK(g == doctest::Approx(std::exp(-std::log(6.0) / 60000.0)).epsilon(1e-15));
  CHECK(std::abs(ExpDecaySchedule(0.1, g).lr_at(60000) / (0.1 / 6.0) - 1.0) <= 1e-9);
  CHECK_THROWS_AS(gamma_for_final_fraction(0.0, 10), ConfigError);
  CHECK_THROWS_AS(gamma_for_final_fraction(1.5, 10), ConfigError);
  CHECK_THROWS_AS(gamma_for_final_fraction(0.5, 0), ConfigError);
}

TEST_CASE("round trip and monotonicity") {
  for (double f : {0.9, 0.5, 1.0 / 6.0, 1e-3}) {
    for (std::uint64_t n : {1ULL, 7ULL, 9999ULL, 60000ULL, 2000000ULL}) {
      const ExpDecaySchedule s(0.05, gamma_for_final_fraction(f, n));
      REQUIRE(std::abs(s.lr_at(n) / (0.05 * f) - 1.0) <= 1e-9);
    }
  }
  const ExpDecaySchedule s(0.1, gamma_for_final_fraction(1.0 / 6.0, 10000));
  double prev = s.lr_at(0);
  for (std::uint64_t n = 1; n <= 12000; ++n) {
    const double lr = s.lr_at(n);
    REQUIRE(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("invalid schedules") {
  CHECK_THROWS_AS(ExpDecaySchedule(0.0, 0.9), ConfigError);
  CHECK_THROWS_AS(ExpDecaySchedule(0.1, 0.0), ConfigError);
  CHECK_THROWS_AS(ExpDecaySchedule(0.1, 1.01), ConfigError);
}
