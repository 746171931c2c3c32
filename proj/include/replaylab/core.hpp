// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace replaylab {

using Rng = std::mt19937_64;

// Independent generator for a named stream of one run. Different `stream`
// ids give decorrelated sequences for the same seed.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

// Uniform real in [0, 1).
double uniform_unit(Rng& rng);

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or invalid arguments supplied by the operator.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing, malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Row-major dense matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// One labelled input. Features are flattened (HWC for images).
struct Example {
  std::vector<double> features;
  int label = 0;
};

// 64-bit FNV-1a, used for config hashes and parameter checksums.
std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(const std::string& s);
std::uint64_t checksum(std::span<const double> values, std::uint64_t h = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t v);

}  // namespace replaylab
