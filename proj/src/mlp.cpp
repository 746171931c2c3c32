// SPDX-License-Identifier: Apache-2.0
#include "replaylab/mlp.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "replaylab/kernels.hpp"

namespace replaylab {
namespace {

void validate_dims(std::span<const std::size_t> dims) {
  if (dims.size() < 2) throw ConfigError("an MLP needs at least an input and an output dimension");
  for (std::size_t d : dims)
    if (d == 0) throw ConfigError("MLP layer dimensions must be positive");
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  layers_.reserve(dims_.size() - 1);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    DenseLayer layer;
    layer.weight = Matrix(dims_[l], dims_[l + 1]);
    layer.grad_weight = Matrix(dims_[l], dims_[l + 1]);
    layer.bias.assign(dims_[l + 1], 0.0);
    layer.grad_bias.assign(dims_[l + 1], 0.0);
    layers_.push_back(std::move(layer));
  }
}

Mlp Mlp::zeros(std::span<const std::size_t> layer_dims) {
  validate_dims(layer_dims);
  return Mlp(std::vector<std::size_t>(layer_dims.begin(), layer_dims.end()));
}

Mlp Mlp::init(std::span<const std::size_t> layer_dims, Rng& rng) {
  Mlp m = zeros(layer_dims);
  for (DenseLayer& layer : m.layers_) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(layer.inputs())));
    for (double& w : layer.weight.data) w = dist(rng);
  }
  return m;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& layer : layers_) n += layer.weight.data.size() + layer.bias.size();
  return n;
}

Matrix Mlp::forward(const Matrix& inputs) const {
  ForwardCache scratch;
  return forward(inputs, scratch);
}

Matrix Mlp::forward(const Matrix& inputs, ForwardCache& cache) const {
  if (inputs.cols != input_dim())
    throw DataError("forward: input has " + std::to_string(inputs.cols) + " features, model expects " +
                    std::to_string(input_dim()));
  const std::size_t depth = layers_.size();
  cache.inputs.resize(depth);
  cache.preactivations.resize(depth - 1);
  cache.inputs[0] = inputs;
  for (std::size_t l = 0; l < depth; ++l) {
    const DenseLayer& layer = layers_[l];
    if (l + 1 < depth) {
      kernels::affine_forward(cache.inputs[l], layer.weight, layer.bias, cache.preactivations[l]);
      kernels::relu_forward(cache.preactivations[l], cache.inputs[l + 1]);
    } else {
      kernels::affine_forward(cache.inputs[l], layer.weight, layer.bias, cache.logits);
    }
  }
  cache.generation = generation_;
  cache.valid = true;
  return cache.logits;
}

void Mlp::backward(ForwardCache& cache, const Matrix& dlogits, BackwardFault fault) {
  if (!cache.valid || cache.generation != generation_)
    throw Error("backward: forward cache is missing or was produced before the last parameter update");
  if (dlogits.rows != cache.logits.rows || dlogits.cols != cache.logits.cols)
    throw Error("backward: gradient shape does not match the cached logits");

  Matrix grad = dlogits;
  Matrix next;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    DenseLayer& layer = layers_[l];
    kernels::affine_backward_params(cache.inputs[l], grad, layer.grad_weight, layer.grad_bias);
    if (l == 0) break;
    kernels::affine_backward_input(grad, layer.weight, next);
    const Matrix& pre = cache.preactivations[l - 1];
    if (fault == BackwardFault::FlipReluMask) {
      for (std::size_t i = 0; i < pre.data.size(); ++i)
        if (pre.data[i] > 0.0) next.data[i] = -next.data[i];
        else next.data[i] = 0.0;
    } else {
      kernels::relu_backward(pre, next);
    }
    std::swap(grad, next);
  }
  cache.valid = false;
}

void Mlp::sgd_step(double learning_rate) {
  if (learning_rate < 0.0) throw ConfigError("learning rate must be non-negative");
  for (DenseLayer& layer : layers_) {
    const std::size_t n = layer.weight.data.size();
    double* w = layer.weight.data.data();
    const double* g = layer.grad_weight.data.data();
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) w[i] -= learning_rate * g[i];
    for (std::size_t o = 0; o < layer.bias.size(); ++o) layer.bias[o] -= learning_rate * layer.grad_bias[o];
  }
  zero_grad();
  ++generation_;
}

void Mlp::zero_grad() {
  for (DenseLayer& layer : layers_) {
    std::fill(layer.grad_weight.data.begin(), layer.grad_weight.data.end(), 0.0);
    std::fill(layer.grad_bias.begin(), layer.grad_bias.end(), 0.0);
  }
}

std::vector<double> Mlp::parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const DenseLayer& layer : layers_) {
    out.insert(out.end(), layer.weight.data.begin(), layer.weight.data.end());
    out.insert(out.end(), layer.bias.begin(), layer.bias.end());
  }
  return out;
}

std::vector<double> Mlp::gradients() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const DenseLayer& layer : layers_) {
    out.insert(out.end(), layer.grad_weight.data.begin(), layer.grad_weight.data.end());
    out.insert(out.end(), layer.grad_bias.begin(), layer.grad_bias.end());
  }
  return out;
}

void Mlp::set_parameters(std::span<const double> values) {
  if (values.size() != parameter_count()) throw Error("set_parameters: wrong parameter count");
  auto it = values.begin();
  for (DenseLayer& layer : layers_) {
    std::copy_n(it, layer.weight.data.size(), layer.weight.data.begin());
    it += static_cast<std::ptrdiff_t>(layer.weight.data.size());
    std::copy_n(it, layer.bias.size(), layer.bias.begin());
    it += static_cast<std::ptrdiff_t>(layer.bias.size());
  }
  ++generation_;
}

std::uint64_t Mlp::parameter_checksum() const {
  const std::vector<double> p = parameters();
  return checksum(p);
}

// Checkpoint layout, all little-endian:
//   8 bytes  magic "RPLMLP01"
//   u64      number of layer dims D
//   D x u64  layer dims
//   f64...   parameters in parameters() order
namespace {
constexpr std::array<char, 8> kMagic{'R', 'P', 'L', 'M', 'L', 'P', '0', '1'};

template <class T>
void put_le(std::ofstream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get_le(std::ifstream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw DataError("checkpoint truncated");
  return v;
}
}  // namespace

void Mlp::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint64_t>(out, dims_.size());
  for (std::size_t d : dims_) put_le<std::uint64_t>(out, d);
  for (double v : parameters()) put_le<double>(out, v);
}

Mlp Mlp::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw DataError("not a replaylab checkpoint");
  const auto count = get_le<std::uint64_t>(in);
  if (count < 2 || count > 64) throw DataError("checkpoint has an implausible layer count");
  std::vector<std::size_t> dims;
  for (std::uint64_t i = 0; i < count; ++i) dims.push_back(static_cast<std::size_t>(get_le<std::uint64_t>(in)));
  Mlp m = zeros(dims);
  std::vector<double> values(m.parameter_count());
  for (double& v : values) v = get_le<double>(in);
  m.set_parameters(values);
  return m;
}

Matrix softmax(const Matrix& logits) {
  Matrix p(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    auto row = logits.row(i);
    const double top = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t k = 0; k < logits.cols; ++k) z += (p(i, k) = std::exp(row[k] - top));
    for (std::size_t k = 0; k < logits.cols; ++k) p(i, k) /= z;
  }
  return p;
}

LossResult softmax_cross_entropy(const Matrix& logits, std::span<const int> labels) {
  if (logits.cols == 0) throw Error("softmax_cross_entropy: no classes");
  if (labels.size() != logits.rows) throw Error("softmax_cross_entropy: label count does not match batch");
  const std::size_t batch = logits.rows, classes = logits.cols;
  LossResult r;
  r.per_example.resize(batch);
  r.dlogits = Matrix(batch, classes);
  if (batch == 0) return r;
  const double inv = 1.0 / static_cast<double>(batch);
  double total = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) throw DataError("softmax_cross_entropy: label out of range");
    auto row = logits.row(i);
    const double top = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - top);
    const double log_z = std::log(z);
    for (std::size_t k = 0; k < classes; ++k) r.dlogits(i, k) = std::exp(row[k] - top - log_z) * inv;
    r.dlogits(i, static_cast<std::size_t>(y)) -= inv;
    // -log softmax; clamped so rounding never yields a negative loss.
    const double loss = std::max(0.0, log_z - (row[static_cast<std::size_t>(y)] - top));
    r.per_example[i] = loss;
    total += loss;
  }
  r.mean = total * inv;
  return r;
}

Matrix stack_features(std::span<const Example> examples) {
  if (examples.empty()) return {};
  const std::size_t dim = examples.front().features.size();
  Matrix m(examples.size(), dim);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].features.size() != dim) throw DataError("examples have differing feature lengths");
    std::copy(examples[i].features.begin(), examples[i].features.end(), m.row(i).begin());
  }
  return m;
}

std::vector<int> labels_of(std::span<const Example> examples) {
  std::vector<int> out;
  out.reserve(examples.size());
  for (const Example& e : examples) out.push_back(e.label);
  return out;
}

}  // namespace replaylab
