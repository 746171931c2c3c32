// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <vector>

#include "replaylab/datasets.hpp"
#include "replaylab/kernels.hpp"
#include "replaylab/sampling.hpp"
#include "replaylab/trainer.hpp"

using namespace replaylab;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng = make_rng(seed, 31);
  Matrix m(rows, cols);
  for (double& v : m.data) v = 2.0 * uniform_unit(rng) - 1.0;
  return m;
}

// Shapes of the 784-256-256-10 network at a 42-row step (10 stream + 32 replay).
void shapes(benchmark::internal::Benchmark* b) {
  b->Args({42, 784, 256})->Args({42, 256, 256})->Args({42, 256, 10})->Args({256, 784, 256});
}

template <bool Parallel>
void BM_AffineForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0)), in = static_cast<std::size_t>(state.range(1)),
             out = static_cast<std::size_t>(state.range(2));
  const Matrix x = random_matrix(n, in, 1), w = random_matrix(in, out, 2);
  const std::vector<double> b(out, 0.1);
  Matrix y;
  for (auto _ : state) {
    if constexpr (Parallel) kernels::affine_forward(x, w, b, y);
    else kernels::reference::affine_forward(x, w, b, y);
    benchmark::DoNotOptimize(y.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * in * out));
}

template <bool Parallel>
void BM_AffineBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0)), in = static_cast<std::size_t>(state.range(1)),
             out = static_cast<std::size_t>(state.range(2));
  const Matrix x = random_matrix(n, in, 1), w = random_matrix(in, out, 2), dy = random_matrix(n, out, 3);
  Matrix dw(in, out), dx;
  std::vector<double> db(out, 0.0);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::affine_backward_params(x, dy, dw, db);
      kernels::affine_backward_input(dy, w, dx);
    } else {
      kernels::reference::affine_backward_params(x, dy, dw, db);
      kernels::reference::affine_backward_input(dy, w, dx);
    }
    benchmark::DoNotOptimize(dw.data.data());
    benchmark::DoNotOptimize(dx.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * in * out));
}

void BM_TrainStep(benchmark::State& state) {
  Rng rng = make_rng(4, 0);
  const SyntheticModel model = make_synthetic_model(10, 784, 3.0, rng);
  const Dataset data = sample_synthetic(model, 60, rng);
  TrainConfig config;
  config.tricks = parse_tricks(state.range(0) ? "elrd,lars" : "none");
  TrainState st = make_train_state(config, data, 1'000'000);
  for (std::size_t i = 0; i < data.size() && st.buffer.size() < config.buffer_capacity; ++i)
    st.buffer.update(StoredExample{data.examples[i].features, data.examples[i].label, 1.0}, st.rngs.buffer);
  std::size_t offset = 0;
  for (auto _ : state) {
    const std::span<const Example> batch(data.examples.data() + offset, config.stream_batch_size);
    benchmark::DoNotOptimize(er_train_step(st, batch, config).total_loss);
    offset = (offset + config.stream_batch_size) % (data.size() - config.stream_batch_size);
  }
  state.SetLabel(config.tricks.label());
}

}  // namespace

BENCHMARK(BM_AffineForward<false>)->Name("affine_forward/serial")->Apply(shapes);
BENCHMARK(BM_AffineForward<true>)->Name("affine_forward/openmp")->Apply(shapes);
BENCHMARK(BM_AffineBackward<false>)->Name("affine_backward/serial")->Apply(shapes);
BENCHMARK(BM_AffineBackward<true>)->Name("affine_backward/openmp")->Apply(shapes);
BENCHMARK(BM_TrainStep)->Name("er_train_step")->Arg(0)->Arg(1);

BENCHMARK_MAIN();
