// SPDX-License-Identifier: Apache-2.0
#include "replaylab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "replaylab/evaluation.hpp"
#include "replaylab/trainer.hpp"

namespace replaylab {

std::vector<BalanceToyStats> balance_toy(const BalanceToyConfig& config, const std::vector<Strategy>& strategies) {
  if (config.classes == 0 || config.repetitions == 0) throw ConfigError("balance toy needs classes and repetitions");
  const double ideal = static_cast<double>(config.capacity) / static_cast<double>(config.classes);
  std::vector<BalanceToyStats> out(strategies.size());
  std::vector<std::vector<std::vector<double>>> counts(strategies.size());
  std::vector<int> labels;
  for (std::size_t c = 0; c < config.classes; ++c) labels.insert(labels.end(), config.per_class, static_cast<int>(c));

  for (std::size_t r = 0; r < config.repetitions; ++r) {
    Rng stream_rng = make_rng(config.seed, 1000 + r);
    std::vector<int> order = labels;
    std::shuffle(order.begin(), order.end(), stream_rng);
    std::vector<double> losses(order.size());
    for (double& l : losses) l = uniform_unit(stream_rng);

    for (std::size_t s = 0; s < strategies.size(); ++s) {
      ReplayBuffer buffer(config.capacity, strategies[s], config.classes);
      Rng rng = make_rng(config.seed, (r << 8) + 1 + s);
      for (std::size_t i = 0; i < order.size(); ++i) buffer.update(StoredExample{{}, order[i], losses[i]}, rng);
      const std::vector<std::size_t> c = buffer.class_counts();
      counts[s].emplace_back(c.begin(), c.end());
      out[s].mse.push_back(buffer_balance_mse(c, ideal));
    }
  }

  for (std::size_t s = 0; s < strategies.size(); ++s) {
    BalanceToyStats& st = out[s];
    st.strategy = strategies[s];
    std::tie(st.mse_mean, st.mse_std) = mean_std(st.mse);
    for (std::size_t c = 0; c < config.classes; ++c) {
      std::vector<double> column;
      for (const auto& rep : counts[s]) column.push_back(rep[c]);
      const auto [m, sd] = mean_std(column);
      st.mean_counts.push_back(m);
      st.std_counts.push_back(sd);
    }
  }
  return out;
}

double batch_win_fraction(const BalanceToyStats& a, const BalanceToyStats& b, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  const std::size_t batches = std::min(a.mse.size(), b.mse.size()) / batch_size;
  if (batches == 0) return 0.0;
  std::size_t wins = 0;
  for (std::size_t k = 0; k < batches; ++k) {
    const auto first = static_cast<std::ptrdiff_t>(k * batch_size), last = first + static_cast<std::ptrdiff_t>(batch_size);
    const double ma = std::accumulate(a.mse.begin() + first, a.mse.begin() + last, 0.0);
    const double mb = std::accumulate(b.mse.begin() + first, b.mse.begin() + last, 0.0);
    wins += ma < mb;
  }
  return static_cast<double>(wins) / static_cast<double>(batches);
}

double omission_monte_carlo(std::size_t class_count, std::size_t capacity, std::size_t trials, std::uint64_t seed) {
  if (class_count == 0) throw ConfigError("omission: class count must be positive");
  if (trials == 0) throw ConfigError("omission: need at least one trial");
  Rng rng = make_rng(seed, 7);
  std::size_t missing = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    bool present = false;
    for (std::size_t i = 0; i < capacity && !present; ++i) present = uniform_index(rng, class_count) == 0;
    missing += !present;
  }
  return static_cast<double>(missing) / static_cast<double>(trials);
}

InclusionStudy inclusion_study(Strategy strategy, std::size_t items, std::size_t capacity, std::size_t class_count,
                               std::size_t runs, std::uint64_t seed) {
  if (strategy == Strategy::Ring) throw ConfigError("inclusion study applies to reservoir-family strategies");
  InclusionStudy st;
  st.runs = runs;
  st.admitted.assign(items, 0);
  st.retained.assign(items, 0);
  for (std::size_t run = 0; run < runs; ++run) {
    Rng rng = make_rng(seed, 5000 + run);
    ReplayBuffer buffer(capacity, strategy, class_count);
    for (std::size_t n = 0; n < items; ++n) {
      const int label = static_cast<int>(uniform_index(rng, class_count));
      buffer.update(StoredExample{{static_cast<double>(n)}, label, uniform_unit(rng)}, rng);
      bool in = false;
      for (std::size_t k = 0; k < buffer.size() && !in; ++k) in = buffer.slot(k).features[0] == static_cast<double>(n);
      st.admitted[n] += in;
    }
    for (std::size_t k = 0; k < buffer.size(); ++k) ++st.retained[static_cast<std::size_t>(buffer.slot(k).features[0])];
  }
  return st;
}

double admission_probability(std::size_t n, std::size_t capacity) {
  return n < capacity ? 1.0 : static_cast<double>(capacity) / static_cast<double>(n + 1);
}

double within_binomial_band(const std::vector<std::size_t>& counts, std::size_t runs,
                            const std::vector<double>& probabilities, double sigmas) {
  if (counts.size() != probabilities.size() || counts.empty()) throw Error("binomial band: size mismatch");
  const double r = static_cast<double>(runs);
  std::size_t within = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double p = probabilities[i];
    const double sd = std::sqrt(r * p * (1.0 - p));
    within += std::abs(static_cast<double>(counts[i]) - r * p) <= sigmas * sd;
  }
  return static_cast<double>(within) / static_cast<double>(counts.size());
}

std::vector<GradcheckNet> gradcheck_suite(std::size_t nets, std::uint64_t seed, BackwardFault fault) {
  Rng rng = make_rng(seed, 11);
  std::vector<GradcheckNet> out;
  for (std::size_t n = 0; n < nets; ++n) {
    GradcheckNet net;
    net.dims.push_back(1 + uniform_index(rng, 8));
    const std::size_t hidden = 1 + uniform_index(rng, 2);
    for (std::size_t h = 0; h < hidden; ++h) net.dims.push_back(1 + uniform_index(rng, 8));
    net.dims.push_back(2 + uniform_index(rng, 3));
    net.batch = 1 + uniform_index(rng, 6);
    net.result = gradient_check_random(net.dims, net.batch, rng, {}, fault);
    out.push_back(std::move(net));
  }
  return out;
}

}  // namespace replaylab
