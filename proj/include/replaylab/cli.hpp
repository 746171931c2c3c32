// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "replaylab/datasets.hpp"
#include "replaylab/trainer.hpp"

namespace replaylab {

struct SyntheticSpec {
  std::size_t classes = 10;
  std::size_t per_class = 300;
  std::size_t test_per_class = 100;
  std::size_t dim = 32;
  double separation = 3.0;
  double noise = 1.0;
};

// Everything a run needs: the training config plus data and output plumbing.
struct ExperimentConfig {
  TrainConfig train;
  std::string method = "er";  // er, sgd or joint
  std::string dataset = "fashion-mnist";
  std::string data_dir;       // empty: $REPLAYLAB_DATA
  std::vector<std::uint64_t> seeds{0};
  std::string out = "results";
  std::size_t classes_per_task = 2;
  std::uint64_t split_seed = 0;
  SyntheticSpec synthetic;
};

struct ConfigKey {
  std::string name;
  std::string description;
};

// Documented keys in canonical order.
const std::vector<ConfigKey>& config_keys();

// Applies one key = value assignment. Unknown keys and malformed values throw ConfigError.
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);
std::string get_config_value(const ExperimentConfig& config, std::string_view key);

// Flat text format: one `key = value` per line, `#` starts a comment.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});

// Every key in canonical order with its current value.
std::string config_to_text(const ExperimentConfig& config);

// FNV-1a over the canonical text without the `seeds` and `out` lines.
std::string config_hash(const ExperimentConfig& config);

// Loads or generates the dataset and splits it into tasks.
TaskStream build_stream(const ExperimentConfig& config);

// One report per seed, following config.method.
std::vector<RunReport> run_experiment(const ExperimentConfig& config, const TaskStream& stream);

// Output documents. Wall-clock values are the only non-deterministic fields.
std::string runs_csv(const std::vector<RunReport>& runs, const std::string& hash);
std::string report_json(const ExperimentConfig& config, const std::vector<RunReport>& runs);
std::string ablation_csv(const ExperimentConfig& config, const std::vector<AblationRow>& rows);
std::string ablation_json(const ExperimentConfig& config, const std::vector<AblationRow>& rows);

// Entry point of the replaylab executable. Returns the process exit status:
// 0 success, 1 failed check, 2 config error, 3 data error, 4 runtime failure.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace replaylab
