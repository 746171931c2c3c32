// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "replaylab/core.hpp"

namespace replaylab {

enum class Split { Train, Test, Validation };
std::string_view to_string(Split s);

struct Dataset {
  std::vector<Example> examples;
  std::size_t class_count = 0;
  Split split = Split::Train;
  // Image geometry of the flattened features (1 x dim x 1 for vectors).
  std::size_t height = 1, width = 1, channels = 1;

  std::size_t feature_dim() const { return height * width * channels; }
  std::size_t size() const { return examples.size(); }
};

// ---- IDX (the MNIST family distribution format) ---------------------------

class IdxError : public DataError {
 public:
  enum class Kind { BadMagic, Truncated, DimOverflow, BadGzip };
  IdxError(Kind kind, std::size_t offset, const std::string& what);
  Kind kind() const { return kind_; }
  std::size_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

struct IdxImages {
  std::size_t count = 0, rows = 0, cols = 0;
  std::vector<double> pixels;  // count * rows * cols values in [0, 1]
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_idx_images(const IdxImages& images);
std::vector<std::uint8_t> serialize_idx_labels(std::span<const std::uint8_t> labels);

// Inflates gzip input (detected by the 1f 8b prefix); other input is returned as is.
std::vector<std::uint8_t> maybe_gunzip(std::vector<std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

// Pairs images with labels; every label must be below class_count.
Dataset make_dataset(const IdxImages& images, std::span<const std::uint8_t> labels, std::size_t class_count, Split split);

// Loads {train,t10k}-{images-idx3,labels-idx1}-ubyte[.gz] from dir.
Dataset load_fashion_mnist(const std::filesystem::path& dir, Split split);
bool fashion_mnist_available(const std::filesystem::path& dir);

// Holds out `count` seeded-random training items as a validation split.
std::pair<Dataset, Dataset> carve_validation(const Dataset& train, std::size_t count, Rng& rng);

// ---- Synthetic Gaussian blobs ---------------------------------------------

// Class means with pairwise distance >= separation; features are mapped
// affinely (one scale for all dims) into [0, 1] and clamped.
struct SyntheticModel {
  Matrix means;
  double noise = 1.0;
  double lo = 0.0, hi = 1.0;
};

SyntheticModel make_synthetic_model(std::size_t class_count, std::size_t feature_dim, double separation, Rng& rng,
                                    double noise = 1.0);
Dataset sample_synthetic(const SyntheticModel& model, std::size_t per_class, Rng& rng, Split split = Split::Train);

// One-shot generator: fresh means, then per_class points per class.
Dataset synthetic_stream(std::size_t class_count, std::size_t per_class, std::size_t feature_dim, double separation,
                         Rng& rng);

// ---- Class-incremental task split -----------------------------------------

struct Task {
  std::vector<int> classes;
  std::vector<std::size_t> train;  // indices into TaskStream::train
  std::vector<std::size_t> test;   // indices into TaskStream::test
};

struct TaskStream {
  std::shared_ptr<const Dataset> train;
  std::shared_ptr<const Dataset> test;
  std::vector<Task> tasks;

  std::size_t class_count() const { return train->class_count; }
  std::size_t train_examples() const;
  // Task id of each class (-1 when a class belongs to no task).
  std::vector<int> task_of_class() const;
};

// Consecutive ascending class ids per task; train indices of each task are
// shuffled with rng.
TaskStream make_class_il_tasks(std::shared_ptr<const Dataset> train, std::shared_ptr<const Dataset> test,
                               std::size_t classes_per_task, Rng& rng);

}  // namespace replaylab
