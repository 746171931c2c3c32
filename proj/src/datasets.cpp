// SPDX-License-Identifier: Apache-2.0
#include "replaylab/datasets.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace replaylab {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::Validation: return "validation";
  }
  return "?";
}

IdxError::IdxError(Kind kind, std::size_t offset, const std::string& what)
    : DataError(what + " (at byte offset " + std::to_string(offset) + ")"), kind_(kind), offset_(offset) {}

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (bytes.size() < offset + 4) throw IdxError(IdxError::Kind::Truncated, offset, "IDX header truncated");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void expect_magic(std::span<const std::uint8_t> bytes, std::uint32_t want) {
  const std::uint32_t got = read_be32(bytes, 0);
  if (got != want) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "IDX magic 0x%08x, expected 0x%08x", got, want);
    throw IdxError(IdxError::Kind::BadMagic, 0, buf);
  }
}

// Checked product of record count and record size.
std::size_t payload_size(std::size_t count, std::size_t record, std::size_t header) {
  if (record != 0 && count > (std::numeric_limits<std::size_t>::max() - header) / record)
    throw IdxError(IdxError::Kind::DimOverflow, 4, "IDX dimensions overflow");
  return count * record;
}

}  // namespace

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t header = 16;
  expect_magic(bytes, kIdxImageMagic);
  IdxImages img;
  img.count = read_be32(bytes, 4);
  img.rows = read_be32(bytes, 8);
  img.cols = read_be32(bytes, 12);
  if (img.rows != 0 && img.cols > std::numeric_limits<std::uint32_t>::max() / img.rows)
    throw IdxError(IdxError::Kind::DimOverflow, 8, "IDX image dimensions overflow");
  const std::size_t record = img.rows * img.cols;
  const std::size_t payload = payload_size(img.count, record, header);
  if (bytes.size() < header + payload) {
    const std::size_t complete = record ? (bytes.size() - header) / record : 0;
    throw IdxError(IdxError::Kind::Truncated, header + complete * record,
                   "IDX image payload truncated: " + std::to_string(complete) + " of " + std::to_string(img.count) +
                       " images present");
  }
  img.pixels.resize(payload);
  for (std::size_t i = 0; i < payload; ++i) img.pixels[i] = static_cast<double>(bytes[header + i]) / 255.0;
  return img;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t header = 8;
  expect_magic(bytes, kIdxLabelMagic);
  const std::size_t count = read_be32(bytes, 4);
  if (bytes.size() < header + count)
    throw IdxError(IdxError::Kind::Truncated, bytes.size(),
                   "IDX label payload truncated: " + std::to_string(bytes.size() - header) + " of " +
                       std::to_string(count) + " labels present");
  return {bytes.begin() + header, bytes.begin() + static_cast<std::ptrdiff_t>(header + count)};
}

std::vector<std::uint8_t> serialize_idx_images(const IdxImages& images) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.pixels.size());
  put_be32(out, kIdxImageMagic);
  put_be32(out, static_cast<std::uint32_t>(images.count));
  put_be32(out, static_cast<std::uint32_t>(images.rows));
  put_be32(out, static_cast<std::uint32_t>(images.cols));
  for (double v : images.pixels) out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  return out;
}

std::vector<std::uint8_t> serialize_idx_labels(std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  put_be32(out, kIdxLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

std::vector<std::uint8_t> maybe_gunzip(std::vector<std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 0x1f || bytes[1] != 0x8b) return bytes;
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw IdxError(IdxError::Kind::BadGzip, 0, "zlib init failed");
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> chunk(1 << 16);
  zs.next_in = bytes.data();
  zs.avail_in = static_cast<uInt>(bytes.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      const std::size_t at = zs.total_in;
      inflateEnd(&zs);
      throw IdxError(IdxError::Kind::BadGzip, at, "corrupt gzip stream");
    }
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      const std::size_t at = zs.total_in;
      inflateEnd(&zs);
      throw IdxError(IdxError::Kind::BadGzip, at, "gzip stream ends early");
    }
  }
  inflateEnd(&zs);
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return maybe_gunzip(std::move(bytes));
}

Dataset make_dataset(const IdxImages& images, std::span<const std::uint8_t> labels, std::size_t class_count, Split split) {
  if (labels.size() != images.count)
    throw DataError("image count " + std::to_string(images.count) + " does not match label count " +
                    std::to_string(labels.size()));
  Dataset ds;
  ds.class_count = class_count;
  ds.split = split;
  ds.height = images.rows;
  ds.width = images.cols;
  ds.channels = 1;
  const std::size_t record = images.rows * images.cols;
  ds.examples.reserve(images.count);
  for (std::size_t i = 0; i < images.count; ++i) {
    if (labels[i] >= class_count)
      throw DataError("label " + std::to_string(labels[i]) + " of item " + std::to_string(i) + " is not below " +
                      std::to_string(class_count));
    const auto first = images.pixels.begin() + static_cast<std::ptrdiff_t>(i * record);
    ds.examples.push_back(Example{{first, first + static_cast<std::ptrdiff_t>(record)}, labels[i]});
  }
  return ds;
}

namespace {

std::filesystem::path find_idx(const std::filesystem::path& dir, const std::string& stem) {
  for (const char* suffix : {"", ".gz"}) {
    auto p = dir / (stem + suffix);
    if (std::filesystem::exists(p)) return p;
  }
  throw DataError("missing " + (dir / stem).string() + "[.gz]");
}

const char* idx_prefix(Split split) { return split == Split::Test ? "t10k" : "train"; }

}  // namespace

bool fashion_mnist_available(const std::filesystem::path& dir) {
  if (dir.empty()) return false;
  try {
    for (Split s : {Split::Train, Split::Test}) {
      find_idx(dir, std::string(idx_prefix(s)) + "-images-idx3-ubyte");
      find_idx(dir, std::string(idx_prefix(s)) + "-labels-idx1-ubyte");
    }
    return true;
  } catch (const DataError&) {
    return false;
  }
}

Dataset load_fashion_mnist(const std::filesystem::path& dir, Split split) {
  const std::string prefix = idx_prefix(split);
  const IdxImages images = parse_idx_images(read_file(find_idx(dir, prefix + "-images-idx3-ubyte")));
  const std::vector<std::uint8_t> labels = parse_idx_labels(read_file(find_idx(dir, prefix + "-labels-idx1-ubyte")));
  return make_dataset(images, labels, 10, split);
}

std::pair<Dataset, Dataset> carve_validation(const Dataset& train, std::size_t count, Rng& rng) {
  if (count >= train.size()) throw ConfigError("validation split would consume the whole training set");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> held(train.size(), false);
  for (std::size_t i = 0; i < count; ++i) held[order[i]] = true;
  Dataset rest = train, val = train;
  rest.examples.clear();
  val.examples.clear();
  val.split = Split::Validation;
  for (std::size_t i = 0; i < train.size(); ++i) (held[i] ? val : rest).examples.push_back(train.examples[i]);
  return {std::move(rest), std::move(val)};
}

SyntheticModel make_synthetic_model(std::size_t class_count, std::size_t feature_dim, double separation, Rng& rng,
                                    double noise) {
  if (class_count == 0 || feature_dim == 0) throw ConfigError("synthetic stream needs classes and features");
  if (!(separation >= 0.0)) throw ConfigError("synthetic separation must be non-negative");
  SyntheticModel m;
  m.noise = noise;
  m.means = Matrix(class_count, feature_dim);
  const double cells = std::ceil(std::pow(static_cast<double>(class_count), 1.0 / static_cast<double>(feature_dim)));
  double side = std::max(separation, 1e-9) * 2.0 * std::max(1.0, cells);
  std::size_t placed = 0, attempts = 0;
  std::uniform_real_distribution<double> coord(0.0, 1.0);
  std::vector<double> candidate(feature_dim);
  while (placed < class_count) {
    for (double& v : candidate) v = coord(rng) * side;
    bool ok = true;
    for (std::size_t c = 0; c < placed && ok; ++c) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < feature_dim; ++j) d2 += (candidate[j] - m.means(c, j)) * (candidate[j] - m.means(c, j));
      ok = std::sqrt(d2) >= separation;
    }
    if (ok) {
      std::copy(candidate.begin(), candidate.end(), m.means.row(placed).begin());
      ++placed;
    } else if (++attempts % 10000 == 0) {
      side *= 1.5;
    }
  }
  const auto [lo, hi] = std::minmax_element(m.means.data.begin(), m.means.data.end());
  m.lo = *lo - 4.0 * noise;
  m.hi = *hi + 4.0 * noise;
  return m;
}

Dataset sample_synthetic(const SyntheticModel& model, std::size_t per_class, Rng& rng, Split split) {
  if (per_class == 0) throw ConfigError("synthetic stream needs at least one item per class");
  Dataset ds;
  ds.class_count = model.means.rows;
  ds.split = split;
  // Square feature counts are laid out as images so augmentation applies.
  const std::size_t dim = model.means.cols;
  std::size_t side = static_cast<std::size_t>(std::sqrt(static_cast<double>(dim)));
  while (side * side > dim) --side;
  while ((side + 1) * (side + 1) <= dim) ++side;
  ds.height = side * side == dim ? side : 1;
  ds.width = dim / ds.height;
  ds.channels = 1;
  std::normal_distribution<double> gauss(0.0, model.noise);
  const double scale = 1.0 / (model.hi - model.lo);
  ds.examples.reserve(per_class * ds.class_count);
  for (std::size_t c = 0; c < ds.class_count; ++c)
    for (std::size_t n = 0; n < per_class; ++n) {
      Example e{std::vector<double>(model.means.cols), static_cast<int>(c)};
      for (std::size_t j = 0; j < model.means.cols; ++j)
        e.features[j] = std::clamp((model.means(c, j) + gauss(rng) - model.lo) * scale, 0.0, 1.0);
      ds.examples.push_back(std::move(e));
    }
  return ds;
}

Dataset synthetic_stream(std::size_t class_count, std::size_t per_class, std::size_t feature_dim, double separation,
                         Rng& rng) {
  const SyntheticModel model = make_synthetic_model(class_count, feature_dim, separation, rng);
  return sample_synthetic(model, per_class, rng);
}

std::size_t TaskStream::train_examples() const {
  std::size_t n = 0;
  for (const Task& t : tasks) n += t.train.size();
  return n;
}

std::vector<int> TaskStream::task_of_class() const {
  std::vector<int> out(class_count(), -1);
  for (std::size_t t = 0; t < tasks.size(); ++t)
    for (int c : tasks[t].classes) out[static_cast<std::size_t>(c)] = static_cast<int>(t);
  return out;
}

TaskStream make_class_il_tasks(std::shared_ptr<const Dataset> train, std::shared_ptr<const Dataset> test,
                               std::size_t classes_per_task, Rng& rng) {
  if (!train || !test) throw Error("task split needs train and test sets");
  const std::size_t classes = train->class_count;
  if (classes_per_task == 0 || classes % classes_per_task != 0)
    throw ConfigError(std::to_string(classes) + " classes cannot be split into tasks of " +
                      std::to_string(classes_per_task));
  if (test->class_count != classes) throw DataError("train and test sets declare different class counts");
  TaskStream stream;
  stream.train = std::move(train);
  stream.test = std::move(test);
  const std::size_t task_count = classes / classes_per_task;
  stream.tasks.resize(task_count);
  for (std::size_t t = 0; t < task_count; ++t)
    for (std::size_t c = 0; c < classes_per_task; ++c) stream.tasks[t].classes.push_back(static_cast<int>(t * classes_per_task + c));
  for (std::size_t i = 0; i < stream.train->size(); ++i)
    stream.tasks[static_cast<std::size_t>(stream.train->examples[i].label) / classes_per_task].train.push_back(i);
  for (std::size_t i = 0; i < stream.test->size(); ++i)
    stream.tasks[static_cast<std::size_t>(stream.test->examples[i].label) / classes_per_task].test.push_back(i);
  for (Task& t : stream.tasks) std::shuffle(t.train.begin(), t.train.end(), rng);
  return stream;
}

}  // namespace replaylab
