// SPDX-License-Identifier: Apache-2.0
#include "replaylab/core.hpp"

#include <cstdio>

namespace replaylab {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x72706c62U};
  return Rng(seq);
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

double uniform_unit(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t h) {
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a(const std::string& s) { return fnv1a(std::as_bytes(std::span(s.data(), s.size()))); }

std::uint64_t checksum(std::span<const double> values, std::uint64_t h) {
  return fnv1a(std::as_bytes(values), h);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace replaylab
