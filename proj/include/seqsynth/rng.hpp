// Copyright 2026 The seqsynth Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace seqsynth {

using Rng = std::mt19937_64;

/// Named RNG streams. Every stochastic step draws from its own stream so that
/// adding draws to one step never shifts the numbers seen by another.
enum class Stream : std::uint32_t {
  kInit = 1,
  kBatchOrder = 2,
  kLatentNoise = 3,
  kMonteCarlo = 4,
  kDropout = 5,
  kSplit = 6,
  kSimulation = 7,
  kGeneration = 8,
  kBootstrap = 9,
  kClassifier = 10,
};

namespace detail {
inline Rng seeded_from(std::uint64_t seed, const std::vector<std::uint64_t>& path) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * path.size());
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (std::uint64_t p : path) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}
}  // namespace detail

/// Deterministically derives a generator from a base seed, a named stream and
/// an optional path of indices, e.g. (seed, kGeneration, {subject_index}).
inline Rng derive_rng(std::uint64_t seed, Stream stream,
                      std::initializer_list<std::uint64_t> extra = {}) {
  std::vector<std::uint64_t> path{static_cast<std::uint64_t>(stream)};
  path.insert(path.end(), extra.begin(), extra.end());
  return detail::seeded_from(seed, path);
}

}  // namespace seqsynth
