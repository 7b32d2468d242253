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

// Helpers shared by the unit tests and the acceptance binary.

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "seqsynth/event_data.hpp"
#include "seqsynth/hawkes_oracle.hpp"

namespace seqsynth::testing {

inline EventVocabulary type_vocab(int K) {
  std::vector<std::string> names;
  for (int k = 0; k < K; ++k) names.push_back("type_" + std::to_string(k));
  return EventVocabulary::build(names, {});
}

// Default-scenario sequences on the clock the CLI uses after parsing.
inline std::vector<EventSequence> fixture(int n, std::uint64_t seed,
                                          const ExpHawkesParams& p = default_scenario()) {
  std::vector<EventSequence> out = simulate_dataset(p, n, seed);
  for (auto& s : out) normalize_times(s);
  return out;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  std::random_device rd;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("seqsynth_" + name + "_" + std::to_string(rd()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace seqsynth::testing
