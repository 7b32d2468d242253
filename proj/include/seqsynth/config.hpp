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

// TOML configuration files. Every loader accepts an empty path and returns
// defaults; unknown keys are rejected so typos do not pass silently.
//
//   scenario:  [scenario]  mu, A, delta (scalar or matrix), horizon, n_train, n_test
//   train:     [model] ... [train] ...
//   generate:  [generate]  mode, var_multiplier, max_len, sampling
//   evaluate:  [evaluate]  n_bootstrap, ml_inference, [evaluate.classifier] grid axes

#pragma once

#include <filesystem>

#include "seqsynth/evaluation.hpp"
#include "seqsynth/generator.hpp"
#include "seqsynth/hawkes_oracle.hpp"
#include "seqsynth/model.hpp"
#include "seqsynth/training.hpp"

namespace seqsynth {

struct Scenario {
  ExpHawkesParams params = default_scenario();
  int n_train = 200;
  int n_test = 50;
};

struct TrainFile {
  ModelConfig model;
  TrainConfig train;
};

Scenario load_scenario(const std::filesystem::path& path);
TrainFile load_train_config(const std::filesystem::path& path);
GenerationConfig load_generation_config(const std::filesystem::path& path);
EvalConfig load_eval_config(const std::filesystem::path& path);

nlohmann::json to_json(const Scenario& s);

}  // namespace seqsynth
