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

// Full metric report for one synthetic set, and the variance sweep built on
// top of it.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "seqsynth/classifier.hpp"
#include "seqsynth/generator.hpp"
#include "seqsynth/metrics.hpp"

namespace seqsynth {

struct EvalConfig {
  ClassifierGrid grid;
  int n_bootstrap = 100;
  bool ml_inference = true;
};

nlohmann::json to_json(const EvalConfig& c);

// `real_train` is the set the generator saw: DCR, the dataset attack and ML
// inference compare against it. Utility scores on `real_test`.
MetricReport evaluate_synthetic(std::span<const EventSequence> real_train,
                                std::span<const EventSequence> real_test,
                                std::span<const EventSequence> synthetic, int num_types,
                                const EvalConfig& config, std::uint64_t seed);

struct SweepOptions {
  std::vector<double> multipliers;
  int repeats = 1;
  GenerationConfig generation;
  EvalConfig eval;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct SweepRow {
  double multiplier = 0.0;
  MetricReport report;  // averaged over repeats
  std::vector<MetricReport> per_repeat;
};

// Generates and evaluates once per (multiplier, repeat). Repeat r uses seed
// `seed + r` for both generation and evaluation. `on_row` runs after each
// multiplier finishes; an error aborts the remaining multipliers.
std::vector<SweepRow> run_sweep(Model& model, std::span<const EventSequence> real_train,
                                std::span<const EventSequence> real_test,
                                const SweepOptions& options,
                                const std::function<void(const SweepRow&)>& on_row = {});

MetricReport average_reports(std::span<const MetricReport> reports);

// Two-axis line chart of a sweep: mean DCR in red on the left axis, utility
// ROC AUC in blue on the right.
std::string render_sweep_svg(std::span<const SweepRow> rows);

}  // namespace seqsynth
