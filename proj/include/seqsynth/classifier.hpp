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

// LSTM sequence classifier behind the utility and ML-inference scores.
//
// Each step sees embedding(k_j) concatenated with log1p(t_j) and
// log1p(t_j - t_{j-1}); the final hidden state of the last layer feeds a
// logistic output trained with binary cross-entropy.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqsynth/autodiff.hpp"
#include "seqsynth/event_data.hpp"

namespace seqsynth {

struct ClassifierConfig {
  int embedding = 32;
  int layers = 1;
  int hidden = 32;
  double lr = 1e-3;
  int epochs = 20;
  int batch_size = 32;
  double grad_clip = 5.0;
};

struct ClassifierGrid {
  std::vector<int> embedding{32, 64, 128};
  std::vector<int> layers{1, 2};
  std::vector<int> hidden{32, 64, 128};
  std::vector<double> lr{1e-3, 1e-4};
  int epochs = 20;
  int batch_size = 32;
  double val_fraction = 0.2;

  std::vector<ClassifierConfig> expand() const;
  void validate() const;
};

nlohmann::json to_json(const ClassifierConfig& c);
nlohmann::json to_json(const ClassifierGrid& g);

class SequenceClassifier {
 public:
  SequenceClassifier(ClassifierConfig config, int num_types);

  void train(std::span<const EventSequence> seqs, std::span<const int> labels,
             std::uint64_t seed);
  /// Logits, one per sequence; larger means class 1.
  std::vector<double> predict(std::span<const EventSequence> seqs);

  const ClassifierConfig& config() const { return config_; }

 private:
  ad::Var forward(ad::Graph& g, std::span<const EventSequence* const> batch);

  ClassifierConfig config_;
  int num_types_;
  ad::ParameterSet params_;
};

/// Stratified split of indices 0..n-1: about `holdout_frac` of each label value
/// goes to the second list (at least one per class when the class has two or
/// more members).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    std::span<const int> labels, double holdout_frac, std::uint64_t seed);

/// Picks the grid point with the best validation AUC on a stratified slice,
/// then retrains it on all of `seqs`. A single-point grid trains directly.
SequenceClassifier select_and_train(std::span<const EventSequence> seqs,
                                    std::span<const int> labels, int num_types,
                                    const ClassifierGrid& grid, std::uint64_t seed);

struct ScoreWithStd {
  double auc = 0.0;
  double std = 0.0;
  ClassifierConfig chosen;
};

/// Train on synthetic sequences (their labels), score the real test set.
ScoreWithStd utility_score(std::span<const EventSequence> synthetic_train,
                           std::span<const EventSequence> real_test, int num_types,
                           const ClassifierGrid& grid, int n_bootstrap, std::uint64_t seed);

/// Real = 0, synthetic = 1; stratified 80/20 split that keeps identical
/// sequences together; AUC on the held-out part.
ScoreWithStd ml_inference_score(std::span<const EventSequence> real,
                                std::span<const EventSequence> synthetic, int num_types,
                                const ClassifierGrid& grid, int n_bootstrap, std::uint64_t seed);

}  // namespace seqsynth
