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
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqsynth/autodiff.hpp"
#include "seqsynth/event_data.hpp"
#include "seqsynth/model.hpp"

namespace seqsynth {

struct TrainConfig {
  double lr = 1e-3;
  int epochs = 50;
  int batch_size = 16;
  double kl_weight = 1.0;
  int n_mc = 20;
  int eval_n_mc = 100;
  std::uint64_t seed = 0;
  double grad_clip = 1.0;
  double time_weight = 1.0;
  double type_weight = 1.0;
  double length_weight = 1.0;
  // Latent noise scale during training; 1 is the plain VAE objective.
  double var_multiplier = 1.0;
  // Share of the training set held out for best-checkpoint selection.
  double val_fraction = 0.1;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Mean over masked entries of (true - pred)^2. Throws UndefinedLossError if
/// the mask is empty.
ad::Var time_mse(const ad::Matrix& true_times, ad::Var pred, const std::vector<bool>& mask);

/// Mean negative log-probability of the true class over masked rows.
ad::Var type_ce(std::span<const ad::Index> true_types, ad::Var logits,
                const std::vector<bool>& mask);

/// Cross-entropy of END over the rows of `end_logits`, one per sequence.
/// Throws ContractError if any row lacks an END position.
ad::Var length_loss(ad::Var end_logits, ad::Index end_index, const std::vector<bool>& has_end);

// Weighted loss terms; hawkes + kl + time + type + length == total.
struct LossBreakdown {
  double total = 0.0;
  double hawkes = 0.0;
  double kl = 0.0;
  double time = 0.0;
  double type = 0.0;
  double length = 0.0;
};

struct LossResult {
  ad::Var total;
  LossBreakdown terms;
  double log_likelihood = 0.0;  // summed over the batch
  std::size_t n_events = 0;
};

struct LossOptions {
  int n_mc = 20;
  double var_multiplier = 1.0;
  bool dropout = false;
};

/// Teacher-forced loss of one batch. All randomness (latent noise,
/// Monte-Carlo points, dropout) derives from `step_seed`. Throws
/// TrainingAbortError naming the first non-finite term.
LossResult total_loss(ad::Graph& g, Model& model, std::span<const EventSequence> batch,
                      const TrainConfig& config, std::uint64_t step_seed,
                      const LossOptions& options);

class Adam {
 public:
  explicit Adam(const ad::ParameterSet& params, double lr, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  void step(ad::ParameterSet& params);
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<ad::Matrix> m_, v_;
};

/// Scales gradients so their global norm is at most max_norm. Returns the
/// norm before clipping.
double clip_grad_norm(ad::ParameterSet& params, double max_norm);

struct CurvePoint {
  int epoch;
  std::string term;
  double value;
};

struct FitResult {
  std::vector<CurvePoint> curve;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  double initial_val_loss = 0.0;
  double initial_val_nll = 0.0;  // per event
};

/// Per-event negative log-likelihood with z = mu and a fixed MC stream.
double evaluate_nll(Model& model, std::span<const EventSequence> seqs, int n_mc,
                    std::uint64_t seed);

/// Mini-batch Adam on `train`, selecting the best epoch on `val` (or on
/// `train` when `val` is empty). The model ends at the best parameters. On a
/// non-finite loss the best parameters so far are restored and
/// TrainingAbortError is rethrown.
FitResult fit(Model& model, std::span<const EventSequence> train,
              std::span<const EventSequence> val, const TrainConfig& config,
              const std::function<void(int, const LossBreakdown&)>& on_epoch = {});

void write_loss_curve(const std::filesystem::path& path, const std::vector<CurvePoint>& curve);

}  // namespace seqsynth
