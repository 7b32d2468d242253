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

#include <span>
#include <vector>

#include "seqsynth/autodiff.hpp"
#include "seqsynth/event_data.hpp"
#include "seqsynth/model.hpp"
#include "seqsynth/rng.hpp"

namespace seqsynth {

/// Sinusoidal encoding of raw timestamps: column 2i is sin(t / 10000^(2i/d))
/// and column 2i+1 is cos of the same angle. Throws ConfigError for odd d.
ad::Matrix temporal_encode(std::span<const double> times, int d);

// Per-sequence encoder rows are [e1 .. eL, END]; the END row carries t_L.
struct EncoderRows {
  std::vector<ad::Index> types;
  std::vector<double> times;
};
EncoderRows encoder_rows(const EventSequence& seq, int end_index);

struct EncoderOutput {
  ad::Var hidden;  // (L+1) x d
  ad::Var mu;      // (L+1) x d_z
  ad::Var logvar;  // (L+1) x d_z
};

/// Bidirectional encoding of one sequence. With `dropout_rng` set, dropout
/// is active.
EncoderOutput encode(ad::Graph& g, Model& model, const EventSequence& seq,
                     Rng* dropout_rng = nullptr);

/// Batch form: B hidden-state matrices of shape Lmax x d with every row the
/// batch mask leaves out set to zero.
std::vector<ad::Matrix> encode(Model& model, const PaddedBatch& batch);

/// Affine latent heads applied row by row.
std::pair<ad::Matrix, ad::Matrix> latent_params(const ad::Matrix& hidden, const Model& model);

/// z = mu + m * exp(logvar / 2) * eps. Throws DomainError for m < 0.
ad::Var sample_z(ad::Var mu, ad::Var logvar, double var_multiplier, Rng& rng);
ad::Matrix sample_z(const ad::Matrix& mu, const ad::Matrix& logvar, double var_multiplier,
                    Rng& rng);

/// Mean over rows of 0.5 * sum_dim(mu^2 + sigma^2 - 1 - log sigma^2).
ad::Var kl_divergence(ad::Var mu, ad::Var logvar);

/// Same reduction over the rows where `mask` is true.
double kl_divergence(const ad::Matrix& mu, const ad::Matrix& logvar,
                     const std::vector<bool>& mask);

}  // namespace seqsynth
