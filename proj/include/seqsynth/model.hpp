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
#include <string>

#include <nlohmann/json.hpp>

#include "seqsynth/autodiff.hpp"
#include "seqsynth/event_data.hpp"

namespace seqsynth {

struct ModelConfig {
  int d_model = 64;
  int d_latent = 32;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 128;
  double dropout = 0.0;
  double beta_min = 1e-6;
  double beta_max = 1e6;

  void validate() const;
};

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "seqsynth-checkpoint";

// Encoder, decoder and Hawkes heads in one parameter set.
//
// Parameter names:
//   embedding              (K+2) x d, shared by encoder and decoder
//   enc.l<i>.*, dec.l<i>.* transformer blocks
//   enc.ln_f.*, dec.ln_f.* final layer norms
//   enc.mu.*, enc.logvar.* latent heads (d -> d_z)
//   dec.zproj.*            latent injection (d_z -> d)
//   hawkes.W / alpha / mu / log_beta
//   head.time.*, head.type.*
class Model {
 public:
  Model(ModelConfig config, EventVocabulary vocab);

  // Random initialization from the kInit stream.
  void initialize(std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const EventVocabulary& vocabulary() const { return vocab_; }
  int num_types() const { return vocab_.size(); }
  int end_index() const { return vocab_.end_index(); }

  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }
  const ad::Matrix& value(std::string_view name) const { return params_.at(name).value; }

 private:
  ModelConfig config_;
  EventVocabulary vocab_;
  ad::ParameterSet params_;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json vocabulary_to_json(const EventVocabulary& v);
EventVocabulary vocabulary_from_json(const nlohmann::json& j);

// Checkpoints are JSON: format/version header, model config, an opaque
// `extra` object (the training config mirror), vocabulary and named arrays.
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const nlohmann::json& extra = nlohmann::json::object());

struct LoadedCheckpoint {
  Model model;
  nlohmann::json extra;
};

// Throws VersionMismatchError for an unknown format or version and
// SchemaError for malformed content.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace seqsynth
