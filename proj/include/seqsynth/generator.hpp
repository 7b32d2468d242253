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
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqsynth/autodiff.hpp"
#include "seqsynth/event_data.hpp"
#include "seqsynth/model.hpp"
#include "seqsynth/rng.hpp"

namespace seqsynth {

enum class GenerationMode { kEventsUnknown, kEventsKnown };
enum class TypeSampling { kCategorical, kArgmax };

struct GenerationConfig {
  GenerationMode mode = GenerationMode::kEventsUnknown;
  double var_multiplier = 1.0;
  int max_len = 256;
  TypeSampling sampling = TypeSampling::kCategorical;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const GenerationConfig& c);

/// Disallowed real-type logits become -infinity; END (the last entry) is
/// always kept. Throws DomainError for an empty allowed set.
Eigen::VectorXd mask_logits(const Eigen::VectorXd& logits, const std::set<int>& allowed);

struct LatentCode {
  ad::Matrix mu;
  ad::Matrix logvar;
};

/// Encoder posterior of a source sequence.
LatentCode encode_latent(Model& model, const EventSequence& source);

struct GeneratedSequence {
  EventSequence sequence;
  bool truncated = false;  // max_len reached before END
};

/// Samples z around the latent code and decodes autoregressively. Only the
/// latent code, the allowed set and the rng influence the output.
GeneratedSequence synthesize_from_latent(const Model& model, const LatentCode& latent,
                                         const std::set<int>* allowed,
                                         const GenerationConfig& config, Rng& rng);

/// Encode, sample and decode; the label is copied from the source.
GeneratedSequence synthesize_one(Model& model, const EventSequence& source,
                                 const GenerationConfig& config, Rng& rng);

struct SubjectMetadata {
  std::string subject_id;
  std::string source_id;
  double var_multiplier = 0.0;
  bool truncated = false;
  bool failed = false;
  std::string error;
};

struct SyntheticDataset {
  std::vector<EventSequence> sequences;
  std::vector<SubjectMetadata> metadata;
  int failures = 0;
};

/// One synthetic subject per source subject, in source order. Subject i
/// draws from stream (seed, kGeneration, i), so the output does not depend
/// on `threads`. Failures are recorded, not rethrown.
SyntheticDataset synthesize_dataset(Model& model, std::span<const EventSequence> real,
                                    const GenerationConfig& config, int threads = 1);

nlohmann::json metadata_to_json(const SyntheticDataset& data, const GenerationConfig& config);

}  // namespace seqsynth
