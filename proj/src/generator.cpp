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

#include "seqsynth/generator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>

#include "seqsynth/decoder.hpp"
#include "seqsynth/encoder.hpp"
#include "seqsynth/errors.hpp"

namespace seqsynth {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMinGap = 1e-6;

const char* mode_name(GenerationMode m) {
  return m == GenerationMode::kEventsKnown ? "events_known" : "events_unknown";
}

const char* sampling_name(TypeSampling s) {
  return s == TypeSampling::kArgmax ? "argmax" : "categorical";
}

int choose_type(const Eigen::VectorXd& logits, TypeSampling sampling, Rng& rng) {
  Eigen::Index best = 0;
  const double m = logits.maxCoeff(&best);
  if (sampling == TypeSampling::kArgmax) return static_cast<int>(best);
  Eigen::VectorXd p = (logits.array() - m).exp();
  std::discrete_distribution<int> dist(p.data(), p.data() + p.size());
  return dist(rng);
}

}  // namespace

void GenerationConfig::validate() const {
  if (!(var_multiplier >= 0.0)) throw ConfigError("var_multiplier must be non-negative");
  if (max_len < 1) throw ConfigError("max_len must be at least 1");
}

nlohmann::json to_json(const GenerationConfig& c) {
  return {{"mode", mode_name(c.mode)},
          {"var_multiplier", c.var_multiplier},
          {"max_len", c.max_len},
          {"sampling", sampling_name(c.sampling)},
          {"seed", c.seed}};
}

Eigen::VectorXd mask_logits(const Eigen::VectorXd& logits, const std::set<int>& allowed) {
  if (allowed.empty()) throw DomainError("events-known mask with an empty allowed set");
  const auto K = static_cast<int>(logits.size()) - 1;
  Eigen::VectorXd out = logits;
  for (int k = 0; k < K; ++k) {
    if (!allowed.count(k)) out(k) = kNegInf;
  }
  return out;
}

LatentCode encode_latent(Model& model, const EventSequence& source) {
  if (source.events.empty()) throw ContractError("cannot encode an empty source sequence");
  ad::Graph g;
  EncoderOutput enc = encode(g, model, source);
  return {enc.mu.value(), enc.logvar.value()};
}

GeneratedSequence synthesize_from_latent(const Model& model, const LatentCode& latent,
                                         const std::set<int>* allowed,
                                         const GenerationConfig& config, Rng& rng) {
  config.validate();
  if (latent.mu.rows() == 0) throw ContractError("empty latent code");
  const ad::Matrix z = sample_z(latent.mu, latent.logvar, config.var_multiplier, rng);
  const ad::Index last = z.rows() - 1;
  const int end = model.end_index();

  IncrementalDecoder dec(model);
  Eigen::RowVectorXd h = dec.start(z.row(0));
  GeneratedSequence out;
  double t = 0.0;
  for (int j = 0;; ++j) {
    HeadOutput head = regression_heads(h, t, model);
    Eigen::VectorXd logits = head.type_logits;
    if (allowed) logits = mask_logits(logits, *allowed);
    // Every synthetic subject has at least one event.
    if (j == 0) logits(end) = kNegInf;
    const int k = choose_type(logits, config.sampling, rng);
    if (k == end) break;
    if (static_cast<int>(out.sequence.events.size()) >= config.max_len) {
      out.truncated = true;
      break;
    }
    t = std::max(head.next_time, t + kMinGap);
    out.sequence.events.push_back({t, k});
    h = dec.step(k, t, z.row(std::min<ad::Index>(j + 1, last)));
  }
  return out;
}

namespace {

GeneratedSequence finish_one(const Model& model, const EventSequence& source,
                             const LatentCode& latent, const GenerationConfig& config, Rng& rng) {
  std::set<int> types;
  for (const auto& e : source.events) types.insert(e.type);
  const bool known = config.mode == GenerationMode::kEventsKnown;
  GeneratedSequence g = synthesize_from_latent(model, latent, known ? &types : nullptr, config, rng);
  g.sequence.subject_id = "syn_" + source.subject_id;
  g.sequence.label = source.label;
  if (known) {
    for (const auto& e : g.sequence.events) {
      if (!types.count(e.type)) throw ContractError("events-known support violated");
    }
  }
  return g;
}

}  // namespace

GeneratedSequence synthesize_one(Model& model, const EventSequence& source,
                                 const GenerationConfig& config, Rng& rng) {
  return finish_one(model, source, encode_latent(model, source), config, rng);
}

SyntheticDataset synthesize_dataset(Model& model, std::span<const EventSequence> real,
                                    const GenerationConfig& config, int threads) {
  config.validate();
  const std::size_t n = real.size();
  // Encoding goes through the autodiff graph and stays on this thread; the
  // decoding loop only reads parameters.
  std::vector<LatentCode> latents;
  latents.reserve(n);
  for (const auto& s : real) latents.push_back(encode_latent(model, s));

  std::vector<std::optional<GeneratedSequence>> results(n);
  std::vector<SubjectMetadata> meta(n);
  auto work = [&](std::size_t i) {
    meta[i].source_id = real[i].subject_id;
    meta[i].subject_id = "syn_" + real[i].subject_id;
    meta[i].var_multiplier = config.var_multiplier;
    Rng rng = derive_rng(config.seed, Stream::kGeneration, {static_cast<std::uint64_t>(i)});
    try {
      results[i] = finish_one(model, real[i], latents[i], config, rng);
      meta[i].truncated = results[i]->truncated;
    } catch (const Error& e) {
      meta[i].failed = true;
      meta[i].error = e.what();
    }
  };

  const std::size_t n_threads = std::clamp<std::size_t>(threads < 1 ? 1 : threads, 1, std::max<std::size_t>(n, 1));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) work(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  SyntheticDataset data;
  for (std::size_t i = 0; i < n; ++i) {
    if (results[i]) {
      data.sequences.push_back(std::move(results[i]->sequence));
    } else {
      ++data.failures;
    }
    data.metadata.push_back(std::move(meta[i]));
  }
  return data;
}

nlohmann::json metadata_to_json(const SyntheticDataset& data, const GenerationConfig& config) {
  nlohmann::json subjects = nlohmann::json::array();
  int truncated = 0;
  for (const auto& m : data.metadata) {
    nlohmann::json s{{"subject_id", m.subject_id},
                     {"source_id", m.source_id},
                     {"var_multiplier", m.var_multiplier},
                     {"truncated", m.truncated}};
    if (m.failed) s["error"] = m.error;
    truncated += m.truncated ? 1 : 0;
    subjects.push_back(std::move(s));
  }
  return {{"config", to_json(config)},
          {"n_subjects", data.sequences.size()},
          {"failures", data.failures},
          {"truncated", truncated},
          {"subjects", std::move(subjects)}};
}

}  // namespace seqsynth
