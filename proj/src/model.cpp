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

#include "seqsynth/model.hpp"

#include <cmath>
#include <fstream>

#include "seqsynth/errors.hpp"
#include "seqsynth/rng.hpp"
#include "seqsynth/transformer.hpp"

namespace seqsynth {

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(),
                                                suffix.data(), suffix.size()) == 0;
}

}  // namespace

void ModelConfig::validate() const {
  if (d_model <= 0 || d_latent <= 0 || n_layers < 0 || n_heads <= 0 || d_ff <= 0) {
    throw ConfigError("model sizes must be positive");
  }
  if (d_model % 2 != 0) throw ConfigError("d_model must be even for the temporal encoding");
  if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (!(beta_min > 0.0 && beta_min < beta_max)) throw ConfigError("bad beta clamp range");
}

Model::Model(ModelConfig config, EventVocabulary vocab)
    : config_(config), vocab_(std::move(vocab)) {
  config_.validate();
  if (vocab_.empty()) throw ConfigError("cannot build a model over an empty vocabulary");
  const int K = vocab_.size();
  const int d = config_.d_model;
  const int dz = config_.d_latent;

  params_.add("embedding", K + 2, d);
  for (int i = 0; i < config_.n_layers; ++i) {
    add_block_params(params_, "enc.l" + std::to_string(i), d, config_.d_ff);
  }
  params_.add("enc.ln_f.g", 1, d).value.setOnes();
  params_.add("enc.ln_f.b", 1, d);
  params_.add("enc.mu.w", d, dz);
  params_.add("enc.mu.b", 1, dz);
  params_.add("enc.logvar.w", d, dz);
  params_.add("enc.logvar.b", 1, dz);

  params_.add("dec.zproj.w", dz, d);
  params_.add("dec.zproj.b", 1, d);
  for (int i = 0; i < config_.n_layers; ++i) {
    add_block_params(params_, "dec.l" + std::to_string(i), d, config_.d_ff);
  }
  params_.add("dec.ln_f.g", 1, d).value.setOnes();
  params_.add("dec.ln_f.b", 1, d);

  params_.add("hawkes.W", K, d);
  params_.add("hawkes.alpha", 1, K);
  params_.add("hawkes.mu", 1, K);
  params_.add("hawkes.log_beta", 1, K);

  params_.add("head.time.w", d, 1);
  params_.add("head.time.b", 1, 1);
  params_.add("head.type.w", d, K + 1);
  params_.add("head.type.b", 1, K + 1);
}

void Model::initialize(std::uint64_t seed) {
  Rng rng = derive_rng(seed, Stream::kInit);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ad::Parameter& p = params_[i];
    const std::string& n = p.name();
    double stddev = 0.0;
    if (n == "embedding") {
      stddev = 0.5;
    } else if (n == "hawkes.W") {
      stddev = 1.0 / std::sqrt(static_cast<double>(p.value.cols()));
    } else if (ends_with(n, ".w")) {
      stddev = 1.0 / std::sqrt(static_cast<double>(p.value.rows()));
      if (n == "enc.logvar.w") stddev *= 0.1;
    }
    if (stddev > 0.0) {
      for (ad::Index k = 0; k < p.value.size(); ++k) p.value.data()[k] = stddev * normal(rng);
    }
  }
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const ModelConfig& c) {
  return {{"d_model", c.d_model}, {"d_latent", c.d_latent}, {"n_layers", c.n_layers},
          {"n_heads", c.n_heads}, {"d_ff", c.d_ff},         {"dropout", c.dropout},
          {"beta_min", c.beta_min}, {"beta_max", c.beta_max}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model").get<int>();
  c.d_latent = j.at("d_latent").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.beta_min = j.at("beta_min").get<double>();
  c.beta_max = j.at("beta_max").get<double>();
  return c;
}

nlohmann::json vocabulary_to_json(const EventVocabulary& v) {
  nlohmann::json bins = nlohmann::json::object();
  for (const auto& [name, values] : v.bins()) bins[name] = values;
  std::vector<std::string> categorical;
  for (int i = 0; i < v.size(); ++i) {
    if (!v.decompose(i).second) categorical.push_back(v.name(i));
  }
  return {{"names", v.names()}, {"categorical", categorical}, {"bins", bins}};
}

EventVocabulary vocabulary_from_json(const nlohmann::json& j) {
  std::map<std::string, std::vector<double>> numeric;
  for (const auto& [name, values] : j.at("bins").items()) {
    numeric[name] = values.get<std::vector<double>>();
  }
  EventVocabulary v =
      EventVocabulary::build(j.at("categorical").get<std::vector<std::string>>(), numeric);
  if (v.names() != j.at("names").get<std::vector<std::string>>()) {
    throw SchemaError("checkpoint vocabulary is inconsistent");
  }
  return v;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const nlohmann::json& extra) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["model_config"] = to_json(model.config());
  j["extra"] = extra;
  j["vocabulary"] = vocabulary_to_json(model.vocabulary());
  nlohmann::json arrays = nlohmann::json::array();
  const auto& ps = model.params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const ad::Parameter& p = ps[i];
    std::vector<double> data(p.value.data(), p.value.data() + p.value.size());
    arrays.push_back({{"name", p.name()},
                      {"rows", p.value.rows()},
                      {"cols", p.value.cols()},
                      {"data", std::move(data)}});
  }
  j["parameters"] = std::move(arrays);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("checkpoint is not valid JSON: " + std::string(e.what()));
  }
  if (!j.contains("format") || j["format"] != kCheckpointFormat) {
    throw VersionMismatchError("not a seqsynth checkpoint");
  }
  if (!j.contains("version") || j["version"] != kCheckpointVersion) {
    throw VersionMismatchError("checkpoint version " + j.value("version", nlohmann::json()).dump() +
                               " is not supported (expected " +
                               std::to_string(kCheckpointVersion) + ")");
  }
  try {
    Model model(model_config_from_json(j.at("model_config")),
                vocabulary_from_json(j.at("vocabulary")));
    const auto& arrays = j.at("parameters");
    if (arrays.size() != model.params().size()) {
      throw SchemaError("checkpoint parameter count mismatch");
    }
    for (const auto& a : arrays) {
      ad::Parameter& p = model.params().at(a.at("name").get<std::string>());
      const auto rows = a.at("rows").get<ad::Index>();
      const auto cols = a.at("cols").get<ad::Index>();
      const auto data = a.at("data").get<std::vector<double>>();
      if (rows != p.value.rows() || cols != p.value.cols() ||
          static_cast<ad::Index>(data.size()) != rows * cols) {
        throw SchemaError("checkpoint array '" + p.name() + "' has the wrong shape");
      }
      p.value = Eigen::Map<const ad::Matrix>(data.data(), rows, cols);
    }
    return {std::move(model), j.value("extra", nlohmann::json::object())};
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("malformed checkpoint: " + std::string(e.what()));
  } catch (const ContractError& e) {
    throw SchemaError("malformed checkpoint: " + std::string(e.what()));
  }
}

}  // namespace seqsynth
