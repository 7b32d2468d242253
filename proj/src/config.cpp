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

#include "seqsynth/config.hpp"

#include <set>
#include <sstream>

#include <toml.hpp>

#include "seqsynth/errors.hpp"

namespace seqsynth {

namespace {

toml::table parse_toml(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  try {
    return toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << path.string() << ": " << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError(os.str());
  }
}

// Typed access to one table, remembering which keys were read.
class Section {
 public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  bool present() const { return table_ != nullptr; }

  template <class T>
  void read(const char* key, T& out) {
    const toml::node* n = find(key);
    if (!n) return;
    if constexpr (std::is_same_v<T, bool>) {
      auto v = n->value<bool>();
      if (!v) fail(key, "a boolean");
      out = *v;
    } else if constexpr (std::is_integral_v<T>) {
      auto v = n->value<std::int64_t>();
      if (!v) fail(key, "an integer");
      out = static_cast<T>(*v);
    } else if constexpr (std::is_floating_point_v<T>) {
      auto v = n->value<double>();
      if (!v) fail(key, "a number");
      out = *v;
    } else {
      auto v = n->value<std::string>();
      if (!v) fail(key, "a string");
      out = *v;
    }
  }

  template <class T>
  void read_list(const char* key, std::vector<T>& out) {
    const toml::node* n = find(key);
    if (!n) return;
    const toml::array* arr = n->as_array();
    if (!arr) fail(key, "an array");
    out.clear();
    for (const auto& item : *arr) {
      std::optional<T> v;
      if constexpr (std::is_integral_v<T>) {
        auto iv = item.value<std::int64_t>();
        if (iv) v = static_cast<T>(*iv);
      } else {
        v = item.value<T>();
      }
      if (!v) fail(key, "an array of numbers");
      out.push_back(*v);
    }
  }

  const toml::node* find(const char* key) {
    if (!table_) return nullptr;
    used_.insert(key);
    return table_->get(key);
  }

  const toml::table* subtable(const char* key) {
    const toml::node* n = find(key);
    if (!n) return nullptr;
    if (!n->as_table()) fail(key, "a table");
    return n->as_table();
  }

  void reject_unknown() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      if (!used_.count(std::string(k.str()))) {
        throw ConfigError("unknown key '" + std::string(k.str()) + "' in [" + name_ + "]");
      }
    }
  }

  [[noreturn]] void fail(const char* key, const char* what) const {
    throw ConfigError("[" + name_ + "] " + key + " must be " + what);
  }

 private:
  const toml::table* table_;
  std::string name_;
  std::set<std::string> used_;
};

void reject_unknown_tables(const toml::table& root, std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : root) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k.str() == a;
    if (!ok) throw ConfigError("unknown table or key '" + std::string(k.str()) + "'");
  }
}

Eigen::MatrixXd read_matrix(const toml::node& n, int K, const char* key) {
  if (auto scalar = n.value<double>()) return Eigen::MatrixXd::Constant(K, K, *scalar);
  const toml::array* rows = n.as_array();
  if (!rows || static_cast<int>(rows->size()) != K) {
    throw ConfigError(std::string("[scenario] ") + key + " must be a scalar or a " +
                      std::to_string(K) + "x" + std::to_string(K) + " array");
  }
  Eigen::MatrixXd m(K, K);
  for (int i = 0; i < K; ++i) {
    const toml::array* row = (*rows)[static_cast<std::size_t>(i)].as_array();
    if (!row || static_cast<int>(row->size()) != K) {
      throw ConfigError(std::string("[scenario] ") + key + " row " + std::to_string(i) +
                        " must have " + std::to_string(K) + " entries");
    }
    for (int j = 0; j < K; ++j) {
      auto v = (*row)[static_cast<std::size_t>(j)].value<double>();
      if (!v) throw ConfigError(std::string("[scenario] ") + key + " entries must be numbers");
      m(i, j) = *v;
    }
  }
  return m;
}

}  // namespace

Scenario load_scenario(const std::filesystem::path& path) {
  Scenario s;
  if (path.empty()) return s;
  const toml::table root = parse_toml(path);
  reject_unknown_tables(root, {"scenario"});
  Section sec(root["scenario"].as_table(), "scenario");
  if (!sec.present()) throw ConfigError(path.string() + ": missing [scenario] table");

  std::vector<double> mu;
  sec.read_list("mu", mu);
  if (mu.empty()) throw ConfigError("[scenario] mu is required");
  const int K = static_cast<int>(mu.size());
  s.params.mu = Eigen::Map<Eigen::VectorXd>(mu.data(), K);
  const toml::node* a = sec.find("A");
  s.params.A = a ? read_matrix(*a, K, "A") : Eigen::MatrixXd::Zero(K, K);
  const toml::node* d = sec.find("delta");
  s.params.delta = d ? read_matrix(*d, K, "delta") : Eigen::MatrixXd::Ones(K, K);
  sec.read("horizon", s.params.horizon);
  sec.read("n_train", s.n_train);
  sec.read("n_test", s.n_test);
  sec.reject_unknown();
  s.params.validate();
  if (s.n_train < 1 || s.n_test < 1) throw ConfigError("n_train and n_test must be positive");
  return s;
}

TrainFile load_train_config(const std::filesystem::path& path) {
  TrainFile f;
  if (path.empty()) return f;
  const toml::table root = parse_toml(path);
  reject_unknown_tables(root, {"model", "train"});

  Section m(root["model"].as_table(), "model");
  m.read("d_model", f.model.d_model);
  m.read("d_latent", f.model.d_latent);
  m.read("n_layers", f.model.n_layers);
  m.read("n_heads", f.model.n_heads);
  m.read("d_ff", f.model.d_ff);
  m.read("dropout", f.model.dropout);
  m.reject_unknown();

  Section t(root["train"].as_table(), "train");
  t.read("lr", f.train.lr);
  t.read("epochs", f.train.epochs);
  t.read("batch_size", f.train.batch_size);
  t.read("kl_weight", f.train.kl_weight);
  t.read("n_mc", f.train.n_mc);
  t.read("eval_n_mc", f.train.eval_n_mc);
  t.read("seed", f.train.seed);
  t.read("grad_clip", f.train.grad_clip);
  t.read("time_weight", f.train.time_weight);
  t.read("type_weight", f.train.type_weight);
  t.read("length_weight", f.train.length_weight);
  t.read("var_multiplier", f.train.var_multiplier);
  t.read("val_fraction", f.train.val_fraction);
  t.reject_unknown();

  f.model.validate();
  f.train.validate();
  return f;
}

GenerationConfig load_generation_config(const std::filesystem::path& path) {
  GenerationConfig c;
  if (path.empty()) return c;
  const toml::table root = parse_toml(path);
  reject_unknown_tables(root, {"generate", "evaluate"});
  Section g(root["generate"].as_table(), "generate");
  std::string mode = "events_unknown";
  std::string sampling = "categorical";
  g.read("mode", mode);
  g.read("sampling", sampling);
  g.read("var_multiplier", c.var_multiplier);
  g.read("max_len", c.max_len);
  g.read("seed", c.seed);
  g.reject_unknown();
  if (mode == "events_known") {
    c.mode = GenerationMode::kEventsKnown;
  } else if (mode != "events_unknown") {
    throw ConfigError("[generate] mode must be events_known or events_unknown");
  }
  if (sampling == "argmax") {
    c.sampling = TypeSampling::kArgmax;
  } else if (sampling != "categorical") {
    throw ConfigError("[generate] sampling must be categorical or argmax");
  }
  c.validate();
  return c;
}

EvalConfig load_eval_config(const std::filesystem::path& path) {
  EvalConfig c;
  if (path.empty()) return c;
  const toml::table root = parse_toml(path);
  reject_unknown_tables(root, {"generate", "evaluate"});
  Section e(root["evaluate"].as_table(), "evaluate");
  e.read("n_bootstrap", c.n_bootstrap);
  e.read("ml_inference", c.ml_inference);
  Section cl(e.subtable("classifier"), "evaluate.classifier");
  cl.read_list("embedding", c.grid.embedding);
  cl.read_list("layers", c.grid.layers);
  cl.read_list("hidden", c.grid.hidden);
  cl.read_list("lr", c.grid.lr);
  cl.read("epochs", c.grid.epochs);
  cl.read("batch_size", c.grid.batch_size);
  cl.read("val_fraction", c.grid.val_fraction);
  cl.reject_unknown();
  e.reject_unknown();
  if (c.n_bootstrap < 2) throw ConfigError("[evaluate] n_bootstrap must be at least 2");
  c.grid.validate();
  return c;
}

nlohmann::json to_json(const Scenario& s) {
  const int K = s.params.num_types();
  std::vector<std::vector<double>> A(K, std::vector<double>(K)), D(K, std::vector<double>(K));
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) {
      A[i][j] = s.params.A(i, j);
      D[i][j] = s.params.delta(i, j);
    }
  }
  return {{"mu", std::vector<double>(s.params.mu.data(), s.params.mu.data() + K)},
          {"A", A},
          {"delta", D},
          {"horizon", s.params.horizon},
          {"n_train", s.n_train},
          {"n_test", s.n_test}};
}

}  // namespace seqsynth
