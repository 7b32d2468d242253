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

#include "seqsynth/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "seqsynth/errors.hpp"
#include "seqsynth/metrics.hpp"
#include "seqsynth/rng.hpp"
#include "seqsynth/training.hpp"

namespace seqsynth {

using ad::Graph;
using ad::Index;
using ad::Matrix;
using ad::Var;

std::vector<ClassifierConfig> ClassifierGrid::expand() const {
  std::vector<ClassifierConfig> out;
  for (int e : embedding) {
    for (int l : layers) {
      for (int h : hidden) {
        for (double r : lr) {
          ClassifierConfig c;
          c.embedding = e;
          c.layers = l;
          c.hidden = h;
          c.lr = r;
          c.epochs = epochs;
          c.batch_size = batch_size;
          out.push_back(c);
        }
      }
    }
  }
  return out;
}

void ClassifierGrid::validate() const {
  if (embedding.empty() || layers.empty() || hidden.empty() || lr.empty()) {
    throw ConfigError("classifier grid has an empty axis");
  }
  for (int v : embedding) if (v < 1) throw ConfigError("embedding size must be positive");
  for (int v : layers) if (v < 1) throw ConfigError("layer count must be positive");
  for (int v : hidden) if (v < 1) throw ConfigError("hidden size must be positive");
  for (double v : lr) if (!(v > 0)) throw ConfigError("classifier lr must be positive");
  if (epochs < 1 || batch_size < 1) throw ConfigError("classifier epochs/batch must be positive");
  if (!(val_fraction > 0 && val_fraction < 1)) throw ConfigError("val_fraction must be in (0,1)");
}

nlohmann::json to_json(const ClassifierConfig& c) {
  return {{"embedding", c.embedding}, {"layers", c.layers}, {"hidden", c.hidden},
          {"lr", c.lr},               {"epochs", c.epochs}, {"batch_size", c.batch_size}};
}

nlohmann::json to_json(const ClassifierGrid& g) {
  return {{"embedding", g.embedding}, {"layers", g.layers},         {"hidden", g.hidden},
          {"lr", g.lr},               {"epochs", g.epochs},         {"batch_size", g.batch_size},
          {"val_fraction", g.val_fraction}};
}

// ---------------------------------------------------------------------------

SequenceClassifier::SequenceClassifier(ClassifierConfig config, int num_types)
    : config_(config), num_types_(num_types) {
  const int E = config_.embedding;
  const int H = config_.hidden;
  params_.add("emb", num_types_ + 2, E);
  for (int l = 0; l < config_.layers; ++l) {
    const int in = l == 0 ? E + 2 : H;
    const std::string p = "l" + std::to_string(l);
    params_.add(p + ".wx", in, 4 * H);
    params_.add(p + ".wh", H, 4 * H);
    params_.add(p + ".b", 1, 4 * H);
  }
  params_.add("out.w", H, 1);
  params_.add("out.b", 1, 1);
}

Var SequenceClassifier::forward(Graph& g, std::span<const EventSequence* const> batch) {
  const auto B = static_cast<Index>(batch.size());
  const int H = config_.hidden;
  std::size_t T = 0;
  for (const auto* s : batch) T = std::max(T, s->events.size());
  if (T == 0) throw ContractError("classifier batch has only empty sequences");

  Var emb = g.param(params_.at("emb"));
  struct LayerParams {
    Var wx, wh, b;
  };
  std::vector<LayerParams> layers;
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "l" + std::to_string(l);
    layers.push_back({g.param(params_.at(p + ".wx")), g.param(params_.at(p + ".wh")),
                      g.param(params_.at(p + ".b"))});
  }
  std::vector<Var> h(layers.size(), g.constant(Matrix::Zero(B, H)));
  std::vector<Var> c(layers.size(), g.constant(Matrix::Zero(B, H)));

  for (std::size_t t = 0; t < T; ++t) {
    std::vector<Index> types(static_cast<std::size_t>(B));
    Matrix feats = Matrix::Zero(B, 2);
    Matrix live = Matrix::Zero(B, H);
    for (Index b = 0; b < B; ++b) {
      const auto& ev = batch[static_cast<std::size_t>(b)]->events;
      if (t < ev.size()) {
        types[b] = std::clamp(ev[t].type, 0, num_types_ - 1);
        const double prev = t == 0 ? ev[t].time : ev[t - 1].time;
        feats(b, 0) = std::log1p(std::max(0.0, ev[t].time));
        feats(b, 1) = std::log1p(std::max(0.0, ev[t].time - prev));
        live.row(b).setOnes();
      } else {
        types[b] = num_types_ + 1;
      }
    }
    const Matrix dead = Matrix::Ones(B, H) - live;
    const Var parts[] = {ad::gather_rows(emb, types), g.constant(std::move(feats))};
    Var x = ad::concat_cols(parts);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Var gates = ad::add_row(ad::add(ad::matmul(x, layers[l].wx), ad::matmul(h[l], layers[l].wh)),
                              layers[l].b);
      Var i = ad::sigmoid(ad::slice_cols(gates, 0, H));
      Var f = ad::sigmoid(ad::slice_cols(gates, H, H));
      Var gg = ad::tanh(ad::slice_cols(gates, 2 * H, H));
      Var o = ad::sigmoid(ad::slice_cols(gates, 3 * H, H));
      Var c_new = ad::add(ad::mul(f, c[l]), ad::mul(i, gg));
      Var h_new = ad::mul(o, ad::tanh(c_new));
      // Finished rows keep their last state.
      c[l] = ad::add(ad::mul_const(c_new, live), ad::mul_const(c[l], dead));
      h[l] = ad::add(ad::mul_const(h_new, live), ad::mul_const(h[l], dead));
      x = h[l];
    }
  }
  Var w = g.param(params_.at("out.w"));
  Var b = g.param(params_.at("out.b"));
  return ad::add_row(ad::matmul(h.back(), w), b);
}

void SequenceClassifier::train(std::span<const EventSequence> seqs, std::span<const int> labels,
                               std::uint64_t seed) {
  if (seqs.size() != labels.size()) throw ContractError("classifier: label count mismatch");
  if (seqs.empty()) throw ContractError("classifier: empty training set");

  Rng init = derive_rng(seed, Stream::kClassifier, {0});
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t p = 0; p < params_.size(); ++p) {
    ad::Parameter& par = params_[p];
    const std::string& n = par.name();
    if (n.size() > 2 && n.compare(n.size() - 2, 2, ".b") == 0) {
      par.value.setZero();
      if (n != "out.b") par.value.middleCols(config_.hidden, config_.hidden).setOnes();
      continue;
    }
    const double sd = n == "emb" ? 0.1 : 1.0 / std::sqrt(static_cast<double>(par.value.rows()));
    for (Index k = 0; k < par.value.size(); ++k) par.value.data()[k] = sd * normal(init);
  }

  Adam adam(params_, config_.lr);
  std::vector<std::size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<std::size_t>(config_.batch_size);
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    Rng shuffle_rng = derive_rng(seed, Stream::kClassifier, {1, static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t stop = std::min(order.size(), start + bs);
      std::vector<const EventSequence*> batch;
      Matrix y(static_cast<Index>(stop - start), 1);
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(&seqs[order[i]]);
        y(static_cast<Index>(i - start), 0) = labels[order[i]];
      }
      Graph g;
      Var logits = forward(g, batch);
      // Binary cross-entropy with logits: softplus(x) - y x, averaged.
      const double inv = 1.0 / static_cast<double>(batch.size());
      Var loss = ad::sub(ad::scale(ad::sum(ad::softplus(logits)), inv),
                         ad::weighted_sum(logits, y * inv));
      params_.zero_grad();
      g.backward(loss);
      clip_grad_norm(params_, config_.grad_clip);
      adam.step(params_);
    }
  }
}

std::vector<double> SequenceClassifier::predict(std::span<const EventSequence> seqs) {
  std::vector<double> out;
  out.reserve(seqs.size());
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < seqs.size(); start += kChunk) {
    std::vector<const EventSequence*> batch;
    for (std::size_t i = start; i < std::min(seqs.size(), start + kChunk); ++i) {
      batch.push_back(&seqs[i]);
    }
    Graph g;
    Var logits = forward(g, batch);
    for (Index i = 0; i < logits.rows(); ++i) out.push_back(logits.value()(i, 0));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    std::span<const int> labels, double holdout_frac, std::uint64_t seed) {
  Rng rng = derive_rng(seed, Stream::kSplit, {0xC1A55});
  std::vector<std::size_t> keep, hold;
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  for (int cls : classes) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) idx.push_back(i);
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_hold = static_cast<std::size_t>(std::floor(holdout_frac * static_cast<double>(idx.size()) + 1e-9));
    if (idx.size() >= 2) n_hold = std::clamp<std::size_t>(n_hold, 1, idx.size() - 1);
    else n_hold = 0;
    hold.insert(hold.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_hold));
    keep.insert(keep.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_hold), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  std::sort(hold.begin(), hold.end());
  return {keep, hold};
}

namespace {

template <class T>
std::vector<T> take(std::span<const T> v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

void require_both_classes(std::span<const int> labels, const char* what) {
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) {
    throw UndefinedMetricError(std::string(what) + ": labels contain a single class");
  }
}

double auc_bootstrap_std(std::span<const int> labels, std::span<const double> scores, int n,
                         std::uint64_t seed) {
  return bootstrap_std(
      [&](std::span<const std::size_t> idx) {
        std::vector<int> l;
        std::vector<double> s;
        for (std::size_t i : idx) {
          l.push_back(labels[i]);
          s.push_back(scores[i]);
        }
        return roc_auc(l, s);
      },
      labels.size(), n, seed);
}

}  // namespace

SequenceClassifier select_and_train(std::span<const EventSequence> seqs,
                                    std::span<const int> labels, int num_types,
                                    const ClassifierGrid& grid, std::uint64_t seed) {
  grid.validate();
  const std::vector<ClassifierConfig> configs = grid.expand();
  ClassifierConfig best = configs.front();
  if (configs.size() > 1) {
    auto [fit_idx, val_idx] = stratified_split(labels, grid.val_fraction, seed);
    const auto fit_seqs = take(seqs, fit_idx);
    const auto fit_labels = take(labels, fit_idx);
    const auto val_seqs = take(seqs, val_idx);
    const auto val_labels = take(labels, val_idx);
    double best_auc = -1.0;
    for (const auto& c : configs) {
      SequenceClassifier clf(c, num_types);
      clf.train(fit_seqs, fit_labels, seed);
      double auc = 0.5;
      try {
        auc = roc_auc(val_labels, clf.predict(val_seqs));
      } catch (const UndefinedMetricError&) {
      }
      if (auc > best_auc) {
        best_auc = auc;
        best = c;
      }
    }
  }
  SequenceClassifier clf(best, num_types);
  clf.train(seqs, labels, seed);
  return clf;
}

ScoreWithStd utility_score(std::span<const EventSequence> synthetic_train,
                           std::span<const EventSequence> real_test, int num_types,
                           const ClassifierGrid& grid, int n_bootstrap, std::uint64_t seed) {
  std::vector<int> train_labels, test_labels;
  for (const auto& s : synthetic_train) train_labels.push_back(s.label);
  for (const auto& s : real_test) test_labels.push_back(s.label);
  require_both_classes(train_labels, "utility (synthetic train)");
  require_both_classes(test_labels, "utility (real test)");

  SequenceClassifier clf = select_and_train(synthetic_train, train_labels, num_types, grid, seed);
  const std::vector<double> scores = clf.predict(real_test);
  ScoreWithStd r;
  r.auc = roc_auc(test_labels, scores);
  r.std = auc_bootstrap_std(test_labels, scores, n_bootstrap, seed);
  r.chosen = clf.config();
  return r;
}

ScoreWithStd ml_inference_score(std::span<const EventSequence> real,
                                std::span<const EventSequence> synthetic, int num_types,
                                const ClassifierGrid& grid, int n_bootstrap, std::uint64_t seed) {
  if (real.empty() || synthetic.empty()) throw DomainError("ML inference needs both sets");
  std::vector<EventSequence> all(real.begin(), real.end());
  all.insert(all.end(), synthetic.begin(), synthetic.end());
  std::vector<int> origin(real.size(), 0);
  origin.resize(all.size(), 1);

  // Identical sequences stay on one side of the split. Otherwise a record
  // seen in training with one label pulls its held-out twin the other way.
  std::map<std::vector<std::pair<double, int>>, std::size_t> group_of;
  std::vector<std::size_t> member_group(all.size());
  std::vector<int> group_classes;  // bit 0: has real, bit 1: has synthetic
  for (std::size_t i = 0; i < all.size(); ++i) {
    std::vector<std::pair<double, int>> key;
    for (const Event& e : all[i].events) key.emplace_back(e.time, e.type);
    auto [it, fresh] = group_of.try_emplace(std::move(key), group_classes.size());
    if (fresh) group_classes.push_back(0);
    member_group[i] = it->second;
    group_classes[it->second] |= 1 << origin[i];
  }
  // Strata 0 (real only), 1 (synthetic only), 2 (both).
  std::vector<int> stratum;
  for (int bits : group_classes) stratum.push_back(bits == 3 ? 2 : bits - 1);
  const auto [train_groups, test_groups] = stratified_split(stratum, 0.2, seed);
  std::vector<char> held(group_classes.size(), 0);
  for (std::size_t gi : test_groups) held[gi] = 1;
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < all.size(); ++i) {
    (held[member_group[i]] ? test_idx : train_idx).push_back(i);
  }
  const auto train_seqs = take<EventSequence>(all, train_idx);
  const auto train_labels = take<int>(origin, train_idx);
  const auto test_seqs = take<EventSequence>(all, test_idx);
  const auto test_labels = take<int>(origin, test_idx);
  require_both_classes(train_labels, "ML inference (train)");
  require_both_classes(test_labels, "ML inference (test)");

  SequenceClassifier clf = select_and_train(train_seqs, train_labels, num_types, grid, seed);
  const std::vector<double> scores = clf.predict(test_seqs);
  ScoreWithStd r;
  r.auc = roc_auc(test_labels, scores);
  r.std = auc_bootstrap_std(test_labels, scores, n_bootstrap, seed);
  r.chosen = clf.config();
  return r;
}

}  // namespace seqsynth
