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

#include "seqsynth/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "seqsynth/decoder.hpp"
#include "seqsynth/encoder.hpp"
#include "seqsynth/errors.hpp"
#include "seqsynth/rng.hpp"
#include "seqsynth/transformer.hpp"

namespace seqsynth {

using ad::Graph;
using ad::Index;
using ad::Matrix;
using ad::Var;

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (n_mc < 1 || eval_n_mc < 1) throw ConfigError("n_mc must be at least 1");
  if (!(grad_clip > 0.0)) throw ConfigError("grad_clip must be positive");
  for (double w : {kl_weight, time_weight, type_weight, length_weight, var_multiplier}) {
    if (!(w >= 0.0)) throw ConfigError("loss weights and multipliers must be non-negative");
  }
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw ConfigError("val_fraction must lie in [0, 1)");
  }
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"kl_weight", c.kl_weight},
          {"n_mc", c.n_mc},
          {"eval_n_mc", c.eval_n_mc},
          {"seed", c.seed},
          {"grad_clip", c.grad_clip},
          {"time_weight", c.time_weight},
          {"type_weight", c.type_weight},
          {"length_weight", c.length_weight},
          {"var_multiplier", c.var_multiplier},
          {"val_fraction", c.val_fraction}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lr = j.value("lr", c.lr);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.kl_weight = j.value("kl_weight", c.kl_weight);
  c.n_mc = j.value("n_mc", c.n_mc);
  c.eval_n_mc = j.value("eval_n_mc", c.eval_n_mc);
  c.seed = j.value("seed", c.seed);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.time_weight = j.value("time_weight", c.time_weight);
  c.type_weight = j.value("type_weight", c.type_weight);
  c.length_weight = j.value("length_weight", c.length_weight);
  c.var_multiplier = j.value("var_multiplier", c.var_multiplier);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  return c;
}

// ---------------------------------------------------------------------------
// Loss terms

Var time_mse(const Matrix& true_times, Var pred, const std::vector<bool>& mask) {
  if (true_times.rows() != pred.rows() || true_times.cols() != pred.cols() ||
      static_cast<Index>(mask.size()) != pred.size()) {
    throw ContractError("time_mse: shape mismatch");
  }
  const auto n = static_cast<double>(std::count(mask.begin(), mask.end(), true));
  if (n == 0) throw UndefinedLossError("time_mse over an empty mask");
  // Column-major weights follow the mask order.
  Matrix w(pred.rows(), pred.cols());
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = mask[static_cast<std::size_t>(i)] ? 1.0 / n : 0.0;
  Graph& g = *pred.graph();
  Var err = ad::square(ad::sub(pred, g.constant(true_times)));
  return ad::weighted_sum(err, w);
}

Var type_ce(std::span<const Index> true_types, Var logits, const std::vector<bool>& mask) {
  const Index n_rows = logits.rows();
  if (static_cast<Index>(true_types.size()) != n_rows ||
      static_cast<Index>(mask.size()) != n_rows) {
    throw ContractError("type_ce: shape mismatch");
  }
  std::vector<Index> rows;
  std::vector<Index> cols;
  for (Index i = 0; i < n_rows; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    if (true_types[i] < 0 || true_types[i] >= logits.cols()) {
      throw ContractError("type_ce: class index out of range");
    }
    rows.push_back(i);
    cols.push_back(true_types[i]);
  }
  if (rows.empty()) throw UndefinedLossError("type_ce over an empty mask");
  Var logp = ad::pick(ad::log_softmax_rows(logits), rows, cols);
  return ad::scale(ad::sum(logp), -1.0 / static_cast<double>(rows.size()));
}

Var length_loss(Var end_logits, Index end_index, const std::vector<bool>& has_end) {
  if (static_cast<Index>(has_end.size()) != end_logits.rows()) {
    throw ContractError("length_loss: shape mismatch");
  }
  for (std::size_t i = 0; i < has_end.size(); ++i) {
    if (!has_end[i]) throw ContractError("length_loss: row " + std::to_string(i) + " has no END");
  }
  if (end_logits.rows() == 0) throw UndefinedLossError("length_loss over an empty batch");
  std::vector<Index> rows(static_cast<std::size_t>(end_logits.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  std::vector<Index> cols(rows.size(), end_index);
  Var logp = ad::pick(ad::log_softmax_rows(end_logits), rows, cols);
  return ad::scale(ad::sum(logp), -1.0 / static_cast<double>(rows.size()));
}

LossResult total_loss(Graph& g, Model& model, std::span<const EventSequence> batch,
                      const TrainConfig& config, std::uint64_t step_seed,
                      const LossOptions& options) {
  if (batch.empty()) throw ContractError("total_loss on an empty batch");
  Rng latent_rng = derive_rng(step_seed, Stream::kLatentNoise);
  Rng mc_rng = derive_rng(step_seed, Stream::kMonteCarlo);
  Rng drop_rng = derive_rng(step_seed, Stream::kDropout);
  Rng* drop = options.dropout ? &drop_rng : nullptr;

  auto& params = model.params();
  const HawkesHeads heads = hawkes_heads(g, model);
  const Index end = model.end_index();

  std::vector<Var> lls, kls, time_preds, logits_all, end_logits;
  std::vector<double> true_times;
  std::vector<Index> true_types;
  std::size_t n_events = 0;

  for (const EventSequence& seq : batch) {
    const auto L = static_cast<Index>(seq.events.size());
    if (L == 0) throw ContractError("total_loss: sequence '" + seq.subject_id + "' is empty");
    n_events += static_cast<std::size_t>(L);

    EncoderOutput enc = encode(g, model, seq, drop);
    Var z = sample_z(enc.mu, enc.logvar, options.var_multiplier, latent_rng);
    Var h = decode_hidden(g, model, z, seq.events, drop);

    std::vector<double> times;
    Matrix t_prev(L, 1);
    for (Index j = 0; j < L; ++j) {
      times.push_back(seq.events[j].time);
      t_prev(j, 0) = j == 0 ? 0.0 : seq.events[j - 1].time;
      true_types.push_back(seq.events[j].type);
    }
    true_types.push_back(end);
    true_times.insert(true_times.end(), times.begin(), times.end());

    lls.push_back(hawkes_log_likelihood(g, h, times, heads, options.n_mc, mc_rng));
    kls.push_back(kl_divergence(enc.mu, enc.logvar));

    Var dt = ad::softplus(linear(g, params, "head.time", ad::slice_rows(h, 0, L)));
    time_preds.push_back(ad::add(dt, g.constant(std::move(t_prev))));
    Var logits = linear(g, params, "head.type", h);
    logits_all.push_back(logits);
    end_logits.push_back(ad::slice_rows(logits, L, 1));
  }

  const double B = static_cast<double>(batch.size());
  Var ll_sum = ad::sum(ad::concat_rows(lls));
  Var hawkes = ad::scale(ll_sum, -1.0 / B);
  Var kl = ad::scale(ad::sum(ad::concat_rows(kls)), config.kl_weight / B);

  Var pred = ad::concat_rows(time_preds);
  Matrix tt = Eigen::Map<const Matrix>(true_times.data(), static_cast<Index>(true_times.size()), 1);
  Var tm = ad::scale(time_mse(tt, pred, std::vector<bool>(true_times.size(), true)),
                     config.time_weight);
  Var tc = ad::scale(
      type_ce(true_types, ad::concat_rows(logits_all), std::vector<bool>(true_types.size(), true)),
      config.type_weight);
  Var ln = ad::scale(length_loss(ad::concat_rows(end_logits), end,
                                 std::vector<bool>(batch.size(), true)),
                     config.length_weight);

  LossResult r;
  r.terms.hawkes = hawkes.scalar();
  r.terms.kl = kl.scalar();
  r.terms.time = tm.scalar();
  r.terms.type = tc.scalar();
  r.terms.length = ln.scalar();
  const std::pair<const char*, double> named[] = {{"hawkes", r.terms.hawkes},
                                                  {"kl", r.terms.kl},
                                                  {"time", r.terms.time},
                                                  {"type", r.terms.type},
                                                  {"length", r.terms.length}};
  for (const auto& [name, v] : named) {
    if (!std::isfinite(v)) throw TrainingAbortError(std::string("non-finite ") + name + " loss");
  }
  r.total = ad::add(ad::add(ad::add(ad::add(hawkes, kl), tm), tc), ln);
  r.terms.total = r.total.scalar();
  r.log_likelihood = ll_sum.scalar();
  r.n_events = n_events;
  return r;
}

// ---------------------------------------------------------------------------
// Optimization

Adam::Adam(const ad::ParameterSet& params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
    v_.push_back(m_.back());
  }
}

void Adam::step(ad::ParameterSet& params) {
  if (params.size() != m_.size()) throw ContractError("Adam: parameter set changed");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Parameter& p = params[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseAbs2();
    p.value.array() -=
        lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

double clip_grad_norm(ad::ParameterSet& params, double max_norm) {
  const double norm = params.grad_norm();
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (std::size_t i = 0; i < params.size(); ++i) params[i].grad *= s;
  }
  return norm;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kValidationSeedSalt = 0x5eedULL;

struct ValResult {
  LossBreakdown terms;
  double nll_per_event;
};

ValResult validate_on(Model& model, std::span<const EventSequence> seqs,
                      const TrainConfig& config) {
  Graph g;
  LossOptions opts;
  opts.n_mc = config.eval_n_mc;
  opts.var_multiplier = 0.0;
  LossResult r = total_loss(g, model, seqs, config, config.seed ^ kValidationSeedSalt, opts);
  return {r.terms, -r.log_likelihood / static_cast<double>(r.n_events)};
}

void add_terms(std::vector<CurvePoint>& curve, int epoch, const std::string& prefix,
               const LossBreakdown& t) {
  curve.push_back({epoch, prefix + "total", t.total});
  curve.push_back({epoch, prefix + "hawkes", t.hawkes});
  curve.push_back({epoch, prefix + "kl", t.kl});
  curve.push_back({epoch, prefix + "time", t.time});
  curve.push_back({epoch, prefix + "type", t.type});
  curve.push_back({epoch, prefix + "length", t.length});
}

}  // namespace

double evaluate_nll(Model& model, std::span<const EventSequence> seqs, int n_mc,
                    std::uint64_t seed) {
  TrainConfig cfg;
  cfg.eval_n_mc = n_mc;
  cfg.seed = seed ^ kValidationSeedSalt;
  return validate_on(model, seqs, cfg).nll_per_event;
}

FitResult fit(Model& model, std::span<const EventSequence> train,
              std::span<const EventSequence> val, const TrainConfig& config,
              const std::function<void(int, const LossBreakdown&)>& on_epoch) {
  config.validate();
  if (train.empty()) throw ContractError("fit: empty training set");
  std::span<const EventSequence> val_set = val.empty() ? train : val;

  auto& params = model.params();
  Adam adam(params, config.lr);
  FitResult result;

  ValResult v0 = validate_on(model, val_set, config);
  result.initial_val_loss = v0.terms.total;
  result.initial_val_nll = v0.nll_per_event;
  result.best_val_loss = v0.terms.total;
  result.best_epoch = 0;
  std::vector<Matrix> best = params.snapshot();

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<std::size_t>(config.batch_size);

  try {
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
      Rng order_rng = derive_rng(config.seed, Stream::kBatchOrder, {static_cast<std::uint64_t>(epoch)});
      std::shuffle(order.begin(), order.end(), order_rng);

      LossBreakdown mean;
      int n_batches = 0;
      for (std::size_t start = 0; start < order.size(); start += bs) {
        std::vector<EventSequence> batch;
        for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) {
          batch.push_back(train[order[i]]);
        }
        const std::uint64_t step_seed =
            derive_rng(config.seed, Stream::kBatchOrder,
                       {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(start)})();
        LossOptions opts;
        opts.n_mc = config.n_mc;
        opts.var_multiplier = config.var_multiplier;
        opts.dropout = model.config().dropout > 0.0;

        Graph g;
        LossResult r = total_loss(g, model, batch, config, step_seed, opts);
        params.zero_grad();
        try {
          g.backward(r.total);
        } catch (const PoisonedGradientError& e) {
          throw TrainingAbortError(std::string("gradient: ") + e.what());
        }
        clip_grad_norm(params, config.grad_clip);
        adam.step(params);

        mean.total += r.terms.total;
        mean.hawkes += r.terms.hawkes;
        mean.kl += r.terms.kl;
        mean.time += r.terms.time;
        mean.type += r.terms.type;
        mean.length += r.terms.length;
        ++n_batches;
      }
      const double inv = 1.0 / n_batches;
      mean.total *= inv;
      mean.hawkes *= inv;
      mean.kl *= inv;
      mean.time *= inv;
      mean.type *= inv;
      mean.length *= inv;

      ValResult v = validate_on(model, val_set, config);
      add_terms(result.curve, epoch, "train_", mean);
      result.curve.push_back({epoch, "val_total", v.terms.total});
      result.curve.push_back({epoch, "val_nll", v.nll_per_event});
      if (v.terms.total < result.best_val_loss) {
        result.best_val_loss = v.terms.total;
        result.best_epoch = epoch;
        best = params.snapshot();
      }
      if (on_epoch) on_epoch(epoch, mean);
    }
  } catch (const TrainingAbortError&) {
    params.restore(best);
    throw;
  }
  params.restore(best);
  return result;
}

void write_loss_curve(const std::filesystem::path& path, const std::vector<CurvePoint>& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "epoch,term,value\n";
  char buf[64];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof(buf), "%.17g", p.value);
    out << p.epoch << ',' << p.term << ',' << buf << '\n';
  }
}

}  // namespace seqsynth
