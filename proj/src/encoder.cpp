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

#include "seqsynth/encoder.hpp"

#include <cmath>

#include "seqsynth/errors.hpp"
#include "seqsynth/transformer.hpp"

namespace seqsynth {

using ad::Graph;
using ad::Index;
using ad::Matrix;
using ad::Var;

ad::Matrix temporal_encode(std::span<const double> times, int d) {
  if (d <= 0 || d % 2 != 0) throw ConfigError("temporal encoding width must be even");
  Matrix out(static_cast<Index>(times.size()), d);
  for (int i = 0; i < d / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / static_cast<double>(d));
    for (std::size_t r = 0; r < times.size(); ++r) {
      const double a = times[r] * freq;
      out(static_cast<Index>(r), 2 * i) = std::sin(a);
      out(static_cast<Index>(r), 2 * i + 1) = std::cos(a);
    }
  }
  return out;
}

EncoderRows encoder_rows(const EventSequence& seq, int end_index) {
  EncoderRows rows;
  for (const auto& e : seq.events) {
    rows.types.push_back(e.type);
    rows.times.push_back(e.time);
  }
  rows.types.push_back(end_index);
  rows.times.push_back(seq.events.empty() ? 0.0 : seq.events.back().time);
  return rows;
}

namespace {

EncoderOutput encode_rows(Graph& g, Model& model, const EncoderRows& rows, Rng* dropout_rng) {
  const ModelConfig& cfg = model.config();
  auto& params = model.params();
  for (Index t : rows.types) {
    if (t < 0 || t > model.end_index()) throw ContractError("encoder: type index out of range");
  }
  Var emb = ad::gather_rows(g.param(params.at("embedding")), rows.types);
  Var x = ad::add(emb, g.constant(temporal_encode(rows.times, cfg.d_model)));

  BlockOptions opts;
  opts.n_heads = cfg.n_heads;
  opts.causal = false;
  opts.dropout = cfg.dropout;
  opts.dropout_rng = dropout_rng;
  for (int i = 0; i < cfg.n_layers; ++i) {
    x = transformer_block(g, params, "enc.l" + std::to_string(i), x, opts);
  }
  Var h = layer_norm(g, params, "enc.ln_f", x);
  return {h, linear(g, params, "enc.mu", h), linear(g, params, "enc.logvar", h)};
}

}  // namespace

EncoderOutput encode(Graph& g, Model& model, const EventSequence& seq, Rng* dropout_rng) {
  return encode_rows(g, model, encoder_rows(seq, model.end_index()), dropout_rng);
}

std::vector<Matrix> encode(Model& model, const PaddedBatch& batch) {
  const Index B = batch.times.rows();
  const Index Lmax = batch.times.cols();
  if (batch.types.rows() != B || batch.types.cols() != Lmax || batch.mask.rows() != B ||
      batch.mask.cols() != Lmax || static_cast<Index>(batch.lengths.size()) != B) {
    throw ContractError("encode: inconsistent batch shapes");
  }
  std::vector<Matrix> out;
  for (Index b = 0; b < B; ++b) {
    EncoderRows rows;
    for (Index j = 0; j < Lmax; ++j) {
      if (!batch.mask(b, j)) continue;
      rows.types.push_back(batch.types(b, j));
      rows.times.push_back(batch.times(b, j));
    }
    Matrix h = Matrix::Zero(Lmax, model.config().d_model);
    if (!rows.types.empty()) {
      Graph g;
      EncoderOutput enc = encode_rows(g, model, rows, nullptr);
      h.topRows(enc.hidden.rows()) = enc.hidden.value();
    }
    out.push_back(std::move(h));
  }
  return out;
}

std::pair<Matrix, Matrix> latent_params(const Matrix& hidden, const Model& model) {
  return {infer::linear(model.params(), "enc.mu", hidden),
          infer::linear(model.params(), "enc.logvar", hidden)};
}

Var sample_z(Var mu, Var logvar, double var_multiplier, Rng& rng) {
  if (!(var_multiplier >= 0.0)) throw DomainError("variance multiplier must be non-negative");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix eps(mu.rows(), mu.cols());
  for (Index i = 0; i < eps.size(); ++i) eps.data()[i] = var_multiplier * normal(rng);
  Var sigma = ad::exp(ad::scale(logvar, 0.5));
  return ad::add(mu, ad::mul_const(sigma, eps));
}

Matrix sample_z(const Matrix& mu, const Matrix& logvar, double var_multiplier, Rng& rng) {
  if (!(var_multiplier >= 0.0)) throw DomainError("variance multiplier must be non-negative");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix eps(mu.rows(), mu.cols());
  for (Index i = 0; i < eps.size(); ++i) eps.data()[i] = var_multiplier * normal(rng);
  return mu + (logvar.array() * 0.5).exp().matrix().cwiseProduct(eps);
}

Var kl_divergence(Var mu, Var logvar) {
  if (mu.rows() == 0) throw UndefinedLossError("KL over zero positions");
  Var terms = ad::sub(ad::add(ad::square(mu), ad::exp(logvar)), logvar);
  terms = ad::add_scalar(terms, -1.0);
  return ad::scale(ad::sum(terms), 0.5 / static_cast<double>(mu.rows()));
}

double kl_divergence(const Matrix& mu, const Matrix& logvar, const std::vector<bool>& mask) {
  if (static_cast<Index>(mask.size()) != mu.rows() || logvar.rows() != mu.rows() ||
      logvar.cols() != mu.cols()) {
    throw ContractError("kl_divergence: shape mismatch");
  }
  double total = 0.0;
  int n = 0;
  for (Index i = 0; i < mu.rows(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    ++n;
    total += 0.5 * (mu.row(i).array().square() + logvar.row(i).array().exp() - 1.0 -
                    logvar.row(i).array())
                       .sum();
  }
  if (n == 0) return 0.0;
  return total / n;
}

}  // namespace seqsynth
