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

#include "seqsynth/transformer.hpp"

#include <cmath>

#include "seqsynth/errors.hpp"

namespace seqsynth {

using ad::Graph;
using ad::Index;
using ad::Matrix;
using ad::Var;

namespace {

void add_linear(ad::ParameterSet& params, const std::string& prefix, int in, int out) {
  params.add(prefix + ".w", in, out);
  params.add(prefix + ".b", 1, out);
}

void add_norm(ad::ParameterSet& params, const std::string& prefix, int d) {
  params.add(prefix + ".g", 1, d).value.setOnes();
  params.add(prefix + ".b", 1, d);
}

Var dropout(Graph& g, Var x, double rate, Rng* rng) {
  (void)g;
  if (!rng || rate <= 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix m(x.rows(), x.cols());
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = keep(*rng) ? 1.0 / (1.0 - rate) : 0.0;
  return ad::mul_const(x, m);
}

}  // namespace

void add_block_params(ad::ParameterSet& params, const std::string& prefix, int d, int d_ff) {
  add_norm(params, prefix + ".ln1", d);
  add_linear(params, prefix + ".q", d, d);
  add_linear(params, prefix + ".k", d, d);
  add_linear(params, prefix + ".v", d, d);
  add_linear(params, prefix + ".o", d, d);
  add_norm(params, prefix + ".ln2", d);
  add_linear(params, prefix + ".ff1", d, d_ff);
  add_linear(params, prefix + ".ff2", d_ff, d);
}

Var linear(Graph& g, ad::ParameterSet& params, const std::string& prefix, Var x) {
  Var w = g.param(params.at(prefix + ".w"));
  Var b = g.param(params.at(prefix + ".b"));
  return ad::add_row(ad::matmul(x, w), b);
}

Var layer_norm(Graph& g, ad::ParameterSet& params, const std::string& prefix, Var x) {
  return ad::layer_norm_rows(x, g.param(params.at(prefix + ".g")),
                             g.param(params.at(prefix + ".b")));
}

Var transformer_block(Graph& g, ad::ParameterSet& params, const std::string& prefix, Var x,
                      const BlockOptions& options) {
  const Index n = x.rows();
  const Index d = x.cols();
  if (options.n_heads <= 0 || d % options.n_heads != 0) {
    throw ContractError("model width " + std::to_string(d) + " not divisible by " +
                        std::to_string(options.n_heads) + " heads");
  }
  const Index dh = d / options.n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  ad::Mask causal;
  if (options.causal) {
    causal.setConstant(n, n, false);
    for (Index i = 0; i < n; ++i) causal.row(i).head(i + 1).setConstant(true);
  }

  Var h = layer_norm(g, params, prefix + ".ln1", x);
  Var q = linear(g, params, prefix + ".q", h);
  Var k = linear(g, params, prefix + ".k", h);
  Var v = linear(g, params, prefix + ".v", h);
  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(options.n_heads));
  for (int hd = 0; hd < options.n_heads; ++hd) {
    Var qh = ad::slice_cols(q, hd * dh, dh);
    Var kh = ad::slice_cols(k, hd * dh, dh);
    Var vh = ad::slice_cols(v, hd * dh, dh);
    Var scores = ad::scale(ad::matmul_nt(qh, kh), scale);
    Var p = ad::softmax_rows(scores, options.causal ? &causal : nullptr);
    heads.push_back(ad::matmul(p, vh));
  }
  Var attn = options.n_heads == 1 ? heads.front() : ad::concat_cols(heads);
  attn = linear(g, params, prefix + ".o", attn);
  Var x1 = ad::add(x, dropout(g, attn, options.dropout, options.dropout_rng));

  Var f = layer_norm(g, params, prefix + ".ln2", x1);
  f = ad::gelu(linear(g, params, prefix + ".ff1", f));
  f = linear(g, params, prefix + ".ff2", f);
  return ad::add(x1, dropout(g, f, options.dropout, options.dropout_rng));
}

// ---------------------------------------------------------------------------

namespace infer {

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, double eps) {
  Matrix out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + eps);
    out.row(i) = ((x.row(i).array() - mean) * inv) * gain.row(0).array() + bias.row(0).array();
  }
  return out;
}

Matrix gelu(const Matrix& x) {
  constexpr double c = 0.7978845608028654;
  return x.unaryExpr(
      [](double v) { return 0.5 * v * (1.0 + std::tanh(c * (v + 0.044715 * v * v * v))); });
}

Matrix linear(const ad::ParameterSet& params, const std::string& prefix, const Matrix& x) {
  Matrix out = x * params.at(prefix + ".w").value;
  out.rowwise() += params.at(prefix + ".b").value.row(0);
  return out;
}

CachedBlock::CachedBlock(const ad::ParameterSet& params, std::string prefix, int n_heads)
    : params_(params), prefix_(std::move(prefix)), n_heads_(n_heads) {}

void CachedBlock::reset() {
  keys_.resize(0, 0);
  values_.resize(0, 0);
}

Matrix CachedBlock::step(const Matrix& x) {
  const Index d = x.cols();
  const Index dh = d / n_heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  auto p = [&](const char* s) -> const Matrix& { return params_.at(prefix_ + s).value; };

  const Matrix h = layer_norm(x, p(".ln1.g"), p(".ln1.b"));
  const Matrix q = linear(params_, prefix_ + ".q", h);
  const Matrix k = linear(params_, prefix_ + ".k", h);
  const Matrix v = linear(params_, prefix_ + ".v", h);
  const Index n = keys_.rows() + 1;
  keys_.conservativeResize(n, d);
  values_.conservativeResize(n, d);
  keys_.row(n - 1) = k.row(0);
  values_.row(n - 1) = v.row(0);

  Matrix attn(1, d);
  for (int hd = 0; hd < n_heads_; ++hd) {
    Eigen::RowVectorXd s =
        (q.middleCols(hd * dh, dh) * keys_.middleCols(hd * dh, dh).transpose()) * scale;
    const double m = s.maxCoeff();
    Eigen::RowVectorXd e = (s.array() - m).exp();
    e /= e.sum();
    attn.middleCols(hd * dh, dh) = e * values_.middleCols(hd * dh, dh);
  }
  const Matrix x1 = x + linear(params_, prefix_ + ".o", attn);
  Matrix f = layer_norm(x1, p(".ln2.g"), p(".ln2.b"));
  f = gelu(linear(params_, prefix_ + ".ff1", f));
  return x1 + linear(params_, prefix_ + ".ff2", f);
}

}  // namespace infer

}  // namespace seqsynth
