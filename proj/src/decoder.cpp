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

#include "seqsynth/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "seqsynth/encoder.hpp"
#include "seqsynth/errors.hpp"

namespace seqsynth {

using ad::Graph;
using ad::Index;
using ad::Matrix;
using ad::Var;

Var decode_hidden(Graph& g, Model& model, Var z, std::span<const Event> prefix,
                  Rng* dropout_rng) {
  const ModelConfig& cfg = model.config();
  auto& params = model.params();
  const auto P = static_cast<Index>(prefix.size());
  if (z.rows() < P + 1) {
    throw ContractError("decode_hidden: prefix of " + std::to_string(P) +
                        " events needs " + std::to_string(P + 1) + " latent rows, got " +
                        std::to_string(z.rows()));
  }
  if (z.cols() != cfg.d_latent) throw ContractError("decode_hidden: latent width mismatch");

  Var x = linear(g, params, "dec.zproj", ad::slice_rows(z, 0, P + 1));
  if (P > 0) {
    std::vector<Index> types;
    std::vector<double> times;
    for (const Event& e : prefix) {
      if (e.type < 0 || e.type >= model.num_types()) {
        throw ContractError("decode_hidden: type index out of range");
      }
      types.push_back(e.type);
      times.push_back(e.time);
    }
    Matrix te = Matrix::Zero(P + 1, cfg.d_model);
    te.bottomRows(P) = temporal_encode(times, cfg.d_model);
    Var emb = ad::gather_rows(g.param(params.at("embedding")), types);
    Var bos = g.constant(Matrix::Zero(1, cfg.d_model));
    const Var parts[] = {bos, emb};
    x = ad::add(x, ad::add(ad::concat_rows(parts), g.constant(std::move(te))));
  }

  BlockOptions opts;
  opts.n_heads = cfg.n_heads;
  opts.causal = true;
  opts.dropout = cfg.dropout;
  opts.dropout_rng = dropout_rng;
  for (int i = 0; i < cfg.n_layers; ++i) {
    x = transformer_block(g, params, "dec.l" + std::to_string(i), x, opts);
  }
  return layer_norm(g, params, "dec.ln_f", x);
}

HawkesHeads hawkes_heads(Graph& g, Model& model) {
  auto& p = model.params();
  return {g.param(p.at("hawkes.W")),     g.param(p.at("hawkes.alpha")),
          g.param(p.at("hawkes.mu")),    g.param(p.at("hawkes.log_beta")),
          model.config().beta_min,       model.config().beta_max};
}

HawkesHeadValues hawkes_head_values(const Model& model) {
  HawkesHeadValues h;
  h.W = model.value("hawkes.W");
  h.alpha = model.value("hawkes.alpha").row(0);
  h.mu = model.value("hawkes.mu").row(0);
  h.beta = model.value("hawkes.log_beta").row(0).array().exp().cwiseMax(model.config().beta_min)
               .cwiseMin(model.config().beta_max);
  return h;
}

Eigen::VectorXd intensity_at(double t, double t_j, const Eigen::RowVectorXd& hidden_j,
                             const HawkesHeadValues& heads) {
  if (!(t_j > 0.0)) throw DomainError("intensity_at: interval start must be positive");
  if (t < t_j) throw DomainError("intensity_at: t precedes the interval start");
  const Index K = heads.W.rows();
  Eigen::VectorXd lam(K);
  const Eigen::VectorXd affine = heads.W * hidden_j.transpose();
  for (Index k = 0; k < K; ++k) {
    const double pre = heads.alpha(k) * (t - t_j) / t_j + affine(k) + heads.mu(k);
    lam(k) = ad::softplus(pre, heads.beta(k));
  }
  return lam;
}

Eigen::VectorXd type_probs(const Eigen::VectorXd& lambdas) {
  if (lambdas.size() == 0) throw ContractError("type_probs: empty intensity vector");
  for (Index k = 0; k < lambdas.size(); ++k) {
    if (!(lambdas(k) > 0.0)) throw ContractError("type_probs: intensities must be positive");
  }
  return lambdas / lambdas.sum();
}

McDraws draw_mc_points(std::span<const double> times, int n_mc, Rng& rng) {
  if (n_mc < 1) throw ContractError("n_mc must be at least 1");
  McDraws d;
  if (times.size() < 2) return d;
  const std::size_t n = (times.size() - 1) * static_cast<std::size_t>(n_mc);
  d.interval.reserve(n);
  d.u.reserve(n);
  d.weight.reserve(n);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t j = 0; j + 1 < times.size(); ++j) {
    const double a = times[j];
    const double b = times[j + 1];
    for (int i = 0; i < n_mc; ++i) {
      d.interval.push_back(static_cast<Index>(j));
      d.u.push_back(a + (b - a) * unif(rng));
      d.weight.push_back((b - a) / n_mc);
    }
  }
  return d;
}

Var hawkes_log_likelihood(Graph& g, Var hidden, std::span<const double> times,
                          const HawkesHeads& heads, int n_mc, Rng& rng) {
  const auto L = static_cast<Index>(times.size());
  if (L == 0) throw ContractError("log-likelihood of an empty sequence");
  if (hidden.rows() != L + 1) {
    throw ContractError("hawkes_log_likelihood: expected " + std::to_string(L + 1) +
                        " hidden rows, got " + std::to_string(hidden.rows()));
  }
  for (Index j = 1; j < L; ++j) {
    if (times[j] < times[j - 1]) throw ContractError("hawkes_log_likelihood: unsorted times");
  }
  if (!(times[0] > 0.0)) throw DomainError("hawkes_log_likelihood: first time must be positive");

  // Affine part W_k . h(t_j) for every decoder position.
  Var affine = ad::matmul_nt(hidden, heads.W);

  Var at_events = ad::add_row(ad::slice_rows(affine, 1, L), heads.mu);
  Var lam = ad::row_sum(ad::softplus_cols(at_events, heads.log_beta, heads.beta_min,
                                          heads.beta_max));
  Var ll = ad::sum(ad::log(ad::add_scalar(lam, kIntensityFloor)));
  if (L < 2) return ll;

  const McDraws d = draw_mc_points(times, n_mc, rng);
  const auto R = static_cast<Index>(d.u.size());
  std::vector<Index> rows(d.interval.size());
  Matrix s(R, 1);
  Matrix w(R, 1);
  for (Index r = 0; r < R; ++r) {
    const Index j = d.interval[r];
    rows[r] = j + 1;
    s(r, 0) = (d.u[r] - times[j]) / times[j];
    w(r, 0) = d.weight[r];
  }
  Var pre = ad::add_row(ad::gather_rows(affine, rows), heads.mu);
  pre = ad::add(pre, ad::matmul(g.constant(std::move(s)), heads.alpha));
  Var lam_mc = ad::row_sum(ad::softplus_cols(pre, heads.log_beta, heads.beta_min,
                                             heads.beta_max));
  return ad::sub(ll, ad::weighted_sum(lam_mc, w));
}

double expected_next_time(const std::function<double(double)>& total_intensity, double t_j,
                          const QuadratureConfig& q) {
  auto lam = [&](double t) { return std::max(total_intensity(t), q.intensity_floor); };
  double t = t_j;
  double l = lam(t);
  double big_lambda = 0.0;
  double f = t * l;  // integrand t * lambda * survival, survival = 1 at t_j
  double mean = 0.0;
  double h = q.first_step;
  while (true) {
    double step = h;
    if (l > 0.0) step = std::min(step, q.max_mass_per_step / l);
    const double t_next = t + step;
    const double l_next = lam(t_next);
    big_lambda += 0.5 * step * (l + l_next);
    const double f_next = t_next * l_next * std::exp(-big_lambda);
    mean += 0.5 * step * (f + f_next);
    t = t_next;
    l = l_next;
    f = f_next;
    h *= q.growth;
    if (std::exp(-big_lambda) < q.survival_tol) break;
    if (t - t_j > q.max_horizon) {
      throw HorizonError("survival stays above " + std::to_string(q.survival_tol) +
                         " beyond the quadrature horizon");
    }
  }
  // Renormalize by the captured probability mass 1 - S(t_end).
  return mean / (1.0 - std::exp(-big_lambda));
}

double predict_next_time_expectation(const Eigen::RowVectorXd& hidden_j, double t_j,
                                     const HawkesHeadValues& heads, const QuadratureConfig& q) {
  return expected_next_time(
      [&](double t) { return intensity_at(t, t_j, hidden_j, heads).sum(); }, t_j, q);
}

HeadOutput regression_heads(const Eigen::RowVectorXd& hidden_j, double t_j, const Model& model) {
  HeadOutput out;
  const double pre =
      hidden_j.dot(model.value("head.time.w").col(0)) + model.value("head.time.b")(0, 0);
  out.next_time = t_j + ad::softplus(pre, 1.0);
  out.type_logits =
      (hidden_j * model.value("head.type.w") + model.value("head.type.b")).transpose();
  return out;
}

// ---------------------------------------------------------------------------

IncrementalDecoder::IncrementalDecoder(const Model& model) : model_(model) {
  for (int i = 0; i < model.config().n_layers; ++i) {
    blocks_.emplace_back(model.params(), "dec.l" + std::to_string(i), model.config().n_heads);
  }
}

Eigen::RowVectorXd IncrementalDecoder::advance(const Matrix& x) {
  Matrix h = x;
  for (auto& b : blocks_) h = b.step(h);
  return infer::layer_norm(h, model_.value("dec.ln_f.g"), model_.value("dec.ln_f.b")).row(0);
}

Eigen::RowVectorXd IncrementalDecoder::start(const Eigen::RowVectorXd& z0) {
  for (auto& b : blocks_) b.reset();
  return advance(infer::linear(model_.params(), "dec.zproj", z0));
}

Eigen::RowVectorXd IncrementalDecoder::step(int type, double time, const Eigen::RowVectorXd& z_j) {
  if (type < 0 || type >= model_.num_types()) throw ContractError("decoder step: bad type");
  const double t[] = {time};
  Matrix x = infer::linear(model_.params(), "dec.zproj", z_j);
  x += model_.value("embedding").row(type) + temporal_encode(t, model_.config().d_model);
  return advance(x);
}

}  // namespace seqsynth
