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

// Causal decoder and Hawkes intensity heads.
//
// Decoder position 0 is a begin-of-sequence slot fed only with the projected
// z_0. Position j >= 1 sees embedding(k_j) + TE(t_j) + proj(z_j). The hidden
// state at position j, h(t_j), predicts event j+1; position L predicts END.
//
// Per-type intensity between events j and j+1:
//
//   lambda_k(t) = softplus(alpha_k (t - t_j) / t_j + W_k . h(t_j) + mu_k; beta_k)
//
// END has no intensity; it lives only in the type head.

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "seqsynth/autodiff.hpp"
#include "seqsynth/event_data.hpp"
#include "seqsynth/model.hpp"
#include "seqsynth/rng.hpp"
#include "seqsynth/transformer.hpp"

namespace seqsynth {

inline constexpr double kIntensityFloor = 1e-8;

ad::Var decode_hidden(ad::Graph& g, Model& model, ad::Var z, std::span<const Event> prefix,
                      Rng* dropout_rng = nullptr);

struct HawkesHeads {
  ad::Var W;         // K x d
  ad::Var alpha;     // 1 x K
  ad::Var mu;        // 1 x K
  ad::Var log_beta;  // 1 x K
  double beta_min = 1e-6;
  double beta_max = 1e6;
};
HawkesHeads hawkes_heads(ad::Graph& g, Model& model);

struct HawkesHeadValues {
  ad::Matrix W;
  Eigen::RowVectorXd alpha;
  Eigen::RowVectorXd mu;
  Eigen::RowVectorXd beta;  // already clamped
};
HawkesHeadValues hawkes_head_values(const Model& model);

/// Per-type intensities at t in [t_j, t_{j+1}). Throws DomainError for t < t_j
/// or t_j <= 0.
Eigen::VectorXd intensity_at(double t, double t_j, const Eigen::RowVectorXd& hidden_j,
                             const HawkesHeadValues& heads);

/// lambda_k / sum(lambda). Throws ContractError on a non-positive entry.
Eigen::VectorXd type_probs(const Eigen::VectorXd& lambdas);

// Uniform points for the Monte-Carlo compensator: n_mc draws in every
// interval (t_j, t_{j+1}), each weighted by (t_{j+1} - t_j) / n_mc.
struct McDraws {
  std::vector<ad::Index> interval;  // j, 0-based: interval between events j and j+1
  std::vector<double> u;
  std::vector<double> weight;
};
McDraws draw_mc_points(std::span<const double> times, int n_mc, Rng& rng);

/// Monte-Carlo estimate of the integral of `total_intensity(u, j)` over
/// [t_1, t_L], where j is the 0-based index of the interval containing u.
template <class F>
double mc_compensator(std::span<const double> times, F&& total_intensity, int n_mc, Rng& rng) {
  const McDraws d = draw_mc_points(times, n_mc, rng);
  double acc = 0.0;
  for (std::size_t r = 0; r < d.u.size(); ++r) {
    acc += d.weight[r] * total_intensity(d.u[r], static_cast<std::size_t>(d.interval[r]));
  }
  return acc;
}

/// sum_j log(lambda(t_j) + 1e-8) minus the Monte-Carlo compensator over
/// [t_1, t_L]. `hidden` has L+1 rows, row j being h(t_j). Throws ContractError
/// for unsorted times or mismatched shapes.
ad::Var hawkes_log_likelihood(ad::Graph& g, ad::Var hidden, std::span<const double> times,
                              const HawkesHeads& heads, int n_mc, Rng& rng);

struct QuadratureConfig {
  double first_step = 1e-4;
  double growth = 1.02;
  double max_mass_per_step = 0.01;  // cap on the compensator added per step
  double survival_tol = 1e-6;
  double max_horizon = 1e6;
  double intensity_floor = 0.0;
};

/// E[t_{j+1}] = integral over t >= t_j of t * lambda(t) * exp(-Lambda(t)),
/// by composite trapezoid on a geometrically growing grid. Throws
/// HorizonError if survival stays above tolerance up to t_j + max_horizon.
double expected_next_time(const std::function<double(double)>& total_intensity, double t_j,
                          const QuadratureConfig& q = {});

double predict_next_time_expectation(const Eigen::RowVectorXd& hidden_j, double t_j,
                                     const HawkesHeadValues& heads,
                                     const QuadratureConfig& q = {});

struct HeadOutput {
  double next_time;
  Eigen::VectorXd type_logits;  // K + 1, END last
};

/// Time head t_j + softplus(h . w + b) and type logits.
HeadOutput regression_heads(const Eigen::RowVectorXd& hidden_j, double t_j, const Model& model);

// Step-by-step decoder with per-layer key/value caches. Produces the same
// hidden states as decode_hidden on the same prefix.
class IncrementalDecoder {
 public:
  explicit IncrementalDecoder(const Model& model);

  Eigen::RowVectorXd start(const Eigen::RowVectorXd& z0);
  Eigen::RowVectorXd step(int type, double time, const Eigen::RowVectorXd& z_j);

 private:
  Eigen::RowVectorXd advance(const ad::Matrix& x);

  const Model& model_;
  std::vector<infer::CachedBlock> blocks_;
};

}  // namespace seqsynth
