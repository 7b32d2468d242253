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

// Multivariate Hawkes process with exponential kernels
//
//   lambda_i(t) = mu_i + sum_{t_j < t} A(i, k_j) exp(-delta(i, k_j) (t - t_j)).
//
// Used as the ground-truth data source and as a closed-form reference for the
// learned model's Monte-Carlo likelihood.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "seqsynth/event_data.hpp"
#include "seqsynth/rng.hpp"

namespace seqsynth {

struct ExpHawkesParams {
  Eigen::VectorXd mu;     // K
  Eigen::MatrixXd A;      // K x K, A(i, k): effect of a type-k event on type i
  Eigen::MatrixXd delta;  // K x K
  double horizon = 50.0;

  int num_types() const { return static_cast<int>(mu.size()); }
  /// Spectral radius of A ./ delta.
  double branching_ratio() const;
  /// Throws ConfigError on bad shapes, signs, or a non-stationary process.
  void validate() const;
};

/// The bundled fixture: K = 3, mu = [0.2, 0.1, 0.1], mild cross-excitation,
/// delta = 1, T = 50.
ExpHawkesParams default_scenario();

Eigen::VectorXd exact_intensity(const ExpHawkesParams& p, std::span<const Event> history,
                                double t);

// Thinning stops and throws SimulationError once the bound passes this.
inline constexpr double kRunawayIntensity = 1e8;

/// Ogata thinning on [0, T]. The returned sequence has raw (unshifted)
/// times and label 0.
EventSequence simulate_thinning(const ExpHawkesParams& p, Rng& rng);

/// n sequences from streams (seed, kSimulation, i); label 1 iff the type-0
/// count exceeds the median type-0 count of the whole set. Subject ids are
/// "<prefix><i>".
std::vector<EventSequence> simulate_dataset(const ExpHawkesParams& p, int n, std::uint64_t seed,
                                            const std::string& id_prefix = "s");

/// Closed-form log-likelihood on [0, T] via the per-type recursion.
double exact_log_likelihood(const ExpHawkesParams& p, std::span<const Event> events);
/// O(L^2) double sum of the same quantity, for cross-checking.
double exact_log_likelihood_naive(const ExpHawkesParams& p, std::span<const Event> events);

/// Integral of the total intensity over [a, b], b >= a >= 0, given the
/// history before a plus any events inside (a, b).
double exact_compensator(const ExpHawkesParams& p, std::span<const Event> events, double a,
                         double b);

/// Time-rescaled inter-event gaps Lambda(t_j) - Lambda(t_{j-1}) of the
/// ground process, with Lambda(0) = 0 as the first anchor.
std::vector<double> rescaled_intervals(const ExpHawkesParams& p, std::span<const Event> events);

struct KsResult {
  double statistic;
  double p_value;
};
/// One-sample Kolmogorov-Smirnov test against Exp(1).
KsResult ks_test_exponential(std::vector<double> samples);

struct PoissonBaseline {
  Eigen::VectorXd rates;
  double total_time = 0.0;
};

inline constexpr double kPoissonRateFloor = 1e-8;

/// rate_k = count_k / observed time. Each sequence contributes t_L - t_1 by
/// default, or `horizon` when it is positive. Throws DomainError when the
/// total observed time is zero.
PoissonBaseline poisson_mle_baseline(std::span<const EventSequence> train, int num_types,
                                     double horizon = 0.0);

/// Marked log-likelihood under homogeneous Poisson rates on the same window.
double poisson_log_likelihood(const PoissonBaseline& b, std::span<const EventSequence> seqs,
                              double horizon = 0.0);
/// Ground-process version: total rate, marks ignored.
double poisson_ground_log_likelihood(const PoissonBaseline& b, std::span<const EventSequence> seqs,
                                     double horizon = 0.0);

}  // namespace seqsynth
