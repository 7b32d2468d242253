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

#include "seqsynth/hawkes_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "seqsynth/errors.hpp"

namespace seqsynth {

double ExpHawkesParams::branching_ratio() const {
  const Eigen::MatrixXd G = A.cwiseQuotient(delta);
  Eigen::EigenSolver<Eigen::MatrixXd> es(G, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

void ExpHawkesParams::validate() const {
  const auto K = mu.size();
  if (K == 0) throw ConfigError("scenario needs at least one event type");
  if (A.rows() != K || A.cols() != K || delta.rows() != K || delta.cols() != K) {
    throw ConfigError("A and delta must be K x K with K = len(mu)");
  }
  if ((mu.array() < 0).any() || !mu.allFinite()) throw ConfigError("mu must be non-negative");
  if ((A.array() < 0).any() || !A.allFinite()) throw ConfigError("A must be non-negative");
  if (!(delta.array() > 0).all() || !delta.allFinite()) {
    throw ConfigError("delta must be positive");
  }
  if (!(horizon > 0) || !std::isfinite(horizon)) throw ConfigError("horizon must be positive");
  if (branching_ratio() >= 1.0) {
    throw ConfigError("scenario is not stationary (branching ratio " +
                      std::to_string(branching_ratio()) + " >= 1)");
  }
}

ExpHawkesParams default_scenario() {
  ExpHawkesParams p;
  p.mu.resize(3);
  p.mu << 0.2, 0.1, 0.1;
  p.A.resize(3, 3);
  p.A << 0.3, 0.1, 0.0,
         0.1, 0.2, 0.1,
         0.0, 0.1, 0.3;
  p.delta = Eigen::MatrixXd::Ones(3, 3);
  p.horizon = 50.0;
  return p;
}

namespace {

// Sum over history events with t_j <= t (inclusive), used for the bound.
Eigen::VectorXd intensity_including(const ExpHawkesParams& p, std::span<const Event> history,
                                    double t) {
  Eigen::VectorXd lam = p.mu;
  for (const Event& e : history) {
    if (e.time > t) break;
    for (int i = 0; i < p.num_types(); ++i) {
      lam(i) += p.A(i, e.type) * std::exp(-p.delta(i, e.type) * (t - e.time));
    }
  }
  return lam;
}

void check_types(const ExpHawkesParams& p, std::span<const Event> events) {
  for (std::size_t j = 0; j < events.size(); ++j) {
    if (events[j].type < 0 || events[j].type >= p.num_types()) {
      throw ContractError("event type out of range for the scenario");
    }
    if (j > 0 && events[j].time < events[j - 1].time) throw ContractError("unsorted events");
  }
}

}  // namespace

Eigen::VectorXd exact_intensity(const ExpHawkesParams& p, std::span<const Event> history,
                                double t) {
  if (!history.empty() && t < history.back().time) {
    throw DomainError("exact_intensity: t precedes the last history event");
  }
  Eigen::VectorXd lam = p.mu;
  for (const Event& e : history) {
    if (!(e.time < t)) continue;
    for (int i = 0; i < p.num_types(); ++i) {
      lam(i) += p.A(i, e.type) * std::exp(-p.delta(i, e.type) * (t - e.time));
    }
  }
  return lam;
}

EventSequence simulate_thinning(const ExpHawkesParams& p, Rng& rng) {
  EventSequence seq;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double t = 0.0;
  while (true) {
    // Kernels only decay between events, so the intensity just after t bounds
    // the intensity until the next accepted event.
    const double bound = intensity_including(p, seq.events, t).sum();
    if (bound > kRunawayIntensity) throw SimulationError("intensity bound overflow (runaway)");
    if (bound <= 0.0) break;
    t += -std::log1p(-unif(rng)) / bound;
    if (t > p.horizon) break;
    const Eigen::VectorXd lam = exact_intensity(p, seq.events, t);
    const double total = lam.sum();
    if (total > bound * (1.0 + 1e-12)) {
      throw SimulationError("thinning acceptance ratio exceeded 1");
    }
    if (unif(rng) * bound <= total) {
      std::discrete_distribution<int> pick(lam.data(), lam.data() + lam.size());
      seq.events.push_back({t, pick(rng)});
    }
  }
  return seq;
}

std::vector<EventSequence> simulate_dataset(const ExpHawkesParams& p, int n, std::uint64_t seed,
                                            const std::string& id_prefix) {
  p.validate();
  if (n < 0) throw ConfigError("number of subjects must be non-negative");
  if (p.mu.sum() <= 0.0) throw ConfigError("scenario with zero baseline produces no events");
  std::vector<EventSequence> out;
  std::vector<double> counts;
  for (int i = 0; i < n; ++i) {
    EventSequence s;
    // Subjects need at least one event; redraw from a fresh sub-stream.
    for (std::uint64_t attempt = 0; s.events.empty(); ++attempt) {
      if (attempt == 1000) throw SimulationError("could not draw a non-empty sequence");
      Rng rng = derive_rng(seed, Stream::kSimulation, {static_cast<std::uint64_t>(i), attempt});
      s = simulate_thinning(p, rng);
    }
    s.subject_id = id_prefix + std::to_string(i);
    counts.push_back(static_cast<double>(
        std::count_if(s.events.begin(), s.events.end(), [](const Event& e) { return e.type == 0; })));
    out.push_back(std::move(s));
  }
  if (n > 0) {
    std::vector<double> sorted = counts;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size() / 2;
    const double median = sorted.size() % 2 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);
    for (int i = 0; i < n; ++i) out[i].label = counts[i] > median ? 1 : 0;
  }
  return out;
}

double exact_log_likelihood(const ExpHawkesParams& p, std::span<const Event> events) {
  check_types(p, events);
  const int K = p.num_types();
  const double T = p.horizon;
  // R(i, k) = sum over past type-k events of exp(-delta(i, k) (t - t_j)).
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(K, K);
  double ll = 0.0;
  double prev = 0.0;
  for (const Event& e : events) {
    const double dt = e.time - prev;
    R = R.cwiseProduct((-p.delta * dt).array().exp().matrix());
    const double lam = p.mu(e.type) + p.A.row(e.type).dot(R.row(e.type));
    ll += std::log(lam);
    R.col(e.type).array() += 1.0;
    prev = e.time;
  }
  double comp = p.mu.sum() * T;
  for (const Event& e : events) {
    for (int i = 0; i < K; ++i) {
      const double d = p.delta(i, e.type);
      comp += p.A(i, e.type) / d * (1.0 - std::exp(-d * (T - e.time)));
    }
  }
  return ll - comp;
}

double exact_log_likelihood_naive(const ExpHawkesParams& p, std::span<const Event> events) {
  check_types(p, events);
  double ll = 0.0;
  for (std::size_t n = 0; n < events.size(); ++n) {
    double lam = p.mu(events[n].type);
    for (std::size_t j = 0; j < n; ++j) {
      lam += p.A(events[n].type, events[j].type) *
             std::exp(-p.delta(events[n].type, events[j].type) * (events[n].time - events[j].time));
    }
    ll += std::log(lam);
  }
  return ll - exact_compensator(p, events, 0.0, p.horizon);
}

double exact_compensator(const ExpHawkesParams& p, std::span<const Event> events, double a,
                         double b) {
  if (!(b >= a) || a < 0) throw DomainError("exact_compensator: need 0 <= a <= b");
  double total = p.mu.sum() * (b - a);
  for (const Event& e : events) {
    if (e.time >= b) break;
    const double from = std::max(a, e.time);
    for (int i = 0; i < p.num_types(); ++i) {
      const double d = p.delta(i, e.type);
      total += p.A(i, e.type) / d *
               (std::exp(-d * (from - e.time)) - std::exp(-d * (b - e.time)));
    }
  }
  return total;
}

std::vector<double> rescaled_intervals(const ExpHawkesParams& p, std::span<const Event> events) {
  std::vector<double> out;
  double prev = 0.0;
  for (const Event& e : events) {
    out.push_back(exact_compensator(p, events, prev, e.time));
    prev = e.time;
  }
  return out;
}

KsResult ks_test_exponential(std::vector<double> samples) {
  if (samples.empty()) throw DomainError("KS test on an empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = 1.0 - std::exp(-samples[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  // Asymptotic Kolmogorov distribution with Stephens' small-sample correction.
  const double sq = std::sqrt(n);
  const double lambda = (sq + 0.12 + 0.11 / sq) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    p += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return {d, std::clamp(p, 0.0, 1.0)};
}

namespace {

double window(const EventSequence& s, double horizon) {
  if (horizon > 0.0) return horizon;
  if (s.events.empty()) return 0.0;
  return s.events.back().time - s.events.front().time;
}

}  // namespace

PoissonBaseline poisson_mle_baseline(std::span<const EventSequence> train, int num_types,
                                     double horizon) {
  if (train.empty()) throw DomainError("Poisson baseline needs a non-empty training set");
  PoissonBaseline b;
  b.rates = Eigen::VectorXd::Zero(num_types);
  for (const auto& s : train) {
    b.total_time += window(s, horizon);
    for (const auto& e : s.events) {
      if (e.type < 0 || e.type >= num_types) throw ContractError("event type out of range");
      b.rates(e.type) += 1.0;
    }
  }
  if (!(b.total_time > 0.0)) throw DomainError("zero total observation time");
  b.rates /= b.total_time;
  b.rates = b.rates.cwiseMax(kPoissonRateFloor);
  return b;
}

double poisson_log_likelihood(const PoissonBaseline& b, std::span<const EventSequence> seqs,
                              double horizon) {
  const double total_rate = b.rates.sum();
  double ll = 0.0;
  for (const auto& s : seqs) {
    for (const auto& e : s.events) ll += std::log(b.rates(e.type));
    ll -= total_rate * window(s, horizon);
  }
  return ll;
}

double poisson_ground_log_likelihood(const PoissonBaseline& b, std::span<const EventSequence> seqs,
                                     double horizon) {
  const double total_rate = b.rates.sum();
  double ll = 0.0;
  for (const auto& s : seqs) {
    ll += static_cast<double>(s.events.size()) * std::log(total_rate);
    ll -= total_rate * window(s, horizon);
  }
  return ll;
}

}  // namespace seqsynth
