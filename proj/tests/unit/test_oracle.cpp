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

#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "seqsynth/errors.hpp"
#include "seqsynth/hawkes_oracle.hpp"

namespace seqsynth {
namespace {

ExpHawkesParams two_type(double a = 0.3) {
  ExpHawkesParams p;
  p.mu = Eigen::Vector2d(0.5, 0.2);
  p.A = Eigen::Matrix2d::Constant(a);
  p.A(1, 0) = 0.5 * a;
  p.delta = Eigen::Matrix2d::Constant(1.5);
  p.horizon = 20.0;
  return p;
}

// Trapezoid integral of the total intensity, splitting at event times so the
// jumps do not smear.
double numeric_compensator(const ExpHawkesParams& p, const std::vector<Event>& ev, double a,
                           double b, int steps_per_piece = 20000) {
  std::vector<double> cuts{a};
  for (const Event& e : ev) {
    if (e.time > a && e.time < b) cuts.push_back(e.time);
  }
  cuts.push_back(b);
  double acc = 0.0;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double lo = cuts[c], hi = cuts[c + 1];
    const double h = (hi - lo) / steps_per_piece;
    auto f = [&](double t) {
      // History strictly before t; evaluate just inside the piece.
      std::vector<Event> past;
      for (const Event& e : ev) {
        if (e.time < t) past.push_back(e);
      }
      return exact_intensity(p, past, t).sum();
    };
    double s = 0.5 * (f(lo + 1e-12) + f(hi - 1e-12));
    for (int i = 1; i < steps_per_piece; ++i) s += f(lo + i * h);
    acc += s * h;
  }
  return acc;
}

TEST(Params, ValidationRejectsBadScenarios) {
  EXPECT_NO_THROW(default_scenario().validate());
  ExpHawkesParams p = two_type();
  p.A.setConstant(2.0);
  EXPECT_GE(p.branching_ratio(), 1.0);
  EXPECT_THROW(p.validate(), ConfigError);
  p = two_type();
  p.mu(0) = -0.1;
  EXPECT_THROW(p.validate(), ConfigError);
  p = two_type();
  p.delta(1, 1) = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Intensity, BaselineAndSingleKick) {
  const ExpHawkesParams p = two_type();
  const Eigen::VectorXd base = exact_intensity(p, {}, 3.0);
  EXPECT_DOUBLE_EQ(base(0), 0.5);
  EXPECT_DOUBLE_EQ(base(1), 0.2);
  const std::vector<Event> h{{1.0, 0}};
  const Eigen::VectorXd l = exact_intensity(p, h, 2.0);
  EXPECT_NEAR(l(0), 0.5 + 0.3 * std::exp(-1.5), 1e-15);
  EXPECT_NEAR(l(1), 0.2 + 0.15 * std::exp(-1.5), 1e-15);
}

TEST(Simulation, PoissonCountsMatchRates) {
  ExpHawkesParams p = two_type(0.0);
  const int n = 2000;
  Eigen::Vector2d counts = Eigen::Vector2d::Zero();
  for (int i = 0; i < n; ++i) {
    Rng rng = derive_rng(42, Stream::kSimulation, {static_cast<std::uint64_t>(i)});
    const EventSequence s = simulate_thinning(p, rng);
    for (std::size_t j = 0; j < s.events.size(); ++j) {
      EXPECT_GE(s.events[j].time, 0.0);
      EXPECT_LE(s.events[j].time, p.horizon);
      if (j > 0) EXPECT_GE(s.events[j].time, s.events[j - 1].time);
      counts(s.events[j].type) += 1.0;
    }
  }
  for (int k = 0; k < 2; ++k) {
    const double expect = p.mu(k) * p.horizon;
    const double se = std::sqrt(expect / n);
    EXPECT_LT(std::abs(counts(k) / n - expect), 3.0 * se) << k;
  }
}

TEST(Simulation, ZeroBaselineGivesEmptySequences) {
  ExpHawkesParams p = two_type();
  p.mu.setZero();
  Rng rng = derive_rng(1, Stream::kSimulation);
  EXPECT_TRUE(simulate_thinning(p, rng).events.empty());
  EXPECT_THROW(simulate_dataset(p, 2, 1), ConfigError);
}

TEST(Simulation, ReproducibleWithMedianLabels) {
  const auto a = simulate_dataset(default_scenario(), 41, 5);
  const auto b = simulate_dataset(default_scenario(), 41, 5);
  EXPECT_EQ(a, b);
  std::vector<int> c0;
  for (const auto& s : a) {
    int n0 = 0;
    for (const Event& e : s.events) n0 += e.type == 0;
    c0.push_back(n0);
    EXPECT_FALSE(s.events.empty());
  }
  std::vector<int> sorted = c0;
  std::nth_element(sorted.begin(), sorted.begin() + 20, sorted.end());
  const int median = sorted[20];
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].label, c0[i] > median ? 1 : 0);
  EXPECT_EQ(a[7].subject_id, "s7");
}

TEST(LogLikelihood, RecursionMatchesNaiveSum) {
  const ExpHawkesParams p = default_scenario();
  for (const auto& s : simulate_dataset(p, 20, 77)) {
    const double fast = exact_log_likelihood(p, s.events);
    const double slow = exact_log_likelihood_naive(p, s.events);
    EXPECT_NEAR(fast, slow, 1e-9 * std::max(1.0, std::abs(slow)));
  }
}

TEST(LogLikelihood, PoissonClosedForm) {
  const ExpHawkesParams p = two_type(0.0);
  const std::vector<Event> ev{{1.0, 0}, {2.5, 1}, {4.0, 0}};
  const double want = 2.0 * std::log(0.5) + std::log(0.2) - 0.7 * 20.0;
  EXPECT_NEAR(exact_log_likelihood(p, ev), want, 1e-12);
}

TEST(LogLikelihood, SingleEventAgainstNumericIntegral) {
  const ExpHawkesParams p = two_type();
  const std::vector<Event> ev{{4.0, 1}};
  const double want = std::log(0.2) - numeric_compensator(p, ev, 0.0, p.horizon);
  EXPECT_NEAR(exact_log_likelihood(p, ev), want, 1e-6);
}

TEST(Compensator, MatchesNumericIntegralAndRescaling) {
  const ExpHawkesParams p = two_type();
  const std::vector<Event> ev{{0.5, 0}, {1.2, 1}, {1.3, 0}, {3.0, 0}};
  EXPECT_NEAR(exact_compensator(p, ev, 0.7, 2.5), numeric_compensator(p, ev, 0.7, 2.5), 1e-6);
  const std::vector<double> gaps = rescaled_intervals(p, ev);
  ASSERT_EQ(gaps.size(), ev.size());
  double total = 0.0;
  for (double g : gaps) {
    EXPECT_GT(g, 0.0);
    total += g;
  }
  EXPECT_NEAR(total, exact_compensator(p, ev, 0.0, 3.0), 1e-12);
}

TEST(KsTest, KnownStatisticAndPower) {
  const KsResult one = ks_test_exponential({std::log(2.0)});
  EXPECT_NEAR(one.statistic, 0.5, 1e-15);

  std::mt19937_64 rng(3);
  std::exponential_distribution<double> e(1.0);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<double> good(2000), bad(2000);
  for (double& v : good) v = e(rng);
  for (double& v : bad) v = u(rng);
  EXPECT_GT(ks_test_exponential(good).p_value, 0.01);
  EXPECT_LT(ks_test_exponential(bad).p_value, 1e-3);
  EXPECT_THROW(ks_test_exponential({}), DomainError);
}

TEST(PoissonBaseline, MleAndFloor) {
  const std::vector<EventSequence> train{
      {"a", {{1.0, 0}, {1.5, 0}, {2.0, 0}, {3.0, 0}}, 0}};
  const PoissonBaseline b = poisson_mle_baseline(train, 2);
  EXPECT_DOUBLE_EQ(b.total_time, 2.0);
  EXPECT_DOUBLE_EQ(b.rates(0), 2.0);
  EXPECT_DOUBLE_EQ(b.rates(1), kPoissonRateFloor);
  const std::vector<EventSequence> one_event{{"b", {{1.0, 0}}, 0}};
  EXPECT_THROW(poisson_mle_baseline(one_event, 2), DomainError);
}

TEST(PoissonBaseline, MleIsLocallyOptimal) {
  const auto train = simulate_dataset(default_scenario(), 30, 12);
  PoissonBaseline b = poisson_mle_baseline(train, 3);
  const double best = poisson_log_likelihood(b, train);
  for (int k = 0; k < 3; ++k) {
    for (double f : {0.95, 1.05}) {
      PoissonBaseline q = b;
      q.rates(k) *= f;
      EXPECT_LT(poisson_log_likelihood(q, train), best) << k << " " << f;
    }
  }
  // Marks ignored: the ground version uses only the summed rate.
  const double total = b.rates.sum();
  double want = 0.0;
  for (const auto& s : train) {
    const double span = s.events.back().time - s.events.front().time;
    want += static_cast<double>(s.events.size()) * std::log(total) - total * span;
  }
  EXPECT_NEAR(poisson_ground_log_likelihood(b, train), want, 1e-9 * std::abs(want));
}

}  // namespace
}  // namespace seqsynth
