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

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "seqsynth/event_data.hpp"

namespace seqsynth {

/// (count, mean time, population std of time) per real event type, laid out
/// as [count_0, mean_0, std_0, count_1, ...]. Absent types give (0, 0, 0).
Eigen::VectorXd featurize(const EventSequence& seq, int num_types);
Eigen::MatrixXd featurize_all(std::span<const EventSequence> seqs, int num_types);

// z-scoring fitted on the real set; features whose std is below 1e-12 are
// dropped rather than divided by a tiny number.
struct FeatureScaler {
  std::vector<Eigen::Index> kept;
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  static FeatureScaler fit(const Eigen::MatrixXd& real);
  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
};

/// Distance from each synthetic subject to its closest real subject.
std::vector<double> dcr(std::span<const EventSequence> synthetic,
                        std::span<const EventSequence> real, int num_types);

/// Mann-Whitney AUC with ties counted as 1/2. Throws UndefinedMetricError
/// unless both classes are present.
double roc_auc(std::span<const int> labels, std::span<const double> scores);

/// Standard deviation of `metric` over n resamples with replacement of the
/// indices 0..size-1. A resample on which the metric throws
/// UndefinedMetricError is redrawn up to 10 times.
double bootstrap_std(const std::function<double(std::span<const std::size_t>)>& metric,
                     std::size_t size, int n, std::uint64_t seed);

/// Fraction of real training records whose nearest neighbour among the
/// other real records and the synthetic ones is real. Exact ties count as
/// synthetic. Throws DomainError for fewer than two real records.
double dataset_attack(std::span<const EventSequence> real_train,
                      std::span<const EventSequence> synthetic, int num_types);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

struct MetricReport {
  double utility_rocauc = 0.0;
  double utility_std = 0.0;
  double ml_inference = 0.0;
  double ml_inference_std = 0.0;
  std::vector<double> dcr;
  double dcr_mean = 0.0;
  double dcr_median = 0.0;
  double dataset_attack = 0.0;
  nlohmann::json metadata = nlohmann::json::object();
};

nlohmann::json to_json(const MetricReport& r);
/// `multiplier,utility,util_std,ml_inf,dcr_mean,attack`
std::string csv_header();
std::string csv_row(double multiplier, const MetricReport& r);

double mean_of(std::span<const double> v);
double median_of(std::vector<double> v);

}  // namespace seqsynth
