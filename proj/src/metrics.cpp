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

#include "seqsynth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "seqsynth/errors.hpp"
#include "seqsynth/rng.hpp"

namespace seqsynth {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Eigen::VectorXd featurize(const EventSequence& seq, int num_types) {
  VectorXd f = VectorXd::Zero(3 * num_types);
  // Accumulate in event order per type; a sorted sum keeps equal-time
  // permutations from changing the rounding.
  std::vector<std::vector<double>> times(static_cast<std::size_t>(num_types));
  for (const Event& e : seq.events) {
    if (e.type < 0) throw ContractError("featurize: negative type");
    if (e.type >= num_types) continue;  // END / PAD
    times[static_cast<std::size_t>(e.type)].push_back(e.time);
  }
  for (int k = 0; k < num_types; ++k) {
    auto& t = times[static_cast<std::size_t>(k)];
    if (t.empty()) continue;
    std::sort(t.begin(), t.end());
    const double n = static_cast<double>(t.size());
    const double mean = std::accumulate(t.begin(), t.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : t) ss += (x - mean) * (x - mean);
    f(3 * k) = n;
    f(3 * k + 1) = mean;
    f(3 * k + 2) = std::sqrt(ss / n);
  }
  return f;
}

MatrixXd featurize_all(std::span<const EventSequence> seqs, int num_types) {
  MatrixXd out(static_cast<Index>(seqs.size()), 3 * num_types);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    out.row(static_cast<Index>(i)) = featurize(seqs[i], num_types).transpose();
  }
  return out;
}

FeatureScaler FeatureScaler::fit(const MatrixXd& real) {
  if (real.rows() == 0) throw DomainError("cannot fit feature scaling on an empty set");
  FeatureScaler s;
  const VectorXd mean = real.colwise().mean().transpose();
  std::vector<double> m, sd;
  for (Index c = 0; c < real.cols(); ++c) {
    const double var = (real.col(c).array() - mean(c)).square().mean();
    const double std = std::sqrt(var);
    if (std < 1e-12) continue;
    s.kept.push_back(c);
    m.push_back(mean(c));
    sd.push_back(std);
  }
  s.mean = Eigen::Map<VectorXd>(m.data(), static_cast<Index>(m.size()));
  s.std = Eigen::Map<VectorXd>(sd.data(), static_cast<Index>(sd.size()));
  return s;
}

MatrixXd FeatureScaler::transform(const MatrixXd& x) const {
  MatrixXd out(x.rows(), static_cast<Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    const auto c = static_cast<Index>(j);
    out.col(c) = (x.col(kept[j]).array() - mean(c)) / std(c);
  }
  return out;
}

std::vector<double> dcr(std::span<const EventSequence> synthetic,
                        std::span<const EventSequence> real, int num_types) {
  if (synthetic.empty() || real.empty()) throw DomainError("DCR needs non-empty sets");
  const MatrixXd fr = featurize_all(real, num_types);
  const FeatureScaler scaler = FeatureScaler::fit(fr);
  const MatrixXd zr = scaler.transform(fr);
  const MatrixXd zs = scaler.transform(featurize_all(synthetic, num_types));
  std::vector<double> out(static_cast<std::size_t>(zs.rows()));
  for (Index i = 0; i < zs.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < zr.rows(); ++j) {
      best = std::min(best, (zs.row(i) - zr.row(j)).squaredNorm());
    }
    out[static_cast<std::size_t>(i)] = std::sqrt(best);
  }
  return out;
}

namespace {

// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double roc_auc(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw ContractError("roc_auc: length mismatch");
  double n_pos = 0.0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw ContractError("roc_auc: labels must be 0/1");
    n_pos += l;
  }
  const double n_neg = static_cast<double>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("ROC AUC needs both classes");
  const std::vector<double> ranks = average_ranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) rank_sum += ranks[i];
  }
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double bootstrap_std(const std::function<double(std::span<const std::size_t>)>& metric,
                     std::size_t size, int n, std::uint64_t seed) {
  if (n < 2) throw DomainError("bootstrap needs at least 2 resamples");
  if (size == 0) throw DomainError("bootstrap of an empty set");
  Rng rng = derive_rng(seed, Stream::kBootstrap);
  std::uniform_int_distribution<std::size_t> pick(0, size - 1);
  std::vector<double> values;
  std::vector<std::size_t> idx(size);
  for (int b = 0; b < n; ++b) {
    for (int attempt = 0;; ++attempt) {
      for (auto& i : idx) i = pick(rng);
      try {
        values.push_back(metric(idx));
        break;
      } catch (const UndefinedMetricError&) {
        if (attempt >= 10) throw;
      }
    }
  }
  const double m = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

double dataset_attack(std::span<const EventSequence> real_train,
                      std::span<const EventSequence> synthetic, int num_types) {
  if (real_train.size() < 2) throw DomainError("dataset attack needs at least 2 real records");
  if (synthetic.empty()) throw DomainError("dataset attack needs synthetic records");
  const MatrixXd fr = featurize_all(real_train, num_types);
  const FeatureScaler scaler = FeatureScaler::fit(fr);
  const MatrixXd zr = scaler.transform(fr);
  const MatrixXd zs = scaler.transform(featurize_all(synthetic, num_types));
  int nearest_real = 0;
  for (Index i = 0; i < zr.rows(); ++i) {
    double best_real = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < zr.rows(); ++j) {
      if (j != i) best_real = std::min(best_real, (zr.row(i) - zr.row(j)).squaredNorm());
    }
    double best_syn = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < zs.rows(); ++j) {
      best_syn = std::min(best_syn, (zr.row(i) - zs.row(j)).squaredNorm());
    }
    if (best_real < best_syn) ++nearest_real;
  }
  return static_cast<double>(nearest_real) / static_cast<double>(zr.rows());
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("spearman: need paired samples");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double mx = mean_of(rx);
  const double my = mean_of(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

nlohmann::json to_json(const MetricReport& r) {
  return {{"utility_rocauc", r.utility_rocauc},
          {"utility_std", r.utility_std},
          {"ml_inference", r.ml_inference},
          {"ml_inference_std", r.ml_inference_std},
          {"dcr", {{"mean", r.dcr_mean}, {"median", r.dcr_median}, {"per_subject", r.dcr}}},
          {"dataset_attack", r.dataset_attack},
          {"metadata", r.metadata}};
}

std::string csv_header() { return "multiplier,utility,util_std,ml_inf,dcr_mean,attack"; }

std::string csv_row(double multiplier, const MetricReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", multiplier,
                r.utility_rocauc, r.utility_std, r.ml_inference, r.dcr_mean, r.dataset_attack);
  return buf;
}

}  // namespace seqsynth
