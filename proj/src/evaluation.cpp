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

#include "seqsynth/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "seqsynth/errors.hpp"

namespace seqsynth {

nlohmann::json to_json(const EvalConfig& c) {
  return {{"n_bootstrap", c.n_bootstrap},
          {"ml_inference", c.ml_inference},
          {"classifier", to_json(c.grid)}};
}

MetricReport evaluate_synthetic(std::span<const EventSequence> real_train,
                                std::span<const EventSequence> real_test,
                                std::span<const EventSequence> synthetic, int num_types,
                                const EvalConfig& config, std::uint64_t seed) {
  if (synthetic.empty()) throw EvaluationError("synthetic set is empty");
  MetricReport r;
  const ScoreWithStd util =
      utility_score(synthetic, real_test, num_types, config.grid, config.n_bootstrap, seed);
  r.utility_rocauc = util.auc;
  r.utility_std = util.std;
  r.metadata["utility_classifier"] = to_json(util.chosen);

  if (config.ml_inference) {
    const ScoreWithStd ml = ml_inference_score(real_train, synthetic, num_types, config.grid,
                                               config.n_bootstrap, seed ^ 0x9e3779b97f4a7c15ULL);
    r.ml_inference = ml.auc;
    r.ml_inference_std = ml.std;
    r.metadata["ml_inference_classifier"] = to_json(ml.chosen);
  } else {
    r.ml_inference = std::numeric_limits<double>::quiet_NaN();
    r.ml_inference_std = std::numeric_limits<double>::quiet_NaN();
  }

  r.dcr = dcr(synthetic, real_train, num_types);
  r.dcr_mean = mean_of(r.dcr);
  r.dcr_median = median_of(r.dcr);
  r.dataset_attack = dataset_attack(real_train, synthetic, num_types);

  r.metadata["n_real_train"] = real_train.size();
  r.metadata["n_real_test"] = real_test.size();
  r.metadata["n_synthetic"] = synthetic.size();
  r.metadata["num_types"] = num_types;
  r.metadata["seed"] = seed;
  r.metadata["config"] = to_json(config);
  return r;
}

MetricReport average_reports(std::span<const MetricReport> reports) {
  if (reports.empty()) throw ContractError("average_reports: nothing to average");
  MetricReport out;
  const double n = static_cast<double>(reports.size());
  for (const auto& r : reports) {
    out.utility_rocauc += r.utility_rocauc / n;
    out.utility_std += r.utility_std / n;
    out.ml_inference += r.ml_inference / n;
    out.ml_inference_std += r.ml_inference_std / n;
    out.dcr_mean += r.dcr_mean / n;
    out.dcr_median += r.dcr_median / n;
    out.dataset_attack += r.dataset_attack / n;
  }
  out.metadata["repeats"] = reports.size();
  return out;
}

std::vector<SweepRow> run_sweep(Model& model, std::span<const EventSequence> real_train,
                                std::span<const EventSequence> real_test,
                                const SweepOptions& options,
                                const std::function<void(const SweepRow&)>& on_row) {
  if (options.multipliers.size() < 2) throw ConfigError("a sweep needs at least two multipliers");
  if (options.repeats < 1) throw ConfigError("sweep repeats must be positive");
  std::vector<SweepRow> rows;
  for (double m : options.multipliers) {
    SweepRow row;
    row.multiplier = m;
    for (int rep = 0; rep < options.repeats; ++rep) {
      GenerationConfig gen = options.generation;
      gen.var_multiplier = m;
      gen.seed = options.seed + static_cast<std::uint64_t>(rep);
      const SyntheticDataset data = synthesize_dataset(model, real_train, gen, options.threads);
      row.per_repeat.push_back(evaluate_synthetic(real_train, real_test, data.sequences,
                                                  model.num_types(), options.eval, gen.seed));
    }
    row.report = average_reports(row.per_repeat);
    rows.push_back(row);
    if (on_row) on_row(rows.back());
  }
  return rows;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::pair<double, double> padded_range(const std::vector<double>& v) {
  double lo = *std::min_element(v.begin(), v.end());
  double hi = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.08 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace

std::string render_sweep_svg(std::span<const SweepRow> rows) {
  const double W = 640, H = 400, left = 70, right = 70, top = 30, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (rows.empty()) {
    svg << "<text x=\"" << W / 2 << "\" y=\"" << H / 2 << "\" text-anchor=\"middle\">no data</text>\n</svg>\n";
    return svg.str();
  }

  std::vector<double> xs, dcrs, utils;
  for (const auto& r : rows) {
    xs.push_back(r.multiplier);
    dcrs.push_back(r.report.dcr_mean);
    utils.push_back(r.report.utility_rocauc);
  }
  auto [x0, x1] = padded_range(xs);
  auto [d0, d1] = padded_range(dcrs);
  auto [u0, u1] = padded_range(utils);
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y, double lo, double hi) { return top + (1.0 - (y - lo) / (hi - lo)) * ph; };

  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double f = i / 4.0;
    const double y = top + (1.0 - f) * ph;
    svg << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\" fill=\"red\">"
        << fmt(d0 + f * (d1 - d0)) << "</text>\n";
    svg << "<text x=\"" << left + pw + 6 << "\" y=\"" << y + 4 << "\" fill=\"blue\">"
        << fmt(u0 + f * (u1 - u0)) << "</text>\n";
  }
  for (double x : xs) {
    svg << "<text x=\"" << px(x) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
        << fmt(x) << "</text>\n";
  }
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10
      << "\" text-anchor=\"middle\">variance multiplier</text>\n";
  svg << "<text transform=\"translate(16," << top + ph / 2
      << ") rotate(-90)\" text-anchor=\"middle\" fill=\"red\">mean DCR</text>\n";
  svg << "<text transform=\"translate(" << W - 12 << ',' << top + ph / 2
      << ") rotate(90)\" text-anchor=\"middle\" fill=\"blue\">utility ROC AUC</text>\n";

  auto series = [&](const std::vector<double>& ys, double lo, double hi, const char* color) {
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      svg << (i ? " " : "") << fmt(px(xs[i])) << ',' << fmt(py(ys[i], lo, hi));
    }
    svg << "\"/>\n";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      svg << "<circle cx=\"" << fmt(px(xs[i])) << "\" cy=\"" << fmt(py(ys[i], lo, hi))
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
  };
  series(dcrs, d0, d1, "red");
  series(utils, u0, u1, "blue");
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace seqsynth
