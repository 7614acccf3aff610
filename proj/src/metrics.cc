// Copyright 2026 The HUSE Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "huse/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <utility>

#include "huse/error.h"
#include "parallel.h"

namespace huse {

using nlohmann::json;

namespace {

struct ScaledPoints {
  std::vector<LabeledPoint> points;
  ScalingProfile profile;
};

ScaledPoints Scale(const EvalDataset& dataset, const FeatureSpec& spec) {
  const auto& examples = dataset.examples();
  std::vector<FeatureVector> raw;
  raw.reserve(examples.size());
  for (const auto& e : examples) raw.push_back(ComputeFeatures(e, spec));
  ScalingProfile profile = FitScaling(raw);
  std::vector<LabeledPoint> points;
  points.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    points.push_back({profile.Apply(raw[i]),
                      examples[i].origin == Origin::kReference
                          ? Label::kReference
                          : Label::kModel,
                      examples[i].example_id});
  }
  return {std::move(points), std::move(profile)};
}

std::string_view VoteTieName(VoteTiePolicy p) {
  return p == VoteTiePolicy::kHalfError ? "half_error" : "predict_model";
}

std::string_view DistanceTieName(DistanceTiePolicy p) {
  return p == DistanceTiePolicy::kIncludeAll ? "include_all" : "by_index";
}

std::string_view OutcomeName(Outcome o) {
  switch (o) {
    case Outcome::kCorrect:
      return "correct";
    case Outcome::kIncorrect:
      return "incorrect";
    case Outcome::kTie:
      return "tie";
  }
  return "tie";
}

// Sorted sample of `count` distinct indices from [0, n).
std::vector<std::size_t> SampleIndices(std::size_t n, std::size_t count,
                                       std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<std::string> PanelRaters(const EvalDataset& dataset) {
  std::set<std::string> panel;
  bool first = true;
  for (const auto& e : dataset.examples()) {
    if (e.rater_ids.empty()) {
      throw PreconditionError("panel sampling needs rater_ids on example " +
                              e.example_id);
    }
    std::set<std::string> ids(e.rater_ids.begin(), e.rater_ids.end());
    if (first) {
      panel = std::move(ids);
      first = false;
    } else if (ids != panel) {
      throw PreconditionError(
          "panel sampling needs the same raters on every example; " +
          e.example_id + " differs");
    }
  }
  return {panel.begin(), panel.end()};
}

EvalDataset DrawReplicate(const EvalDataset& dataset,
                          const StabilityOptions& options,
                          const std::vector<std::string>& panel,
                          std::uint64_t replicate) {
  // Replicate streams are keyed on (seed, replicate) so nearby seeds do not
  // share replicates.
  std::seed_seq key{static_cast<std::uint32_t>(options.seed),
                    static_cast<std::uint32_t>(options.seed >> 32),
                    static_cast<std::uint32_t>(replicate),
                    static_cast<std::uint32_t>(replicate >> 32)};
  std::mt19937_64 rng(key);
  const auto& examples = dataset.examples();
  const auto& pairs = dataset.pairs();
  std::vector<std::size_t> rows;
  for (std::size_t p : SampleIndices(pairs.size(), options.n_examples, rng)) {
    rows.push_back(pairs[p].first);
    rows.push_back(pairs[p].second);
  }
  std::sort(rows.begin(), rows.end());

  std::set<std::string> chosen_panel;
  if (options.rater_sampling == RaterSampling::kPanel) {
    for (std::size_t i : SampleIndices(panel.size(), options.n_raters, rng)) {
      chosen_panel.insert(panel[i]);
    }
  }

  std::vector<EvaluatedExample> out;
  out.reserve(rows.size());
  for (std::size_t row : rows) {
    EvaluatedExample e = examples[row];
    std::vector<std::size_t> keep;
    if (options.rater_sampling == RaterSampling::kPanel) {
      for (std::size_t i = 0; i < e.rater_ids.size(); ++i) {
        if (chosen_panel.count(e.rater_ids[i])) keep.push_back(i);
      }
    } else {
      keep = SampleIndices(e.ratings.size(), options.n_raters, rng);
    }
    std::vector<double> ratings;
    std::vector<std::string> ids;
    for (std::size_t i : keep) {
      ratings.push_back(e.ratings[i]);
      if (!e.rater_ids.empty()) ids.push_back(e.rater_ids[i]);
    }
    e.ratings = std::move(ratings);
    e.rater_ids = std::move(ids);
    out.push_back(std::move(e));
  }
  return EvalDataset::FromExamples(std::move(out));
}

}  // namespace

HuseScores DecomposeLooErrors(double loo_error_primary, double loo_error_hj) {
  HuseScores s;
  s.huse = 2.0 * loo_error_primary;
  s.huse_q = 2.0 * loo_error_hj;
  s.huse_d = 1.0 + s.huse - s.huse_q;
  // Some score outside [0, 1]; huse_d > 1 exactly when huse > huse_q.
  s.degenerate = s.huse > 1.0 || s.huse_q > 1.0 || s.huse > s.huse_q;
  return s;
}

std::vector<LabeledPoint> BuildPoints(const EvalDataset& dataset,
                                      const FeatureSpec& spec) {
  return Scale(dataset, spec).points;
}

HuseReport ComputeHuse(const EvalDataset& dataset, const KnnConfig& config,
                       const FeatureSpec& features) {
  const ScaledPoints primary = Scale(dataset, features);
  const ScaledPoints hj =
      Scale(dataset, FeatureSpec{FeatureVariant::kHjOnly, features.normalization});
  const std::vector<FoldResult> primary_folds = LooFolds(primary.points, config);
  const std::vector<FoldResult> hj_folds = LooFolds(hj.points, config);

  HuseReport report;
  report.n_contexts = dataset.n_contexts();
  report.knn = config;
  report.features = features;
  double primary_total = 0.0;
  double hj_total = 0.0;
  const auto& examples = dataset.examples();
  for (std::size_t i = 0; i < examples.size(); ++i) {
    primary_total += primary_folds[i].error;
    hj_total += hj_folds[i].error;
    const double err = primary_folds[i].error;
    report.per_example.push_back(
        {examples[i].example_id, examples[i].origin,
         primary.points[i].features.values(),
         primary_folds[i].vote.confidence(),
         err == 0.0 ? Outcome::kCorrect
                    : (err == 1.0 ? Outcome::kIncorrect : Outcome::kTie)});
  }
  const double n = static_cast<double>(examples.size());
  report.loo_error_primary = primary_total / n;
  report.loo_error_hj = hj_total / n;
  report.scores =
      DecomposeLooErrors(report.loo_error_primary, report.loo_error_hj);
  return report;
}

json ReportToJson(const HuseReport& report) {
  json j;
  j["huse"] = report.scores.huse;
  j["huse_q"] = report.scores.huse_q;
  j["huse_d"] = report.scores.huse_d;
  j["degenerate"] = report.scores.degenerate;
  j["n_contexts"] = report.n_contexts;
  j["n_points"] = report.per_example.size();
  j["k"] = report.knn.k;
  j["features"] = FeatureVariantName(report.features.variant);
  j["vote_ties"] = VoteTieName(report.knn.vote_ties);
  j["distance_ties"] = DistanceTieName(report.knn.distance_ties);
  j["loo_error"] = {{"primary", report.loo_error_primary},
                    {"hj", report.loo_error_hj}};
  json rows = json::array();
  for (const auto& d : report.per_example) {
    rows.push_back({{"example_id", d.example_id},
                    {"origin", OriginName(d.origin)},
                    {"scaled_features", d.scaled_features},
                    {"confidence", d.confidence},
                    {"classification", OutcomeName(d.outcome)}});
  }
  j["per_example"] = std::move(rows);
  return j;
}

double Percentile(std::vector<double> values, double q) {
  if (values.empty()) throw PreconditionError("percentile of no values");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

StabilityReport Stability(const EvalDataset& dataset,
                          const StabilityOptions& options) {
  if (options.n_bootstrap < 1) {
    throw PreconditionError("n_bootstrap must be at least 1");
  }
  if (options.n_examples < 1 || options.n_examples > dataset.n_contexts()) {
    throw PreconditionError("n_examples = " +
                            std::to_string(options.n_examples) +
                            " but the dataset has " +
                            std::to_string(dataset.n_contexts()) + " contexts");
  }
  std::vector<std::string> panel;
  if (options.rater_sampling == RaterSampling::kPanel) {
    panel = PanelRaters(dataset);
    if (options.n_raters < 1 || options.n_raters > panel.size()) {
      throw PreconditionError("n_raters = " + std::to_string(options.n_raters) +
                              " but the panel has " +
                              std::to_string(panel.size()) + " raters");
    }
  } else if (options.n_raters < 1 || options.n_raters > dataset.min_ratings()) {
    throw PreconditionError("n_raters = " + std::to_string(options.n_raters) +
                            " but some example has only " +
                            std::to_string(dataset.min_ratings()) + " ratings");
  }
  if (options.knn.k < 1 ||
      static_cast<std::size_t>(options.knn.k) >= 2 * options.n_examples) {
    throw PreconditionError("k must be smaller than 2 * n_examples");
  }

  StabilityReport report;
  report.n_examples_used = options.n_examples;
  report.n_raters_used = options.n_raters;
  report.n_bootstrap = options.n_bootstrap;
  report.seed = options.seed;
  report.replicate_huse.resize(options.n_bootstrap);
  internal::ParallelFor(
      options.n_bootstrap,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
          const EvalDataset sample =
              DrawReplicate(dataset, options, panel, r);
          report.replicate_huse[r] =
              ComputeHuse(sample, options.knn).scores.huse;
        }
      },
      1);
  double sum = 0.0;
  for (double v : report.replicate_huse) sum += v;
  report.mean = sum / static_cast<double>(options.n_bootstrap);
  report.p05 = Percentile(report.replicate_huse, 0.05);
  report.p95 = Percentile(report.replicate_huse, 0.95);
  return report;
}

json StabilityToJson(const StabilityReport& report) {
  return {{"n_examples_used", report.n_examples_used},
          {"n_raters_used", report.n_raters_used},
          {"n_bootstrap", report.n_bootstrap},
          {"seed", report.seed},
          {"mean", report.mean},
          {"p05", report.p05},
          {"p95", report.p95},
          {"replicate_huse", report.replicate_huse}};
}

Surface ExportSurface(const EvalDataset& dataset, const KnnConfig& config,
                      int grid_resolution, const FeatureSpec& features) {
  if (grid_resolution < 2) {
    throw PreconditionError("grid resolution must be at least 2");
  }
  if (features.dim() != 2) {
    throw PreconditionError("surface export needs two-dimensional features");
  }
  const ScaledPoints scaled = Scale(dataset, features);
  const auto& points = scaled.points;
  const KnnIndex index(points);

  double lo[2] = {points.front().features[0], points.front().features[1]};
  double hi[2] = {lo[0], lo[1]};
  for (const auto& p : points) {
    for (int d = 0; d < 2; ++d) {
      lo[d] = std::min(lo[d], p.features[d]);
      hi[d] = std::max(hi[d], p.features[d]);
    }
  }
  for (int d = 0; d < 2; ++d) {
    const double pad = hi[d] > lo[d] ? 0.05 * (hi[d] - lo[d]) : 0.5;
    lo[d] -= pad;
    hi[d] += pad;
  }

  Surface surface;
  surface.grid_resolution = grid_resolution;
  std::vector<double> scratch;
  const double steps = static_cast<double>(grid_resolution - 1);
  for (int row = 0; row < grid_resolution; ++row) {
    const double f2 = lo[1] + (hi[1] - lo[1]) * row / steps;
    for (int col = 0; col < grid_resolution; ++col) {
      const double f1 = lo[0] + (hi[0] - lo[0]) * col / steps;
      const std::vector<double> q{f1, f2};
      const double conf = index.Query(q, std::nullopt, config, scratch)
                              .confidence();
      const FeatureVector raw = scaled.profile.Invert(FeatureVector(q));
      surface.grid.push_back({f1, f2, conf, raw[0], raw[1]});
    }
  }
  const auto& examples = dataset.examples();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& f = points[i].features;
    const double conf =
        index.Query(f.values(), i, config, scratch).confidence();
    const FeatureVector raw = scaled.profile.Invert(f);
    surface.points.push_back({examples[i].example_id, examples[i].origin, f[0],
                              f[1], conf, raw[0], raw[1]});
  }
  return surface;
}

void WriteSurfaceTsv(std::ostream& out, const Surface& surface) {
  const auto old_precision = out.precision(17);
  out << "kind\tfeature1\tfeature2\tconfidence\traw_feature1\traw_feature2\n";
  for (const auto& c : surface.grid) {
    out << "grid\t" << c.feature1 << '\t' << c.feature2 << '\t'
        << c.confidence << '\t' << c.raw_feature1 << '\t' << c.raw_feature2
        << '\n';
  }
  for (const auto& p : surface.points) {
    out << OriginName(p.origin) << '\t' << p.feature1 << '\t' << p.feature2
        << '\t' << p.confidence << '\t' << p.raw_feature1 << '\t'
        << p.raw_feature2 << '\n';
  }
  out.precision(old_precision);
}

}  // namespace huse
