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

#ifndef HUSE_METRICS_H_
#define HUSE_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "huse/classifier.h"
#include "huse/dataset.h"
#include "huse/features.h"
#include "json.hpp"

namespace huse {

// HUSE = 2 * LOO error under the HUSE features, HUSE-Q = 2 * LOO error under
// HJ alone, HUSE-D = 1 + HUSE - HUSE-Q. Values are not clipped; `degenerate`
// is set when a score leaves [0, 1]: HUSE > 1, HUSE-Q > 1 or HUSE > HUSE-Q.
struct HuseScores {
  double huse = 0.0;
  double huse_q = 0.0;
  double huse_d = 0.0;
  bool degenerate = false;
};

HuseScores DecomposeLooErrors(double loo_error_primary, double loo_error_hj);

enum class Outcome { kCorrect, kIncorrect, kTie };

struct ExampleDiagnostic {
  std::string example_id;
  Origin origin = Origin::kReference;
  std::vector<double> scaled_features;
  double confidence = 0.0;  // LOO share of reference-labelled neighbours
  Outcome outcome = Outcome::kCorrect;
};

struct HuseReport {
  HuseScores scores;
  double loo_error_primary = 0.0;
  double loo_error_hj = 0.0;
  std::size_t n_contexts = 0;
  KnnConfig knn;
  FeatureSpec features;
  std::vector<ExampleDiagnostic> per_example;
};

// Labeled points for one feature map, scaled to unit variance, in dataset
// order (reference = 1, model = 0).
std::vector<LabeledPoint> BuildPoints(const EvalDataset& dataset,
                                      const FeatureSpec& spec);

// The primary score uses `features` (HUSE features by default); HUSE-Q always
// uses HJ alone.
HuseReport ComputeHuse(const EvalDataset& dataset, const KnnConfig& config,
                       const FeatureSpec& features = {});

nlohmann::json ReportToJson(const HuseReport& report);

// How raters are subsampled in a stability replicate.
enum class RaterSampling {
  kPerExample,  // each example's rating list independently
  kPanel,       // one global draw of rater ids; needs aligned rater_ids
};

struct StabilityOptions {
  std::size_t n_examples = 0;  // contexts per replicate
  std::size_t n_raters = 0;    // ratings kept per example
  std::size_t n_bootstrap = 1;
  std::uint64_t seed = 0;
  RaterSampling rater_sampling = RaterSampling::kPerExample;
  KnnConfig knn;
};

struct StabilityReport {
  std::size_t n_examples_used = 0;
  std::size_t n_raters_used = 0;
  std::size_t n_bootstrap = 0;
  std::uint64_t seed = 0;
  std::vector<double> replicate_huse;
  double mean = 0.0;
  double p05 = 0.0;
  double p95 = 0.0;

  double band_width() const { return p95 - p05; }
};

// Replicate r draws contexts and raters without replacement with seed + r and
// recomputes HUSE. Subsamples keep the original data order, so a full-size
// draw reproduces the full-data score exactly.
StabilityReport Stability(const EvalDataset& dataset,
                          const StabilityOptions& options);

nlohmann::json StabilityToJson(const StabilityReport& report);

// Linear-interpolation percentile (q in [0, 1]) of unsorted values.
double Percentile(std::vector<double> values, double q);

struct SurfaceGridCell {
  double feature1 = 0.0;  // scaled
  double feature2 = 0.0;
  double confidence = 0.0;
  double raw_feature1 = 0.0;  // inverse-scaled
  double raw_feature2 = 0.0;
};

struct SurfacePoint {
  std::string example_id;
  Origin origin = Origin::kReference;
  double feature1 = 0.0;
  double feature2 = 0.0;
  double confidence = 0.0;  // leave-one-out
  double raw_feature1 = 0.0;
  double raw_feature2 = 0.0;
};

struct Surface {
  int grid_resolution = 0;
  std::vector<SurfaceGridCell> grid;  // row-major, feature2 outer
  std::vector<SurfacePoint> points;
};

// k-NN confidence over a grid_resolution^2 lattice spanning the scaled HUSE
// feature bounding box padded by 5% per side, plus every data point.
Surface ExportSurface(const EvalDataset& dataset, const KnnConfig& config,
                      int grid_resolution,
                      const FeatureSpec& features = {});

// Header: kind feature1 feature2 confidence raw_feature1 raw_feature2, where
// kind is grid, reference or model.
void WriteSurfaceTsv(std::ostream& out, const Surface& surface);

}  // namespace huse

#endif  // HUSE_METRICS_H_
