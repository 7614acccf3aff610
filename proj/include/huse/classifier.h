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

#ifndef HUSE_CLASSIFIER_H_
#define HUSE_CLASSIFIER_H_

// Leave-one-out k-nearest-neighbour error between reference (label 1) and
// model (label 0) points under Euclidean distance.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "huse/features.h"
#include "huse/simd/kernels.h"

namespace huse {

enum class Label : std::uint8_t { kModel = 0, kReference = 1 };

struct LabeledPoint {
  FeatureVector features;  // already scaled
  Label label = Label::kModel;
  std::string source_example_id;
};

// What an exact k/2 vs k/2 vote counts as.
enum class VoteTiePolicy {
  kHalfError,     // 0.5 error, the expectation of a fair coin flip
  kPredictModel,  // predict label 0
};

// Which points join the vote when several sit exactly at the k-th distance.
enum class DistanceTiePolicy {
  kIncludeAll,  // every point at distance <= the k-th distance votes
  kByIndex,     // exactly k voters; ties at the k-th distance by lower index
};

struct KnnConfig {
  int k = 16;
  VoteTiePolicy vote_ties = VoteTiePolicy::kHalfError;
  DistanceTiePolicy distance_ties = DistanceTiePolicy::kIncludeAll;
};

struct Vote {
  std::size_t voters = 0;
  std::size_t ones = 0;

  // Share of voters labelled 1.
  double confidence() const {
    return voters == 0 ? 0.5
                       : static_cast<double>(ones) / static_cast<double>(voters);
  }
};

enum class Prediction { kModel, kReference, kTie };

Prediction Predict(const Vote& vote);
// 0, 0.5 or 1.
double FoldError(const Vote& vote, Label truth, VoteTiePolicy policy);

// Points stored column-major for the distance kernels.
class KnnIndex {
 public:
  // Throws PreconditionError on an empty set or mismatched dimensions.
  explicit KnnIndex(std::span<const LabeledPoint> points,
                    simd::Level level = simd::ActiveLevel());

  std::size_t size() const { return rows_; }
  std::size_t dim() const { return dims_; }

  // Votes of the k nearest points to `query`, never counting `exclude`.
  // `scratch` is resized and reused across calls.
  Vote Query(std::span<const double> query, std::optional<std::size_t> exclude,
             const KnnConfig& config, std::vector<double>& scratch) const;
  Vote Query(std::span<const double> query, std::optional<std::size_t> exclude,
             const KnnConfig& config) const;

  // Coordinates of stored point i.
  std::vector<double> Point(std::size_t i) const;

 private:
  std::size_t rows_ = 0;
  std::size_t dims_ = 0;
  std::vector<double> columns_;
  std::vector<double> labels_;
  const simd::Kernels* kernels_;
};

struct FoldResult {
  Vote vote;
  double error = 0.0;
};

// One fold per point, in input order. Folds may run concurrently; the result
// does not depend on scheduling.
std::vector<FoldResult> LooFolds(std::span<const LabeledPoint> points,
                                 const KnnConfig& config);

// Mean fold error. Requires k < points.size().
double LooError(std::span<const LabeledPoint> points, const KnnConfig& config);

// Share of label-1 points among the k nearest to `query`.
double KnnConfidence(std::span<const LabeledPoint> points,
                     const FeatureVector& query,
                     std::optional<std::size_t> exclude,
                     const KnnConfig& config);

// Same contract as LooError, computed by sorting every pairwise distance.
// Used as the test oracle for LooError.
double BruteForceLoo(std::span<const LabeledPoint> points,
                     const KnnConfig& config);

}  // namespace huse

#endif  // HUSE_CLASSIFIER_H_
