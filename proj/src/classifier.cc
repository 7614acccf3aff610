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

#include "huse/classifier.h"

#include <algorithm>
#include <limits>
#include <queue>
#include <string>
#include <utility>

#include "huse/error.h"
#include "parallel.h"

namespace huse {
namespace {

void CheckK(const KnnConfig& config, std::size_t available) {
  if (config.k < 1) throw PreconditionError("k must be positive");
  if (static_cast<std::size_t>(config.k) > available) {
    throw PreconditionError("k = " + std::to_string(config.k) +
                            " exceeds the " + std::to_string(available) +
                            " available neighbours");
  }
}

void CheckLoo(std::span<const LabeledPoint> points, const KnnConfig& config) {
  if (points.empty()) throw PreconditionError("no points");
  CheckK(config, points.size() - 1);
}

}  // namespace

Prediction Predict(const Vote& vote) {
  const std::size_t twice = 2 * vote.ones;
  if (twice > vote.voters) return Prediction::kReference;
  if (twice < vote.voters) return Prediction::kModel;
  return Prediction::kTie;
}

double FoldError(const Vote& vote, Label truth, VoteTiePolicy policy) {
  Prediction p = Predict(vote);
  if (p == Prediction::kTie) {
    if (policy == VoteTiePolicy::kHalfError) return 0.5;
    p = Prediction::kModel;
  }
  const bool says_reference = p == Prediction::kReference;
  return says_reference == (truth == Label::kReference) ? 0.0 : 1.0;
}

KnnIndex::KnnIndex(std::span<const LabeledPoint> points, simd::Level level)
    : rows_(points.size()), kernels_(&simd::KernelsFor(level)) {
  if (points.empty()) throw PreconditionError("no points");
  dims_ = points.front().features.dim();
  if (dims_ == 0) throw PreconditionError("zero-dimensional features");
  columns_.resize(rows_ * dims_);
  labels_.resize(rows_);
  for (std::size_t j = 0; j < rows_; ++j) {
    const FeatureVector& f = points[j].features;
    if (f.dim() != dims_) {
      throw PreconditionError("dimension mismatch at point " +
                              std::to_string(j));
    }
    for (std::size_t d = 0; d < dims_; ++d) columns_[d * rows_ + j] = f[d];
    labels_[j] = points[j].label == Label::kReference ? 1.0 : 0.0;
  }
}

std::vector<double> KnnIndex::Point(std::size_t i) const {
  std::vector<double> p(dims_);
  for (std::size_t d = 0; d < dims_; ++d) p[d] = columns_[d * rows_ + i];
  return p;
}

Vote KnnIndex::Query(std::span<const double> query,
                     std::optional<std::size_t> exclude,
                     const KnnConfig& config,
                     std::vector<double>& scratch) const {
  if (query.size() != dims_) throw PreconditionError("query dimension mismatch");
  CheckK(config, rows_ - (exclude ? 1 : 0));
  const std::size_t k = static_cast<std::size_t>(config.k);

  scratch.resize(rows_);
  double* dist = scratch.data();
  kernels_->squared_distances(columns_.data(), rows_, dims_, query.data(),
                              dist);
  if (exclude) dist[*exclude] = std::numeric_limits<double>::infinity();

  // k-th smallest distance via a bounded max-heap.
  std::priority_queue<double> heap;
  for (std::size_t j = 0; j < rows_; ++j) {
    if (heap.size() < k) {
      heap.push(dist[j]);
    } else if (dist[j] < heap.top()) {
      heap.pop();
      heap.push(dist[j]);
    }
  }
  const double radius = heap.top();

  if (config.distance_ties == DistanceTiePolicy::kIncludeAll) {
    const simd::RadiusCount rc =
        kernels_->count_within(dist, labels_.data(), rows_, radius, false);
    return Vote{rc.count, rc.ones};
  }
  const simd::RadiusCount inside =
      kernels_->count_within(dist, labels_.data(), rows_, radius, true);
  Vote vote{inside.count, inside.ones};
  for (std::size_t j = 0; j < rows_ && vote.voters < k; ++j) {
    if (dist[j] == radius) {
      ++vote.voters;
      if (labels_[j] != 0.0) ++vote.ones;
    }
  }
  return vote;
}

Vote KnnIndex::Query(std::span<const double> query,
                     std::optional<std::size_t> exclude,
                     const KnnConfig& config) const {
  std::vector<double> scratch;
  return Query(query, exclude, config, scratch);
}

std::vector<FoldResult> LooFolds(std::span<const LabeledPoint> points,
                                 const KnnConfig& config) {
  CheckLoo(points, config);
  const KnnIndex index(points);
  std::vector<FoldResult> folds(points.size());
  internal::ParallelFor(points.size(), [&](std::size_t begin, std::size_t end) {
    std::vector<double> scratch;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& v = points[i].features.values();
      const Vote vote = index.Query(v, i, config, scratch);
      folds[i] = {vote, FoldError(vote, points[i].label, config.vote_ties)};
    }
  });
  return folds;
}

double LooError(std::span<const LabeledPoint> points, const KnnConfig& config) {
  const std::vector<FoldResult> folds = LooFolds(points, config);
  // Fold errors are multiples of 0.5, so the sum is exact in any order.
  double total = 0.0;
  for (const auto& f : folds) total += f.error;
  return total / static_cast<double>(folds.size());
}

double KnnConfidence(std::span<const LabeledPoint> points,
                     const FeatureVector& query,
                     std::optional<std::size_t> exclude,
                     const KnnConfig& config) {
  const KnnIndex index(points);
  return index.Query(query.values(), exclude, config).confidence();
}

double BruteForceLoo(std::span<const LabeledPoint> points,
                     const KnnConfig& config) {
  CheckLoo(points, config);
  const std::size_t n = points.size();
  const std::size_t dim = points.front().features.dim();
  for (const auto& p : points) {
    if (p.features.dim() != dim) throw PreconditionError("dimension mismatch");
  }
  const std::size_t k = static_cast<std::size_t>(config.k);
  double total = 0.0;
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < n; ++i) {
    order.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d2 = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = points[i].features[d] - points[j].features[d];
        d2 += diff * diff;
      }
      order.emplace_back(d2, j);
    }
    std::sort(order.begin(), order.end());
    std::size_t take = k;
    if (config.distance_ties == DistanceTiePolicy::kIncludeAll) {
      while (take < order.size() && order[take].first == order[k - 1].first) {
        ++take;
      }
    }
    Vote vote{take, 0};
    for (std::size_t t = 0; t < take; ++t) {
      if (points[order[t].second].label == Label::kReference) ++vote.ones;
    }
    total += FoldError(vote, points[i].label, config.vote_ties);
  }
  return total / static_cast<double>(n);
}

}  // namespace huse
