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

#ifndef HUSE_FEATURES_H_
#define HUSE_FEATURES_H_

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "huse/dataset.h"

namespace huse {

// Which discriminator feature map to use.
//   kHuse:   [log p_model / length, HJ]
//   kHjOnly: [HJ]
//   kOpt:    [p_human, p_model]   (synthetic data only)
enum class FeatureVariant { kHuse, kHjOnly, kOpt };

std::string_view FeatureVariantName(FeatureVariant variant);
// "huse", "hj" or "opt".
FeatureVariant ParseFeatureVariant(std::string_view name);

// Denominator of the first HUSE feature. kHumanJudgment divides by the mean
// rating instead of the token count; it exists for sensitivity studies.
enum class LengthNormalization { kTokenCount, kHumanJudgment };

struct FeatureSpec {
  FeatureVariant variant = FeatureVariant::kHuse;
  LengthNormalization normalization = LengthNormalization::kTokenCount;

  std::size_t dim() const { return variant == FeatureVariant::kHjOnly ? 1 : 2; }
};

// A point in feature space. All components are finite.
class FeatureVector {
 public:
  FeatureVector() = default;
  // Throws PreconditionError if any value is not finite.
  explicit FeatureVector(std::vector<double> values);

  std::size_t dim() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::vector<double> values_;
};

FeatureVector HuseFeatures(
    const EvaluatedExample& example,
    LengthNormalization normalization = LengthNormalization::kTokenCount);
FeatureVector HjFeatures(const EvaluatedExample& example);
// Throws PreconditionError on negative or non-finite input.
FeatureVector OptFeatures(double p_human, double p_model);

// Dispatches on spec.variant. kOpt reads example.p_human and
// exp(example.log_p_model); it throws PreconditionError without p_human.
FeatureVector ComputeFeatures(const EvaluatedExample& example,
                              const FeatureSpec& spec);

// Per-dimension multiplicative factors giving unit population variance.
class ScalingProfile {
 public:
  explicit ScalingProfile(std::vector<double> factors);

  const std::vector<double>& factors() const { return factors_; }
  std::size_t dim() const { return factors_.size(); }

  FeatureVector Apply(const FeatureVector& v) const;
  // Maps a scaled point back to raw feature coordinates.
  FeatureVector Invert(const FeatureVector& v) const;

 private:
  std::vector<double> factors_;
};

// factor_d = 1 / sqrt(population variance of column d); constant columns get
// factor 1. Throws PreconditionError with fewer than 2 rows or ragged rows.
ScalingProfile FitScaling(std::span<const FeatureVector> rows);

}  // namespace huse

#endif  // HUSE_FEATURES_H_
