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

#include "huse/features.h"

#include <cmath>
#include <string>

#include "huse/error.h"

namespace huse {

std::string_view FeatureVariantName(FeatureVariant variant) {
  switch (variant) {
    case FeatureVariant::kHuse:
      return "huse";
    case FeatureVariant::kHjOnly:
      return "hj";
    case FeatureVariant::kOpt:
      return "opt";
  }
  return "huse";
}

FeatureVariant ParseFeatureVariant(std::string_view name) {
  if (name == "huse") return FeatureVariant::kHuse;
  if (name == "hj") return FeatureVariant::kHjOnly;
  if (name == "opt") return FeatureVariant::kOpt;
  throw InputError("unknown feature variant \"" + std::string(name) + "\"");
}

FeatureVector::FeatureVector(std::vector<double> values)
    : values_(std::move(values)) {
  for (double v : values_) {
    if (!std::isfinite(v)) {
      throw PreconditionError("feature value is not finite");
    }
  }
}

FeatureVector HuseFeatures(const EvaluatedExample& example,
                           LengthNormalization normalization) {
  const double hj = Hj(example);
  double denom = static_cast<double>(example.token_count);
  if (normalization == LengthNormalization::kHumanJudgment) {
    if (hj == 0.0) {
      throw PreconditionError("example " + example.example_id +
                              ": HJ is 0, cannot normalize by it");
    }
    denom = hj;
  }
  return FeatureVector({example.log_p_model / denom, hj});
}

FeatureVector HjFeatures(const EvaluatedExample& example) {
  return FeatureVector({Hj(example)});
}

FeatureVector OptFeatures(double p_human, double p_model) {
  if (!(p_human >= 0.0) || !(p_model >= 0.0)) {
    throw PreconditionError("probabilities must be non-negative");
  }
  return FeatureVector({p_human, p_model});
}

FeatureVector ComputeFeatures(const EvaluatedExample& example,
                              const FeatureSpec& spec) {
  switch (spec.variant) {
    case FeatureVariant::kHuse:
      return HuseFeatures(example, spec.normalization);
    case FeatureVariant::kHjOnly:
      return HjFeatures(example);
    case FeatureVariant::kOpt:
      if (!example.p_human) {
        throw PreconditionError("example " + example.example_id +
                                " has no p_human; opt features need it");
      }
      return OptFeatures(*example.p_human, std::exp(example.log_p_model));
  }
  throw PreconditionError("unknown feature variant");
}

ScalingProfile::ScalingProfile(std::vector<double> factors)
    : factors_(std::move(factors)) {
  for (double f : factors_) {
    if (!(f > 0.0) || !std::isfinite(f)) {
      throw PreconditionError("scale factors must be positive and finite");
    }
  }
}

FeatureVector ScalingProfile::Apply(const FeatureVector& v) const {
  if (v.dim() != dim()) throw PreconditionError("dimension mismatch");
  std::vector<double> out(dim());
  for (std::size_t d = 0; d < dim(); ++d) out[d] = v[d] * factors_[d];
  return FeatureVector(std::move(out));
}

FeatureVector ScalingProfile::Invert(const FeatureVector& v) const {
  if (v.dim() != dim()) throw PreconditionError("dimension mismatch");
  std::vector<double> out(dim());
  for (std::size_t d = 0; d < dim(); ++d) out[d] = v[d] / factors_[d];
  return FeatureVector(std::move(out));
}

ScalingProfile FitScaling(std::span<const FeatureVector> rows) {
  if (rows.size() < 2) {
    throw PreconditionError("scaling needs at least 2 rows");
  }
  const std::size_t dim = rows.front().dim();
  const double n = static_cast<double>(rows.size());
  std::vector<double> factors(dim, 1.0);
  for (std::size_t d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (const auto& r : rows) {
      if (r.dim() != dim) throw PreconditionError("ragged feature rows");
      mean += r[d];
    }
    mean /= n;
    double ss = 0.0;
    for (const auto& r : rows) ss += (r[d] - mean) * (r[d] - mean);
    const double var = ss / n;
    if (var > 0.0) factors[d] = 1.0 / std::sqrt(var);
  }
  return ScalingProfile(std::move(factors));
}

}  // namespace huse
