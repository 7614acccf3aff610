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
#include <limits>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "huse/dataset.h"
#include "huse/error.h"

namespace huse {
namespace {

EvaluatedExample Example(double log_p, int tokens, std::vector<double> ratings) {
  EvaluatedExample e;
  e.example_id = "e";
  e.output_text = "x";
  e.log_p_model = log_p;
  e.token_count = tokens;
  e.ratings = std::move(ratings);
  return e;
}

double PopulationVariance(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return var / static_cast<double>(v.size());
}

TEST(FeaturesTest, HuseFeatureExamples) {
  const FeatureVector a = HuseFeatures(Example(-4.0, 8, {4.3}));
  EXPECT_EQ(a.values(), (std::vector<double>{-0.5, 4.3}));
  const FeatureVector b = HuseFeatures(Example(0.0, 1, {0.0}));
  EXPECT_EQ(b.values(), (std::vector<double>{0.0, 0.0}));
  const FeatureVector c = HuseFeatures(Example(-0.9, 9, {4.3}));
  EXPECT_DOUBLE_EQ(c[0], -0.1);
  EXPECT_EQ(c[1], 4.3);
  EXPECT_THROW(HuseFeatures(Example(-1.0, 1, {})), PreconditionError);
}

TEST(FeaturesTest, HumanJudgmentNormalization) {
  const FeatureVector v =
      HuseFeatures(Example(-4.0, 8, {2.0}), LengthNormalization::kHumanJudgment);
  EXPECT_EQ(v.values(), (std::vector<double>{-2.0, 2.0}));
}

TEST(FeaturesTest, HjFeatureExamples) {
  EXPECT_EQ(HjFeatures(Example(0, 1, {5.3})).values(), (std::vector<double>{5.3}));
  EXPECT_EQ(HjFeatures(Example(0, 1, {0, 0})).values(), (std::vector<double>{0.0}));
  EXPECT_EQ(HjFeatures(Example(0, 1, {2, 3, 4})).values(),
            (std::vector<double>{3.0}));
}

TEST(FeaturesTest, HuseAndHjShareDimension) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> ratings(1 + i % 20);
    for (double& r : ratings) r = 5.0 * unit(rng);
    const EvaluatedExample e = Example(-20.0 * unit(rng), 1 + i % 7, ratings);
    EXPECT_EQ(HuseFeatures(e)[1], HjFeatures(e)[0]);
  }
}

TEST(FeaturesTest, OptFeatureExamples) {
  EXPECT_EQ(OptFeatures(0.25, 0.25).values(), (std::vector<double>{0.25, 0.25}));
  EXPECT_EQ(OptFeatures(0.25, 0.40).values(), (std::vector<double>{0.25, 0.40}));
  EXPECT_EQ(OptFeatures(0.0, 0.1).values(), (std::vector<double>{0.0, 0.1}));
  EXPECT_THROW(OptFeatures(-0.1, 0.1), PreconditionError);
  EXPECT_THROW(OptFeatures(0.1, std::nan("")), PreconditionError);
}

TEST(FeaturesTest, FeatureSpecDimensions) {
  EXPECT_EQ(FeatureSpec{FeatureVariant::kHuse}.dim(), 2u);
  EXPECT_EQ(FeatureSpec{FeatureVariant::kHjOnly}.dim(), 1u);
  EXPECT_EQ(FeatureSpec{FeatureVariant::kOpt}.dim(), 2u);
  EXPECT_EQ(ParseFeatureVariant("hj"), FeatureVariant::kHjOnly);
  EXPECT_EQ(FeatureVariantName(FeatureVariant::kOpt), "opt");
  EXPECT_THROW(ParseFeatureVariant("bleu"), InputError);
}

TEST(FeaturesTest, ComputeFeaturesOptNeedsHumanProbability) {
  EvaluatedExample e = Example(std::log(0.25), 1, {3.0});
  EXPECT_THROW(ComputeFeatures(e, {FeatureVariant::kOpt}), PreconditionError);
  e.p_human = 0.5;
  const FeatureVector v = ComputeFeatures(e, {FeatureVariant::kOpt});
  EXPECT_EQ(v[0], 0.5);
  EXPECT_DOUBLE_EQ(v[1], 0.25);
}

TEST(FeaturesTest, FeatureVectorRejectsNonFinite) {
  EXPECT_THROW(FeatureVector({1.0, std::numeric_limits<double>::infinity()}),
               PreconditionError);
}

TEST(FeaturesTest, FitScalingExamples) {
  const auto factor = [](double a, double b) {
    const std::vector<FeatureVector> rows = {FeatureVector({a}),
                                             FeatureVector({b})};
    return FitScaling(rows).factors()[0];
  };
  EXPECT_EQ(factor(1, 3), 1.0);
  EXPECT_EQ(factor(0, 2), 1.0);
  EXPECT_EQ(factor(0, 4), 0.5);
  EXPECT_EQ(factor(7, 7), 1.0);
  const std::vector<FeatureVector> one = {FeatureVector({1.0})};
  EXPECT_THROW(FitScaling(one), PreconditionError);
  const std::vector<FeatureVector> ragged = {FeatureVector({1.0}),
                                             FeatureVector({1.0, 2.0})};
  EXPECT_THROW(FitScaling(ragged), PreconditionError);
}

TEST(FeaturesTest, ScaledColumnsHaveUnitVariance) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial * 3;
    const double spread = std::pow(10.0, trial % 9 - 4);
    std::vector<FeatureVector> rows;
    for (std::size_t i = 0; i < n; ++i) {
      rows.emplace_back(std::vector<double>{
          spread * gauss(rng) + 100.0, gauss(rng) * 3.0, 2.5});
    }
    const ScalingProfile profile = FitScaling(rows);
    std::vector<std::vector<double>> cols(3);
    for (const auto& r : rows) {
      const FeatureVector s = profile.Apply(r);
      for (int d = 0; d < 3; ++d) cols[d].push_back(s[d]);
      const FeatureVector back = profile.Invert(s);
      for (int d = 0; d < 3; ++d) EXPECT_NEAR(back[d], r[d], 1e-9 * std::abs(r[d]) + 1e-12);
    }
    EXPECT_NEAR(PopulationVariance(cols[0]), 1.0, 1e-9);
    EXPECT_NEAR(PopulationVariance(cols[1]), 1.0, 1e-9);
    EXPECT_EQ(profile.factors()[2], 1.0);
  }
}

}  // namespace
}  // namespace huse
