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

#ifndef HUSE_ORACLE_H_
#define HUSE_ORACLE_H_

// Ground truth for validating the estimator: finite (p_human, p_model) pairs
// whose total variation and optimal discriminator error can be computed
// exactly.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "huse/classifier.h"
#include "huse/dataset.h"
#include "json.hpp"

namespace huse {

inline constexpr double kNormalizationTolerance = 1e-12;

struct DiscreteDistribution {
  std::vector<std::string> support;
  std::vector<double> probs;

  // Throws InputError unless probs are finite, non-negative, sum to 1 within
  // kNormalizationTolerance and the support ids are unique.
  void Validate() const;
};

struct PairContext {
  std::string context_id;
  double prior = 1.0;
  // Both on the same support.
  DiscreteDistribution p_human;
  DiscreteDistribution p_model;
};

struct DiscretePair {
  std::vector<PairContext> contexts;

  void Validate() const;
};

// {"contexts": [{"context_id"?, "prior"?, "support", "p_human",
//                "p_model" | "anneal_t"}]}. A missing prior means uniform
// over contexts; "anneal_t" derives p_model = Anneal(p_human, t).
DiscretePair PairFromJson(const nlohmann::json& j);
nlohmann::json PairToJson(const DiscretePair& pair);

// Sum over contexts of prior * (1/2) * sum |p_model - p_human|, evaluated in
// exact rational arithmetic on the given double values and rounded once.
double ExactTv(const DiscretePair& pair);

// Twice the Bayes error of guessing the source with prior 1/2:
// fl(1 - ExactTv(pair)). ExactTv + this is exactly 1 in floating point.
double ExactOptimalErrorRate(const DiscretePair& pair);

// probs_i^(1/t), renormalized; zeros stay zero. t == 1 returns `dist`
// unchanged. Throws PreconditionError for t <= 0.
DiscreteDistribution Anneal(const DiscreteDistribution& dist, double t);

// Applies Anneal(., t) to every p_model in the pair.
DiscretePair AnnealModel(const DiscretePair& pair, double t);

// Simulated rater: rating = clamp(slope * log p_human + intercept + N(0,
// noise^2), 0, 5); outcomes the reference never produces get 0.
struct RaterModel {
  double slope = 0.3;
  double intercept = 4.5;
  double noise = 0.75;
  int n_raters = 20;

  void Validate() const;
};

// log p_model stored for outcomes with zero model probability.
double LogProbFloor();

// For each of n_draws: x ~ prior, y_ref ~ p_human(.|x), y_model ~ p_model(.|x).
// Outputs are support ids with token_count 1 and exact log p_model; p_human
// is recorded on every example. Reproducible for a given seed.
EvalDataset SampleEvalDataset(const DiscretePair& pair, std::size_t n_draws,
                              const RaterModel& raters, std::uint64_t seed);

// The same draws fed straight into the optimal feature map
// [p_human(y|x), p_model(y|x)], unscaled, reference and model interleaved.
std::vector<LabeledPoint> SampleOptPoints(const DiscretePair& pair,
                                          std::size_t n_draws,
                                          std::uint64_t seed);

// Maps (p_human, p_model) of an outcome to a cell; nullopt marks a point the
// quantizer does not cover.
class FeatureQuantizer {
 public:
  using Cell = std::array<double, 2>;
  using Fn = std::function<std::optional<Cell>(double p_human, double p_model)>;

  FeatureQuantizer(std::string name, Fn fn)
      : name_(std::move(name)), fn_(std::move(fn)) {}

  static FeatureQuantizer Identity();
  static FeatureQuantizer Constant();
  static FeatureQuantizer SignOfDifference();
  // Uniform bins on [0, 1] per axis.
  static FeatureQuantizer Grid(int bins_human, int bins_model);

  const std::string& name() const { return name_; }
  std::optional<Cell> operator()(double p_human, double p_model) const {
    return fn_(p_human, p_model);
  }

 private:
  std::string name_;
  Fn fn_;
};

// L(phi) by enumeration: fl(1 - TV between the cell-level pushforwards of
// p_human and p_model), exact up to the final rounding. Outcomes with zero
// mass under both distributions are ignored. Throws PreconditionError if the
// quantizer leaves a realized outcome unmapped.
double ExactFeatureError(const DiscretePair& pair,
                         const FeatureQuantizer& quantizer);

struct BoundCheck {
  double l_star = 0.0;
  double l_phi = 0.0;
  double mutual_info_bits = 0.0;  // I(Z_opt; phi_opt | phi)
  double upper_bound = 0.0;       // l_star + 2 (1 - 2^-I)
  bool holds = false;
};

// Checks l_star <= l_phi <= upper_bound (upper side with 1e-12 slack).
// Z_opt = 1 iff p_human > p_model.
BoundCheck CheckApproximationBound(const DiscretePair& pair,
                                   const FeatureQuantizer& quantizer);

// I(Z_opt; phi_opt | phi) in bits by enumeration of the joint over outcomes.
double ConditionalMutualInformationBits(const DiscretePair& pair,
                                        const FeatureQuantizer& quantizer);

using PlaneMap = std::function<std::array<double, 2>(double, double)>;

// Verifies ExactFeatureError under the mapped features equals
// ExactOptimalErrorRate. Throws PreconditionError if the map sends two
// distinct realized (p_human, p_model) values to the same point.
bool CheckInvertibleInvariance(const DiscretePair& pair, const PlaneMap& map);

// Dirichlet(1) distributions over a support of random size in
// [min_support, max_support], on a 2^-48 grid so they sum to exactly 1.
struct RandomPairOptions {
  int min_support = 2;
  int max_support = 10;
  int n_contexts = 1;
};
DiscreteDistribution RandomDistribution(std::mt19937_64& rng,
                                        const std::vector<std::string>& support);
DiscretePair RandomPair(std::mt19937_64& rng,
                        const RandomPairOptions& options = {});
FeatureQuantizer RandomGridQuantizer(std::mt19937_64& rng, int max_bins = 8);

}  // namespace huse

#endif  // HUSE_ORACLE_H_
