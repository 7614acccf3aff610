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

#include "huse/oracle.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <utility>

#include <boost/multiprecision/cpp_int.hpp>

#include "huse/error.h"

namespace huse {

using nlohmann::json;
using Rational = boost::multiprecision::cpp_rational;

namespace {

// Every finite double is a dyadic rational, so this is exact.
Rational ToRational(double v) { return Rational(v); }

// Correctly rounded conversion (ties resolved to the even neighbour).
double RoundToDouble(const Rational& r) {
  const double approx = r.convert_to<double>();
  double best = approx;
  Rational best_err = abs(ToRational(approx) - r);
  for (double c : {std::nextafter(approx, -std::numeric_limits<double>::infinity()),
                   std::nextafter(approx, std::numeric_limits<double>::infinity())}) {
    const Rational err = abs(ToRational(c) - r);
    if (err < best_err) {
      best = c;
      best_err = err;
    } else if (err == best_err) {
      int e1 = 0;
      int e2 = 0;
      const double m1 = std::frexp(best, &e1);
      const double m2 = std::frexp(c, &e2);
      const auto bits = [](double m) {
        return static_cast<long long>(std::ldexp(m, 53)) & 1;
      };
      if (bits(m1) != 0 && bits(m2) == 0) best = c;
    }
  }
  return best;
}

void CheckFiniteNonNegative(double v, const std::string& what) {
  if (!std::isfinite(v) || v < 0.0) {
    throw InputError(what + " must be finite and non-negative");
  }
}

// Realized outcomes (positive weight under the mixture) of a pair.
template <typename Fn>
void ForEachOutcome(const DiscretePair& pair, Fn fn) {
  for (const auto& ctx : pair.contexts) {
    for (std::size_t y = 0; y < ctx.p_human.probs.size(); ++y) {
      const double ph = ctx.p_human.probs[y];
      const double pm = ctx.p_model.probs[y];
      if (ctx.prior == 0.0 || (ph == 0.0 && pm == 0.0)) continue;
      fn(ctx, ph, pm);
    }
  }
}

std::size_t SampleIndex(const std::vector<double>& cumulative, double u) {
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it != cumulative.end()) {
    return static_cast<std::size_t>(it - cumulative.begin());
  }
  // u beyond the rounded total: last outcome with positive probability.
  std::size_t i = cumulative.size() - 1;
  while (i > 0 && cumulative[i] == cumulative[i - 1]) --i;
  return i;
}

std::vector<double> Cumulative(const std::vector<double>& probs) {
  std::vector<double> c(probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) c[i] = acc += probs[i];
  return c;
}

struct Draw {
  std::size_t context;
  std::size_t reference_outcome;
  std::size_t model_outcome;
};

std::vector<Draw> DrawOutcomes(const DiscretePair& pair, std::size_t n_draws,
                               std::uint64_t seed) {
  pair.Validate();
  std::vector<double> priors;
  std::vector<std::vector<double>> cum_h;
  std::vector<std::vector<double>> cum_m;
  for (const auto& ctx : pair.contexts) {
    priors.push_back(ctx.prior);
    cum_h.push_back(Cumulative(ctx.p_human.probs));
    cum_m.push_back(Cumulative(ctx.p_model.probs));
  }
  const std::vector<double> cum_prior = Cumulative(priors);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Draw> draws(n_draws);
  for (auto& d : draws) {
    d.context = SampleIndex(cum_prior, unit(rng));
    d.reference_outcome = SampleIndex(cum_h[d.context], unit(rng));
    d.model_outcome = SampleIndex(cum_m[d.context], unit(rng));
  }
  return draws;
}

}  // namespace

void DiscreteDistribution::Validate() const {
  if (support.empty()) throw InputError("distribution has empty support");
  if (support.size() != probs.size()) {
    throw InputError("support and probabilities differ in length");
  }
  std::set<std::string> ids;
  for (const auto& id : support) {
    if (id.empty()) throw InputError("support ids must be non-empty");
    if (!ids.insert(id).second) throw InputError("duplicate support id " + id);
  }
  double sum = 0.0;
  for (double p : probs) {
    CheckFiniteNonNegative(p, "probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kNormalizationTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "probabilities sum to " << sum << ", not 1";
    throw InputError(msg.str());
  }
}

void DiscretePair::Validate() const {
  if (contexts.empty()) throw InputError("pair has no contexts");
  double prior_sum = 0.0;
  for (const auto& ctx : contexts) {
    CheckFiniteNonNegative(ctx.prior, "context prior");
    prior_sum += ctx.prior;
    ctx.p_human.Validate();
    ctx.p_model.Validate();
    if (ctx.p_human.support != ctx.p_model.support) {
      throw InputError("context " + ctx.context_id +
                       ": p_human and p_model supports differ");
    }
  }
  if (std::abs(prior_sum - 1.0) > kNormalizationTolerance) {
    throw InputError("context priors do not sum to 1");
  }
}

DiscretePair PairFromJson(const json& j) {
  try {
    if (!j.is_object() || !j.contains("contexts") ||
        !j["contexts"].is_array() || j["contexts"].empty()) {
      throw InputError("pair needs a non-empty \"contexts\" array");
    }
    DiscretePair pair;
    const auto& contexts = j["contexts"];
    bool any_prior = false;
    for (const auto& c : contexts) any_prior |= c.contains("prior");
    for (std::size_t i = 0; i < contexts.size(); ++i) {
      const json& c = contexts[i];
      PairContext ctx;
      ctx.context_id = c.value("context_id", "x" + std::to_string(i));
      if (any_prior) {
        if (!c.contains("prior")) throw InputError("every context needs a prior");
        ctx.prior = c.at("prior").get<double>();
      } else {
        ctx.prior = 1.0 / static_cast<double>(contexts.size());
      }
      const auto support = c.at("support").get<std::vector<std::string>>();
      ctx.p_human = {support, c.at("p_human").get<std::vector<double>>()};
      if (c.contains("p_model")) {
        ctx.p_model = {support, c.at("p_model").get<std::vector<double>>()};
      } else if (c.contains("anneal_t")) {
        ctx.p_human.Validate();
        ctx.p_model = Anneal(ctx.p_human, c.at("anneal_t").get<double>());
      } else {
        throw InputError("context needs \"p_model\" or \"anneal_t\"");
      }
      pair.contexts.push_back(std::move(ctx));
    }
    pair.Validate();
    return pair;
  } catch (const json::exception& e) {
    throw InputError(std::string("bad pair specification: ") + e.what());
  } catch (const PreconditionError& e) {
    throw InputError(std::string("bad pair specification: ") + e.what());
  }
}

json PairToJson(const DiscretePair& pair) {
  json contexts = json::array();
  for (const auto& ctx : pair.contexts) {
    contexts.push_back({{"context_id", ctx.context_id},
                        {"prior", ctx.prior},
                        {"support", ctx.p_human.support},
                        {"p_human", ctx.p_human.probs},
                        {"p_model", ctx.p_model.probs}});
  }
  return {{"contexts", contexts}};
}

double ExactTv(const DiscretePair& pair) {
  pair.Validate();
  Rational total = 0;
  for (const auto& ctx : pair.contexts) {
    Rational l1 = 0;
    for (std::size_t y = 0; y < ctx.p_human.probs.size(); ++y) {
      l1 += abs(ToRational(ctx.p_model.probs[y]) -
                ToRational(ctx.p_human.probs[y]));
    }
    total += ToRational(ctx.prior) * l1;
  }
  return RoundToDouble(total / 2);
}

double ExactOptimalErrorRate(const DiscretePair& pair) {
  return 1.0 - ExactTv(pair);
}

DiscreteDistribution Anneal(const DiscreteDistribution& dist, double t) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw PreconditionError("temperature must be positive and finite");
  }
  if (t == 1.0) return dist;
  double max_log = -std::numeric_limits<double>::infinity();
  for (double p : dist.probs) {
    if (p > 0.0) max_log = std::max(max_log, std::log(p) / t);
  }
  DiscreteDistribution out{dist.support, std::vector<double>(dist.probs.size())};
  double sum = 0.0;
  for (std::size_t i = 0; i < dist.probs.size(); ++i) {
    if (dist.probs[i] > 0.0) {
      out.probs[i] = std::exp(std::log(dist.probs[i]) / t - max_log);
      sum += out.probs[i];
    }
  }
  for (double& p : out.probs) p /= sum;
  return out;
}

DiscretePair AnnealModel(const DiscretePair& pair, double t) {
  DiscretePair out = pair;
  for (auto& ctx : out.contexts) ctx.p_model = Anneal(ctx.p_model, t);
  return out;
}

void RaterModel::Validate() const {
  if (n_raters < 1) throw PreconditionError("need at least one rater");
  if (!std::isfinite(slope) || !std::isfinite(intercept)) {
    throw PreconditionError("rater slope and intercept must be finite");
  }
  if (!(noise >= 0.0) || !std::isfinite(noise)) {
    throw PreconditionError("rater noise must be finite and non-negative");
  }
}

double LogProbFloor() {
  return std::log(std::numeric_limits<double>::min());
}

EvalDataset SampleEvalDataset(const DiscretePair& pair, std::size_t n_draws,
                              const RaterModel& raters, std::uint64_t seed) {
  raters.Validate();
  if (n_draws < 1) throw PreconditionError("need at least one draw");
  const std::vector<Draw> draws = DrawOutcomes(pair, n_draws, seed);
  std::seed_seq rating_seed{seed, std::uint64_t{0x5261746572ull}};
  std::mt19937_64 rng(rating_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const auto make = [&](std::size_t i, const PairContext& ctx, std::size_t y,
                        Origin origin) {
    EvaluatedExample e;
    e.context_id = "d" + std::to_string(i);
    e.example_id = e.context_id + "-" + std::string(OriginName(origin));
    e.context = ctx.context_id;
    e.output_text = ctx.p_human.support[y];
    e.origin = origin;
    const double pm = ctx.p_model.probs[y];
    const double ph = ctx.p_human.probs[y];
    e.log_p_model = pm > 0.0 ? std::log(pm) : LogProbFloor();
    e.token_count = 1;
    e.p_human = ph;
    e.ratings.reserve(raters.n_raters);
    for (int r = 0; r < raters.n_raters; ++r) {
      double score = 0.0;
      if (ph > 0.0) {
        score = raters.slope * std::log(ph) + raters.intercept;
        if (raters.noise > 0.0) score += raters.noise * gauss(rng);
        score = std::clamp(score, kMinScore, kMaxScore);
      }
      e.ratings.push_back(score);
    }
    return e;
  };

  std::vector<EvaluatedExample> examples;
  examples.reserve(2 * n_draws);
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const PairContext& ctx = pair.contexts[draws[i].context];
    examples.push_back(make(i, ctx, draws[i].reference_outcome,
                            Origin::kReference));
    examples.push_back(make(i, ctx, draws[i].model_outcome, Origin::kModel));
  }
  return EvalDataset::FromExamples(std::move(examples));
}

std::vector<LabeledPoint> SampleOptPoints(const DiscretePair& pair,
                                          std::size_t n_draws,
                                          std::uint64_t seed) {
  std::vector<LabeledPoint> points;
  points.reserve(2 * n_draws);
  const std::vector<Draw> draws = DrawOutcomes(pair, n_draws, seed);
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const PairContext& ctx = pair.contexts[draws[i].context];
    const std::size_t yr = draws[i].reference_outcome;
    const std::size_t ym = draws[i].model_outcome;
    points.push_back({OptFeatures(ctx.p_human.probs[yr], ctx.p_model.probs[yr]),
                      Label::kReference, "d" + std::to_string(i) + "-reference"});
    points.push_back({OptFeatures(ctx.p_human.probs[ym], ctx.p_model.probs[ym]),
                      Label::kModel, "d" + std::to_string(i) + "-model"});
  }
  return points;
}

FeatureQuantizer FeatureQuantizer::Identity() {
  return {"identity", [](double ph, double pm) {
            return std::optional<Cell>(Cell{ph, pm});
          }};
}

FeatureQuantizer FeatureQuantizer::Constant() {
  return {"constant", [](double, double) {
            return std::optional<Cell>(Cell{0.0, 0.0});
          }};
}

FeatureQuantizer FeatureQuantizer::SignOfDifference() {
  return {"sign", [](double ph, double pm) {
            const double s = ph > pm ? 1.0 : (ph < pm ? -1.0 : 0.0);
            return std::optional<Cell>(Cell{s, 0.0});
          }};
}

FeatureQuantizer FeatureQuantizer::Grid(int bins_human, int bins_model) {
  if (bins_human < 1 || bins_model < 1) {
    throw PreconditionError("grid needs at least one bin per axis");
  }
  return {"grid" + std::to_string(bins_human) + "x" + std::to_string(bins_model),
          [bins_human, bins_model](double ph, double pm) {
            const auto bin = [](double p, int bins) {
              return std::min(std::floor(p * bins), static_cast<double>(bins - 1));
            };
            return std::optional<Cell>(
                Cell{bin(ph, bins_human), bin(pm, bins_model)});
          }};
}

double ExactFeatureError(const DiscretePair& pair,
                         const FeatureQuantizer& quantizer) {
  pair.Validate();
  std::map<FeatureQuantizer::Cell, std::pair<Rational, Rational>> cells;
  ForEachOutcome(pair, [&](const PairContext& ctx, double ph, double pm) {
    const auto cell = quantizer(ph, pm);
    if (!cell) {
      throw PreconditionError("quantizer " + quantizer.name() +
                              " does not cover every outcome");
    }
    auto& [h, m] = cells[*cell];
    const Rational prior = ToRational(ctx.prior);
    h += prior * ToRational(ph);
    m += prior * ToRational(pm);
  });
  Rational l1 = 0;
  for (const auto& [cell, mass] : cells) l1 += abs(mass.first - mass.second);
  return 1.0 - RoundToDouble(l1 / 2);
}

double ConditionalMutualInformationBits(const DiscretePair& pair,
                                        const FeatureQuantizer& quantizer) {
  pair.Validate();
  using Cell = FeatureQuantizer::Cell;
  using Opt = std::pair<double, double>;
  // Joint weight of (Z_opt, phi_opt, phi) under the 1/2-1/2 mixture.
  std::map<std::tuple<int, Opt, Cell>, Rational> abc;
  std::map<std::pair<int, Cell>, Rational> ac;
  std::map<std::pair<Opt, Cell>, Rational> bc;
  std::map<Cell, Rational> c;
  ForEachOutcome(pair, [&](const PairContext& ctx, double ph, double pm) {
    const auto cell = quantizer(ph, pm);
    if (!cell) {
      throw PreconditionError("quantizer " + quantizer.name() +
                              " does not cover every outcome");
    }
    const Rational w = ToRational(ctx.prior) * (ToRational(ph) + ToRational(pm)) / 2;
    const int z = ph > pm ? 1 : 0;
    abc[{z, Opt{ph, pm}, *cell}] += w;
    ac[{z, *cell}] += w;
    bc[{Opt{ph, pm}, *cell}] += w;
    c[*cell] += w;
  });
  double bits = 0.0;
  for (const auto& [key, w] : abc) {
    const auto& [z, opt, cell] = key;
    const double p_abc = RoundToDouble(w);
    const double p_c = RoundToDouble(c.at(cell));
    const double p_ac = RoundToDouble(ac.at({z, cell}));
    const double p_bc = RoundToDouble(bc.at({opt, cell}));
    bits += p_abc * std::log2((p_abc * p_c) / (p_ac * p_bc));
  }
  return std::max(0.0, bits);
}

BoundCheck CheckApproximationBound(const DiscretePair& pair,
                                   const FeatureQuantizer& quantizer) {
  BoundCheck b;
  b.l_star = ExactOptimalErrorRate(pair);
  b.l_phi = ExactFeatureError(pair, quantizer);
  b.mutual_info_bits = ConditionalMutualInformationBits(pair, quantizer);
  b.upper_bound = b.l_star + 2.0 * (1.0 - std::exp2(-b.mutual_info_bits));
  b.holds = b.l_star <= b.l_phi && b.l_phi <= b.upper_bound + 1e-12;
  return b;
}

bool CheckInvertibleInvariance(const DiscretePair& pair, const PlaneMap& map) {
  std::map<std::array<double, 2>, std::pair<double, double>> images;
  ForEachOutcome(pair, [&](const PairContext&, double ph, double pm) {
    const auto image = map(ph, pm);
    auto [it, inserted] = images.emplace(image, std::pair{ph, pm});
    if (!inserted && it->second != std::pair{ph, pm}) {
      throw PreconditionError(
          "map is not injective on the realized optimal features");
    }
  });
  const FeatureQuantizer mapped("mapped", [&map](double ph, double pm) {
    return std::optional<FeatureQuantizer::Cell>(map(ph, pm));
  });
  return ExactFeatureError(pair, mapped) == ExactOptimalErrorRate(pair);
}

DiscreteDistribution RandomDistribution(
    std::mt19937_64& rng, const std::vector<std::string>& support) {
  constexpr double kGrid = 281474976710656.0;  // 2^48
  std::exponential_distribution<double> gamma1(1.0);
  std::vector<double> w(support.size());
  double sum = 0.0;
  for (double& x : w) sum += x = gamma1(rng);
  // Largest-remainder rounding onto multiples of 2^-48.
  std::vector<double> units(w.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  double assigned = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double exact = w[i] / sum * kGrid;
    units[i] = std::floor(exact);
    assigned += units[i];
    remainders.emplace_back(exact - units[i], i);
  }
  std::sort(remainders.begin(), remainders.end(), std::greater<>());
  for (std::size_t r = 0; assigned < kGrid; ++r, assigned += 1.0) {
    units[remainders[r % remainders.size()].second] += 1.0;
  }
  DiscreteDistribution d{support, {}};
  for (double u : units) d.probs.push_back(u / kGrid);
  return d;
}

DiscretePair RandomPair(std::mt19937_64& rng, const RandomPairOptions& options) {
  if (options.min_support < 1 || options.max_support < options.min_support ||
      options.n_contexts < 1) {
    throw PreconditionError("bad random pair options");
  }
  std::vector<std::string> ctx_ids;
  for (int i = 0; i < options.n_contexts; ++i) {
    ctx_ids.push_back("x" + std::to_string(i));
  }
  const std::vector<double> priors =
      options.n_contexts == 1 ? std::vector<double>{1.0}
                              : RandomDistribution(rng, ctx_ids).probs;
  std::uniform_int_distribution<int> size(options.min_support,
                                          options.max_support);
  DiscretePair pair;
  for (int i = 0; i < options.n_contexts; ++i) {
    std::vector<std::string> support;
    const int n = size(rng);
    for (int y = 0; y < n; ++y) support.push_back("y" + std::to_string(y));
    PairContext ctx;
    ctx.context_id = ctx_ids[i];
    ctx.prior = priors[i];
    ctx.p_human = RandomDistribution(rng, support);
    ctx.p_model = RandomDistribution(rng, support);
    pair.contexts.push_back(std::move(ctx));
  }
  return pair;
}

FeatureQuantizer RandomGridQuantizer(std::mt19937_64& rng, int max_bins) {
  std::uniform_int_distribution<int> bins(1, max_bins);
  const int bh = bins(rng);
  const int bm = bins(rng);
  return FeatureQuantizer::Grid(bh, bm);
}

}  // namespace huse
