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

#include "huse/cli.h"

#include <signal.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "huse/annotation.h"
#include "huse/classifier.h"
#include "huse/dataset.h"
#include "huse/error.h"
#include "huse/features.h"
#include "huse/metrics.h"
#include "huse/oracle.h"
#include "json.hpp"

namespace huse {

using nlohmann::json;

namespace {

struct CommonFlags {
  std::string input;
  std::string out;
  int k = 16;
  std::uint64_t seed = 0;
  FeatureVariant features = FeatureVariant::kHuse;
  LogBase log_base = LogBase::kE;
  VoteTiePolicy vote_ties = VoteTiePolicy::kHalfError;
  DistanceTiePolicy distance_ties = DistanceTiePolicy::kIncludeAll;

  KnnConfig knn() const { return {k, vote_ties, distance_ties}; }
};

struct StabilityFlags {
  std::size_t examples = 0;
  std::size_t raters = 0;
  std::size_t boot = 100;
  RaterSampling sampling = RaterSampling::kPerExample;
};

struct SynthFlags {
  std::string mode = "convergence";
  std::size_t n = 2000;
  std::size_t seeds = 1;
  std::size_t pairs = 100;
  int max_support = 10;
  int contexts = 1;
  int max_bins = 8;
  std::vector<double> temperatures = {0.5, 0.7, 0.9, 1.0, 1.2, 1.5};
  RaterModel raters;
};

struct ServeFlags {
  std::string pool;
  std::string log;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
  std::size_t batch_size = 25;
  std::size_t target = 20;
};

void AddCommon(CLI::App* cmd, CommonFlags& f, bool input_required,
               bool features) {
  auto* in = cmd->add_option("--input,-i", f.input, "Input path");
  if (input_required) in->required();
  cmd->add_option("--out,-o", f.out, "Write output here instead of stdout");
  cmd->add_option("--k", f.k, "Neighbours in the k-NN vote")
      ->capture_default_str();
  cmd->add_option("--seed", f.seed, "Random seed")->capture_default_str();
  if (features) {
    cmd->add_option("--features", f.features, "Feature map: huse, hj or opt")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, FeatureVariant>{
                {"huse", FeatureVariant::kHuse},
                {"hj", FeatureVariant::kHjOnly},
                {"opt", FeatureVariant::kOpt}},
            CLI::ignore_case))
        ->default_str("huse");
  }
  cmd->add_option("--log-base", f.log_base,
                  "Base of log_p_model in records without log_base: e, 2, 10")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, LogBase>{
              {"e", LogBase::kE}, {"2", LogBase::k2}, {"10", LogBase::k10}}))
      ->default_str("e");
  cmd->add_option("--vote-ties", f.vote_ties,
                  "Even split vote: half_error or predict_model")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, VoteTiePolicy>{
              {"half_error", VoteTiePolicy::kHalfError},
              {"predict_model", VoteTiePolicy::kPredictModel}}))
      ->default_str("half_error");
  cmd->add_option("--distance-ties", f.distance_ties,
                  "Ties at the k-th distance: include_all or by_index")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, DistanceTiePolicy>{
              {"include_all", DistanceTiePolicy::kIncludeAll},
              {"by_index", DistanceTiePolicy::kByIndex}}))
      ->default_str("include_all");
}

// Writes to --out (atomically enough for a CLI: whole buffer at once) or out.
void Emit(const std::string& text, const CommonFlags& f, std::ostream& out) {
  if (f.out.empty()) {
    out << text;
    out.flush();
    return;
  }
  std::ofstream file(f.out, std::ios::binary);
  if (!file) throw InputError("cannot write " + f.out);
  file << text;
  if (!file.flush()) throw InputError("cannot write " + f.out);
}

std::string Dump(const json& j) { return j.dump(2) + "\n"; }

EvalDataset Load(const CommonFlags& f) {
  return LoadDatasetFile(f.input, LoadOptions{f.log_base});
}

DiscretePair LoadPair(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": malformed JSON: " + e.what());
  }
  return PairFromJson(j);
}

json BoundToJson(const std::string& quantizer, const BoundCheck& b) {
  return {{"quantizer", quantizer},
          {"l_star", b.l_star},
          {"l_phi", b.l_phi},
          {"mutual_info_bits", b.mutual_info_bits},
          {"upper_bound", b.upper_bound},
          {"holds", b.holds}};
}

json RaterJson(const RaterModel& r) {
  return {{"slope", r.slope},
          {"intercept", r.intercept},
          {"noise", r.noise},
          {"n_raters", r.n_raters}};
}

// 2 * LOO error of the sampled points under the requested features.
double EstimateScore(const DiscretePair& pair, std::size_t n,
                     std::uint64_t seed, const CommonFlags& f,
                     const RaterModel& raters) {
  if (f.features == FeatureVariant::kOpt) {
    std::vector<LabeledPoint> points = SampleOptPoints(pair, n, seed);
    std::vector<FeatureVector> rows;
    for (const auto& p : points) rows.push_back(p.features);
    const ScalingProfile scaling = FitScaling(rows);
    for (auto& p : points) p.features = scaling.Apply(p.features);
    if (static_cast<std::size_t>(f.k) >= points.size()) {
      throw PreconditionError("k must be smaller than the number of points");
    }
    return 2.0 * LooError(points, f.knn());
  }
  const EvalDataset data = SampleEvalDataset(pair, n, raters, seed);
  return ComputeHuse(data, f.knn(), FeatureSpec{f.features}).scores.huse;
}

json SynthConvergence(const CommonFlags& f, const SynthFlags& s) {
  if (f.input.empty()) throw InputError("convergence mode needs --input");
  const DiscretePair pair = LoadPair(f.input);
  const double l_star = ExactOptimalErrorRate(pair);
  json runs = json::array();
  double gap_sum = 0.0;
  for (std::size_t i = 0; i < s.seeds; ++i) {
    const std::uint64_t seed = f.seed + i;
    const double est = EstimateScore(pair, s.n, seed, f, s.raters);
    const double gap = std::abs(est - l_star);
    gap_sum += gap;
    runs.push_back({{"seed", seed}, {"estimate", est}, {"gap", gap}});
  }
  return {{"mode", "convergence"},
          {"features", FeatureVariantName(f.features)},
          {"k", f.k},
          {"n", s.n},
          {"exact_tv", ExactTv(pair)},
          {"l_star", l_star},
          {"runs", runs},
          {"mean_gap", gap_sum / static_cast<double>(s.seeds)}};
}

json SynthBounds(const CommonFlags& f, const SynthFlags& s) {
  json checks = json::array();
  bool all = true;
  const auto add = [&](const DiscretePair& pair, const FeatureQuantizer& q,
                       std::optional<std::size_t> index) {
    const BoundCheck b = CheckApproximationBound(pair, q);
    json row = BoundToJson(q.name(), b);
    if (index) row["pair"] = *index;
    all = all && b.holds;
    checks.push_back(std::move(row));
  };
  if (!f.input.empty()) {
    const DiscretePair pair = LoadPair(f.input);
    for (const auto& q :
         {FeatureQuantizer::Identity(), FeatureQuantizer::Constant(),
          FeatureQuantizer::SignOfDifference(), FeatureQuantizer::Grid(2, 2),
          FeatureQuantizer::Grid(4, 4), FeatureQuantizer::Grid(8, 8)}) {
      add(pair, q, std::nullopt);
    }
  } else {
    std::mt19937_64 rng(f.seed);
    const RandomPairOptions options{2, s.max_support, s.contexts};
    for (std::size_t i = 0; i < s.pairs; ++i) {
      const DiscretePair pair = RandomPair(rng, options);
      add(pair, RandomGridQuantizer(rng, s.max_bins), i);
    }
  }
  return {{"mode", "bounds"}, {"checks", checks}, {"all_hold", all}};
}

json SynthAnnealSweep(const CommonFlags& f, const SynthFlags& s) {
  if (f.input.empty()) throw InputError("anneal-sweep mode needs --input");
  const DiscretePair pair = LoadPair(f.input);
  json rows = json::array();
  for (double t : s.temperatures) {
    const DiscretePair annealed = AnnealModel(pair, t);
    json row = {{"t", t},
                {"exact_tv", ExactTv(annealed)},
                {"l_star", ExactOptimalErrorRate(annealed)}};
    if (s.n > 0) {
      const EvalDataset data = SampleEvalDataset(annealed, s.n, s.raters, f.seed);
      const HuseReport report = ComputeHuse(data, f.knn());
      row["huse"] = report.scores.huse;
      row["huse_q"] = report.scores.huse_q;
      row["huse_d"] = report.scores.huse_d;
      row["degenerate"] = report.scores.degenerate;
    }
    rows.push_back(std::move(row));
  }
  return {{"mode", "anneal-sweep"},
          {"k", f.k},
          {"n", s.n},
          {"seed", f.seed},
          {"raters", RaterJson(s.raters)},
          {"sweep", rows}};
}

int Serve(const ServeFlags& s, std::ostream& out) {
  AnnotationConfig config;
  config.batch_size = s.batch_size;
  config.target_replicates = s.target;
  AnnotationStore store(LoadPoolFile(s.pool), s.log, config);
  std::optional<std::filesystem::path> static_dir;
  if (!s.static_dir.empty()) static_dir = s.static_dir;
  AnnotationServer server(store, static_dir);
  const int port = server.Bind(s.host, s.port);
  if (port < 0) {
    throw InputError("cannot bind " + s.host + ":" + std::to_string(s.port));
  }
  out << json{{"host", s.host}, {"port", port}}.dump() << std::endl;

  // Block termination signals before the server starts its worker threads so
  // that only the waiter below receives them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigset_t previous;
  pthread_sigmask(SIG_BLOCK, &signals, &previous);

  std::jthread waiter([&server, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.Stop();
  });
  const bool ok = server.Run();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  pthread_sigmask(SIG_SETMASK, &previous, nullptr);
  return ok ? kExitOk : 1;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"HUSE: human and statistical evaluation of generated text"};
  app.name("huse");
  app.require_subcommand(1);

  CommonFlags compute_f;
  auto* compute = app.add_subcommand(
      "compute", "HUSE, HUSE-Q and HUSE-D of a rated dataset (JSON)");
  AddCommon(compute, compute_f, true, true);

  CommonFlags stability_f;
  StabilityFlags stab;
  auto* stability = app.add_subcommand(
      "stability", "Bootstrap HUSE over subsampled contexts and raters (JSON)");
  AddCommon(stability, stability_f, true, false);
  stability->add_option("--examples", stab.examples,
                        "Contexts per replicate (default: all)");
  stability->add_option("--raters", stab.raters,
                        "Ratings kept per example (default: fewest available)");
  stability->add_option("--boot", stab.boot, "Bootstrap replicates")
      ->capture_default_str();
  stability->add_option("--rater-sampling", stab.sampling,
                        "per_example or panel")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, RaterSampling>{
              {"per_example", RaterSampling::kPerExample},
              {"panel", RaterSampling::kPanel}}))
      ->default_str("per_example");

  CommonFlags surface_f;
  int grid = 50;
  auto* surface = app.add_subcommand(
      "surface", "k-NN confidence surface and points for plotting (TSV)");
  AddCommon(surface, surface_f, true, true);
  surface->add_option("--grid", grid, "Grid points per axis")
      ->capture_default_str();

  CommonFlags synth_f;
  SynthFlags synth_s;
  auto* synth = app.add_subcommand(
      "synth", "Validate the estimator against exact synthetic pairs (JSON)");
  AddCommon(synth, synth_f, false, true);
  synth->add_option("--mode", synth_s.mode,
                    "convergence, bounds or anneal-sweep")
      ->check(CLI::IsMember({"convergence", "bounds", "anneal-sweep"}))
      ->capture_default_str();
  synth->add_option("--n", synth_s.n, "Context draws per sample")
      ->capture_default_str();
  synth->add_option("--seeds", synth_s.seeds,
                    "Convergence runs, seeds --seed onwards")
      ->capture_default_str();
  synth->add_option("--pairs", synth_s.pairs,
                    "Random pairs in bounds mode without --input")
      ->capture_default_str();
  synth->add_option("--max-support", synth_s.max_support,
                    "Largest random support")
      ->capture_default_str();
  synth->add_option("--contexts", synth_s.contexts, "Contexts per random pair")
      ->capture_default_str();
  synth->add_option("--max-bins", synth_s.max_bins,
                    "Largest random grid quantizer")
      ->capture_default_str();
  synth->add_option("--temperatures", synth_s.temperatures,
                    "Anneal-sweep temperatures")
      ->delimiter(',');
  synth->add_option("--raters", synth_s.raters.n_raters, "Simulated raters")
      ->capture_default_str();
  synth->add_option("--rater-slope", synth_s.raters.slope,
                    "Rating slope on log p_human")
      ->capture_default_str();
  synth->add_option("--rater-intercept", synth_s.raters.intercept,
                    "Rating intercept")
      ->capture_default_str();
  synth->add_option("--rater-noise", synth_s.raters.noise,
                    "Rating noise standard deviation")
      ->capture_default_str();

  ServeFlags serve_s;
  auto* serve = app.add_subcommand("serve", "Run the annotation service");
  serve->add_option("--pool", serve_s.pool, "JSONL task pool")->required();
  serve->add_option("--log", serve_s.log, "Append-only rating log")->required();
  serve->add_option("--host", serve_s.host, "Bind address")
      ->capture_default_str();
  serve->add_option("--port", serve_s.port, "Port, 0 for any free port")
      ->capture_default_str();
  serve->add_option("--static", serve_s.static_dir,
                    "Directory served at / (annotation UI build)");
  serve->add_option("--batch-size", serve_s.batch_size, "Tasks per batch")
      ->capture_default_str();
  serve->add_option("--target", serve_s.target, "Ratings wanted per example")
      ->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }

  try {
    if (*compute) {
      const EvalDataset data = Load(compute_f);
      const HuseReport report =
          ComputeHuse(data, compute_f.knn(), FeatureSpec{compute_f.features});
      Emit(Dump(ReportToJson(report)), compute_f, out);
    } else if (*stability) {
      const EvalDataset data = Load(stability_f);
      StabilityOptions options;
      options.n_examples = stab.examples ? stab.examples : data.n_contexts();
      options.n_raters = stab.raters ? stab.raters : data.min_ratings();
      options.n_bootstrap = stab.boot;
      options.seed = stability_f.seed;
      options.rater_sampling = stab.sampling;
      options.knn = stability_f.knn();
      Emit(Dump(StabilityToJson(Stability(data, options))), stability_f, out);
    } else if (*surface) {
      const EvalDataset data = Load(surface_f);
      std::ostringstream tsv;
      WriteSurfaceTsv(tsv, ExportSurface(data, surface_f.knn(), grid,
                                         FeatureSpec{surface_f.features}));
      Emit(tsv.str(), surface_f, out);
    } else if (*synth) {
      synth_s.raters.Validate();
      json report;
      if (synth_s.mode == "convergence") {
        if (synth_s.seeds < 1) throw PreconditionError("--seeds must be >= 1");
        report = SynthConvergence(synth_f, synth_s);
      } else if (synth_s.mode == "bounds") {
        report = SynthBounds(synth_f, synth_s);
      } else {
        report = SynthAnnealSweep(synth_f, synth_s);
      }
      Emit(Dump(report), synth_f, out);
    } else if (*serve) {
      return Serve(serve_s, out);
    }
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const PreconditionError& e) {
    err << "precondition error: " << e.what() << "\n";
    return kExitPreconditionError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}

}  // namespace huse
