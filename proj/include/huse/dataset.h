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

#ifndef HUSE_DATASET_H_
#define HUSE_DATASET_H_

// Evaluation datasets: paired reference and model outputs for a set of
// contexts, each carrying the model log-probability and raw per-rater
// typicality scores on the 0-5 scale.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace huse {

enum class Origin { kReference, kModel };

std::string_view OriginName(Origin origin);
// Accepts "reference" or "model"; throws InputError otherwise.
Origin ParseOrigin(std::string_view name);

enum class LogBase { kE, k2, k10 };

// Accepts "e", "2" or "10"; throws InputError otherwise.
LogBase ParseLogBase(std::string_view name);
double ToNaturalLog(double value, LogBase base);

inline constexpr double kMinScore = 0.0;
inline constexpr double kMaxScore = 5.0;

// One rater's judgment of one example.
struct RatingRecord {
  std::string example_id;
  std::string rater_id;
  double score = 0.0;
  std::string submitted_at;  // RFC 3339, UTC
};

struct EvaluatedExample {
  std::string example_id;
  std::string context;
  // Pairing key. Empty means "pair by context text".
  std::string context_id;
  std::string output_text;
  Origin origin = Origin::kReference;
  double log_p_model = 0.0;  // natural log, whole output (not per token)
  std::vector<double> ratings;
  // Either empty or parallel to `ratings`.
  std::vector<std::string> rater_ids;
  int token_count = 1;
  // Reference probability of the output, known only for synthetic data.
  std::optional<double> p_human;

  const std::string& pairing_key() const {
    return context_id.empty() ? context : context_id;
  }
};

// Mean human judgment: the arithmetic mean of the ratings.
// Throws PreconditionError on an empty rating list.
double Hj(const EvaluatedExample& example);

// Number of whitespace-delimited tokens. Throws InputError on blank text.
int TokenizeCount(std::string_view text);

// A validated set of 2n examples: one reference and one model output for each
// of n context draws. Immutable after construction.
class EvalDataset {
 public:
  // Validates every example and pairs them. Within one pairing key the number
  // of reference and model rows must match; rows are paired in input order.
  // Throws InputError on any violation.
  static EvalDataset FromExamples(std::vector<EvaluatedExample> examples);

  const std::vector<EvaluatedExample>& examples() const { return examples_; }
  std::size_t n_contexts() const { return pairs_.size(); }
  // (reference index, model index) into examples(), in order of first
  // appearance of the reference row.
  const std::vector<std::pair<std::size_t, std::size_t>>& pairs() const {
    return pairs_;
  }
  // Smallest number of ratings on any example.
  std::size_t min_ratings() const;

 private:
  EvalDataset() = default;
  std::vector<EvaluatedExample> examples_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
};

enum class DatasetFormat { kJsonl };

struct LoadOptions {
  // Base assumed for log_p_model when a record has no "log_base" field.
  LogBase default_log_base = LogBase::kE;
};

// Parses newline-delimited JSON records. Blank lines are skipped. Errors carry
// the 1-based line number.
EvalDataset LoadDataset(std::istream& in,
                        DatasetFormat format = DatasetFormat::kJsonl,
                        const LoadOptions& options = {});
EvalDataset LoadDatasetFile(const std::filesystem::path& path,
                            const LoadOptions& options = {});

// Parses one record. Does not require non-empty ratings; LoadDataset does.
EvaluatedExample ExampleFromJson(const nlohmann::json& record,
                                 const LoadOptions& options = {});
nlohmann::json ExampleToJson(const EvaluatedExample& example);

// One record per line, natural-log log_p_model, examples in dataset order.
void WriteDataset(std::ostream& out, const EvalDataset& dataset);

}  // namespace huse

#endif  // HUSE_DATASET_H_
