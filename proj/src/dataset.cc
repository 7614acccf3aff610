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

#include "huse/dataset.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "huse/error.h"

namespace huse {

using nlohmann::json;

std::string_view OriginName(Origin origin) {
  return origin == Origin::kReference ? "reference" : "model";
}

Origin ParseOrigin(std::string_view name) {
  if (name == "reference") return Origin::kReference;
  if (name == "model") return Origin::kModel;
  throw InputError("origin must be \"reference\" or \"model\", got \"" +
                   std::string(name) + "\"");
}

LogBase ParseLogBase(std::string_view name) {
  if (name == "e") return LogBase::kE;
  if (name == "2") return LogBase::k2;
  if (name == "10") return LogBase::k10;
  throw InputError("log_base must be \"e\", \"2\" or \"10\", got \"" +
                   std::string(name) + "\"");
}

double ToNaturalLog(double value, LogBase base) {
  switch (base) {
    case LogBase::kE:
      return value;
    case LogBase::k2:
      return value * std::numbers::ln2;
    case LogBase::k10:
      return value * std::numbers::ln10;
  }
  return value;
}

double Hj(const EvaluatedExample& example) {
  if (example.ratings.empty()) {
    throw PreconditionError("example " + example.example_id +
                            " has no ratings");
  }
  // Summed in sorted order so the result does not depend on rating order.
  std::vector<double> sorted = example.ratings;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double r : sorted) sum += r;
  return sum / static_cast<double>(sorted.size());
}

int TokenizeCount(std::string_view text) {
  int count = 0;
  bool in_token = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  if (count == 0) throw InputError("cannot count tokens of blank text");
  return count;
}

namespace {

void ValidateExample(const EvaluatedExample& e) {
  if (e.example_id.empty()) throw InputError("example_id is empty");
  const std::string where = "example " + e.example_id + ": ";
  if (!std::isfinite(e.log_p_model)) {
    throw InputError(where + "log_p_model is not finite");
  }
  if (e.token_count < 1) throw InputError(where + "token_count must be >= 1");
  if (e.ratings.empty()) throw InputError(where + "ratings list is empty");
  for (double r : e.ratings) {
    if (!(r >= kMinScore && r <= kMaxScore)) {
      std::ostringstream msg;
      msg << where << "score " << r << " outside [0, 5]";
      throw InputError(msg.str());
    }
  }
  if (!e.rater_ids.empty() && e.rater_ids.size() != e.ratings.size()) {
    throw InputError(where + "rater_ids and ratings differ in length");
  }
  if (e.p_human && !(*e.p_human >= 0.0 && *e.p_human <= 1.0)) {
    throw InputError(where + "p_human outside [0, 1]");
  }
}

template <typename T>
T Require(const json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end()) {
    throw InputError(std::string("missing field \"") + key + "\"");
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw InputError(std::string("field \"") + key + "\" has the wrong type");
  }
}

}  // namespace

std::size_t EvalDataset::min_ratings() const {
  std::size_t m = examples_.empty() ? 0 : examples_.front().ratings.size();
  for (const auto& e : examples_) m = std::min(m, e.ratings.size());
  return m;
}

EvalDataset EvalDataset::FromExamples(std::vector<EvaluatedExample> examples) {
  std::set<std::string> ids;
  // key -> (reference rows, model rows), in input order
  std::map<std::string, std::pair<std::vector<std::size_t>,
                                  std::vector<std::size_t>>>
      groups;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const EvaluatedExample& e = examples[i];
    ValidateExample(e);
    if (!ids.insert(e.example_id).second) {
      throw InputError("duplicate example_id " + e.example_id);
    }
    auto& group = groups[e.pairing_key()];
    (e.origin == Origin::kReference ? group.first : group.second).push_back(i);
  }
  if (examples.empty()) throw InputError("dataset is empty");

  EvalDataset ds;
  for (const auto& [key, group] : groups) {
    const auto& [refs, models] = group;
    if (refs.size() != models.size()) {
      std::ostringstream msg;
      msg << "unpaired context \"" << key << "\": " << refs.size()
          << " reference row(s), " << models.size() << " model row(s)";
      throw InputError(msg.str());
    }
    for (std::size_t i = 0; i < refs.size(); ++i) {
      ds.pairs_.emplace_back(refs[i], models[i]);
    }
  }
  std::sort(ds.pairs_.begin(), ds.pairs_.end());
  ds.examples_ = std::move(examples);
  return ds;
}

EvaluatedExample ExampleFromJson(const json& record,
                                 const LoadOptions& options) {
  if (!record.is_object()) throw InputError("record is not a JSON object");
  EvaluatedExample e;
  e.example_id = Require<std::string>(record, "example_id");
  if (record.contains("context")) e.context = Require<std::string>(record, "context");
  if (record.contains("context_id")) {
    e.context_id = Require<std::string>(record, "context_id");
  }
  e.output_text = Require<std::string>(record, "output_text");
  e.origin = ParseOrigin(Require<std::string>(record, "origin"));

  const json& logp = record.contains("log_p_model") ? record["log_p_model"]
                                                     : json();
  if (!logp.is_number()) {
    throw InputError("field \"log_p_model\" must be a number");
  }
  LogBase base = options.default_log_base;
  if (auto it = record.find("log_base"); it != record.end()) {
    base = ParseLogBase(it->is_string() ? it->get<std::string>() : it->dump());
  }
  e.log_p_model = ToNaturalLog(logp.get<double>(), base);

  const json& ratings = record.contains("ratings") ? record["ratings"] : json();
  if (!ratings.is_array()) throw InputError("field \"ratings\" must be an array");
  for (const json& r : ratings) {
    if (!r.is_number()) throw InputError("ratings must be numbers");
    e.ratings.push_back(r.get<double>());
  }
  if (record.contains("rater_ids")) {
    e.rater_ids = Require<std::vector<std::string>>(record, "rater_ids");
  }
  if (auto it = record.find("token_count"); it != record.end() && !it->is_null()) {
    if (!it->is_number_integer()) {
      throw InputError("field \"token_count\" must be an integer");
    }
    e.token_count = it->get<int>();
  } else {
    e.token_count = TokenizeCount(e.output_text);
  }
  if (auto it = record.find("p_human"); it != record.end() && !it->is_null()) {
    if (!it->is_number()) throw InputError("field \"p_human\" must be a number");
    e.p_human = it->get<double>();
  }
  return e;
}

json ExampleToJson(const EvaluatedExample& e) {
  json j;
  j["example_id"] = e.example_id;
  j["context"] = e.context;
  if (!e.context_id.empty()) j["context_id"] = e.context_id;
  j["output_text"] = e.output_text;
  j["origin"] = OriginName(e.origin);
  j["log_p_model"] = e.log_p_model;
  j["ratings"] = e.ratings;
  if (!e.rater_ids.empty()) j["rater_ids"] = e.rater_ids;
  j["token_count"] = e.token_count;
  if (e.p_human) j["p_human"] = *e.p_human;
  return j;
}

EvalDataset LoadDataset(std::istream& in, DatasetFormat /*format*/,
                        const LoadOptions& options) {
  std::vector<EvaluatedExample> examples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json record = json::parse(line);
      EvaluatedExample e = ExampleFromJson(record, options);
      ValidateExample(e);
      examples.push_back(std::move(e));
    } catch (const json::parse_error& err) {
      throw InputError("line " + std::to_string(line_no) +
                       ": malformed JSON: " + err.what());
    } catch (const std::exception& err) {
      throw InputError("line " + std::to_string(line_no) + ": " + err.what());
    }
  }
  return EvalDataset::FromExamples(std::move(examples));
}

EvalDataset LoadDatasetFile(const std::filesystem::path& path,
                            const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return LoadDataset(in, DatasetFormat::kJsonl, options);
}

void WriteDataset(std::ostream& out, const EvalDataset& dataset) {
  for (const auto& e : dataset.examples()) {
    out << ExampleToJson(e).dump() << '\n';
  }
}

}  // namespace huse
