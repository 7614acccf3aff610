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

#include "huse/annotation.h"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "huse/error.h"

namespace huse {

using nlohmann::json;

namespace {

std::string NowRfc3339() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  const auto millis = std::chrono::duration_cast<std::chrono::milliseconds>(
                          now.time_since_epoch()) %
                      1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof(out), "%s.%03dZ", buf, static_cast<int>(millis.count()));
  return out;
}

// Integer in [kMinScore, kMaxScore], accepting integral floats such as 3.0.
std::optional<int> ParseScore(const json& score) {
  if (score.is_number_integer()) {
    if (score.is_number_unsigned()) {
      const auto v = score.get<std::uint64_t>();
      if (v > static_cast<std::uint64_t>(kMaxScore)) return std::nullopt;
      return static_cast<int>(v);
    }
    const auto v = score.get<std::int64_t>();
    if (v < kMinScore || v > kMaxScore) return std::nullopt;
    return static_cast<int>(v);
  }
  if (score.is_number_float()) {
    const double v = score.get<double>();
    if (!std::isfinite(v) || v != std::floor(v) || v < kMinScore ||
        v > kMaxScore) {
      return std::nullopt;
    }
    return static_cast<int>(v);
  }
  return std::nullopt;
}

json StoredToJson(const StoredRating& s) {
  return {{"example_id", s.rating.example_id},
          {"rater_id", s.rating.rater_id},
          {"score", static_cast<int>(s.rating.score)},
          {"submitted_at", s.rating.submitted_at},
          {"batch_id", s.batch_id}};
}

std::size_t BatchNumber(const std::string& batch_id) {
  if (batch_id.size() < 2 || batch_id[0] != 'b') return 0;
  try {
    std::size_t pos = 0;
    const unsigned long long n = std::stoull(batch_id.substr(1), &pos);
    return pos + 1 == batch_id.size() ? static_cast<std::size_t>(n) : 0;
  } catch (const std::exception&) {
    return 0;
  }
}

}  // namespace

std::vector<EvaluatedExample> LoadPool(std::istream& in) {
  std::vector<EvaluatedExample> pool;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json record = json::parse(line);
      if (record.is_object()) record["ratings"] = json::array();
      record.erase("rater_ids");
      EvaluatedExample e = ExampleFromJson(record);
      if (e.example_id.empty()) throw InputError("empty example_id");
      if (!ids.insert(e.example_id).second) {
        throw InputError("duplicate example_id " + e.example_id);
      }
      pool.push_back(std::move(e));
    } catch (const json::exception& err) {
      throw InputError("pool line " + std::to_string(line_no) + ": " + err.what());
    } catch (const std::exception& err) {
      throw InputError("pool line " + std::to_string(line_no) + ": " + err.what());
    }
  }
  if (pool.empty()) throw InputError("task pool is empty");
  return pool;
}

std::vector<EvaluatedExample> LoadPoolFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return LoadPool(in);
}

json TaskToJson(const AnnotationTask& task) {
  return {{"example_id", task.example_id},
          {"context", task.context},
          {"output_text", task.output_text},
          {"instructions_version", task.instructions_version}};
}

json BatchToJson(const TaskBatch& batch) {
  json tasks = json::array();
  for (const auto& t : batch.tasks) tasks.push_back(TaskToJson(t));
  return {{"batch_id", batch.batch_id},
          {"rater_id", batch.rater_id},
          {"tasks", tasks}};
}

json ProgressToJson(const ProgressReport& progress) {
  json counts = json::object();
  for (const auto& [id, n] : progress.per_example) counts[id] = n;
  return {{"examples_total", progress.examples_total},
          {"fully_rated", progress.fully_rated},
          {"ratings_total", progress.ratings_total},
          {"per_example", counts}};
}

std::string InstructionsText() {
  return "Rate how typical each continuation is for its context, from 0 to 5.\n"
         "5 means very typical: a natural, fluent continuation you would "
         "expect to see.\n"
         "1 means atypical but still a valid continuation.\n"
         "0 means invalid: ungrammatical, incoherent or unrelated.\n"
         "Treat UNK tokens as rare but appropriate words.\n";
}

AnnotationStore::AnnotationStore(std::vector<EvaluatedExample> pool,
                                 std::filesystem::path log_path,
                                 AnnotationConfig config)
    : pool_(std::move(pool)),
      log_path_(std::move(log_path)),
      config_(std::move(config)) {
  if (config_.batch_size < 1) throw PreconditionError("batch size must be >= 1");
  for (std::size_t i = 0; i < pool_.size(); ++i) {
    pool_[i].ratings.clear();
    pool_[i].rater_ids.clear();
    if (!index_.emplace(pool_[i].example_id, i).second) {
      throw InputError("duplicate example_id " + pool_[i].example_id);
    }
  }
  ratings_.resize(pool_.size());
  Replay();
  log_fd_ = ::open(log_path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC,
                   0644);
  if (log_fd_ < 0) {
    throw InputError("cannot open rating log " + log_path_.string() + ": " +
                     std::strerror(errno));
  }
}

AnnotationStore::~AnnotationStore() {
  if (log_fd_ >= 0) ::close(log_fd_);
}

void AnnotationStore::Replay() {
  std::ifstream in(log_path_, std::ios::binary);
  if (!in) return;
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string data = buf.str();
  in.close();

  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < data.size()) {
    const std::size_t end = data.find('\n', start);
    if (end == std::string::npos) {
      // Unterminated tail: the write was never acknowledged.
      std::filesystem::resize_file(log_path_, start);
      break;
    }
    ++line_no;
    const std::string line = data.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    const std::string where =
        "rating log " + log_path_.string() + " line " + std::to_string(line_no);
    StoredRating s;
    try {
      const json j = json::parse(line);
      s.rating.example_id = j.at("example_id").get<std::string>();
      s.rating.rater_id = j.at("rater_id").get<std::string>();
      const auto score = ParseScore(j.at("score"));
      if (!score) throw InputError("bad score");
      s.rating.score = *score;
      s.rating.submitted_at = j.value("submitted_at", "");
      s.batch_id = j.value("batch_id", "");
    } catch (const std::exception& err) {
      throw InputError(where + ": " + err.what());
    }
    const auto it = index_.find(s.rating.example_id);
    if (it == index_.end()) {
      throw InputError(where + ": example " + s.rating.example_id +
                       " is not in the pool");
    }
    if (rated_.count({it->second, s.rating.rater_id}) != 0) {
      throw InputError(where + ": duplicate rating");
    }
    next_batch_ = std::max(next_batch_, BatchNumber(s.batch_id) + 1);
    Apply(it->second, s);
  }
}

void AnnotationStore::Apply(std::size_t item, const StoredRating& stored) {
  ratings_[item].push_back(stored);
  rated_.insert({item, stored.rating.rater_id});
  ++ratings_total_;
}

void AnnotationStore::Append(const StoredRating& stored) {
  const std::string line = StoredToJson(stored).dump() + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(log_fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("rating log write failed: ") +
                               std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(log_fd_) != 0) {
    throw std::runtime_error(std::string("rating log fsync failed: ") +
                             std::strerror(errno));
  }
}

std::string AnnotationStore::BatchFor(const std::string& rater_id,
                                      std::size_t item) const {
  const auto it = open_batches_.find(rater_id);
  if (it == open_batches_.end()) return "";
  const auto& items = it->second.items;
  return std::find(items.begin(), items.end(), item) != items.end()
             ? it->second.batch_id
             : "";
}

std::optional<TaskBatch> AnnotationStore::NextBatch(const std::string& rater_id) {
  std::unique_lock lock(mu_);
  const auto make = [&](const std::string& batch_id,
                        const std::vector<std::size_t>& items) {
    TaskBatch batch{batch_id, rater_id, {}};
    for (std::size_t i : items) {
      if (rated_.count({i, rater_id}) != 0) continue;
      batch.tasks.push_back({pool_[i].example_id, pool_[i].context,
                             pool_[i].output_text, config_.instructions_version});
    }
    return batch;
  };

  if (auto it = open_batches_.find(rater_id); it != open_batches_.end()) {
    TaskBatch batch = make(it->second.batch_id, it->second.items);
    if (!batch.tasks.empty()) return batch;
    open_batches_.erase(it);
  }

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < pool_.size(); ++i) {
    if (rated_.count({i, rater_id}) == 0) candidates.push_back(i);
  }
  if (candidates.empty()) return std::nullopt;
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) {
                     return ratings_[a].size() < ratings_[b].size();
                   });
  if (candidates.size() > config_.batch_size) {
    candidates.resize(config_.batch_size);
  }
  OpenBatch open{"b" + std::to_string(next_batch_++), candidates};
  TaskBatch batch = make(open.batch_id, open.items);
  open_batches_[rater_id] = std::move(open);
  return batch;
}

SubmitResult AnnotationStore::Submit(const std::string& rater_id,
                                     const std::string& example_id,
                                     const json& score) {
  SubmitResult result;
  if (rater_id.empty() || example_id.empty()) {
    result.status = SubmitStatus::kBadRequest;
    result.message = "rater_id and example_id must be non-empty";
    return result;
  }
  const auto it = index_.find(example_id);
  if (it == index_.end()) {
    result.status = SubmitStatus::kUnknownExample;
    result.message = "unknown example " + example_id;
    return result;
  }
  const auto parsed = ParseScore(score);
  if (!parsed) {
    result.status = SubmitStatus::kInvalidScore;
    result.message = "score must be an integer from 0 to 5";
    return result;
  }
  const std::size_t item = it->second;

  std::unique_lock lock(mu_);
  if (rated_.count({item, rater_id}) != 0) {
    result.status = SubmitStatus::kDuplicate;
    result.message = "rater " + rater_id + " already rated " + example_id;
    return result;
  }
  StoredRating stored;
  stored.rating = {example_id, rater_id, static_cast<double>(*parsed),
                   NowRfc3339()};
  stored.batch_id = BatchFor(rater_id, item);
  Append(stored);
  Apply(item, stored);

  if (auto b = open_batches_.find(rater_id); b != open_batches_.end()) {
    const auto& items = b->second.items;
    const bool done = std::all_of(items.begin(), items.end(), [&](std::size_t i) {
      return rated_.count({i, rater_id}) != 0;
    });
    if (done) open_batches_.erase(b);
  }
  result.stored = std::move(stored);
  result.example_count = ratings_[item].size();
  return result;
}

void AnnotationStore::ExportRatings(std::ostream& out) const {
  std::shared_lock lock(mu_);
  for (std::size_t i = 0; i < pool_.size(); ++i) {
    EvaluatedExample e = pool_[i];
    for (const auto& s : ratings_[i]) {
      e.ratings.push_back(s.rating.score);
      e.rater_ids.push_back(s.rating.rater_id);
    }
    json j = ExampleToJson(e);
    j["ready"] = ratings_[i].size() >= config_.target_replicates;
    out << j.dump() << '\n';
  }
}

std::string AnnotationStore::ExportRatings() const {
  std::ostringstream out;
  ExportRatings(out);
  return out.str();
}

ProgressReport AnnotationStore::Progress() const {
  std::shared_lock lock(mu_);
  ProgressReport p;
  p.examples_total = pool_.size();
  p.ratings_total = ratings_total_;
  for (std::size_t i = 0; i < pool_.size(); ++i) {
    const std::size_t n = ratings_[i].size();
    if (n >= config_.target_replicates) ++p.fully_rated;
    p.per_example.emplace_back(pool_[i].example_id, n);
  }
  return p;
}

}  // namespace huse
