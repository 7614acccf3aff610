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

#ifndef HUSE_ANNOTATION_H_
#define HUSE_ANNOTATION_H_

// Replicate typicality rating collection. Raters pull batches of blind tasks
// and submit integer scores; every acknowledged score is in an append-only
// JSONL log that is replayed on startup.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "huse/dataset.h"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace huse {

struct AnnotationConfig {
  std::size_t batch_size = 25;
  std::size_t target_replicates = 20;
  std::string instructions_version = "typicality-v1";
};

// What a rater sees. Carries neither origin nor log_p_model.
struct AnnotationTask {
  std::string example_id;
  std::string context;
  std::string output_text;
  std::string instructions_version;
};

struct TaskBatch {
  std::string batch_id;
  std::string rater_id;
  std::vector<AnnotationTask> tasks;
};

struct StoredRating {
  RatingRecord rating;
  std::string batch_id;
};

enum class SubmitStatus {
  kAccepted,
  kBadRequest,      // missing or mistyped fields
  kUnknownExample,
  kInvalidScore,    // not an integer in [0, 5]
  kDuplicate,       // (example_id, rater_id) already rated
};

struct SubmitResult {
  SubmitStatus status = SubmitStatus::kAccepted;
  std::string message;
  StoredRating stored;            // set when accepted
  std::size_t example_count = 0;  // ratings on the example after the submit
};

struct ProgressReport {
  std::size_t examples_total = 0;
  std::size_t fully_rated = 0;
  std::size_t ratings_total = 0;
  std::vector<std::pair<std::string, std::size_t>> per_example;  // pool order
};

// Reads {example_id, context, output_text, origin, log_p_model, ...} records;
// ratings, if present, are ignored. Throws InputError.
std::vector<EvaluatedExample> LoadPool(std::istream& in);
std::vector<EvaluatedExample> LoadPoolFile(const std::filesystem::path& path);

nlohmann::json TaskToJson(const AnnotationTask& task);
nlohmann::json BatchToJson(const TaskBatch& batch);
nlohmann::json ProgressToJson(const ProgressReport& progress);
std::string InstructionsText();

class AnnotationStore {
 public:
  // Replays `log_path` if it exists. A truncated final line (crash mid-write)
  // is dropped and cut from the file; any other bad line throws InputError.
  AnnotationStore(std::vector<EvaluatedExample> pool,
                  std::filesystem::path log_path, AnnotationConfig config = {});
  ~AnnotationStore();
  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  // The rater's open batch (tasks still unrated) if any, else a new batch of
  // up to batch_size unrated examples, fewest ratings first. nullopt when the
  // rater has rated the whole pool.
  std::optional<TaskBatch> NextBatch(const std::string& rater_id);

  // `score` is taken as JSON so that non-integers can be rejected. The record
  // is fsync'ed to the log before this returns kAccepted.
  SubmitResult Submit(const std::string& rater_id, const std::string& example_id,
                      const nlohmann::json& score);

  // One dataset record per pool example, in pool order, with ratings and
  // rater_ids in acknowledgment order plus "ready" (>= target replicates).
  void ExportRatings(std::ostream& out) const;
  std::string ExportRatings() const;

  ProgressReport Progress() const;
  const AnnotationConfig& config() const { return config_; }

 private:
  struct OpenBatch {
    std::string batch_id;
    std::vector<std::size_t> items;
  };

  void Replay();
  void Append(const StoredRating& stored);
  void Apply(std::size_t item, const StoredRating& stored);
  std::string BatchFor(const std::string& rater_id, std::size_t item) const;

  std::vector<EvaluatedExample> pool_;
  std::unordered_map<std::string, std::size_t> index_;
  std::filesystem::path log_path_;
  AnnotationConfig config_;

  mutable std::shared_mutex mu_;
  std::vector<std::vector<StoredRating>> ratings_;
  std::set<std::pair<std::size_t, std::string>> rated_;  // (item, rater)
  std::map<std::string, OpenBatch> open_batches_;
  std::size_t ratings_total_ = 0;
  std::size_t next_batch_ = 1;
  int log_fd_ = -1;
};

// HTTP front end:
//   GET  /api/tasks/next?rater_id=...   {"batch": {...} | null}
//   POST /api/ratings                   {rater_id, example_id, score}
//   GET  /api/export                    JSONL
//   GET  /api/progress
//   GET  /api/instructions
// plus static files from `static_dir` at / when given.
class AnnotationServer {
 public:
  explicit AnnotationServer(AnnotationStore& store,
                            std::optional<std::filesystem::path> static_dir = {});
  ~AnnotationServer();

  // Port 0 picks a free port. Returns the bound port or -1.
  int Bind(const std::string& host, int port);
  // Blocks until Stop().
  bool Run();
  void Stop();

 private:
  AnnotationStore& store_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace huse

#endif  // HUSE_ANNOTATION_H_
