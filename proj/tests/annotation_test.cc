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

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gtest/gtest.h"
#include "httplib.h"
#include "huse/dataset.h"
#include "huse/error.h"

namespace huse {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "huse-test-XXXXXX").string();
    path_ = mkdtemp(tmpl.data());
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::vector<EvaluatedExample> FixturePool() {
  return LoadPoolFile(std::string(HUSE_FIXTURE_DIR) + "/pool.jsonl");
}

std::vector<EvaluatedExample> SmallPool(int n) {
  std::vector<EvaluatedExample> pool;
  for (int i = 0; i < n; ++i) {
    for (Origin o : {Origin::kReference, Origin::kModel}) {
      if (static_cast<int>(pool.size()) == n) break;
      EvaluatedExample e;
      e.example_id = "e" + std::to_string(pool.size());
      e.context = "context " + std::to_string(i);
      e.output_text = "output with <UNK> " + std::to_string(pool.size());
      e.origin = o;
      e.log_p_model = -1.0 - static_cast<double>(pool.size());
      e.token_count = 4;
      pool.push_back(e);
    }
  }
  return pool;
}

std::vector<std::string> Lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

bool MentionsHiddenField(const json& j) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) {
      if (key == "origin" || key == "log_p_model" || MentionsHiddenField(value)) {
        return true;
      }
    }
  } else if (j.is_array()) {
    for (const auto& v : j) {
      if (MentionsHiddenField(v)) return true;
    }
  }
  return false;
}

TEST(AnnotationTest, FreshRaterGetsFullBatch) {
  TempDir dir;
  AnnotationStore store(FixturePool(), dir / "log.jsonl");
  const auto batch = store.NextBatch("alice");
  ASSERT_TRUE(batch.has_value());
  EXPECT_EQ(batch->tasks.size(), 25u);
  EXPECT_EQ(batch->rater_id, "alice");
  std::set<std::string> ids;
  for (const auto& t : batch->tasks) ids.insert(t.example_id);
  EXPECT_EQ(ids.size(), 25u);
  EXPECT_FALSE(MentionsHiddenField(BatchToJson(*batch)));
}

TEST(AnnotationTest, TasksShowOutputVerbatim) {
  TempDir dir;
  AnnotationStore store(SmallPool(4), dir / "log.jsonl");
  const auto batch = store.NextBatch("r");
  ASSERT_TRUE(batch.has_value());
  EXPECT_EQ(batch->tasks[0].output_text, "output with <UNK> 0");
  EXPECT_EQ(batch->tasks[0].context, "context 0");
  EXPECT_EQ(batch->tasks[0].instructions_version, store.config().instructions_version);
}

TEST(AnnotationTest, OpenBatchResumes) {
  TempDir dir;
  AnnotationStore store(FixturePool(), dir / "log.jsonl");
  const auto first = store.NextBatch("bob");
  const auto again = store.NextBatch("bob");
  ASSERT_TRUE(first && again);
  EXPECT_EQ(first->batch_id, again->batch_id);
  for (int i = 0; i < 5; ++i) {
    const SubmitResult r = store.Submit("bob", first->tasks[i].example_id, 3);
    ASSERT_EQ(r.status, SubmitStatus::kAccepted);
    EXPECT_EQ(r.stored.batch_id, first->batch_id);
  }
  const auto rest = store.NextBatch("bob");
  ASSERT_TRUE(rest);
  EXPECT_EQ(rest->batch_id, first->batch_id);
  EXPECT_EQ(rest->tasks.size(), 20u);
  for (const auto& t : rest->tasks) {
    ASSERT_EQ(store.Submit("bob", t.example_id, 4).status, SubmitStatus::kAccepted);
  }
  const auto next = store.NextBatch("bob");
  ASSERT_TRUE(next);
  EXPECT_NE(next->batch_id, first->batch_id);
  std::set<std::string> seen;
  for (const auto& t : first->tasks) seen.insert(t.example_id);
  for (const auto& t : next->tasks) EXPECT_EQ(seen.count(t.example_id), 0u);
}

TEST(AnnotationTest, ExhaustedRaterGetsNothing) {
  TempDir dir;
  AnnotationStore store(FixturePool(), dir / "log.jsonl");
  std::size_t rated = 0;
  while (auto batch = store.NextBatch("carol")) {
    for (const auto& t : batch->tasks) {
      ASSERT_EQ(store.Submit("carol", t.example_id, 2).status,
                SubmitStatus::kAccepted);
      ++rated;
    }
  }
  EXPECT_EQ(rated, 200u);
  EXPECT_FALSE(store.NextBatch("carol").has_value());
}

TEST(AnnotationTest, FewestRatedFirst) {
  TempDir dir;
  AnnotationConfig config;
  config.batch_size = 5;
  AnnotationStore store(SmallPool(10), dir / "log.jsonl", config);
  for (int r = 0; r < 20; ++r) {
    for (int i = 0; i < 10; ++i) {
      if (r == 19 && i == 9) continue;  // e9 ends up with 19 ratings
      ASSERT_EQ(store.Submit("r" + std::to_string(r), "e" + std::to_string(i), 3)
                    .status,
                SubmitStatus::kAccepted);
    }
  }
  const auto batch = store.NextBatch("newcomer");
  ASSERT_TRUE(batch);
  EXPECT_EQ(batch->tasks.front().example_id, "e9");
}

TEST(AnnotationTest, SubmitValidation) {
  TempDir dir;
  AnnotationStore store(SmallPool(4), dir / "log.jsonl");
  EXPECT_EQ(store.Submit("r", "e0", 5).status, SubmitStatus::kAccepted);
  EXPECT_EQ(store.Progress().ratings_total, 1u);
  EXPECT_EQ(store.Submit("r", "e0", 4).status, SubmitStatus::kDuplicate);
  EXPECT_EQ(store.Submit("r", "e1", 6).status, SubmitStatus::kInvalidScore);
  EXPECT_EQ(store.Submit("r", "e1", -1).status, SubmitStatus::kInvalidScore);
  EXPECT_EQ(store.Submit("r", "e1", 2.5).status, SubmitStatus::kInvalidScore);
  EXPECT_EQ(store.Submit("r", "e1", "3").status, SubmitStatus::kInvalidScore);
  EXPECT_EQ(store.Submit("r", "e1", nullptr).status, SubmitStatus::kInvalidScore);
  EXPECT_EQ(store.Submit("r", "nope", 3).status, SubmitStatus::kUnknownExample);
  EXPECT_EQ(store.Submit("", "e1", 3).status, SubmitStatus::kBadRequest);
  EXPECT_EQ(store.Submit("r", "e1", 0.0).status, SubmitStatus::kAccepted);
  EXPECT_EQ(store.Submit("r2", "e0", 0).status, SubmitStatus::kAccepted);
  const ProgressReport p = store.Progress();
  EXPECT_EQ(p.ratings_total, 3u);
  EXPECT_EQ(p.per_example[0].second, 2u);
  EXPECT_EQ(p.per_example[1].second, 1u);
}

TEST(AnnotationTest, EmptyExportIsNotReady) {
  TempDir dir;
  AnnotationStore store(SmallPool(4), dir / "log.jsonl");
  const auto lines = Lines(store.ExportRatings());
  ASSERT_EQ(lines.size(), 4u);
  for (const auto& line : lines) {
    const json j = json::parse(line);
    EXPECT_TRUE(j["ratings"].empty());
    EXPECT_FALSE(j["ready"].get<bool>());
    EXPECT_TRUE(j.contains("origin"));
    EXPECT_TRUE(j.contains("log_p_model"));
  }
  EXPECT_EQ(store.Progress().fully_rated, 0u);
}

TEST(AnnotationTest, FullyRatedExportLoads) {
  TempDir dir;
  AnnotationStore store(SmallPool(6), dir / "log.jsonl");
  std::vector<std::multiset<double>> expected(6);
  for (int r = 0; r < 20; ++r) {
    for (int i = 0; i < 6; ++i) {
      const int score = (r + i) % 6;
      ASSERT_EQ(store.Submit("w" + std::to_string(r), "e" + std::to_string(i), score)
                    .status,
                SubmitStatus::kAccepted);
      expected[i].insert(score);
    }
  }
  const ProgressReport p = store.Progress();
  EXPECT_EQ(p.fully_rated, p.examples_total);
  const std::string first = store.ExportRatings();
  EXPECT_EQ(store.ExportRatings(), first);
  std::istringstream in(first);
  const EvalDataset ds = LoadDataset(in);
  EXPECT_EQ(ds.n_contexts(), 3u);
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& e = ds.examples()[i];
    EXPECT_EQ(std::multiset<double>(e.ratings.begin(), e.ratings.end()), expected[i]);
    EXPECT_EQ(e.rater_ids.size(), 20u);
    EXPECT_EQ(e.log_p_model, -1.0 - static_cast<double>(i));
  }
  for (const auto& line : Lines(first)) {
    EXPECT_TRUE(json::parse(line)["ready"].get<bool>());
  }
}

TEST(AnnotationTest, RestartReplaysLog) {
  TempDir dir;
  std::string before;
  std::string rated;
  {
    AnnotationStore store(FixturePool(), dir / "log.jsonl");
    const auto batch = store.NextBatch("a");
    rated = batch->tasks[0].example_id;
    for (std::size_t i = 0; i < 10; ++i) {
      store.Submit("a", batch->tasks[i].example_id, static_cast<int>(i % 6));
      store.Submit("b", batch->tasks[i].example_id, 5);
    }
    before = store.ExportRatings();
  }
  AnnotationStore reopened(FixturePool(), dir / "log.jsonl");
  EXPECT_EQ(reopened.ExportRatings(), before);
  EXPECT_EQ(reopened.Progress().ratings_total, 20u);
  EXPECT_EQ(reopened.Submit("a", rated, 1).status, SubmitStatus::kDuplicate);
  // Batch ids keep increasing across restarts.
  const auto batch = reopened.NextBatch("z");
  ASSERT_TRUE(batch);
  EXPECT_EQ(batch->batch_id, "b2");
}

TEST(AnnotationTest, TruncatedTailIsDropped) {
  TempDir dir;
  const fs::path log = dir / "log.jsonl";
  {
    AnnotationStore store(SmallPool(4), log);
    store.Submit("r", "e0", 3);
    store.Submit("r", "e1", 4);
  }
  const auto good_size = fs::file_size(log);
  {
    std::ofstream out(log, std::ios::app);
    out << R"({"example_id":"e2","rater_id":"r","sco)";
  }
  AnnotationStore store(SmallPool(4), log);
  EXPECT_EQ(fs::file_size(log), good_size);
  EXPECT_EQ(store.Progress().ratings_total, 2u);
  EXPECT_EQ(store.Submit("r", "e2", 1).status, SubmitStatus::kAccepted);
  AnnotationStore again(SmallPool(4), log);
  EXPECT_EQ(again.Progress().ratings_total, 3u);
}

TEST(AnnotationTest, CorruptLogLineIsAnError) {
  TempDir dir;
  const fs::path log = dir / "log.jsonl";
  {
    std::ofstream out(log);
    out << "garbage\n"
        << R"({"example_id":"e0","rater_id":"r","score":3})" << "\n";
  }
  EXPECT_THROW(AnnotationStore(SmallPool(4), log), InputError);
  {
    std::ofstream out(log);
    out << R"({"example_id":"zzz","rater_id":"r","score":3})" << "\n";
  }
  EXPECT_THROW(AnnotationStore(SmallPool(4), log), InputError);
}

TEST(AnnotationTest, ConcurrentSubmissionsAreAllRecorded) {
  TempDir dir;
  const fs::path log = dir / "log.jsonl";
  AnnotationStore store(FixturePool(), log);
  std::atomic<int> acks{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      const std::string rater = "t" + std::to_string(t);
      for (int i = 0; i < 40; ++i) {
        const std::string id = store.Progress().per_example[i].first;
        if (store.Submit(rater, id, (t + i) % 6).status == SubmitStatus::kAccepted) {
          ++acks;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(acks.load(), 320);
  EXPECT_EQ(store.Progress().ratings_total, 320u);
  std::ifstream in(log);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 320);
}

TEST(AnnotationTest, PoolErrors) {
  std::istringstream dup(
      R"({"example_id":"a","context":"c","output_text":"x","origin":"model","log_p_model":-1})"
      "\n"
      R"({"example_id":"a","context":"c","output_text":"y","origin":"model","log_p_model":-1})");
  EXPECT_THROW(LoadPool(dup), InputError);
  std::istringstream bad(R"({"example_id":"a","output_text":"x","log_p_model":-1})");
  EXPECT_THROW(LoadPool(bad), InputError);
  std::istringstream empty("");
  EXPECT_THROW(LoadPool(empty), InputError);
}

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    fs::create_directories(dir_ / "static");
    std::ofstream(dir_ / "static" / "index.html") << "<html>ui</html>";
    store_ = std::make_unique<AnnotationStore>(FixturePool(), dir_ / "log.jsonl");
    server_ = std::make_unique<AnnotationServer>(*store_, dir_ / "static");
    port_ = server_->Bind("127.0.0.1", 0);
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_->Run(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override {
    server_->Stop();
    thread_.join();
  }

  httplib::Result Post(const json& body) {
    return client_->Post("/api/ratings", body.dump(), "application/json");
  }

  TempDir dir_;
  std::unique_ptr<AnnotationStore> store_;
  std::unique_ptr<AnnotationServer> server_;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
  int port_ = 0;
};

TEST_F(ServerTest, NextBatch) {
  auto missing = client_->Get("/api/tasks/next");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 400);
  auto res = client_->Get("/api/tasks/next?rater_id=alice");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const json body = json::parse(res->body);
  EXPECT_EQ(body["batch"]["tasks"].size(), 25u);
  EXPECT_FALSE(MentionsHiddenField(body));
}

TEST_F(ServerTest, RatingStatusCodes) {
  const std::string id = store_->Progress().per_example[0].first;
  auto ok = Post({{"rater_id", "r"}, {"example_id", id}, {"score", 4}});
  ASSERT_TRUE(ok);
  EXPECT_EQ(ok->status, 200);
  EXPECT_FALSE(MentionsHiddenField(json::parse(ok->body)));
  EXPECT_EQ(Post({{"rater_id", "r"}, {"example_id", id}, {"score", 4}})->status, 409);
  EXPECT_EQ(Post({{"rater_id", "r"}, {"example_id", id + "x"}, {"score", 4}})->status,
            404);
  EXPECT_EQ(Post({{"rater_id", "s"}, {"example_id", id}, {"score", 6}})->status, 422);
  EXPECT_EQ(Post({{"rater_id", "s"}, {"example_id", id}, {"score", 1.5}})->status, 422);
  EXPECT_EQ(Post({{"rater_id", "s"}, {"example_id", id}})->status, 400);
  EXPECT_EQ(client_->Post("/api/ratings", "{", "application/json")->status, 400);
  auto progress = client_->Get("/api/progress");
  ASSERT_TRUE(progress);
  const json p = json::parse(progress->body);
  EXPECT_EQ(p["ratings_total"], 1);
  EXPECT_EQ(p["examples_total"], 200);
  EXPECT_EQ(p["fully_rated"], 0);
  EXPECT_EQ(p["per_example"][id], 1);
}

TEST_F(ServerTest, ExportInstructionsAndStatic) {
  auto exp = client_->Get("/api/export");
  ASSERT_TRUE(exp);
  EXPECT_EQ(exp->status, 200);
  EXPECT_EQ(Lines(exp->body).size(), 200u);
  EXPECT_EQ(client_->Get("/api/export")->body, exp->body);
  auto ins = client_->Get("/api/instructions");
  ASSERT_TRUE(ins);
  const json j = json::parse(ins->body);
  EXPECT_NE(j["text"].get<std::string>().find("UNK"), std::string::npos);
  EXPECT_EQ(j["batch_size"], 25);
  auto page = client_->Get("/");
  ASSERT_TRUE(page);
  EXPECT_EQ(page->status, 200);
  EXPECT_EQ(page->body, "<html>ui</html>");
}

}  // namespace
}  // namespace huse
