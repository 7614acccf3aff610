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

#include <string>

#include "httplib.h"
#include "huse/annotation.h"
#include "huse/error.h"

namespace huse {

using nlohmann::json;

namespace {

void SendJson(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void SendError(httplib::Response& res, int status, const std::string& message) {
  SendJson(res, status, {{"error", message}});
}

int HttpStatus(SubmitStatus status) {
  switch (status) {
    case SubmitStatus::kAccepted:
      return 200;
    case SubmitStatus::kBadRequest:
      return 400;
    case SubmitStatus::kUnknownExample:
      return 404;
    case SubmitStatus::kInvalidScore:
      return 422;
    case SubmitStatus::kDuplicate:
      return 409;
  }
  return 500;
}

}  // namespace

AnnotationServer::AnnotationServer(
    AnnotationStore& store, std::optional<std::filesystem::path> static_dir)
    : store_(store), server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;

  srv.Get("/api/tasks/next", [this](const httplib::Request& req,
                                    httplib::Response& res) {
    const std::string rater = req.get_param_value("rater_id");
    if (rater.empty()) return SendError(res, 400, "missing rater_id");
    const auto batch = store_.NextBatch(rater);
    SendJson(res, 200, {{"batch", batch ? BatchToJson(*batch) : json(nullptr)}});
  });

  srv.Post("/api/ratings", [this](const httplib::Request& req,
                                  httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error&) {
      return SendError(res, 400, "body is not JSON");
    }
    if (!body.is_object() || !body.contains("rater_id") ||
        !body.contains("example_id") || !body.contains("score") ||
        !body["rater_id"].is_string() || !body["example_id"].is_string()) {
      return SendError(res, 400,
                       "need string rater_id, string example_id and score");
    }
    const SubmitResult r = store_.Submit(body["rater_id"].get<std::string>(),
                                         body["example_id"].get<std::string>(),
                                         body["score"]);
    if (r.status != SubmitStatus::kAccepted) {
      return SendError(res, HttpStatus(r.status), r.message);
    }
    SendJson(res, 200,
             {{"status", "ok"},
              {"example_id", r.stored.rating.example_id},
              {"rater_id", r.stored.rating.rater_id},
              {"score", static_cast<int>(r.stored.rating.score)},
              {"batch_id", r.stored.batch_id},
              {"submitted_at", r.stored.rating.submitted_at},
              {"example_ratings", r.example_count}});
  });

  srv.Get("/api/export", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(store_.ExportRatings(), "application/x-ndjson");
  });

  srv.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
    SendJson(res, 200, ProgressToJson(store_.Progress()));
  });

  srv.Get("/api/instructions", [this](const httplib::Request&,
                                      httplib::Response& res) {
    SendJson(res, 200, {{"version", store_.config().instructions_version},
                        {"text", InstructionsText()},
                        {"batch_size", store_.config().batch_size},
                        {"target_replicates", store_.config().target_replicates},
                        {"min_score", 0},
                        {"max_score", 5}});
  });

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res,
                               std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    SendError(res, 500, message);
  });

  if (static_dir && !srv.set_mount_point("/", static_dir->string())) {
    throw InputError("static directory " + static_dir->string() +
                     " does not exist");
  }
}

AnnotationServer::~AnnotationServer() { Stop(); }

int AnnotationServer::Bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

bool AnnotationServer::Run() { return server_->listen_after_bind(); }

void AnnotationServer::Stop() {
  if (server_) server_->stop();
}

}  // namespace huse
