#include "ptdt/rankserve/server.hpp"

#include <httplib.h>

#include <json.hpp>
#include <thread>

#include "ptdt/common/errors.hpp"

namespace ptdt::rank {

using nlohmann::json;

struct RankServer::Impl {
  httplib::Server http;
  std::thread thread;
};

namespace {

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", message}}.dump(), "application/json");
}

// Accepts a bare JSON array or {"ranking": [...], "iteration": t}.
bool parse_ranking(const std::string& body, std::vector<int>& out, std::optional<int>& iteration, std::string& error) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    error = "body is not valid JSON";
    return false;
  }
  if (j.is_object()) {
    if (j.contains("iteration")) {
      if (!j["iteration"].is_number_integer()) {
        error = "iteration must be an integer";
        return false;
      }
      iteration = j["iteration"].get<int>();
    }
    j = j.value("ranking", json());
  }
  if (!j.is_array()) {
    error = "body must be an array of candidate indices";
    return false;
  }
  for (const auto& v : j) {
    if (!v.is_number_integer()) {
      error = "candidate indices must be integers";
      return false;
    }
    out.push_back(v.get<int>());
  }
  return true;
}

}  // namespace

RankServer::RankServer(RankingSession& session, std::filesystem::path static_dir) : impl_(std::make_unique<Impl>()) {
  auto& http = impl_->http;
  http.Get("/api/session", [&session](const httplib::Request&, httplib::Response& res) {
    res.set_content(session.session_json(), "application/json");
  });
  http.Get("/api/candidates", [&session](const httplib::Request&, httplib::Response& res) {
    auto body = session.candidates_json();
    if (!body) return send_error(res, 404, "no candidates: session is not awaiting a ranking");
    res.set_content(*body, "application/json");
  });
  http.Post("/api/ranking", [&session](const httplib::Request& req, httplib::Response& res) {
    std::vector<int> ranking;
    std::optional<int> iteration;
    std::string error;
    if (!parse_ranking(req.body, ranking, iteration, error)) return send_error(res, 400, error);
    switch (session.submit(ranking, &error, iteration)) {
      case Submit::Accepted:
        res.set_content(json{{"accepted", true}, {"ranking", ranking}}.dump(), "application/json");
        return;
      case Submit::NotAwaiting: return send_error(res, 409, error);
      case Submit::Invalid: return send_error(res, 400, error);
    }
  });
  http.Get("/api/trace", [&session](const httplib::Request&, httplib::Response& res) {
    res.set_content(session.trace_json(), "application/json");
  });
  http.Post("/api/abort", [&session](const httplib::Request&, httplib::Response& res) {
    session.abort("aborted via API");
    res.set_content(session.session_json(), "application/json");
  });
  if (!static_dir.empty()) {
    if (!std::filesystem::is_directory(static_dir)) throw DataError("UI bundle directory not found: " + static_dir.string());
    http.set_mount_point("/", static_dir.string());
  }
}

RankServer::~RankServer() { stop(); }

int RankServer::start(const std::string& host, int port) {
  auto& http = impl_->http;
  port_ = port == 0 ? http.bind_to_any_port(host) : (http.bind_to_port(host, port) ? port : -1);
  if (port_ < 0) throw DataError("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  http.wait_until_ready();
  return port_;
}

void RankServer::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace ptdt::rank
