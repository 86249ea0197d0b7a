#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "ptdt/rankserve/session.hpp"

namespace ptdt::rank {

// HTTP front end for a RankingSession. Serves the JSON API under /api and,
// when `static_dir` is set, the UI bundle at /.
class RankServer {
 public:
  RankServer(RankingSession& session, std::filesystem::path static_dir = {});
  ~RankServer();
  RankServer(const RankServer&) = delete;
  RankServer& operator=(const RankServer&) = delete;

  // Binds and serves on a background thread; port 0 picks a free port.
  // Returns the bound port.
  int start(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace ptdt::rank
