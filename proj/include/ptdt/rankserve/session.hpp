#pragma once

#include <array>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ptdt/zorank/zorank.hpp"

namespace ptdt::rank {

inline constexpr int kSessionFormatVersion = 1;

enum class SessionState { Idle, AwaitingRanking, Finished, Aborted };
std::string_view to_string(SessionState s);
SessionState parse_session_state(std::string_view s);

// What a person sees for one candidate: rollout polylines in 2-D plus the
// task context. The return is withheld unless the session reveals it.
struct CandidatePayload {
  int index = 0;
  std::vector<std::vector<std::array<double, 2>>> trajectories;
  double episodic_return = 0.0;
  std::string task;
  std::vector<double> task_params;
};

using Renderer = std::function<std::vector<CandidatePayload>(const zo::Candidates&, int iteration)>;

struct SessionConfig {
  zo::TunerConfig tuner;
  std::string session_id;
  std::string task;  // description shown in the UI
  bool reveal_returns = false;
};

// Result of a ranking submission.
enum class Submit { Accepted, NotAwaiting, Invalid };

// Shared state between the HTTP layer and the tuning worker: one pending
// query and one pending answer. Every transition is persisted to
// <dir>/session.json; the trace goes to <dir>/trace.jsonl.
class RankingSession {
 public:
  RankingSession(SessionConfig cfg, std::filesystem::path dir);

  // Loads a persisted session if one exists; returns the saved loop state
  // when the session was interrupted mid-run.
  std::optional<zo::ZoState> restore();

  // Worker side.
  void begin_iteration(const zo::ZoState& state);
  std::vector<int> await_ranking(std::vector<CandidatePayload> payloads, int iteration);
  void record_trace(const zo::TuneTrace& trace);
  void finish(const zo::TuneTrace& trace, const std::vector<double>& x);

  // HTTP side.
  // `iteration`, when given, must name the pending query; a ranking for an
  // already-resolved iteration is rejected as NotAwaiting.
  Submit submit(const std::vector<int>& ranking, std::string* error, std::optional<int> iteration = std::nullopt);
  void abort(const std::string& reason);

  SessionState state() const;
  int iteration() const;
  const SessionConfig& config() const { return cfg_; }
  std::string session_json() const;
  std::optional<std::string> candidates_json() const;
  std::string trace_json() const;
  std::vector<std::vector<int>> rankings() const;

  // Blocks until the session leaves awaiting/idle or `pred` holds.
  bool wait_for(const std::function<bool(SessionState, int)>& pred, double timeout_seconds) const;

 private:
  void persist_locked() const;

  SessionConfig cfg_;
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  SessionState state_ = SessionState::Idle;
  int iteration_ = 0;
  std::vector<CandidatePayload> payloads_;
  std::optional<std::vector<int>> answer_;
  std::vector<std::vector<int>> rankings_;
  std::optional<zo::ZoState> loop_;
  zo::TuneTrace trace_;
  std::vector<double> final_x_;
  std::string abort_reason_;
};

// RankingOracle backed by a session: renders the candidates, publishes them
// and blocks until a ranking arrives. Abort surfaces as OracleError.
class ExternalOracle : public zo::RankingOracle {
 public:
  ExternalOracle(RankingSession& session, Renderer render) : session_(&session), render_(std::move(render)) {}
  std::vector<int> rank(const zo::Candidates& candidates, int k, int iteration) override;

 private:
  RankingSession* session_;
  Renderer render_;
};

// Runs the tuning loop against the session until it finishes or is
// aborted, resuming from the persisted loop state when there is one.
zo::ZoResult run_session(RankingSession& session, zo::ZoState initial, const Renderer& render,
                         const zo::ZoHooks& hooks = {});

}  // namespace ptdt::rank
