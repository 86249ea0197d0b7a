#include "ptdt/rankserve/session.hpp"

#include <chrono>
#include <fstream>
#include <json.hpp>
#include <set>

#include "ptdt/common/errors.hpp"

namespace ptdt::rank {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::Idle: return "idle";
    case SessionState::AwaitingRanking: return "awaiting_ranking";
    case SessionState::Finished: return "finished";
    case SessionState::Aborted: return "aborted";
  }
  return "idle";
}

SessionState parse_session_state(std::string_view s) {
  if (s == "idle") return SessionState::Idle;
  if (s == "awaiting_ranking") return SessionState::AwaitingRanking;
  if (s == "finished") return SessionState::Finished;
  if (s == "aborted") return SessionState::Aborted;
  throw ParseError("unknown session state '" + std::string(s) + "'", 0);
}

namespace {

json payload_json(const CandidatePayload& p, bool with_return) {
  json trajs = json::array();
  for (const auto& t : p.trajectories) {
    json pts = json::array();
    for (const auto& xy : t) pts.push_back({xy[0], xy[1]});
    trajs.push_back(std::move(pts));
  }
  json j = {{"index", p.index}, {"task", p.task}, {"task_params", p.task_params}, {"trajectories", trajs}};
  if (with_return) j["return"] = p.episodic_return;
  return j;
}

CandidatePayload payload_from(const json& j) {
  CandidatePayload p;
  p.index = j.at("index");
  p.task = j.at("task");
  p.task_params = j.at("task_params").get<std::vector<double>>();
  p.episodic_return = j.value("return", 0.0);
  for (const auto& t : j.at("trajectories")) {
    std::vector<std::array<double, 2>> pts;
    for (const auto& xy : t) pts.push_back({xy.at(0).get<double>(), xy.at(1).get<double>()});
    p.trajectories.push_back(std::move(pts));
  }
  return p;
}

void write_file(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

}  // namespace

RankingSession::RankingSession(SessionConfig cfg, fs::path dir) : cfg_(std::move(cfg)), dir_(std::move(dir)) {
  cfg_.tuner.validate();
  fs::create_directories(dir_);
}

std::optional<zo::ZoState> RankingSession::restore() {
  std::lock_guard lock(mu_);
  std::ifstream in(dir_ / "session.json");
  if (!in) return std::nullopt;
  json j = json::parse(in);
  if (j.value("format_version", -1) != kSessionFormatVersion) throw VersionError("session file version mismatch");
  const auto& t = j.at("tuner");
  if (t.at("T") != cfg_.tuner.T || t.at("m") != cfg_.tuner.m || t.at("k") != cfg_.tuner.k) {
    throw ConfigError("persisted session in " + dir_.string() + " was started with a different T/m/k");
  }
  cfg_.session_id = j.at("session_id");
  state_ = parse_session_state(j.at("state").get<std::string>());
  iteration_ = j.at("iteration");
  rankings_ = j.at("rankings").get<std::vector<std::vector<int>>>();
  abort_reason_ = j.value("abort_reason", "");
  payloads_.clear();
  for (const auto& p : j.at("payloads")) payloads_.push_back(payload_from(p));
  if (j.contains("trace")) trace_ = zo::trace_from_jsonl(j.at("trace").get<std::string>());
  if (j.contains("final_x")) final_x_ = j.at("final_x").get<std::vector<double>>();
  if (state_ == SessionState::Finished || state_ == SessionState::Aborted || !j.contains("loop")) return std::nullopt;
  zo::ZoState st;
  st.iteration = j.at("loop").at("iteration");
  st.x = j.at("loop").at("x").get<std::vector<double>>();
  st.rng = j.at("loop").at("rng");
  st.trace = zo::trace_from_jsonl(j.at("loop").at("trace").get<std::string>());
  // The worker re-publishes the same candidates when it reaches the query.
  state_ = SessionState::Idle;
  loop_ = st;
  return st;
}

void RankingSession::persist_locked() const {
  json payloads = json::array();
  for (const auto& p : payloads_) payloads.push_back(payload_json(p, true));
  json j = {{"format_version", kSessionFormatVersion},
            {"session_id", cfg_.session_id},
            {"state", std::string(to_string(state_))},
            {"iteration", iteration_},
            {"task", cfg_.task},
            {"tuner", {{"T", cfg_.tuner.T}, {"m", cfg_.tuner.m}, {"k", cfg_.tuner.k}}},
            {"rankings", rankings_},
            {"payloads", payloads},
            {"trace", zo::trace_to_jsonl(trace_)},
            {"abort_reason", abort_reason_}};
  if (loop_) {
    j["loop"] = {{"iteration", loop_->iteration},
                 {"x", loop_->x},
                 {"rng", loop_->rng},
                 {"trace", zo::trace_to_jsonl(loop_->trace)}};
  }
  if (!final_x_.empty()) j["final_x"] = final_x_;
  write_file(dir_ / "session.json", j.dump() + "\n");
}

void RankingSession::begin_iteration(const zo::ZoState& state) {
  std::lock_guard lock(mu_);
  if (state_ == SessionState::Aborted) return;
  loop_ = state;
  trace_ = state.trace;
  persist_locked();
}

std::vector<int> RankingSession::await_ranking(std::vector<CandidatePayload> payloads, int iteration) {
  std::unique_lock lock(mu_);
  if (state_ == SessionState::Aborted) throw OracleError("ranking session aborted: " + abort_reason_);
  payloads_ = std::move(payloads);
  iteration_ = iteration;
  answer_.reset();
  state_ = SessionState::AwaitingRanking;
  persist_locked();
  cv_.notify_all();
  cv_.wait(lock, [&] { return answer_.has_value() || state_ == SessionState::Aborted; });
  if (!answer_) throw OracleError("ranking session aborted: " + abort_reason_);
  auto ranking = std::move(*answer_);
  answer_.reset();
  rankings_.push_back(ranking);
  state_ = SessionState::Idle;
  persist_locked();
  cv_.notify_all();
  return ranking;
}

void RankingSession::record_trace(const zo::TuneTrace& trace) {
  std::lock_guard lock(mu_);
  trace_ = trace;
  write_file(dir_ / "trace.jsonl", zo::trace_to_jsonl(trace_));
}

void RankingSession::finish(const zo::TuneTrace& trace, const std::vector<double>& x) {
  std::lock_guard lock(mu_);
  trace_ = trace;
  final_x_ = x;
  loop_.reset();
  if (state_ != SessionState::Aborted) state_ = trace.aborted ? SessionState::Aborted : SessionState::Finished;
  if (trace.aborted && abort_reason_.empty()) abort_reason_ = trace.abort_reason;
  write_file(dir_ / "trace.jsonl", zo::trace_to_jsonl(trace_));
  persist_locked();
  cv_.notify_all();
}

Submit RankingSession::submit(const std::vector<int>& ranking, std::string* error, std::optional<int> iteration) {
  std::lock_guard lock(mu_);
  if (state_ != SessionState::AwaitingRanking || answer_) {
    if (error) *error = "no ranking is pending (state " + std::string(to_string(state_)) + ")";
    return Submit::NotAwaiting;
  }
  if (iteration && *iteration != iteration_) {
    if (error) *error = "iteration " + std::to_string(*iteration) + " is not pending (current " + std::to_string(iteration_) + ")";
    return Submit::NotAwaiting;
  }
  if (int(ranking.size()) != cfg_.tuner.k) {
    if (error) *error = "ranking must list exactly k=" + std::to_string(cfg_.tuner.k) + " candidates";
    return Submit::Invalid;
  }
  std::set<int> seen;
  for (int i : ranking) {
    if (i < 0 || i >= cfg_.tuner.m) {
      if (error) *error = "candidate index " + std::to_string(i) + " out of range";
      return Submit::Invalid;
    }
    if (!seen.insert(i).second) {
      if (error) *error = "duplicate candidate index " + std::to_string(i);
      return Submit::Invalid;
    }
  }
  answer_ = ranking;
  state_ = SessionState::Idle;
  cv_.notify_all();
  return Submit::Accepted;
}

void RankingSession::abort(const std::string& reason) {
  std::lock_guard lock(mu_);
  if (state_ == SessionState::Finished || state_ == SessionState::Aborted) return;
  state_ = SessionState::Aborted;
  abort_reason_ = reason;
  persist_locked();
  cv_.notify_all();
}

SessionState RankingSession::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

int RankingSession::iteration() const {
  std::lock_guard lock(mu_);
  return iteration_;
}

std::vector<std::vector<int>> RankingSession::rankings() const {
  std::lock_guard lock(mu_);
  return rankings_;
}

std::string RankingSession::session_json() const {
  std::lock_guard lock(mu_);
  json j = {{"session_id", cfg_.session_id},
            {"state", std::string(to_string(state_))},
            {"iteration", iteration_},
            {"T", cfg_.tuner.T},
            {"m", cfg_.tuner.m},
            {"k", cfg_.tuner.k},
            {"task", cfg_.task},
            {"reveal_returns", cfg_.reveal_returns},
            {"rankings_submitted", rankings_.size()}};
  if (!abort_reason_.empty()) j["abort_reason"] = abort_reason_;
  return j.dump();
}

std::optional<std::string> RankingSession::candidates_json() const {
  std::lock_guard lock(mu_);
  if (state_ != SessionState::AwaitingRanking) return std::nullopt;
  json c = json::array();
  for (const auto& p : payloads_) c.push_back(payload_json(p, cfg_.reveal_returns));
  return json{{"iteration", iteration_}, {"m", cfg_.tuner.m}, {"k", cfg_.tuner.k}, {"candidates", c}}.dump();
}

std::string RankingSession::trace_json() const {
  std::lock_guard lock(mu_);
  json rows = json::array();
  for (const auto& r : trace_.rows) {
    json row = {{"iteration", r.iteration}, {"ranking", r.ranking}, {"grad_norm", r.grad_norm}, {"noop", r.noop}};
    if (cfg_.reveal_returns && r.eval_return) row["eval_return"] = *r.eval_return;
    rows.push_back(std::move(row));
  }
  return json{{"d_x", trace_.d_x},
              {"model_parameters", trace_.model_parameters},
              {"parameter_ratio", trace_.parameter_ratio()},
              {"T", cfg_.tuner.T},
              {"oracle_calls", trace_.oracle_calls},
              {"aborted", trace_.aborted},
              {"rows", rows}}
      .dump();
}

bool RankingSession::wait_for(const std::function<bool(SessionState, int)>& pred, double timeout_seconds) const {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, std::chrono::duration<double>(timeout_seconds), [&] { return pred(state_, iteration_); });
}

std::vector<int> ExternalOracle::rank(const zo::Candidates& candidates, int k, int iteration) {
  if (k != session_->config().tuner.k) throw ContractError("external oracle: k does not match the session");
  auto payloads = render_(candidates, iteration);
  calls_ += candidates.size();
  return session_->await_ranking(std::move(payloads), iteration);
}

zo::ZoResult run_session(RankingSession& session, zo::ZoState initial, const Renderer& render,
                         const zo::ZoHooks& hooks) {
  auto resume = session.restore();
  const auto st = session.state();
  if (st == SessionState::Finished || st == SessionState::Aborted) {
    throw ContractError("ranking session already " + std::string(to_string(st)));
  }
  ExternalOracle oracle(session, render);
  zo::ZoHooks h = hooks;
  h.before_query = [&](const zo::ZoState& s) {
    session.begin_iteration(s);
    if (hooks.before_query) hooks.before_query(s);
  };
  h.on_row = [&](const zo::TuneTrace& t) {
    session.record_trace(t);
    if (hooks.on_row) hooks.on_row(t);
  };
  const zo::ZoState& start = resume ? *resume : initial;
  auto result = zo::zo_rank_sgd(oracle, start.x, session.config().tuner, h, &start);
  session.finish(result.trace, result.x);
  return result;
}

}  // namespace ptdt::rank
