#pragma once

#include <atomic>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>

#include <json.hpp>

#include "boars/engine.hpp"
#include "boars/log.hpp"
#include "boars/run_record.hpp"
#include "boars/synthetic.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines an _res macro.
#include <httplib.h>

namespace boars {

enum class SessionStatus { Running, AwaitingHuman, Finished, Aborted };

inline const char* to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::Running: return "running";
    case SessionStatus::AwaitingHuman: return "awaiting_human";
    case SessionStatus::Finished: return "finished";
    case SessionStatus::Aborted: return "aborted";
  }
  return "unknown";
}

/// Synthetic generator settings accepted over the wire; unknown keys are
/// rejected so typos don't silently fall back to defaults.
inline SyntheticConfig synthetic_config_from_json(const nlohmann::json& j) {
  SyntheticConfig c;
  static const char* known[] = {"seed", "height", "width", "spectrum_len", "correlation", "smoothness"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    require(ok, ErrorCode::InvalidArgument, "unknown synthetic option '" + key + "'");
  }
  try {
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    c.spectrum_len = j.value("spectrum_len", c.spectrum_len);
    c.correlation = j.value("correlation", c.correlation);
    c.smoothness = j.value("smoothness", c.smoothness);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed synthetic options: ") + e.what());
  }
  c.validate();
  return c;
}

/// {"path": "..."} loads a dataset file; {"synthetic": {...}} generates one.
inline std::shared_ptr<const SpectralGrid> grid_from_json(const nlohmann::json& j) {
  if (j.contains("path")) return std::make_shared<const SpectralGrid>(load_dataset(j.at("path").get<std::string>()));
  require(j.contains("synthetic"), ErrorCode::InvalidArgument, "dataset needs 'path' or 'synthetic'");
  const auto& s = j.at("synthetic");
  const std::uint64_t seed = s.value("seed", std::uint64_t{0});
  return std::make_shared<const SpectralGrid>(generate_synthetic_grid(synthetic_config_from_json(s), seed));
}

/// "interactive" (null voter), "threshold", or {"replay": script}.
inline std::unique_ptr<Voter> voter_from_json(const nlohmann::json& j) {
  if (j.is_null() || (j.is_string() && j.get<std::string>() == "interactive")) return nullptr;
  if (j.is_string() && j.get<std::string>() == "threshold") return std::make_unique<ThresholdVoter>();
  if (j.is_object() && j.contains("replay"))
    return std::make_unique<ReplayVoter>(ReplayVoter::from_json(j.at("replay")));
  throw Error(ErrorCode::InvalidArgument, "voter must be 'interactive', 'threshold' or {\"replay\": ...}");
}

/// One BOARS run driven by a worker thread. Every public method takes the
/// session lock, so requests against one session are serialized.
class Session {
 public:
  Session(std::string id, std::shared_ptr<const SpectralGrid> grid, BOConfig config, std::unique_ptr<Voter> voter)
      : id_(std::move(id)), grid_(grid), exp_(std::move(config), grid), voter_(std::move(voter)) {
    worker_ = std::thread([this] { run(); });
  }

  ~Session() {
    {
      std::lock_guard lock(mu_);
      shutdown_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
  }

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const { return id_; }

  SessionStatus status() const {
    std::lock_guard lock(mu_);
    return status_;
  }

  nlohmann::json state() const {
    std::lock_guard lock(mu_);
    return state_locked();
  }

  nlohmann::json pending_spectrum() const {
    std::lock_guard lock(mu_);
    const Pending& p = exp_.pending();
    require(status_ == SessionStatus::AwaitingHuman && p.kind != Pending::Kind::None, ErrorCode::NotFound,
            "no spectrum is pending");
    return {{"index", index_json(p.index)},
            {"spectrum", vector_json(p.spectrum)},
            {"bias", vector_json(grid_->bias())},
            {"kind", p.kind == Pending::Kind::Vote ? "vote" : "satisfaction"}};
  }

  nlohmann::json target() const {
    std::lock_guard lock(mu_);
    const auto& t = exp_.target_state();
    return {{"target", t.target ? vector_json(*t.target) : nlohmann::json(nullptr)},
            {"phase", to_string(t.phase)},
            {"vote_weight", t.vote_weight},
            {"frozen", t.phase == Phase::Automated}};
  }

  /// Row-major values over the candidate lattice.
  nlohmann::json maps(const std::string& kind) const {
    std::lock_guard lock(mu_);
    const Lattice& lat = exp_.lattice();
    const Vector* values = nullptr;
    if (kind == "mean" || kind == "variance") {
      const auto& m = exp_.latest_maps();
      require(m.has_value(), ErrorCode::NotFound, "no map has been computed yet");
      values = kind == "mean" ? &m->mean : &m->variance;
    } else if (kind == "truth" || kind == "error") {
      require(evaluated_ && evaluated_->truth, ErrorCode::NotFound,
              "truth and error maps need a finished run with a frozen target");
      values = kind == "truth" ? &*evaluated_->truth : &*evaluated_->error;
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown map kind '" + kind + "'");
    }
    return {{"kind", kind},
            {"rows", lat.rows},
            {"cols", lat.cols},
            {"row_offset", lat.row_offset},
            {"col_offset", lat.col_offset},
            {"values", vector_json(*values)}};
  }

  nlohmann::json submit_vote(int vote, double preference) {
    std::unique_lock lock(mu_);
    require(status_ == SessionStatus::AwaitingHuman && exp_.pending().kind == Pending::Kind::Vote,
            ErrorCode::Conflict, "no vote is pending");
    exp_.submit_vote({vote, preference});  // validates before touching state
    resume_locked();
    return state_locked();
  }

  nlohmann::json submit_satisfaction(bool satisfied) {
    std::unique_lock lock(mu_);
    require(status_ == SessionStatus::AwaitingHuman && exp_.pending().kind == Pending::Kind::Satisfaction,
            ErrorCode::Conflict, "no satisfaction prompt is pending");
    exp_.submit_satisfaction(satisfied);
    resume_locked();
    return state_locked();
  }

  nlohmann::json abort(const std::string& reason = "aborted by operator") {
    std::unique_lock lock(mu_);
    require(status_ == SessionStatus::Running || status_ == SessionStatus::AwaitingHuman, ErrorCode::Conflict,
            "session already " + std::string(to_string(status_)));
    abort_requested_ = true;
    exp_.abort(reason);
    status_ = SessionStatus::Aborted;
    cv_.notify_all();
    return state_locked();
  }

  void export_to(const std::filesystem::path& dir) const {
    std::lock_guard lock(mu_);
    require(status_ == SessionStatus::Finished || status_ == SessionStatus::Aborted, ErrorCode::Conflict,
            "session is still running");
    export_run(exp_.record(), dir, evaluated_);
  }

  RunRecord record() const {
    std::lock_guard lock(mu_);
    return exp_.record();
  }

  std::optional<MapSet> evaluated() const {
    std::lock_guard lock(mu_);
    return evaluated_;
  }

  /// Blocks until the session needs a human or has ended.
  SessionStatus wait_until_settled(std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return status_ != SessionStatus::Running; });
    return status_;
  }

  /// True if the session ever parked waiting for a human.
  bool ever_awaited_human() const {
    std::lock_guard lock(mu_);
    return ever_awaited_;
  }

 private:
  nlohmann::json state_locked() const {
    const Pending& p = exp_.pending();
    nlohmann::json pending = nullptr;
    if (status_ == SessionStatus::AwaitingHuman && p.kind != Pending::Kind::None) {
      pending = {{"kind", p.kind == Pending::Kind::Vote ? "vote" : "satisfaction"},
                 {"index", index_json(p.index)},
                 {"iteration", p.iteration}};
      if (p.kind == Pending::Kind::Vote) {
        pending["spectrum"] = vector_json(p.spectrum);
        pending["bias"] = vector_json(grid_->bias());
      }
    }
    const auto& t = exp_.target_state();
    nlohmann::json j = {{"id", id_},
                        {"status", to_string(status_)},
                        {"iteration", exp_.iteration()},
                        {"explored_count", exp_.explored_count()},
                        {"votes_cast", exp_.votes_cast()},
                        {"phase", to_string(t.phase)},
                        {"pending", pending},
                        {"target", t.target ? vector_json(*t.target) : nlohmann::json(nullptr)},
                        {"maps_available", exp_.latest_maps().has_value()}};
    if (evaluated_ && evaluated_->mse) j["mse"] = *evaluated_->mse;
    if (!error_.empty()) j["error"] = error_;
    return j;
  }

  void resume_locked() {
    status_ = SessionStatus::Running;
    cv_.notify_all();
  }

  // Worker: runs compute steps, answering prompts itself when scripted and
  // parking otherwise. The lock is released between steps.
  void run() {
    std::unique_lock lock(mu_);
    try {
      while (!shutdown_ && !abort_requested_) {
        if (status_ == SessionStatus::AwaitingHuman) {
          cv_.wait(lock, [&] { return shutdown_ || abort_requested_ || status_ != SessionStatus::AwaitingHuman; });
          continue;
        }
        if (exp_.done()) break;
        if (exp_.step()) {
          lock.unlock();
          std::this_thread::yield();
          lock.lock();
          continue;
        }
        if (exp_.done()) break;
        if (voter_) {
          answer_scripted();
        } else {
          status_ = SessionStatus::AwaitingHuman;
          ever_awaited_ = true;
          cv_.notify_all();
        }
      }
      if (!abort_requested_ && exp_.done()) finish_locked();
    } catch (const std::exception& e) {
      error_ = e.what();
      log::error("session " + id_ + ": " + error_);
      exp_.abort(error_);
      status_ = SessionStatus::Aborted;
    }
    cv_.notify_all();
  }

  void answer_scripted() {
    const Pending& p = exp_.pending();
    if (p.kind == Pending::Kind::Vote) {
      const auto target = exp_.target_state().target;
      exp_.submit_vote(voter_->vote({p.index, p.spectrum, grid_->bias(), target, exp_.votes_cast()}));
    } else {
      exp_.submit_satisfaction(
          voter_->satisfied({*exp_.target_state().target, exp_.votes_cast(), p.iteration}));
    }
  }

  void finish_locked() {
    if (exp_.status() == RunStatus::Finished) {
      const RunRecord r = exp_.record();
      if (r.frozen && r.final_target) {
        const Vector truth = ground_truth_map(*grid_, *r.final_target, r.config.window, r.config.ssim);
        evaluated_ = evaluate_run(r, truth);
      }
      status_ = SessionStatus::Finished;
      log::info("session " + id_ + " finished");
    } else {
      status_ = SessionStatus::Aborted;
    }
  }

  std::string id_;
  std::shared_ptr<const SpectralGrid> grid_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  Experiment exp_;
  std::unique_ptr<Voter> voter_;
  SessionStatus status_ = SessionStatus::Running;
  bool shutdown_ = false;
  bool abort_requested_ = false;
  bool ever_awaited_ = false;
  std::string error_;
  std::optional<MapSet> evaluated_;
  std::thread worker_;  // last: starts after every other member exists
};

class SessionManager {
 public:
  /// Validates the config against the grid before anything starts.
  std::string create(std::shared_ptr<const SpectralGrid> grid, BOConfig config, std::unique_ptr<Voter> voter) {
    require(grid != nullptr, ErrorCode::InvalidArgument, "session needs a dataset");
    config.validate_against(*grid);
    std::lock_guard lock(mu_);
    const std::string id = next_id_locked();
    sessions_.emplace(id, std::make_shared<Session>(id, std::move(grid), std::move(config), std::move(voter)));
    log::info("session " + id + " created");
    return id;
  }

  std::shared_ptr<Session> get(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    require(it != sessions_.end(), ErrorCode::NotFound, "unknown session '" + id + "'");
    return it->second;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

 private:
  std::string next_id_locked() {
    char buf[24];
    std::snprintf(buf, sizeof buf, "s%04llx%08llx", static_cast<unsigned long long>(++counter_),
                  static_cast<unsigned long long>(rng_() & 0xffffffffULL));
    return buf;
  }

  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
  std::mt19937_64 rng_{std::random_device{}()};
};

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Conflict:
    case ErrorCode::InvalidState: return 409;
    case ErrorCode::InvalidArgument:
    case ErrorCode::Format:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::OutOfRange:
    case ErrorCode::DegenerateSpectrum:
    case ErrorCode::NonFinite: return 400;
    default: return 500;
  }
}

/// JSON-over-HTTP front end. Handlers only parse, delegate and serialize.
class ApiServer {
 public:
  explicit ApiServer(SessionManager& manager) : manager_(manager) { routes(); }

  /// Binds to `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port) {
    if (port == 0) return server_.bind_to_any_port(host);
    require(server_.bind_to_port(host, port), ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
    return port;
  }

  bool serve() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  bool running() const { return server_.is_running(); }

 private:
  using Handler = std::function<nlohmann::json(const httplib::Request&)>;

  void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  httplib::Server::Handler wrap(Handler h, int ok = 200) {
    return [this, h, ok](const httplib::Request& req, httplib::Response& res) {
      try {
        reply(res, ok, h(req));
      } catch (const Error& e) {
        reply(res, http_status(e.code()), {{"error", to_string(e.code())}, {"message", e.what()}});
      } catch (const nlohmann::json::exception& e) {
        reply(res, 400, {{"error", "format"}, {"message", e.what()}});
      } catch (const std::exception& e) {
        reply(res, 500, {{"error", "internal"}, {"message", e.what()}});
      }
    };
  }

  static nlohmann::json body(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    try {
      return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Format, std::string("request body is not JSON: ") + e.what());
    }
  }

  std::shared_ptr<Session> session(const httplib::Request& req) { return manager_.get(req.path_params.at("id")); }

  void routes() {
    const std::string base = "/api/v1/sessions";
    server_.Post(base, wrap([this](const httplib::Request& req) {
      const auto b = body(req);
      auto grid = grid_from_json(b.value("dataset", nlohmann::json::object()));
      BOConfig config = config_from_json(b.value("config", nlohmann::json::object()));
      const std::string id =
          manager_.create(std::move(grid), std::move(config), voter_from_json(b.value("voter", nlohmann::json())));
      return nlohmann::json{{"id", id}};
    }, 201));
    server_.Get(base + "/:id", wrap([this](const httplib::Request& req) { return session(req)->state(); }));
    server_.Get(base + "/:id/spectrum",
                wrap([this](const httplib::Request& req) { return session(req)->pending_spectrum(); }));
    server_.Get(base + "/:id/target", wrap([this](const httplib::Request& req) { return session(req)->target(); }));
    server_.Get(base + "/:id/maps", wrap([this](const httplib::Request& req) {
      const std::string kind = req.has_param("kind") ? req.get_param_value("kind") : "mean";
      return session(req)->maps(kind);
    }));
    server_.Post(base + "/:id/vote", wrap([this](const httplib::Request& req) {
      const auto b = body(req);
      require(b.contains("vote") && b.at("vote").is_number_integer(), ErrorCode::InvalidArgument,
              "'vote' must be an integer");
      const double pref = b.contains("preference") ? b.at("preference").get<double>() : 0.5;
      return session(req)->submit_vote(b.at("vote").get<int>(), pref);
    }));
    server_.Post(base + "/:id/satisfaction", wrap([this](const httplib::Request& req) {
      const auto b = body(req);
      require(b.contains("satisfied") && b.at("satisfied").is_boolean(), ErrorCode::InvalidArgument,
              "'satisfied' must be a boolean");
      return session(req)->submit_satisfaction(b.at("satisfied").get<bool>());
    }));
    server_.Post(base + "/:id/abort", wrap([this](const httplib::Request& req) { return session(req)->abort(); }));
    server_.Post(base + "/:id/export", wrap([this](const httplib::Request& req) {
      const auto b = body(req);
      require(b.contains("path") && b.at("path").is_string(), ErrorCode::InvalidArgument, "'path' must be a string");
      session(req)->export_to(b.at("path").get<std::string>());
      return nlohmann::json{{"path", b.at("path")}};
    }));
  }

  SessionManager& manager_;
  httplib::Server server_;
};

}  // namespace boars
