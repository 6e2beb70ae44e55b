#pragma once

// Human-in-the-loop session manager. Each session serves one pending query
// at a time; while the DM deliberates, the next query is computed for every
// possible response. Sessions are journaled as line-delimited JSON and
// rebuilt from the journal on startup.
//
// The query issued after a response is a pure function of the session
// config, the dataset and the seed derive_seed(session seed, {revision,
// choice}), where revision is the one the response was submitted against.
// The first query uses choice = q. Prefetched and synchronous paths
// therefore agree bit for bit.

#include "pbo/acquisition.hpp"
#include "pbo/bench.hpp"
#include "pbo/core.hpp"
#include "pbo/preference_model.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace pbo {

struct SessionConfig {
  Domain domain = Domain::box(Point::Zero(1), Point::Ones(1));
  AcquisitionSpec acquisition;
  std::uint64_t seed = 0;
  /// Hyperparameters are refit on the first k·refit_every observations.
  int refit_every = 5;
  int hyper_restarts = 1;
  int hyper_max_evaluations = 100;
  RecommendOptions recommend;
  bool prefetch = true;

  void validate() const;
};

json session_config_to_json(const SessionConfig& cfg);
/// {domain, q, algo, seed} plus optional acquisition fields (mc_samples,
/// restarts, raw_candidates, max_iterations, learning_rate, rff_features,
/// ts_candidates), refit_every, hyper_restarts, hyper_max_evaluations,
/// recommend {raw_candidates, restarts, max_iterations, learning_rate} and
/// prefetch.
SessionConfig session_config_from_json(const json& j);

struct StepResult {
  Query query;
  Point incumbent;
  double incumbent_mean = 0.0;
  /// Refit point (observation count) the hyperparameters belong to.
  std::size_t hyper_prefix = 0;
  Hyperparameters hyper;
};

/// Hyperparameters in effect for `ds`: defaults below refit_every
/// observations, otherwise a fit on the largest multiple-of-refit_every
/// prefix with a seed derived from that prefix length.
Hyperparameters session_hyperparameters(const SessionConfig& cfg, const PreferenceDataset& ds);

/// Next query and incumbent for `ds`. `cached`, if it belongs to the same
/// refit prefix, is reused instead of refitting.
StepResult compute_step(const SessionConfig& cfg, const PreferenceDataset& ds, std::uint64_t revision, int choice,
                        const std::optional<std::pair<std::size_t, Hyperparameters>>& cached = std::nullopt);

enum class SessionStatus { AwaitingResponse, Computing, Closed };
std::string to_string(SessionStatus s);

struct SessionSnapshot {
  std::string id;
  SessionConfig config;
  std::uint64_t revision = 0;
  SessionStatus status = SessionStatus::AwaitingResponse;
  PreferenceDataset dataset;
  Query pending;
  Point incumbent;
  double incumbent_mean = 0.0;
  std::vector<Point> incumbent_trace;
  std::vector<double> incumbent_mean_trace;
  /// Responses whose prefetched next query has finished.
  std::vector<int> prefetch_ready;
};

json snapshot_to_json(const SessionSnapshot& s);

class ServiceError : public Error {
 public:
  enum class Code { NotFound, Conflict, Invalid, Closed };
  ServiceError(Code code, const std::string& what) : Error(what), code_(code) {}
  Code code() const noexcept { return code_; }
  /// "not_found", "conflict", "invalid_request", "session_closed".
  std::string code_name() const;

 private:
  Code code_;
};

struct CreateResult {
  std::string session_id;
  std::uint64_t revision = 0;
  Query query;
};

struct SubmitResult {
  std::uint64_t revision = 0;
  Query query;
  Point incumbent;
  double incumbent_mean = 0.0;
  bool prefetch_hit = false;
};

struct Recommendation {
  Point point;
  double mean = 0.0;
  std::vector<Point> trace;
  std::vector<double> mean_trace;
};

struct ServiceCounters {
  std::uint64_t prefetch_hits = 0;
  std::uint64_t synchronous_computations = 0;
  std::uint64_t branches_launched = 0;
};

class SessionManager {
 public:
  /// Creates `data_dir` if needed and replays every journal found there.
  explicit SessionManager(std::filesystem::path data_dir);
  /// Waits for in-flight prefetch branches.
  ~SessionManager();
  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  CreateResult create_session(const SessionConfig& cfg);
  /// Throws ServiceError: NotFound, Conflict on a stale revision, Invalid on
  /// an out-of-range choice, Closed on a closed session.
  SubmitResult submit_response(const std::string& id, std::uint64_t revision, int choice);
  Recommendation get_recommendation(const std::string& id);
  SessionSnapshot get_session(const std::string& id) const;
  void close_session(const std::string& id);
  std::vector<std::string> session_ids() const;
  ServiceCounters counters() const;
  /// Blocks until every prefetch branch of the session has finished.
  void wait_for_prefetch(const std::string& id);

  const std::filesystem::path& data_dir() const noexcept { return data_dir_; }

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;
  void launch_prefetch(Session& s, const SessionSnapshot& snap);
  void append_journal(const std::string& id, const json& event);
  void replay(const std::filesystem::path& file);

  std::filesystem::path data_dir_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::atomic<std::uint64_t> prefetch_hits_{0}, sync_computations_{0}, branches_launched_{0};
};

}  // namespace pbo
