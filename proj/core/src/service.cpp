#include "pbo/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace pbo {
namespace {

std::uint64_t branch_seed(const SessionConfig& cfg, std::uint64_t revision, int choice) {
  return derive_seed(cfg.seed, {revision, static_cast<std::uint64_t>(choice)});
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

std::string new_session_id() {
  static std::atomic<std::uint64_t> counter{0};
  std::random_device rd;
  const std::uint64_t r = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  std::ostringstream os;
  os << std::hex << (mix64(r ^ counter.fetch_add(1)) & 0xffffffffffffULL);
  return "s" + os.str();
}

}  // namespace

void SessionConfig::validate() const {
  acquisition.validate();
  if (refit_every < 1) throw InvalidArgument("session: refit_every must be >= 1");
  if (hyper_restarts < 1) throw InvalidArgument("session: hyper_restarts must be >= 1");
  if (hyper_max_evaluations < 1) throw InvalidArgument("session: hyper_max_evaluations must be >= 1");
  if (recommend.raw_candidates < 1) throw InvalidArgument("session: recommend.raw_candidates must be >= 1");
}

json session_config_to_json(const SessionConfig& c) {
  json j = acquisition_spec_to_json(c.acquisition);
  j["algo"] = j.at("kind");
  j.erase("kind");
  j["domain"] = domain_to_json(c.domain);
  j["seed"] = c.seed;
  j["refit_every"] = c.refit_every;
  j["hyper_restarts"] = c.hyper_restarts;
  j["hyper_max_evaluations"] = c.hyper_max_evaluations;
  j["recommend"] = {{"raw_candidates", c.recommend.raw_candidates},
                    {"restarts", c.recommend.restarts},
                    {"max_iterations", c.recommend.max_iterations},
                    {"learning_rate", c.recommend.learning_rate}};
  j["prefetch"] = c.prefetch;
  return j;
}

SessionConfig session_config_from_json(const json& j) {
  if (!j.is_object()) throw InvalidArgument("session: body must be a JSON object");
  if (!j.contains("domain")) throw InvalidArgument("session: missing 'domain'");
  SessionConfig c;
  c.domain = domain_from_json(j.at("domain"));
  json acq = j;
  if (!acq.contains("algo") && !acq.contains("kind")) acq["algo"] = "qeubo";
  acq.erase("domain");
  acq.erase("recommend");
  c.acquisition = acquisition_spec_from_json(acq);
  c.seed = j.value("seed", std::uint64_t{0});
  c.refit_every = j.value("refit_every", c.refit_every);
  c.hyper_restarts = j.value("hyper_restarts", c.hyper_restarts);
  c.hyper_max_evaluations = j.value("hyper_max_evaluations", c.hyper_max_evaluations);
  c.prefetch = j.value("prefetch", c.prefetch);
  if (j.contains("recommend")) {
    const json& r = j.at("recommend");
    c.recommend.raw_candidates = r.value("raw_candidates", c.recommend.raw_candidates);
    c.recommend.restarts = r.value("restarts", c.recommend.restarts);
    c.recommend.max_iterations = r.value("max_iterations", c.recommend.max_iterations);
    c.recommend.learning_rate = r.value("learning_rate", c.recommend.learning_rate);
  }
  c.validate();
  return c;
}

Hyperparameters session_hyperparameters(const SessionConfig& cfg, const PreferenceDataset& ds) {
  const std::size_t k = ds.size() / cfg.refit_every * cfg.refit_every;
  if (k == 0) return Hyperparameters::defaults(cfg.domain);
  HyperFitConfig fit = HyperFitConfig::defaults(cfg.domain);
  fit.restarts = cfg.hyper_restarts;
  fit.max_evaluations = cfg.hyper_max_evaluations;
  fit.seed = derive_seed(cfg.seed, {stream_tag("hyper"), k});
  return fit_hyperparameters(ds.prefix(k), fit);
}

StepResult compute_step(const SessionConfig& cfg, const PreferenceDataset& ds, std::uint64_t revision, int choice,
                        const std::optional<std::pair<std::size_t, Hyperparameters>>& cached) {
  StepResult out;
  out.hyper_prefix = ds.size() / cfg.refit_every * cfg.refit_every;
  out.hyper = cached && cached->first == out.hyper_prefix ? cached->second : session_hyperparameters(cfg, ds);
  const PosteriorModel model = fit_laplace(ds, out.hyper);
  const std::uint64_t seed = branch_seed(cfg, revision, choice);
  Rng acq_rng(derive_seed(seed, {stream_tag("acquisition")}));
  Rng rec_rng(derive_seed(seed, {stream_tag("recommend")}));
  out.query = next_query(model, cfg.acquisition, cfg.domain, ds, acq_rng);
  out.incumbent = recommend(model, cfg.domain, rec_rng, cfg.recommend);
  out.incumbent_mean = model.mean_at(out.incumbent);
  return out;
}

std::string to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::AwaitingResponse: return "awaiting-response";
    case SessionStatus::Computing: return "computing";
    case SessionStatus::Closed: return "closed";
  }
  return "unknown";
}

json snapshot_to_json(const SessionSnapshot& s) {
  json trace = json::array();
  for (std::size_t i = 0; i < s.incumbent_trace.size(); ++i)
    trace.push_back({{"point", point_to_json(s.incumbent_trace[i])}, {"mean", s.incumbent_mean_trace[i]}});
  return {{"session_id", s.id},
          {"revision", s.revision},
          {"status", to_string(s.status)},
          {"config", session_config_to_json(s.config)},
          {"dataset", dataset_to_json(s.dataset)},
          {"query", s.status == SessionStatus::Closed ? json(nullptr) : query_to_json(s.pending)},
          {"incumbent", point_to_json(s.incumbent)},
          {"incumbent_mean", s.incumbent_mean},
          {"incumbent_trace", trace},
          {"prefetch_ready", s.prefetch_ready}};
}

std::string ServiceError::code_name() const {
  switch (code_) {
    case Code::NotFound: return "not_found";
    case Code::Conflict: return "conflict";
    case Code::Invalid: return "invalid_request";
    case Code::Closed: return "session_closed";
  }
  return "error";
}

// ---------------------------------------------------------------------------

struct SessionManager::Session {
  std::mutex mu;  // serializes state transitions
  std::shared_ptr<const SessionSnapshot> snapshot;
  std::optional<std::pair<std::size_t, Hyperparameters>> hyper_cache;
  std::vector<std::shared_future<StepResult>> branches;
  std::vector<std::shared_future<StepResult>> retired;

  std::shared_ptr<const SessionSnapshot> load() const { return std::atomic_load(&snapshot); }
  void publish(SessionSnapshot s) { std::atomic_store(&snapshot, std::make_shared<const SessionSnapshot>(std::move(s))); }

  void retire_branches() {
    for (auto& f : branches)
      if (f.valid()) retired.push_back(std::move(f));
    branches.clear();
    std::erase_if(retired, [](const auto& f) { return f.wait_for(std::chrono::seconds(0)) == std::future_status::ready; });
  }
};

SessionManager::SessionManager(std::filesystem::path data_dir) : data_dir_(std::move(data_dir)) {
  std::filesystem::create_directories(data_dir_);
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(data_dir_))
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) replay(f);
}

SessionManager::~SessionManager() {
  std::lock_guard lock(mu_);
  for (auto& [id, s] : sessions_) {
    std::lock_guard sl(s->mu);
    for (auto& f : s->branches)
      if (f.valid()) f.wait();
    for (auto& f : s->retired) f.wait();
  }
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(ServiceError::Code::NotFound, "unknown session '" + id + "'");
  return it->second;
}

void SessionManager::append_journal(const std::string& id, const json& event) {
  const std::string line = event.dump() + "\n";
  const auto path = data_dir_ / (id + ".jsonl");
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error("journal: cannot open " + path.string() + ": " + std::strerror(errno));
  const char* p = line.data();
  std::size_t left = line.size();
  while (left > 0) {
    const ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw Error("journal: write failed: " + std::string(std::strerror(err)));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  const int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) throw Error("journal: fsync failed: " + std::string(std::strerror(errno)));
}

void SessionManager::launch_prefetch(Session& s, const SessionSnapshot& snap) {
  s.retire_branches();
  if (!snap.config.prefetch || snap.status == SessionStatus::Closed) return;
  const int q = snap.config.acquisition.q;
  s.branches.resize(q);
  for (int c = 0; c < q; ++c) {
    PreferenceDataset ds = snap.dataset.appended(snap.pending, Response{c});
    s.branches[c] = std::async(std::launch::async, [cfg = snap.config, ds = std::move(ds), rev = snap.revision, c,
                                                    cache = s.hyper_cache] {
                      return compute_step(cfg, ds, rev, c, cache);
                    }).share();
    ++branches_launched_;
  }
}

CreateResult SessionManager::create_session(const SessionConfig& cfg) {
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw ServiceError(ServiceError::Code::Invalid, e.what());
  }
  const int q = cfg.acquisition.q;
  StepResult first = compute_step(cfg, PreferenceDataset(q), 0, q);

  SessionSnapshot snap;
  snap.id = new_session_id();
  snap.config = cfg;
  snap.dataset = PreferenceDataset(q);
  snap.pending = first.query;
  snap.incumbent = first.incumbent;
  snap.incumbent_mean = first.incumbent_mean;
  snap.incumbent_trace.push_back(first.incumbent);
  snap.incumbent_mean_trace.push_back(first.incumbent_mean);

  append_journal(snap.id, {{"event", "created"},
                           {"revision", 0},
                           {"timestamp", now_seconds()},
                           {"session_id", snap.id},
                           {"config", session_config_to_json(cfg)},
                           {"incumbent", point_to_json(first.incumbent)},
                           {"incumbent_mean", first.incumbent_mean}});
  append_journal(snap.id, {{"event", "query-issued"},
                           {"revision", 0},
                           {"timestamp", now_seconds()},
                           {"query", query_to_json(first.query)}});

  auto session = std::make_shared<Session>();
  session->hyper_cache = std::make_pair(first.hyper_prefix, first.hyper);
  {
    std::lock_guard sl(session->mu);
    session->publish(snap);
    launch_prefetch(*session, snap);
  }
  {
    std::lock_guard lock(mu_);
    sessions_[snap.id] = session;
  }
  return {snap.id, 0, first.query};
}

SubmitResult SessionManager::submit_response(const std::string& id, std::uint64_t revision, int choice) {
  auto s = find(id);
  std::lock_guard sl(s->mu);
  const auto cur = s->load();
  if (cur->status == SessionStatus::Closed) throw ServiceError(ServiceError::Code::Closed, "session is closed");
  if (revision != cur->revision) {
    std::ostringstream os;
    os << "stale revision " << revision << " (current " << cur->revision << ")";
    throw ServiceError(ServiceError::Code::Conflict, os.str());
  }
  const int q = cur->config.acquisition.q;
  if (choice < 0 || choice >= q) {
    std::ostringstream os;
    os << "choice " << choice << " out of range for q = " << q;
    throw ServiceError(ServiceError::Code::Invalid, os.str());
  }

  SessionSnapshot next = *cur;
  next.dataset = cur->dataset.appended(cur->pending, Response{choice});

  StepResult step;
  bool hit = false;
  if (choice < static_cast<int>(s->branches.size()) && s->branches[choice].valid()) {
    step = s->branches[choice].get();
    hit = true;
    ++prefetch_hits_;
  } else {
    SessionSnapshot computing = *cur;
    computing.status = SessionStatus::Computing;
    s->publish(std::move(computing));
    try {
      step = compute_step(cur->config, next.dataset, cur->revision, choice, s->hyper_cache);
    } catch (...) {
      s->publish(*cur);
      throw;
    }
    ++sync_computations_;
  }

  next.revision = cur->revision + 1;
  next.status = SessionStatus::AwaitingResponse;
  next.pending = step.query;
  next.incumbent = step.incumbent;
  next.incumbent_mean = step.incumbent_mean;
  next.incumbent_trace.push_back(step.incumbent);
  next.incumbent_mean_trace.push_back(step.incumbent_mean);
  next.prefetch_ready.clear();

  append_journal(id, {{"event", "response-accepted"},
                      {"revision", next.revision},
                      {"timestamp", now_seconds()},
                      {"query", query_to_json(cur->pending)},
                      {"choice", choice},
                      {"incumbent", point_to_json(step.incumbent)},
                      {"incumbent_mean", step.incumbent_mean}});
  append_journal(id, {{"event", "query-issued"},
                      {"revision", next.revision},
                      {"timestamp", now_seconds()},
                      {"query", query_to_json(step.query)}});

  s->hyper_cache = std::make_pair(step.hyper_prefix, step.hyper);
  s->publish(next);
  launch_prefetch(*s, next);
  return {next.revision, step.query, step.incumbent, step.incumbent_mean, hit};
}

Recommendation SessionManager::get_recommendation(const std::string& id) {
  auto s = find(id);
  const auto snap = s->load();
  append_journal(id, {{"event", "recommendation-served"},
                      {"revision", snap->revision},
                      {"timestamp", now_seconds()},
                      {"point", point_to_json(snap->incumbent)}});
  return {snap->incumbent, snap->incumbent_mean, snap->incumbent_trace, snap->incumbent_mean_trace};
}

SessionSnapshot SessionManager::get_session(const std::string& id) const {
  auto s = find(id);
  SessionSnapshot snap = *s->load();
  std::unique_lock sl(s->mu, std::try_to_lock);
  if (sl.owns_lock()) {
    for (std::size_t c = 0; c < s->branches.size(); ++c)
      if (s->branches[c].valid() && s->branches[c].wait_for(std::chrono::seconds(0)) == std::future_status::ready)
        snap.prefetch_ready.push_back(static_cast<int>(c));
  }
  return snap;
}

void SessionManager::close_session(const std::string& id) {
  auto s = find(id);
  std::lock_guard sl(s->mu);
  SessionSnapshot next = *s->load();
  if (next.status == SessionStatus::Closed) return;
  append_journal(id, {{"event", "closed"}, {"revision", next.revision}, {"timestamp", now_seconds()}});
  next.status = SessionStatus::Closed;
  s->publish(next);
  s->retire_branches();
}

std::vector<std::string> SessionManager::session_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

ServiceCounters SessionManager::counters() const {
  return {prefetch_hits_.load(), sync_computations_.load(), branches_launched_.load()};
}

void SessionManager::wait_for_prefetch(const std::string& id) {
  auto s = find(id);
  std::lock_guard sl(s->mu);
  for (auto& f : s->branches)
    if (f.valid()) f.wait();
}

void SessionManager::replay(const std::filesystem::path& file) {
  std::ifstream in(file);
  std::string line;
  std::optional<SessionSnapshot> snap;
  std::optional<Query> issued;
  std::uint64_t issued_revision = 0;
  int last_choice = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json ev;
    try {
      ev = json::parse(line);
    } catch (const json::parse_error&) {
      break;  // torn final write; everything before it was acknowledged
    }
    const std::string kind = ev.value("event", "");
    if (kind == "created") {
      snap.emplace();
      snap->id = ev.at("session_id").get<std::string>();
      snap->config = session_config_from_json(ev.at("config"));
      snap->dataset = PreferenceDataset(snap->config.acquisition.q);
      snap->incumbent_trace.push_back(point_from_json(ev.at("incumbent")));
      snap->incumbent_mean_trace.push_back(ev.at("incumbent_mean").get<double>());
    } else if (!snap) {
      throw Error("journal " + file.string() + ": event before 'created'");
    } else if (kind == "response-accepted") {
      const Query X = query_from_json(ev.at("query"));
      last_choice = ev.at("choice").get<int>();
      snap->dataset = snap->dataset.appended(X, Response{last_choice});
      snap->revision = ev.at("revision").get<std::uint64_t>();
      snap->incumbent_trace.push_back(point_from_json(ev.at("incumbent")));
      snap->incumbent_mean_trace.push_back(ev.at("incumbent_mean").get<double>());
    } else if (kind == "query-issued") {
      issued = query_from_json(ev.at("query"));
      issued_revision = ev.at("revision").get<std::uint64_t>();
    } else if (kind == "closed") {
      snap->status = SessionStatus::Closed;
    }
  }
  if (!snap) return;
  if (snap->revision != snap->dataset.size()) throw Error("journal " + file.string() + ": revision/dataset mismatch");

  const int q = snap->config.acquisition.q;
  const StepResult step = snap->dataset.empty()
                              ? compute_step(snap->config, snap->dataset, 0, q)
                              : compute_step(snap->config, snap->dataset, snap->revision - 1, last_choice);
  snap->pending = step.query;
  snap->incumbent = step.incumbent;
  snap->incumbent_mean = step.incumbent_mean;
  snap->incumbent_trace.back() = step.incumbent;
  snap->incumbent_mean_trace.back() = step.incumbent_mean;
  const bool issued_current = issued && issued_revision == snap->revision;
  if (issued_current && !(*issued == step.query))
    throw Error("journal " + file.string() + ": recomputed query differs from the journaled one");
  if (!issued_current) {
    append_journal(snap->id, {{"event", "query-issued"},
                              {"revision", snap->revision},
                              {"timestamp", now_seconds()},
                              {"query", query_to_json(step.query)}});
  }

  auto session = std::make_shared<Session>();
  session->hyper_cache = std::make_pair(step.hyper_prefix, step.hyper);
  {
    std::lock_guard sl(session->mu);
    session->publish(*snap);
    launch_prefetch(*session, *snap);
  }
  std::lock_guard lock(mu_);
  sessions_[snap->id] = session;
}

}  // namespace pbo
