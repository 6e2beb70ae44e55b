#include "pbo/service.hpp"
#include "pbo/simulation.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

using namespace pbo;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> n{0};
    path_ = fs::temp_directory_path() /
            ("pbo_service_test_" + std::to_string(::getpid()) + "_" + std::to_string(n.fetch_add(1)));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

SessionConfig small_config(int q = 2, std::uint64_t seed = 1) {
  SessionConfig c;
  c.domain = Domain::box(Point::Zero(2), Point::Ones(2));
  c.acquisition.q = q;
  c.acquisition.mc_samples = 32;
  c.acquisition.restarts = 2;
  c.acquisition.raw_candidates = 64;
  c.acquisition.max_iterations = 20;
  c.seed = seed;
  c.refit_every = 5;
  c.hyper_max_evaluations = 30;
  c.recommend.raw_candidates = 64;
  c.recommend.restarts = 1;
  c.recommend.max_iterations = 20;
  return c;
}

int dm_choice(const Query& X) {
  // Deterministic DM preferring points near (0.7, 0.2).
  int best = 0;
  double best_u = -1e300;
  for (int i = 0; i < X.size(); ++i) {
    const double u = -(X.points[i] - (Point(2) << 0.7, 0.2).finished()).squaredNorm();
    if (u > best_u) {
      best_u = u;
      best = i;
    }
  }
  return best;
}

}  // namespace

TEST(Service, CreateReturnsInBoundsQuery) {
  TempDir dir;
  SessionManager mgr(dir.path());
  SessionConfig c = small_config();
  c.domain = Domain::box(Point::Zero(3), Point::Ones(3));
  const CreateResult r = mgr.create_session(c);
  EXPECT_EQ(r.revision, 0u);
  ASSERT_EQ(r.query.size(), 2);
  validate_query(c.domain, r.query);
  EXPECT_TRUE(fs::exists(dir.path() / (r.session_id + ".jsonl")));
}

TEST(Service, SameSeedSameFirstQueryDistinctIds) {
  TempDir dir;
  SessionManager mgr(dir.path());
  const CreateResult a = mgr.create_session(small_config());
  const CreateResult b = mgr.create_session(small_config());
  EXPECT_NE(a.session_id, b.session_id);
  EXPECT_EQ(a.query, b.query);
}

TEST(Service, RejectsQOne) {
  TempDir dir;
  SessionManager mgr(dir.path());
  SessionConfig c = small_config();
  c.acquisition.q = 1;
  try {
    mgr.create_session(c);
    FAIL() << "expected ServiceError";
  } catch (const ServiceError& e) {
    EXPECT_EQ(e.code(), ServiceError::Code::Invalid);
  }
  EXPECT_THROW(session_config_from_json({{"domain", domain_to_json(c.domain)}, {"q", 1}}), InvalidArgument);
}

TEST(Service, PrefetchHitSkipsSynchronousPath) {
  TempDir dir;
  SessionManager mgr(dir.path());
  const CreateResult r = mgr.create_session(small_config());
  mgr.wait_for_prefetch(r.session_id);
  const auto before = mgr.counters();
  const SubmitResult s = mgr.submit_response(r.session_id, 0, 1);
  EXPECT_TRUE(s.prefetch_hit);
  EXPECT_EQ(mgr.counters().synchronous_computations, before.synchronous_computations);
  EXPECT_EQ(mgr.counters().prefetch_hits, before.prefetch_hits + 1);
  EXPECT_EQ(s.revision, 1u);

  // The prefetched query equals what the synchronous path computes.
  const SessionSnapshot snap = mgr.get_session(r.session_id);
  const StepResult sync = compute_step(small_config(), snap.dataset, 0, 1);
  EXPECT_EQ(sync.query, s.query);
  EXPECT_EQ(sync.incumbent, s.incumbent);
}

TEST(Service, SynchronousPathWithoutPrefetch) {
  TempDir dir;
  SessionManager mgr(dir.path());
  SessionConfig c = small_config();
  c.prefetch = false;
  const CreateResult r = mgr.create_session(c);
  const SubmitResult s = mgr.submit_response(r.session_id, 0, 0);
  EXPECT_FALSE(s.prefetch_hit);
  EXPECT_EQ(mgr.counters().synchronous_computations, 1u);
  EXPECT_EQ(mgr.counters().branches_launched, 0u);
}

TEST(Service, StaleRevisionConflictLeavesStateUnchanged) {
  TempDir dir;
  SessionManager mgr(dir.path());
  const CreateResult r = mgr.create_session(small_config());
  mgr.submit_response(r.session_id, 0, 0);
  const SessionSnapshot before = mgr.get_session(r.session_id);
  try {
    mgr.submit_response(r.session_id, 0, 1);
    FAIL() << "expected conflict";
  } catch (const ServiceError& e) {
    EXPECT_EQ(e.code(), ServiceError::Code::Conflict);
    EXPECT_EQ(e.code_name(), "conflict");
  }
  const SessionSnapshot after = mgr.get_session(r.session_id);
  EXPECT_EQ(after.revision, before.revision);
  EXPECT_EQ(after.dataset, before.dataset);
  EXPECT_EQ(after.pending, before.pending);
}

TEST(Service, ChoiceOutOfRangeAndUnknownSession) {
  TempDir dir;
  SessionManager mgr(dir.path());
  const CreateResult r = mgr.create_session(small_config());
  try {
    mgr.submit_response(r.session_id, 0, 2);
    FAIL();
  } catch (const ServiceError& e) {
    EXPECT_EQ(e.code(), ServiceError::Code::Invalid);
  }
  try {
    mgr.submit_response("nope", 0, 0);
    FAIL();
  } catch (const ServiceError& e) {
    EXPECT_EQ(e.code(), ServiceError::Code::NotFound);
  }
  EXPECT_THROW(mgr.get_recommendation("nope"), ServiceError);
}

TEST(Service, ConcurrentSubmitsHaveOneWinner) {
  TempDir dir;
  SessionManager mgr(dir.path());
  const CreateResult r = mgr.create_session(small_config());
  std::atomic<int> ok{0}, conflicts{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&, t] {
      try {
        mgr.submit_response(r.session_id, 0, t % 2);
        ++ok;
      } catch (const ServiceError& e) {
        if (e.code() == ServiceError::Code::Conflict) ++conflicts;
      }
    });
  for (auto& th : threads) th.join();
  EXPECT_EQ(ok.load(), 1);
  EXPECT_EQ(conflicts.load(), 3);
  EXPECT_EQ(mgr.get_session(r.session_id).revision, 1u);
}

TEST(Service, ClosedSessionIsReadOnly) {
  TempDir dir;
  SessionManager mgr(dir.path());
  const CreateResult r = mgr.create_session(small_config());
  mgr.submit_response(r.session_id, 0, 0);
  mgr.close_session(r.session_id);
  try {
    mgr.submit_response(r.session_id, 1, 0);
    FAIL();
  } catch (const ServiceError& e) {
    EXPECT_EQ(e.code(), ServiceError::Code::Closed);
  }
  const Recommendation rec = mgr.get_recommendation(r.session_id);
  EXPECT_EQ(rec.trace.size(), 2u);
  EXPECT_EQ(mgr.get_session(r.session_id).status, SessionStatus::Closed);
  EXPECT_TRUE(snapshot_to_json(mgr.get_session(r.session_id)).at("query").is_null());
}

TEST(Service, FreshRecommendationDeterministic) {
  TempDir dir;
  SessionManager mgr(dir.path());
  const Recommendation a = mgr.get_recommendation(mgr.create_session(small_config()).session_id);
  const Recommendation b = mgr.get_recommendation(mgr.create_session(small_config()).session_id);
  EXPECT_EQ(a.point, b.point);
  EXPECT_EQ(a.mean, b.mean);
}

TEST(Service, JournalReplayReproducesState) {
  TempDir dir, killed;
  std::string id;
  SessionSnapshot live;
  Recommendation live_rec;
  {
    SessionManager mgr(dir.path());
    const CreateResult r = mgr.create_session(small_config());
    id = r.session_id;
    Query X = r.query;
    for (std::uint64_t rev = 0; rev < 12; ++rev) X = mgr.submit_response(id, rev, dm_choice(X)).query;
    live = mgr.get_session(id);
    live_rec = mgr.get_recommendation(id);
    // Simulated kill: only what is on disk now survives.
    fs::copy(dir.path(), killed.path(), fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  }
  SessionManager restarted(killed.path());
  const SessionSnapshot back = restarted.get_session(id);
  EXPECT_EQ(back.dataset, live.dataset);
  EXPECT_EQ(back.revision, live.revision);
  EXPECT_EQ(back.pending, live.pending);
  EXPECT_EQ(back.incumbent, live.incumbent);
  EXPECT_EQ(back.incumbent_trace, live.incumbent_trace);

  // The served recommendation equals an offline recommend() on the replayed dataset.
  const StepResult offline = compute_step(small_config(), back.dataset, back.revision - 1,
                                          back.dataset.observations().back().response.choice);
  EXPECT_EQ(offline.incumbent, live_rec.point);
  EXPECT_EQ(restarted.get_recommendation(id).point, live_rec.point);

  // The restarted session continues exactly like the original would.
  SessionManager original(dir.path());
  const SubmitResult a = original.submit_response(id, back.revision, 1);
  const SubmitResult b = restarted.submit_response(id, back.revision, 1);
  EXPECT_EQ(a.query, b.query);
}

TEST(Service, ReplayDetectsTamperedQuery) {
  TempDir dir;
  std::string id;
  {
    SessionManager mgr(dir.path());
    id = mgr.create_session(small_config()).session_id;
    mgr.submit_response(id, 0, 0);
  }
  const fs::path file = dir.path() / (id + ".jsonl");
  std::ofstream(file, std::ios::app) << json{{"event", "query-issued"},
                                             {"revision", 1},
                                             {"timestamp", 0.0},
                                             {"query", {{0.5, 0.5}, {0.25, 0.25}}}}
                                            .dump()
                                     << '\n';
  EXPECT_THROW(SessionManager{dir.path()}, Error);
}

TEST(Service, TornFinalLineIsIgnored) {
  TempDir dir;
  std::string id;
  SessionSnapshot live;
  {
    SessionManager mgr(dir.path());
    id = mgr.create_session(small_config()).session_id;
    mgr.submit_response(id, 0, 1);
    live = mgr.get_session(id);
  }
  std::ofstream(dir.path() / (id + ".jsonl"), std::ios::app) << "{\"event\": \"response-acc";
  SessionManager back(dir.path());
  EXPECT_EQ(back.get_session(id).dataset, live.dataset);
}

TEST(Service, HyperparametersArePureFunctionOfDataset) {
  const SessionConfig c = small_config();
  Rng rng(3);
  PreferenceDataset ds(2);
  for (int i = 0; i < 11; ++i) {
    const Query X{{c.domain.sample(rng), c.domain.sample(rng)}};
    ds = ds.appended(X, Response{dm_choice(X)});
  }
  const Hyperparameters a = session_hyperparameters(c, ds);
  const Hyperparameters b = session_hyperparameters(c, ds.prefix(10));
  EXPECT_EQ(a.lengthscales, b.lengthscales);
  EXPECT_EQ(a.noise_level, b.noise_level);
  const Hyperparameters d = session_hyperparameters(c, ds.prefix(4));
  EXPECT_EQ(d.lengthscales, Hyperparameters::defaults(c.domain).lengthscales);
}

TEST(Service, ConfigJsonRoundTrip) {
  SessionConfig c = small_config(3, 42);
  c.acquisition.kind = AcquisitionKind::Qei;
  const SessionConfig back = session_config_from_json(json::parse(session_config_to_json(c).dump()));
  EXPECT_EQ(back.acquisition.q, 3);
  EXPECT_EQ(back.acquisition.kind, AcquisitionKind::Qei);
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.acquisition.mc_samples, 32);
  EXPECT_EQ(back.hyper_max_evaluations, 30);
  EXPECT_EQ(back.domain.upper(), c.domain.upper());
}
