#include <doctest.h>

#include <fstream>
#include <thread>

#include <httplib.h>

#include "refine_loop/core/error.hpp"
#include "refine_loop/service/annotation_store.hpp"
#include "refine_loop/service/server.hpp"
#include "service_fixture.hpp"
#include "test_support.hpp"

using namespace refine_loop;
using namespace refine_loop::service;
using nlohmann::json;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no Error thrown");
  return ErrorKind::Io;
}

class RunningServer {
 public:
  explicit RunningServer(AnnotationStore& store) : server_(store) {
    port_ = server_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_.run(); });
    for (int i = 0; i < 200 && !server_.running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  ~RunningServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

 private:
  AnnotationServer server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("store: next, submit, last-write-wins, results") {
  testing::TempDir dir;
  testing::build_service_data(dir.path(), 4, "exp");
  AnnotationStore store(dir.path());
  CHECK(store.experiment_ids() == std::vector<std::string>{"exp"});
  CHECK(store.pair_count("exp") == 4);

  const auto first = store.next_pair("exp", "ann1");
  REQUIRE(first.has_value());
  const auto r1 = store.submit_preference("exp", first->pair_id, "ann1", "left");
  const auto r2 = store.submit_preference("exp", first->pair_id, "ann1", "right");
  CHECK(r2 > r1);
  CHECK(store.effective_preferences("exp").size() == 1);
  const auto chain = store.audit_chain("exp", first->pair_id, "ann1");
  REQUIRE(chain.size() == 2);
  CHECK(chain[1].supersedes == r1);
  CHECK(store.next_pair("exp", "ann1")->pair_id != first->pair_id);
  // ann2 gets a pair nobody has judged yet.
  CHECK(store.next_pair("exp", "ann2")->pair_id != first->pair_id);

  CHECK(kind_of([&] { store.submit_preference("exp", "pair-999", "ann1", "left"); }) == ErrorKind::UnknownPair);
  CHECK(kind_of([&] { store.submit_preference("exp", first->pair_id, "ann1", "both"); }) == ErrorKind::InvalidChoice);
  CHECK(kind_of([&] { store.submit_preference("exp", first->pair_id, "", "left"); }) == ErrorKind::InvalidValue);
  CHECK(kind_of([&] { store.submit_preference("nope", first->pair_id, "a", "left"); }) == ErrorKind::UnknownExperiment);

  const ExperimentResults results = store.results("exp");
  CHECK(results.tally.total() == 1);
  const json exported = json::parse(store.export_unblinded("exp").dump());
  CHECK(exported["records"].size() == 2);
  CHECK(exported["records"][0]["effective"] == false);
  CHECK(exported["records"][1]["effective"] == true);

  for (int i = 0; i < 4; ++i) {
    const auto pair = store.next_pair("exp", "ann1");
    if (!pair) break;
    store.submit_preference("exp", pair->pair_id, "ann1", "tie");
  }
  CHECK(!store.next_pair("exp", "ann1").has_value());
}

TEST_CASE("store: results need records and a key") {
  testing::TempDir dir;
  testing::build_service_data(dir.path(), 2, "exp");
  {
    AnnotationStore store(dir.path());
    CHECK(kind_of([&] { store.results("exp"); }) == ErrorKind::NoRecords);
  }
  std::filesystem::remove(dir.path() / "experiments" / "exp" / "key.json");
  AnnotationStore store(dir.path());
  store.submit_preference("exp", "pair-001", "a", "left");
  CHECK(kind_of([&] { store.results("exp"); }) == ErrorKind::KeyUnavailable);
}

TEST_CASE("store: replay after restart and a torn final line") {
  testing::TempDir dir;
  testing::build_service_data(dir.path(), 3, "exp");
  {
    AnnotationStore store(dir.path());
    store.submit_preference("exp", "pair-001", "a", "left");
    store.submit_preference("exp", "pair-002", "a", "right");
    store.submit_attribution("synthetic-001", 0, {2, 1, 2}, "a");
  }
  {
    std::ofstream log(dir.path() / "annotations.log", std::ios::app);
    log << R"({"type": "preference", "record_id": 99, "experim)";
  }
  AnnotationStore store(dir.path());
  CHECK(store.record_count() == 3);
  CHECK(store.effective_preferences("exp").size() == 2);
  const auto next_id = store.submit_preference("exp", "pair-003", "a", "tie");
  CHECK(next_id == 4);
  AnnotationStore again(dir.path());
  CHECK(again.record_count() == 4);
}

TEST_CASE("store: attribution labels and coverage") {
  testing::TempDir dir;
  testing::build_service_data(dir.path(), 1, "exp");
  AnnotationStore store(dir.path());
  const auto before = store.attribution_task("synthetic-001");
  CHECK(before.coverage == 1.0);
  store.submit_attribution("synthetic-001", 0, {}, "a");
  store.submit_attribution("synthetic-001", 1, {3, 1, 3}, "a");
  const auto view = store.attribution_task("synthetic-001");
  CHECK(view.summary.sentences[0].attributions.empty());
  CHECK(view.summary.sentences[1].attributions == std::vector<std::size_t>{1, 3});
  CHECK(view.coverage < 1.0);
  CHECK(kind_of([&] { store.submit_attribution("nope", 0, {}, "a"); }) == ErrorKind::UnknownDialogue);
  CHECK(kind_of([&] { store.submit_attribution("synthetic-001", 99, {}, "a"); }) == ErrorKind::UnknownSentence);
  CHECK(kind_of([&] { store.submit_attribution("synthetic-001", 0, {999}, "a"); }) == ErrorKind::InvalidTurnIndex);
}

TEST_CASE("blinded payloads hide system identity") {
  testing::TempDir dir;
  testing::build_service_data(dir.path(), 3, "exp");
  AnnotationStore store(dir.path());
  const auto pair = store.next_pair("exp", "a");
  const std::string payload = blinded_pair_json(*pair).dump();
  for (const char* leak : {testing::kSystemA, testing::kSystemB, "origin", "refined", "inserted", "revision_round",
                           "attributions", "\"A\"", "\"B\""}) {
    CHECK_MESSAGE(payload.find(leak) == std::string::npos, leak);
  }
}

TEST_CASE("http API end to end") {
  testing::TempDir dir;
  testing::build_service_data(dir.path(), 2, "exp");
  AnnotationStore store(dir.path());
  RunningServer server(store);
  auto client = server.client();

  CHECK(client.Get("/healthz")->status == 200);
  auto next = client.Get("/experiments/exp/next?annotator=u1");
  REQUIRE(next);
  CHECK(next->status == 200);
  const json pair = json::parse(next->body);
  CHECK(pair["status"] == "OK");
  const std::string pid = pair["pair_id"];

  auto posted = client.Post("/experiments/exp/pairs/" + pid + "/preference",
                            json{{"choice", "left"}, {"annotator_id", "u1"}}.dump(), "application/json");
  REQUIRE(posted);
  CHECK(posted->status == 201);
  CHECK(json::parse(posted->body).contains("record_id"));

  CHECK(client.Post("/experiments/exp/pairs/" + pid + "/preference", json{{"choice", "maybe"}, {"annotator_id", "u1"}}.dump(),
                    "application/json")
            ->status == 400);
  CHECK(client.Post("/experiments/exp/pairs/pair-404/preference", json{{"choice", "left"}, {"annotator_id", "u1"}}.dump(),
                    "application/json")
            ->status == 404);
  CHECK(client.Post("/experiments/exp/pairs/" + pid + "/preference", "not json", "application/json")->status == 400);
  CHECK(client.Get("/experiments/none/next?annotator=u1")->status == 404);

  auto results = client.Get("/experiments/exp/results");
  CHECK(results->status == 200);
  CHECK(json::parse(results->body)["tally"]["total"] == 1);
  CHECK(client.Get("/experiments/exp/export")->status == 200);

  const std::string other = pid == "pair-001" ? "pair-002" : "pair-001";
  client.Post("/experiments/exp/pairs/" + other + "/preference", json{{"choice", "tie"}, {"annotator_id", "u1"}}.dump(),
              "application/json");
  CHECK(json::parse(client.Get("/experiments/exp/next?annotator=u1")->body)["status"] == "NO_TASKS");

  auto task = client.Get("/attribution/synthetic-001");
  CHECK(task->status == 200);
  CHECK(json::parse(task->body)["coverage"] == 1.0);
  CHECK(client.Post("/attribution/synthetic-001/sentences/0", json{{"turn_indices", {1, 2}}, {"annotator_id", "u1"}}.dump(),
                    "application/json")
            ->status == 201);
  CHECK(client.Post("/attribution/synthetic-001/sentences/0", json{{"turn_indices", {-1}}, {"annotator_id", "u1"}}.dump(),
                    "application/json")
            ->status == 400);
  CHECK(client.Post("/attribution/synthetic-001/sentences/77", json{{"turn_indices", {1}}, {"annotator_id", "u1"}}.dump(),
                    "application/json")
            ->status == 404);
}

TEST_CASE("http status mapping") {
  CHECK(http_status(ErrorKind::UnknownPair) == 404);
  CHECK(http_status(ErrorKind::InvalidChoice) == 400);
  CHECK(http_status(ErrorKind::NoRecords) == 409);
  CHECK(http_status(ErrorKind::Io) == 500);
}
