#include <doctest.h>

#include <thread>

#include <httplib.h>

#include "refine_loop/core/error.hpp"
#include "refine_loop/llm/gateway.hpp"
#include "refine_loop/llm/http_backend.hpp"
#include "refine_loop/llm/registry.hpp"
#include "refine_loop/llm/scripted_backend.hpp"
#include "refine_loop/llm/structured.hpp"
#include "test_support.hpp"

using namespace refine_loop;
using nlohmann::json;

namespace {

ChatRequest request(std::string text, std::string role = "draft", int round = 0) {
  ChatRequest r;
  r.messages = {{ChatRole::System, "sys"}, {ChatRole::User, std::move(text)}};
  r.tag.agent_role = std::move(role);
  r.tag.round = round;
  return r;
}

RetryPolicy fast_retry(int attempts = 3) { return RetryPolicy{attempts, 1, 2.0}; }

class FlakyBackend final : public Backend {
 public:
  explicit FlakyBackend(int failures) : failures_(failures) {}
  std::string id() const override { return "flaky"; }
  ChatResponse send(const ChatRequest&) override {
    if (calls_++ < failures_) throw TransportError("connection refused");
    return ChatResponse{"ok"};
  }
  int calls() const { return calls_; }

 private:
  int failures_;
  std::atomic<int> calls_{0};
};

// Local chat-completions stub on a free port.
class StubServer {
 public:
  explicit StubServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", handler);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string completion_body(const std::string& content, const std::string& finish = "stop") {
  return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}, {"finish_reason", finish}}}},
              {"usage", {{"prompt_tokens", 7}, {"completion_tokens", 3}}}}
      .dump();
}

}  // namespace

TEST_CASE("scripted backend: first matching entry in listed order wins") {
  const auto entries = parse_script(R"({"entries": [
    {"matcher": "contains_substring", "key": "refund", "response": "R1", "role": "draft"},
    {"matcher": "contains_substring", "key": "refund", "response": "R2"},
    {"matcher": "contains_substring", "key": "", "response": {"x": 1}, "round": 2},
    {"matcher": "sequence_position", "key": "3", "response": "fourth"}
  ]})");
  ScriptedBackend backend("s", entries);
  CHECK(backend.send(request("about a refund")).content == "R1");
  CHECK(backend.send(request("about a refund", "refine")).content == "R2");
  CHECK(backend.send(request("other", "refine", 2)).content == R"({"x":1})");
  CHECK(backend.send(request("other")).content == "fourth");
  try {
    backend.send(request("other"));
    FAIL("expected ScriptMiss");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ScriptMiss);
  }
}

TEST_CASE("scripted backend: exact prompt hash") {
  const ChatRequest r = request("hash me");
  const std::string fp = prompt_fingerprint(r.messages);
  CHECK(fp.size() == 16);
  ScriptedBackend backend("s", {{ScriptMatcher::ExactPromptHash, fp, "hit"}});
  CHECK(backend.send(r).content == "hit");
  CHECK_THROWS_AS(backend.send(request("other")), Error);
}

TEST_CASE("complete appends exactly one trace entry per call") {
  TraceLog trace;
  ScriptedBackend ok("s", {{ScriptMatcher::ContainsSubstring, "", "fine"}});
  complete(request("a"), ok, fast_retry(), trace);
  CHECK(trace.size() == 1);

  ScriptedBackend empty("s", {});
  CHECK_THROWS_AS(complete(request("a"), empty, fast_retry(), trace), Error);
  CHECK(trace.size() == 2);
  CHECK(!trace.entries().back().error.empty());

  FlakyBackend flaky(2);
  CHECK(complete(request("a"), flaky, fast_retry(3), trace).content == "ok");
  CHECK(trace.size() == 3);
  CHECK(trace.entries().back().attempts == 3);

  FlakyBackend dead(10);
  try {
    complete(request("a"), dead, fast_retry(3), trace);
    FAIL("expected BackendUnreachable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BackendUnreachable);
  }
  CHECK(dead.calls() == 3);
  CHECK(trace.size() == 4);

  ScriptedBackend cut("s", {{ScriptMatcher::ContainsSubstring, "", "partial", {}, {}, FinishReason::Length}});
  try {
    complete(request("a"), cut, fast_retry(), trace);
    FAIL("expected TokenLimit");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TokenLimit);
  }
  CHECK(trace.size() == 5);

  ChatRequest bad = request("a");
  bad.temperature = -1;
  CHECK_THROWS_AS(complete(bad, ok, fast_retry(), trace), Error);
  CHECK(trace.size() == 6);
  CHECK(trace.to_jsonl().find("\"agent_role\"") != std::string::npos);
}

TEST_CASE("wire payload carries the reasoning field and seed") {
  HttpBackendConfig config;
  config.model = "m";
  config.reasoning_field = "reasoning_effort";
  ChatRequest r = request("hi");
  CHECK(!build_wire_payload(r, config).contains("reasoning_effort"));
  r.reasoning_level = ReasoningLevel::High;
  r.seed = 42;
  r.tag.agent_role = "secret";
  const json payload = build_wire_payload(r, config);
  CHECK(payload["reasoning_effort"] == "high");
  CHECK(payload["seed"] == 42);
  CHECK(payload["model"] == "m");
  CHECK(payload["messages"].size() == 2);
  CHECK(payload.dump().find("secret") == std::string::npos);
  config.reasoning_field = "reasoning_level";
  CHECK(build_wire_payload(r, config)["reasoning_level"] == "high");
}

TEST_CASE("http backend retries 5xx and succeeds against a stub server") {
  std::atomic<int> hits{0};
  json seen;
  std::mutex mutex;
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    if (hits++ < 2) {
      res.status = 503;
      return;
    }
    std::lock_guard lock(mutex);
    seen = json::parse(req.body);
    res.set_content(completion_body("hello"), "application/json");
  });
  HttpBackendConfig config;
  config.base_url = stub.base_url();
  config.model = "stub-model";
  config.timeout_ms = 5000;
  HttpBackend backend(config);
  TraceLog trace;
  ChatRequest r = request("hi");
  r.reasoning_level = ReasoningLevel::Low;
  const ChatResponse response = complete(r, backend, fast_retry(3), trace);
  CHECK(response.content == "hello");
  CHECK(response.usage.prompt_tokens == 7);
  CHECK(hits == 3);
  CHECK(trace.size() == 1);
  CHECK(trace.entries()[0].attempts == 3);
  CHECK(seen["reasoning_effort"] == "low");
}

TEST_CASE("http backend: 4xx is not retried, exhausted retries are BackendUnreachable") {
  std::atomic<int> hits{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 400;
    res.set_content("bad", "text/plain");
  });
  HttpBackendConfig config;
  config.base_url = stub.base_url();
  HttpBackend backend(config);
  TraceLog trace;
  try {
    complete(request("x"), backend, fast_retry(3), trace);
    FAIL("expected BackendRejected");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BackendRejected);
  }
  CHECK(hits == 1);

  HttpBackendConfig closed;
  closed.base_url = "http://127.0.0.1:1/v1";
  closed.timeout_ms = 500;
  HttpBackend unreachable(closed);
  try {
    complete(request("x"), unreachable, fast_retry(2), trace);
    FAIL("expected BackendUnreachable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BackendUnreachable);
  }
  CHECK(trace.size() == 2);
}

TEST_CASE("parse_payload repairs fences, prose and curly quotes once") {
  CHECK(parse_payload("{\"a\": 1}")["a"] == 1);
  CHECK(parse_payload("Sure! ```json\n{\"a\": 2}\n``` done")["a"] == 2);
  CHECK(parse_payload("{\xE2\x80\x9C" "a\xE2\x80\x9D: 3}")["a"] == 3);
  try {
    parse_payload("no json here");
    FAIL("expected UnparseablePayload");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnparseablePayload);
  }
}

TEST_CASE("check_fields and StructuredRecord") {
  const Schema schema = {{"n", FieldKind::Integer, true}, {"t", FieldKind::Text, false}};
  CHECK_NOTHROW(check_fields(json{{"n", 1}}, schema));
  try {
    check_fields(json{{"t", "x"}}, schema);
    FAIL("expected MissingField");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingField);
  }
  try {
    check_fields(json{{"n", "one"}}, schema);
    FAIL("expected WrongKind");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::WrongKind);
  }
  const StructuredRecord record = extract_structured(ChatResponse{R"({"n": 5, "t": "x"})"}, schema);
  CHECK(record.integer("n") == 5);
  CHECK(record.text("t") == "x");
}

TEST_CASE("registry builds scripted and http backends from config") {
  const json config = {{"fixture", {{"kind", "scripted"}, {"script", "scripts/alice_bob_two_rounds.json"}}},
                       {"remote", {{"kind", "http"}, {"base_url", "http://127.0.0.1:9/v1"}, {"model", "m"}}}};
  BackendRegistry registry = registry_from_json(config, testing::fixtures_dir());
  CHECK(registry.contains("fixture"));
  CHECK(registry.get("remote")->id() == "remote");
  CHECK_THROWS_AS(registry.get("nope"), Error);
}
