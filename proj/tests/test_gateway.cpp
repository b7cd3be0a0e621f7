#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

#include "cultmap/gateway.hpp"
#include "cultmap/stub.hpp"
#include "helpers.hpp"

using namespace cultmap;
using namespace std::chrono_literals;

namespace {

std::string fixed_clock() { return "2024-01-01T00:00:00Z"; }

ModelConfig stub_config(const std::string& endpoint = "http://stub.invalid") {
  ModelConfig cfg;
  cfg.model = "stub-alpha";
  cfg.endpoint = endpoint;
  cfg.api_key_env = "";
  cfg.backoff_base = 1ms;
  return cfg;
}

/// Localhost server that answers like the stub model, optionally failing the
/// first N requests with 429.
class StubServer {
 public:
  StubServer() {
    const auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      const auto n = requests_.fetch_add(1);
      {
        std::lock_guard lock(mu_);
        last_auth_ = req.get_header_value("Authorization");
      }
      if (n < throttle_first_) {
        res.status = 429;
        res.set_header("Retry-After", "0");
        res.set_content(R"({"error":"rate limited"})", "application/json");
        return;
      }
      const auto r = backend_.post(req.path, req.body, {}, 1s);
      res.status = r.status;
      res.set_content(r.body, "application/json");
    };
    server_.Post("/v1/chat/completions", handler);
    server_.Post("/v1/completions", handler);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  void throttle_first(std::size_t n) { throttle_first_ = n; }
  std::size_t requests() const { return requests_.load(); }
  std::string last_auth() {
    std::lock_guard lock(mu_);
    return last_auth_;
  }

 private:
  httplib::Server server_;
  stub::StubTransport backend_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<std::size_t> requests_{0};
  std::size_t throttle_first_ = 0;
  std::mutex mu_;
  std::string last_auth_;
};

std::vector<PromptBundle> baseline_matrix(ApiMode mode = ApiMode::Chat) {
  return build_matrix("stub-alpha", mode, parse_variant_set("0-9"));
}

std::shared_ptr<stub::StubTransport> stub_transport() { return std::make_shared<stub::StubTransport>(); }

}  // namespace

TEST(HttpGateway, RetriesThrottledRequestsThenSucceeds) {
  StubServer server;
  server.throttle_first(2);
  const auto dir = testing_support::scratch_dir("gw_retry");
  TranscriptStore store(dir);
  Gateway gw(stub_config(server.endpoint()), store, RunMode::Live);
  std::vector<std::chrono::milliseconds> slept;
  gw.set_sleeper([&](auto d) { slept.push_back(d); });
  const auto out = gw.execute(baseline_matrix()[4]);
  EXPECT_TRUE(out.from_network);
  EXPECT_EQ(out.entry.status, TranscriptStatus::Ok);
  EXPECT_FALSE(out.entry.raw_response.empty());
  EXPECT_EQ(gw.network_calls(), 1u);
  EXPECT_EQ(gw.attempts(), 3u);
  EXPECT_EQ(server.requests(), 3u);
  EXPECT_EQ(slept.size(), 2u);
  EXPECT_TRUE(server.last_auth().empty());
}

TEST(HttpGateway, SendsBearerTokenFromEnvironment) {
  StubServer server;
  const auto dir = testing_support::scratch_dir("gw_auth");
  TranscriptStore store(dir);
  auto cfg = stub_config(server.endpoint());
  cfg.api_key_env = "CULTMAP_TEST_API_KEY";
  ::setenv("CULTMAP_TEST_API_KEY", "sk-test", 1);
  Gateway gw(cfg, store, RunMode::Live);
  gw.execute(baseline_matrix()[0]);
  EXPECT_EQ(server.last_auth(), "Bearer sk-test");
  ::unsetenv("CULTMAP_TEST_API_KEY");
  EXPECT_THROW(gw.execute(baseline_matrix()[1]), CredentialError);
}

TEST(HttpGateway, HundredBundlesThenZeroCallsOnRerun) {
  StubServer server;
  const auto dir = testing_support::scratch_dir("gw_hundred");
  const auto bundles = baseline_matrix();
  ASSERT_EQ(bundles.size(), 100u);
  MatrixResult first;
  {
    TranscriptStore store(dir);
    Gateway gw(stub_config(server.endpoint()), store, RunMode::Hybrid);
    gw.set_clock(fixed_clock);
    first = run_matrix(gw, bundles, 4);
    EXPECT_EQ(first.summary.ok, 100u);
    EXPECT_EQ(first.summary.network_calls, 100u);
  }
  EXPECT_EQ(server.requests(), 100u);
  for (const auto mode : {RunMode::Hybrid, RunMode::Replay}) {
    TranscriptStore reloaded(dir);
    EXPECT_EQ(reloaded.size(), 100u);
    Gateway gw(stub_config(server.endpoint()), reloaded, mode);
    const auto again = run_matrix(gw, bundles, 4);
    EXPECT_EQ(again.summary.network_calls, 0u);
    EXPECT_EQ(again.summary.from_store, 100u);
    for (const auto& [key, e] : first.entries) EXPECT_EQ(again.entries.at(key).raw_response, e.raw_response);
  }
  EXPECT_EQ(server.requests(), 100u);
  EXPECT_TRUE(std::filesystem::exists(dir / "index.tsv"));
}

TEST(Matrix, PoisonedBundleDoesNotAbortTheRun) {
  const auto dir = testing_support::scratch_dir("gw_poison");
  TranscriptStore store(dir);
  auto transport = stub_transport();
  const auto poison = question(QuestionId::F063).prompt_text;
  bool poisoned = true;
  transport->set_interceptor([&](std::size_t, const nlohmann::json& body) -> std::optional<HttpResponse> {
    const auto& msgs = body.at("messages");
    if (poisoned && msgs.at(1).at("content") == poison &&
        msgs.at(0).at("content") == baseline_descriptor(6)) {
      return HttpResponse{400, R"({"error":"context_length_exceeded"})", std::nullopt, {}};
    }
    return std::nullopt;
  });
  Gateway gw(stub_config(), store, RunMode::Hybrid, transport);
  gw.set_clock(fixed_clock);
  const auto res = run_matrix(gw, baseline_matrix(), 8);
  EXPECT_EQ(res.summary.ok, 99u);
  EXPECT_EQ(res.summary.errors, 1u);
  ASSERT_EQ(res.summary.failures.size(), 1u);
  EXPECT_NE(res.summary.failures[0].find("HTTP 400"), std::string::npos);

  // The recorded error is retried in hybrid mode; nothing else is re-sent.
  poisoned = false;
  Gateway again(stub_config(), store, RunMode::Hybrid, transport);
  const auto healed = run_matrix(again, baseline_matrix(), 8);
  EXPECT_EQ(healed.summary.ok, 100u);
  EXPECT_EQ(healed.summary.network_calls, 1u);

  // Replay of a recorded error fails without calling out.
  TranscriptStore other(testing_support::scratch_dir("gw_poison_replay"));
  TranscriptEntry bad = gw.base_entry(baseline_matrix()[0], transcript_key(stub_config(), baseline_matrix()[0]), 0);
  bad.status = TranscriptStatus::Error;
  bad.error = "HTTP 500";
  other.put(bad);
  Gateway replay(stub_config(), other, RunMode::Replay);
  EXPECT_THROW(replay.execute(baseline_matrix()[0]), TransportError);
  EXPECT_THROW(replay.execute(baseline_matrix()[1]), MissingTranscriptError);
}

TEST(Matrix, ParallelismDoesNotChangeResults) {
  std::vector<Country> roster{{"JOR", "Jordan"}, {"JPN", "Japan"}};
  const auto bundles = build_matrix("stub-alpha", ApiMode::Chat, parse_variant_set("0-9"), roster);
  std::vector<std::string> fingerprints;
  std::vector<std::map<std::string, TranscriptEntry>> runs;
  for (const int parallel : {1, 8}) {
    TranscriptStore store(testing_support::scratch_dir("gw_parallel_" + std::to_string(parallel)));
    Gateway gw(stub_config(), store, RunMode::Live, stub_transport());
    gw.set_clock(fixed_clock);
    auto res = run_matrix(gw, bundles, parallel);
    EXPECT_EQ(res.summary.total, 200u);
    fingerprints.push_back(store.fingerprint());
    runs.push_back(std::move(res.entries));
  }
  EXPECT_EQ(fingerprints[0], fingerprints[1]);
  ASSERT_EQ(runs[0].size(), runs[1].size());
  for (const auto& [key, e] : runs[0]) {
    EXPECT_EQ(to_json(e).dump(), to_json(runs[1].at(key)).dump());
  }
}

TEST(Gateway, ExhaustedRetriesAndPermanentFailures) {
  TranscriptStore store(testing_support::scratch_dir("gw_fail"));
  auto transport = stub_transport();
  int status = 503;
  transport->set_interceptor([&](std::size_t, const nlohmann::json&) -> std::optional<HttpResponse> {
    return HttpResponse{status, "{}", std::nullopt, {}};
  });
  auto cfg = stub_config();
  cfg.max_retries = 3;
  Gateway gw(cfg, store, RunMode::Live, transport);
  gw.set_sleeper([](auto) {});
  EXPECT_THROW(gw.execute(baseline_matrix()[0]), TransportError);
  EXPECT_EQ(gw.attempts(), 4u);
  status = 404;
  EXPECT_THROW(gw.execute(baseline_matrix()[0]), TransportError);
  EXPECT_EQ(gw.attempts(), 5u);
  status = 401;
  EXPECT_THROW(gw.execute(baseline_matrix()[0]), CredentialError);
  status = 200;  // body without choices
  EXPECT_THROW(gw.execute(baseline_matrix()[0]), TransportError);
}

TEST(Gateway, MissingCredentialBecomesErrorEntry) {
  TranscriptStore store(testing_support::scratch_dir("gw_cred"));
  auto cfg = stub_config();
  cfg.api_key_env = "CULTMAP_TEST_SURELY_UNSET";
  ::unsetenv("CULTMAP_TEST_SURELY_UNSET");
  Gateway gw(cfg, store, RunMode::Live, stub_transport());
  const auto res = run_matrix(gw, {baseline_matrix()[0]});
  EXPECT_EQ(res.summary.errors, 1u);
  EXPECT_NE(res.summary.failures[0].find("CULTMAP_TEST_SURELY_UNSET"), std::string::npos);
  EXPECT_EQ(gw.network_calls(), 0u);
}

TEST(Gateway, BackoffGrowsWithJitter) {
  TranscriptStore store(testing_support::scratch_dir("gw_backoff"));
  auto cfg = stub_config();
  cfg.backoff_base = 100ms;
  cfg.backoff_factor = 2.0;
  Gateway gw(cfg, store, RunMode::Live, stub_transport());
  gw.set_jitter_seed(7);
  for (int i = 0; i < 5; ++i) {
    const auto d = gw.backoff_delay(i).count();
    const double full = 100.0 * std::pow(2.0, i);
    EXPECT_GE(d, static_cast<long long>(full * 0.5) - 1);
    EXPECT_LE(d, static_cast<long long>(full));
  }
}

TEST(Gateway, LegacyCompletionsRoundTrip) {
  TranscriptStore store(testing_support::scratch_dir("gw_legacy"));
  auto transport = stub_transport();
  std::string seen_prompt;
  transport->set_interceptor([&](std::size_t, const nlohmann::json& body) -> std::optional<HttpResponse> {
    seen_prompt = body.at("prompt").get<std::string>();
    EXPECT_FALSE(body.contains("messages"));
    EXPECT_EQ(body.at("temperature"), 0.0);
    EXPECT_EQ(body.at("max_tokens"), 256);
    return std::nullopt;
  });
  auto cfg = stub_config();
  cfg.api = ApiMode::Legacy;
  Gateway gw(cfg, store, RunMode::Live, transport);
  const auto b = baseline_matrix(ApiMode::Legacy)[3];
  const auto out = gw.execute(b);
  EXPECT_EQ(seen_prompt, b.combined_text);
  EXPECT_EQ(out.entry.raw_response, stub::answer(*stub::find_model("stub-alpha"), std::nullopt, 0, QuestionId::E025));
}

TEST(TranscriptKey, SensitiveToEveryReplyInput) {
  const auto cfg = stub_config();
  const auto b = baseline_matrix()[0];
  const auto base = transcript_key(cfg, b);
  EXPECT_EQ(base.size(), 64u);
  EXPECT_EQ(base, transcript_key(cfg, b));
  auto other = cfg;
  other.sampling.temperature = 0.7;
  EXPECT_NE(transcript_key(other, b), base);
  other = cfg;
  other.model = "stub-beta";
  EXPECT_NE(transcript_key(other, b), base);
  other = cfg;
  other.endpoint = "http://elsewhere";
  EXPECT_EQ(transcript_key(other, b), base);
  EXPECT_NE(transcript_key(cfg, baseline_matrix(ApiMode::Legacy)[0]), base);
  EXPECT_NE(transcript_key(cfg, b, 1), base);
  auto changed = b;
  changed.system_text += " ";
  EXPECT_NE(transcript_key(cfg, changed), base);
}

TEST(TranscriptStore, PersistsAndFingerprintsContent) {
  const auto dir = testing_support::scratch_dir("store");
  std::string fp;
  {
    TranscriptStore store(dir);
    Gateway gw(stub_config(), store, RunMode::Live, stub_transport());
    gw.set_clock(fixed_clock);
    run_matrix(gw, baseline_matrix(), 2);
    fp = store.fingerprint();
  }
  TranscriptStore reloaded(dir);
  EXPECT_EQ(reloaded.fingerprint(), fp);
  const auto lines = util::read_lines(dir / "index.tsv");
  EXPECT_EQ(lines.size(), 101u);
  auto e = *reloaded.find(transcript_key(stub_config(), baseline_matrix()[0]));
  e.timestamp = "2030-01-01T00:00:00Z";
  reloaded.put(e);
  EXPECT_EQ(reloaded.fingerprint(), fp);
  e.raw_response += "!";
  reloaded.put(e);
  EXPECT_NE(reloaded.fingerprint(), fp);
}

TEST(Wire, ContentFilterMarksRefusal) {
  const auto r = parse_reply(ApiMode::Chat,
                             R"({"choices":[{"message":{"content":null},"finish_reason":"content_filter"}]})");
  EXPECT_EQ(r.status, TranscriptStatus::RefusedByApi);
  EXPECT_TRUE(r.text.empty());
  EXPECT_EQ(split_endpoint("https://host:8443/api/"), (std::pair<std::string, std::string>{"https://host:8443", "/api"}));
  EXPECT_THROW(split_endpoint("host"), ConfigError);
}

TEST(Sampling, NonDefaultSettingsWarn) {
  auto cfg = stub_config();
  EXPECT_TRUE(sampling_warnings(cfg).empty());
  cfg.sampling.temperature = 1.0;
  cfg.sampling.max_tokens = 50;
  EXPECT_EQ(sampling_warnings(cfg).size(), 2u);
}

TEST(StubTransport, RepliesParseAndRefusalsAreStable) {
  const auto* beta = stub::find_model("stub-beta");
  ASSERT_NE(beta, nullptr);
  const Country libya{"LBY", "Libya"};
  for (int v = 0; v < kVariantCount; ++v) {
    EXPECT_EQ(stub::answer(*beta, libya, v, QuestionId::F118), stub::kRefusalText);
    const Country jordan{"JOR", "Jordan"};
    EXPECT_EQ(stub::answer(*beta, jordan, v, QuestionId::F120) == stub::kRefusalText, v == 3 || v == 7);
  }
  const auto decoded = stub::decode_prompt(cultural_descriptor(5, "Jordan"), question(QuestionId::G006).prompt_text);
  ASSERT_TRUE(decoded);
  EXPECT_EQ(decoded->variant, 5);
  EXPECT_EQ(decoded->country_name, "Jordan");
  EXPECT_EQ(decoded->question, QuestionId::G006);
  stub::StubTransport t;
  EXPECT_EQ(t.post("/v1/chat/completions", "{", {}, 1s).status, 400);
  EXPECT_EQ(t.post("/v1/chat/completions", R"({"model":"nobody","messages":[{"content":"x"},{"content":"y"}]})", {}, 1s).status,
            404);
}
