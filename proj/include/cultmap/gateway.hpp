#pragma once

// Model gateway: chat-completions and legacy-completions requests with fixed
// sampling, retry with exponential backoff, and a keyed transcript store that
// supports live, replay and hybrid runs.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "cultmap/errors.hpp"
#include "cultmap/prompts.hpp"
#include "cultmap/questions.hpp"
#include "cultmap/util.hpp"

namespace cultmap {

struct SamplingParams {
  double temperature = 0.0;
  double top_p = 1.0;
  double frequency_penalty = 0.0;
  double presence_penalty = 0.0;
  int max_tokens = 256;
  friend bool operator==(const SamplingParams&, const SamplingParams&) = default;
};

struct ModelConfig {
  std::string model;  // provider model identifier, also the report label
  std::string endpoint = "https://api.openai.com";
  ApiMode api = ApiMode::Chat;
  SamplingParams sampling;
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 5;
  int max_parallel = 4;
  std::chrono::milliseconds backoff_base{1'000};
  double backoff_factor = 2.0;
  std::string api_key_env = "OPENAI_API_KEY";
  int repetitions = 1;
};

/// One warning per sampling parameter that differs from the audit defaults.
inline std::vector<std::string> sampling_warnings(const ModelConfig& cfg) {
  std::vector<std::string> out;
  const SamplingParams d;
  const auto& s = cfg.sampling;
  const auto warn = [&](const char* name, double got, double want) {
    if (got != want) {
      out.push_back(cfg.model + ": " + name + "=" + util::format_exact(got) + " overrides the audit default " +
                    util::format_exact(want));
    }
  };
  warn("temperature", s.temperature, d.temperature);
  warn("top_p", s.top_p, d.top_p);
  warn("frequency_penalty", s.frequency_penalty, d.frequency_penalty);
  warn("presence_penalty", s.presence_penalty, d.presence_penalty);
  warn("max_tokens", s.max_tokens, d.max_tokens);
  return out;
}

enum class TranscriptStatus { Ok, RefusedByApi, Error };

inline std::string_view to_string(TranscriptStatus s) {
  switch (s) {
    case TranscriptStatus::Ok: return "ok";
    case TranscriptStatus::RefusedByApi: return "refused-by-api";
    case TranscriptStatus::Error: return "error";
  }
  return "error";
}

inline TranscriptStatus parse_status(std::string_view s) {
  if (s == "ok") return TranscriptStatus::Ok;
  if (s == "refused-by-api") return TranscriptStatus::RefusedByApi;
  if (s == "error") return TranscriptStatus::Error;
  throw LoadError("unknown transcript status '" + std::string(s) + "'");
}

struct TranscriptEntry {
  std::string key;
  std::string model;
  ApiMode mode = ApiMode::Chat;
  std::string system_text;
  std::string user_text;
  std::string question;
  std::string context;
  int variant = 0;
  int repetition = 0;
  std::string raw_response;
  TranscriptStatus status = TranscriptStatus::Ok;
  std::string error;
  std::string timestamp;
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

inline nlohmann::ordered_json to_json(const TranscriptEntry& e) {
  nlohmann::ordered_json j;
  j["key"] = e.key;
  j["model"] = e.model;
  j["mode"] = std::string(to_string(e.mode));
  j["question"] = e.question;
  j["context"] = e.context;
  j["variant"] = e.variant;
  j["repetition"] = e.repetition;
  j["system_text"] = e.system_text;
  j["user_text"] = e.user_text;
  j["status"] = std::string(to_string(e.status));
  j["raw_response"] = e.raw_response;
  if (!e.error.empty()) j["error"] = e.error;
  j["timestamp"] = e.timestamp;
  j["prompt_tokens"] = e.prompt_tokens;
  j["completion_tokens"] = e.completion_tokens;
  return j;
}

inline TranscriptEntry entry_from_json(const nlohmann::json& j) {
  TranscriptEntry e;
  e.key = j.at("key").get<std::string>();
  e.model = j.at("model").get<std::string>();
  e.mode = parse_api_mode(j.at("mode").get<std::string>());
  e.question = j.value("question", "");
  e.context = j.value("context", "");
  e.variant = j.value("variant", 0);
  e.repetition = j.value("repetition", 0);
  e.system_text = j.at("system_text").get<std::string>();
  e.user_text = j.at("user_text").get<std::string>();
  e.status = parse_status(j.at("status").get<std::string>());
  e.raw_response = j.at("raw_response").get<std::string>();
  e.error = j.value("error", "");
  e.timestamp = j.value("timestamp", "");
  e.prompt_tokens = j.value("prompt_tokens", 0);
  e.completion_tokens = j.value("completion_tokens", 0);
  return e;
}

/// Digest over every input that can change a model's reply.
inline std::string transcript_key(const ModelConfig& cfg, const PromptBundle& b, int repetition = 0) {
  std::string canon = "cultmap-transcript-v1\n";
  const auto field = [&](std::string_view name, std::string_view value) {
    canon += std::string(name) + ":" + std::to_string(value.size()) + ":" + std::string(value) + "\n";
  };
  const auto& s = cfg.sampling;
  field("model", cfg.model);
  field("mode", to_string(b.mode));
  field("temperature", util::format_exact(s.temperature));
  field("top_p", util::format_exact(s.top_p));
  field("frequency_penalty", util::format_exact(s.frequency_penalty));
  field("presence_penalty", util::format_exact(s.presence_penalty));
  field("max_tokens", std::to_string(s.max_tokens));
  field("system", b.system_text);
  field("user", b.user_text);
  if (repetition != 0) field("repetition", std::to_string(repetition));
  return util::sha256_hex(canon);
}

/// Directory of one JSON record per key (records/<key>.json) plus a sorted
/// index.tsv. Readers share a lock; writers are serialized.
class TranscriptStore {
 public:
  explicit TranscriptStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    const auto records = dir_ / "records";
    if (!std::filesystem::exists(records)) return;
    std::vector<std::filesystem::path> files;
    for (const auto& f : std::filesystem::directory_iterator(records)) {
      if (f.path().extension() == ".json") files.push_back(f.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      try {
        auto e = entry_from_json(nlohmann::json::parse(util::read_file(f)));
        if (f.stem().string() != e.key) throw LoadError("key does not match file name");
        entries_.emplace(e.key, std::move(e));
      } catch (const nlohmann::json::exception& ex) {
        throw LoadError(f.string() + ": " + ex.what());
      } catch (const LoadError& ex) {
        throw LoadError(f.string() + ": " + ex.what());
      }
    }
  }

  const std::filesystem::path& dir() const { return dir_; }

  std::optional<TranscriptEntry> find(const std::string& key) const {
    std::shared_lock lock(mu_);
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void put(const TranscriptEntry& e) {
    std::unique_lock lock(mu_);
    util::write_file(dir_ / "records" / (e.key + ".json"), to_json(e).dump(2) + "\n");
    entries_[e.key] = e;
    dirty_ = true;
  }

  /// Rewrites index.tsv if anything was added since the last flush.
  void flush() {
    std::unique_lock lock(mu_);
    if (!dirty_) return;
    std::string index = "key\tmodel\tcontext\tvariant\tquestion\trepetition\tstatus\n";
    for (const auto& [key, e] : entries_) {
      index += key + "\t" + e.model + "\t" + e.context + "\t" + std::to_string(e.variant) + "\t" + e.question +
               "\t" + std::to_string(e.repetition) + "\t" + std::string(to_string(e.status)) + "\n";
    }
    util::write_file(dir_ / "index.tsv", index);
    dirty_ = false;
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
  }

  /// Content digest over keys, statuses and responses (timestamps excluded).
  std::string fingerprint() const {
    std::shared_lock lock(mu_);
    std::string canon;
    for (const auto& [key, e] : entries_) {
      canon += key + "\t" + std::string(to_string(e.status)) + "\t" + util::sha256_hex(e.raw_response) + "\n";
    }
    return util::sha256_hex(canon);
  }

 private:
  std::filesystem::path dir_;
  mutable std::shared_mutex mu_;
  std::map<std::string, TranscriptEntry> entries_;
  bool dirty_ = false;
};

// ---------------------------------------------------------------------------
// Transport

struct HttpResponse {
  int status = 0;  // 0 means the request never completed
  std::string body;
  std::optional<std::chrono::milliseconds> retry_after;
  std::string error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& path, const std::string& body,
                            const std::map<std::string, std::string>& headers,
                            std::chrono::milliseconds timeout) = 0;
};

/// Splits "scheme://host[:port][/prefix]" into origin and path prefix.
inline std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const auto scheme = endpoint.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint needs a scheme: " + endpoint);
  const auto slash = endpoint.find('/', scheme + 3);
  if (slash == std::string::npos) return {endpoint, ""};
  auto prefix = endpoint.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {endpoint.substr(0, slash), prefix};
}

class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::string origin) : origin_(std::move(origin)) {}

  HttpResponse post(const std::string& path, const std::string& body,
                    const std::map<std::string, std::string>& headers,
                    std::chrono::milliseconds timeout) override {
    httplib::Client client(origin_);
    const auto secs = timeout.count() / 1000;
    const auto usecs = (timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    HttpResponse out;
    if (!res) {
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    if (res->has_header("Retry-After")) {
      if (const auto secs_after = util::parse_double(res->get_header_value("Retry-After"))) {
        out.retry_after = std::chrono::milliseconds(static_cast<long long>(*secs_after * 1000));
      }
    }
    return out;
  }

 private:
  std::string origin_;
};

// ---------------------------------------------------------------------------
// Wire format

inline std::string request_path(ApiMode mode) {
  return mode == ApiMode::Chat ? "/v1/chat/completions" : "/v1/completions";
}

inline nlohmann::ordered_json request_body(const ModelConfig& cfg, const PromptBundle& b) {
  nlohmann::ordered_json j;
  j["model"] = cfg.model;
  if (b.mode == ApiMode::Chat) {
    j["messages"] = nlohmann::ordered_json::array(
        {{{"role", "system"}, {"content", b.system_text}}, {{"role", "user"}, {"content", b.user_text}}});
  } else {
    j["prompt"] = b.combined_text;
  }
  j["temperature"] = cfg.sampling.temperature;
  j["top_p"] = cfg.sampling.top_p;
  j["frequency_penalty"] = cfg.sampling.frequency_penalty;
  j["presence_penalty"] = cfg.sampling.presence_penalty;
  j["max_tokens"] = cfg.sampling.max_tokens;
  return j;
}

struct CompletionReply {
  std::string text;
  TranscriptStatus status = TranscriptStatus::Ok;
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

inline CompletionReply parse_reply(ApiMode mode, const std::string& body) {
  const auto j = nlohmann::json::parse(body);
  const auto& choice = j.at("choices").at(0);
  CompletionReply r;
  const auto finish = choice.value("finish_reason", std::string());
  if (mode == ApiMode::Chat) {
    const auto& content = choice.at("message").at("content");
    r.text = content.is_null() ? std::string() : content.get<std::string>();
  } else {
    r.text = choice.at("text").get<std::string>();
  }
  if (finish == "content_filter") r.status = TranscriptStatus::RefusedByApi;
  if (j.contains("usage")) {
    r.prompt_tokens = j["usage"].value("prompt_tokens", 0);
    r.completion_tokens = j["usage"].value("completion_tokens", 0);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Gateway

enum class RunMode { Live, Replay, Hybrid };

inline RunMode parse_run_mode(std::string_view s) {
  if (s == "live") return RunMode::Live;
  if (s == "replay") return RunMode::Replay;
  if (s == "hybrid") return RunMode::Hybrid;
  throw ConfigError("unknown run mode '" + std::string(s) + "' (expected live, replay or hybrid)");
}

inline std::string utc_timestamp() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Replay never touches the network. Hybrid answers from the store when it
/// holds a non-error entry and otherwise calls out. Live always calls out and
/// overwrites the stored entry.
class Gateway {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;
  using Clock = std::function<std::string()>;

  struct Outcome {
    TranscriptEntry entry;
    bool from_network = false;
  };

  Gateway(ModelConfig cfg, TranscriptStore& store, RunMode mode, std::shared_ptr<Transport> transport = nullptr)
      : cfg_(std::move(cfg)), store_(store), mode_(mode), transport_(std::move(transport)) {
    if (!transport_ && mode_ != RunMode::Replay) {
      const auto [origin, prefix] = split_endpoint(cfg_.endpoint);
      transport_ = std::make_shared<HttpTransport>(origin);
      prefix_ = prefix;
    } else if (mode_ != RunMode::Replay) {
      prefix_ = split_endpoint(cfg_.endpoint).second;
    }
  }

  void set_sleeper(Sleeper s) { sleeper_ = std::move(s); }
  void set_clock(Clock c) { clock_ = std::move(c); }
  void set_jitter_seed(std::uint64_t seed) { jitter_seed_ = seed; }

  const ModelConfig& config() const { return cfg_; }
  RunMode mode() const { return mode_; }
  TranscriptStore& store() { return store_; }

  std::size_t network_calls() const { return network_calls_.load(); }
  std::size_t attempts() const { return attempts_.load(); }

  /// Full transcript entry for one bundle; throws on failure.
  Outcome execute(const PromptBundle& b, int repetition = 0) {
    const auto key = transcript_key(cfg_, b, repetition);
    if (mode_ != RunMode::Live) {
      if (auto hit = store_.find(key)) {
        if (hit->status != TranscriptStatus::Error) return {*hit, false};
        if (mode_ == RunMode::Replay) throw TransportError("recorded failure for " + key + ": " + hit->error);
      } else if (mode_ == RunMode::Replay) {
        throw MissingTranscriptError(key);
      }
    }
    auto entry = base_entry(b, key, repetition);
    const auto reply = call(b);
    entry.raw_response = reply.text;
    entry.status = reply.status;
    entry.prompt_tokens = reply.prompt_tokens;
    entry.completion_tokens = reply.completion_tokens;
    store_.put(entry);
    return {entry, true};
  }

  std::string complete(const PromptBundle& b, int repetition = 0) { return execute(b, repetition).entry.raw_response; }

  TranscriptEntry base_entry(const PromptBundle& b, const std::string& key, int repetition) const {
    TranscriptEntry e;
    e.key = key;
    e.model = cfg_.model;
    e.mode = b.mode;
    e.system_text = b.system_text;
    e.user_text = b.user_text;
    e.question = std::string(code(b.meta.question));
    e.context = b.meta.context();
    e.variant = b.meta.variant;
    e.repetition = repetition;
    e.timestamp = clock_ ? clock_() : utc_timestamp();
    return e;
  }

  std::chrono::milliseconds backoff_delay(int retry_index) {
    thread_local std::mt19937_64 rng(jitter_seed_ ^ std::hash<std::thread::id>{}(std::this_thread::get_id()));
    std::uniform_real_distribution<double> jitter(0.5, 1.0);
    const double base = static_cast<double>(cfg_.backoff_base.count()) * std::pow(cfg_.backoff_factor, retry_index);
    return std::chrono::milliseconds(static_cast<long long>(base * jitter(rng)));
  }

 private:
  std::string api_key() const {
    const char* v = std::getenv(cfg_.api_key_env.c_str());
    if (!v || !*v) throw CredentialError("environment variable " + cfg_.api_key_env + " is not set");
    return v;
  }

  CompletionReply call(const PromptBundle& b) {
    std::map<std::string, std::string> headers;
    if (!cfg_.api_key_env.empty()) headers["Authorization"] = "Bearer " + api_key();
    const auto body = request_body(cfg_, b).dump();
    const auto path = prefix_ + request_path(b.mode);
    network_calls_.fetch_add(1);
    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      attempts_.fetch_add(1);
      const auto res = transport_->post(path, body, headers, cfg_.timeout);
      if (res.status == 200) {
        try {
          return parse_reply(b.mode, res.body);
        } catch (const nlohmann::json::exception& e) {
          throw TransportError(std::string("malformed completion response: ") + e.what());
        }
      }
      if (res.status == 401 || res.status == 403) {
        throw CredentialError("endpoint rejected credentials (HTTP " + std::to_string(res.status) + ")");
      }
      const bool transient = res.status == 0 || res.status == 408 || res.status == 429 || res.status >= 500;
      last_error = res.status == 0 ? "connection failed: " + res.error : "HTTP " + std::to_string(res.status);
      if (!transient) throw TransportError("request failed with " + last_error + ": " + res.body.substr(0, 200));
      if (attempt == cfg_.max_retries) break;
      auto delay = backoff_delay(attempt);
      if (res.retry_after) delay = std::max(delay, *res.retry_after);
      if (sleeper_) {
        sleeper_(delay);
      } else {
        std::this_thread::sleep_for(delay);
      }
    }
    throw TransportError("retries exhausted after " + std::to_string(cfg_.max_retries + 1) + " attempts (" +
                         last_error + ")");
  }

  ModelConfig cfg_;
  TranscriptStore& store_;
  RunMode mode_;
  std::shared_ptr<Transport> transport_;
  std::string prefix_;
  Sleeper sleeper_;
  Clock clock_;
  std::uint64_t jitter_seed_ = std::random_device{}();
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> attempts_{0};
};

// ---------------------------------------------------------------------------
// Matrix runner

struct MatrixSummary {
  std::size_t total = 0;
  std::size_t ok = 0;
  std::size_t refused = 0;
  std::size_t errors = 0;
  std::size_t network_calls = 0;
  std::size_t from_store = 0;
  std::vector<std::string> failures;  // "key: message", sorted
};

struct MatrixResult {
  std::map<std::string, TranscriptEntry> entries;
  MatrixSummary summary;
};

/// Runs every bundle (times the configured repetitions) with at most
/// `parallel` requests in flight. Per-bundle failures become error entries;
/// the run never aborts part-way.
inline MatrixResult run_matrix(Gateway& gw, const std::vector<PromptBundle>& bundles, int parallel = 1,
                               const std::function<void(std::size_t, std::size_t)>& progress = {}) {
  if (bundles.empty()) throw ConfigError("prompt matrix is empty");
  struct Job {
    const PromptBundle* bundle;
    int repetition;
  };
  std::vector<Job> jobs;
  const int reps = std::max(1, gw.config().repetitions);
  for (const auto& b : bundles)
    for (int r = 0; r < reps; ++r) jobs.push_back({&b, r});

  std::vector<std::optional<Gateway::Outcome>> outcomes(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  const auto calls_before = gw.network_calls();
  const auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) {
      try {
        outcomes[i] = gw.execute(*jobs[i].bundle, jobs[i].repetition);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
      const auto n = done.fetch_add(1) + 1;
      if (progress) progress(n, jobs.size());
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::clamp(parallel, 1, 64));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(n_threads, jobs.size()); ++t) pool.emplace_back(worker);
  }

  MatrixResult res;
  res.summary.total = jobs.size();
  res.summary.network_calls = gw.network_calls() - calls_before;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (outcomes[i]) {
      const auto& e = outcomes[i]->entry;
      if (!outcomes[i]->from_network) ++res.summary.from_store;
      res.entries[e.key] = e;
      continue;
    }
    const auto key = transcript_key(gw.config(), *jobs[i].bundle, jobs[i].repetition);
    auto e = gw.base_entry(*jobs[i].bundle, key, jobs[i].repetition);
    e.status = TranscriptStatus::Error;
    e.error = errors[i];
    if (gw.mode() != RunMode::Replay) gw.store().put(e);
    res.entries[key] = e;
  }
  for (const auto& [key, e] : res.entries) {
    if (e.status == TranscriptStatus::Ok) ++res.summary.ok;
    else if (e.status == TranscriptStatus::RefusedByApi) ++res.summary.refused;
    else {
      ++res.summary.errors;
      res.summary.failures.push_back(key + ": " + e.error);
    }
  }
  if (gw.mode() != RunMode::Replay) gw.store().flush();
  return res;
}

}  // namespace cultmap
