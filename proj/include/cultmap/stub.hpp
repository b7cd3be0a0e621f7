#pragma once

// Offline stand-in for a chat-completions endpoint. Answers are a
// deterministic function of (model, country, variant, question) and are
// phrased in a handful of styles so the parser sees realistic text.

#include <atomic>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "cultmap/gateway.hpp"
#include "cultmap/prompts.hpp"
#include "cultmap/questions.hpp"
#include "cultmap/synthetic.hpp"

namespace cultmap::stub {

struct StubModel {
  std::string name;
  double self_expression = 0.0;  // default position
  double secular = 0.0;
  double pull = 0.5;  // how far cultural prompting moves toward the country
  double noise = 0.35;
  /// (country code, question) refused in every variant.
  std::vector<std::pair<std::string, QuestionId>> refuse_always;
};

inline const std::vector<StubModel>& default_models() {
  static const std::vector<StubModel> models{
      {"stub-alpha", 1.4, 0.9, 0.75, 0.30, {}},
      {"stub-beta", 0.9, 0.4, 0.55, 0.40, {{"LBY", QuestionId::F118}}},
  };
  return models;
}

inline const StubModel* find_model(std::string_view name) {
  for (const auto& m : default_models()) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

/// Cells refused for some variants only, independent of model.
inline bool partial_refusal(std::string_view country, QuestionId q, int variant) {
  return country == "JOR" && q == QuestionId::F120 && (variant == 3 || variant == 7);
}

inline constexpr std::string_view kRefusalText =
    "As an AI language model, I do not have personal opinions or beliefs, so I cannot provide a personal "
    "answer to this question.";

namespace detail {

inline std::string letter_for(int value) { return std::string(1, static_cast<char>('A' + value - 1)); }

inline std::pair<int, int> goal_pair(int index, std::uint64_t h) {
  static constexpr std::array<std::pair<int, int>, 4> mixed{{{1, 2}, {3, 4}, {1, 4}, {3, 2}}};
  std::pair<int, int> p = index == 1 ? std::pair{1, 3} : index == 3 ? std::pair{2, 4} : mixed[h % 4];
  if ((h >> 8) & 1) std::swap(p.first, p.second);
  return p;
}

inline std::vector<Quality> quality_set(int index, std::uint64_t h) {
  using enum Quality;
  std::vector<Quality> s;
  switch (index) {
    case 2: s = {Independence, Determination, HardWork, Tolerance}; break;
    case 1: s = {Independence, GoodManners, Responsibility, Imagination}; break;
    case 0: s = {GoodManners, HardWork, Responsibility, Tolerance}; break;
    case -1: s = {Obedience, GoodManners, HardWork, Thrift}; break;
    default: s = {ReligiousFaith, Obedience, GoodManners, HardWork}; break;
  }
  std::mt19937_64 rng(h);
  for (std::size_t i = s.size(); i > 1; --i) std::swap(s[i - 1], s[rng() % i]);
  return s;
}

inline std::string render_scale(int v, const ValueRange& r, std::uint64_t style) {
  const auto n = std::to_string(v);
  switch (style % 5) {
    case 0: return n;
    case 1: return n + ".";
    case 2: return "Score number: " + n;
    case 3:
      return "On a scale from " + std::to_string(r.min) + " to " + std::to_string(r.max) + ", my score is " + n + ".";
    default: return "My answer would be " + n;
  }
}

inline std::string render_letter(const std::string& letter, std::uint64_t style) {
  switch (style % 4) {
    case 0: return letter;
    case 1: return "Option " + letter;
    case 2: return "(" + letter + ")";
    default: return "My response: " + letter;
  }
}

inline std::string render_pair(std::pair<int, int> p, const std::string& country_name, std::uint64_t style) {
  const auto a = std::to_string(p.first), b = std::to_string(p.second);
  switch (style % 4) {
    case 0: return a + ", " + b;
    case 1: return a + "," + b;
    case 2: {
      const auto who = country_name.empty() ? std::string("an average human being")
                                            : "a human being born and living in " + country_name;
      return "As " + who + ", my response to the survey question would be:\n\n" + a + ", " + b + ".";
    }
    default: return a + " and " + b;
  }
}

inline std::string render_qualities(const std::vector<Quality>& s, std::uint64_t style) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto label = std::string(quality_info(s[i]).label);
    switch (style % 3) {
      case 0: out += (i ? "; " : "") + label; break;
      case 1: out += "- " + label + "\n"; break;
      default: out += std::to_string(i + 1) + ". " + label + (i + 1 < s.size() ? "\n" : ""); break;
    }
  }
  return out;
}

}  // namespace detail

/// Raw reply text. `country` is empty for the baseline descriptor; unknown
/// countries answer from the model's default position.
inline std::string answer(const StubModel& m, const std::optional<Country>& country, int variant, QuestionId q) {
  const auto code = country ? country->code : std::string();
  for (const auto& [c, rq] : m.refuse_always) {
    if (c == code && rq == q) return std::string(kRefusalText);
  }
  if (country && partial_refusal(code, q, variant)) return std::string(kRefusalText);

  double s = m.self_expression, t = m.secular;
  if (country) {
    if (const auto* p = synthetic::find_profile(country->code)) {
      s += m.pull * (p->self_expression - s);
      t += m.pull * (p->secular - t);
    }
  }
  const auto seed = synthetic::fnv1a(m.name + "|" + code + "|" + std::to_string(variant) + "|" +
                                     std::string(cultmap::code(q)));
  std::mt19937_64 rng(seed);
  const double noise = m.noise * synthetic::normal(rng);
  const int v = synthetic::item_value(q, s, t, noise);
  const auto style = rng();

  return std::visit(
      [&](const auto& kind) -> std::string {
        using K = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<K, IntegerScale>) {
          return detail::render_scale(v, valid_range(q), style);
        } else if constexpr (std::is_same_v<K, LetterChoice>) {
          return detail::render_letter(detail::letter_for(v), style);
        } else if constexpr (std::is_same_v<K, GoalPairKind>) {
          return detail::render_pair(detail::goal_pair(v, style >> 4), country ? country->name : "", style);
        } else {
          return detail::render_qualities(detail::quality_set(v, style >> 4), style);
        }
      },
      question(q).kind);
}

struct DecodedPrompt {
  int variant = 0;
  std::optional<std::string> country_name;
  QuestionId question = QuestionId::A008;
};

/// Recovers (variant, country, question) from the descriptor and question text.
inline std::optional<DecodedPrompt> decode_prompt(std::string_view descriptor, std::string_view question_text) {
  DecodedPrompt d;
  bool found = false;
  for (int v = 0; v < kVariantCount && !found; ++v) {
    const auto head = "You are " + std::string(kDescriptorNouns[v]) + " ";
    if (!descriptor.starts_with(head)) continue;
    found = true;
    d.variant = v;
    auto rest = descriptor.substr(head.size());
    if (rest.starts_with("born in ")) {
      rest.remove_prefix(8);
      const auto end = rest.find(" and living in ");
      if (end == std::string_view::npos) return std::nullopt;
      d.country_name = std::string(rest.substr(0, end));
    }
  }
  if (!found) return std::nullopt;
  for (const auto q : kAllQuestions) {
    if (question_text == question(q).prompt_text) {
      d.question = q;
      return d;
    }
  }
  return std::nullopt;
}

/// Transport serving stub replies in the chat or legacy completions format.
/// An interceptor may substitute a response for any call (fault injection).
class StubTransport final : public Transport {
 public:
  using Interceptor = std::function<std::optional<HttpResponse>(std::size_t call, const nlohmann::json& body)>;

  explicit StubTransport(std::vector<Country> roster = {}) : roster_(std::move(roster)) {}

  void set_interceptor(Interceptor f) { interceptor_ = std::move(f); }
  std::size_t calls() const { return calls_.load(); }

  HttpResponse post(const std::string& path, const std::string& body, const std::map<std::string, std::string>&,
                    std::chrono::milliseconds) override {
    const auto n = calls_.fetch_add(1);
    HttpResponse res;
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      return {400, R"({"error":"bad json"})", std::nullopt, {}};
    }
    if (interceptor_) {
      if (auto r = interceptor_(n, req)) return *r;
    }
    const bool chat = path.ends_with("/chat/completions");
    std::string system, user;
    if (chat) {
      system = req.at("messages").at(0).at("content").get<std::string>();
      user = req.at("messages").at(1).at("content").get<std::string>();
    } else {
      const auto prompt = req.at("prompt").get<std::string>();
      const auto q = prompt.find(" Question: ");
      if (q == std::string::npos) return {400, R"({"error":"unrecognized prompt"})", std::nullopt, {}};
      system = prompt.substr(0, q);
      user = prompt.substr(q + 1);
    }
    const auto* model = find_model(req.value("model", std::string()));
    const auto decoded = decode_prompt(system, user);
    if (!model || !decoded) return {404, R"({"error":"unknown model or prompt"})", std::nullopt, {}};

    std::optional<Country> country;
    if (decoded->country_name) {
      country = Country{"", *decoded->country_name};
      for (const auto& c : roster_) {
        if (c.name == *decoded->country_name) country->code = c.code;
      }
      if (country->code.empty()) {
        for (const auto& p : synthetic::default_profiles()) {
          if (p.name == *decoded->country_name) country->code = p.code;
        }
      }
    }
    const auto text = answer(*model, country, decoded->variant, decoded->question);

    nlohmann::ordered_json out;
    out["id"] = "stub-" + std::to_string(synthetic::fnv1a(body));
    out["object"] = chat ? "chat.completion" : "text_completion";
    out["model"] = model->name;
    nlohmann::ordered_json choice;
    choice["index"] = 0;
    if (chat) {
      choice["message"] = {{"role", "assistant"}, {"content", text}};
    } else {
      choice["text"] = text;
    }
    choice["finish_reason"] = "stop";
    out["choices"] = nlohmann::ordered_json::array({choice});
    out["usage"] = {{"prompt_tokens", static_cast<int>((system.size() + user.size()) / 4)},
                    {"completion_tokens", static_cast<int>(text.size() / 4)}};
    res.status = 200;
    res.body = out.dump();
    return res;
  }

 private:
  std::vector<Country> roster_;
  Interceptor interceptor_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace cultmap::stub
