#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cultmap/errors.hpp"
#include "cultmap/questions.hpp"
#include "cultmap/util.hpp"

namespace cultmap {

inline constexpr int kVariantCount = 10;

/// Noun phrases that distinguish the ten respondent descriptors.
inline constexpr std::array<std::string_view, kVariantCount> kDescriptorNouns{
    "an average human being", "a typical human being", "a human being",
    "an average person",      "a typical person",      "a person",
    "an average individual",  "a typical individual",  "an individual",
    "a world citizen"};

inline constexpr std::string_view kDescriptorTail = "responding to the following survey question.";

namespace detail {
inline void check_variant(int variant) {
  if (variant < 0 || variant >= kVariantCount) {
    throw PromptError("prompt variant " + std::to_string(variant) + " outside 0..9");
  }
}
}  // namespace detail

inline std::string baseline_descriptor(int variant) {
  detail::check_variant(variant);
  return "You are " + std::string(kDescriptorNouns[variant]) + " " + std::string(kDescriptorTail);
}

/// Country names are inserted verbatim, without articles or normalization.
inline std::string cultural_descriptor(int variant, std::string_view country) {
  detail::check_variant(variant);
  if (util::trim(country).empty()) throw PromptError("cultural descriptor needs a country name");
  const std::string name(country);
  return "You are " + std::string(kDescriptorNouns[variant]) + " born in " + name +
         " and living in " + name + " " + std::string(kDescriptorTail);
}

enum class ApiMode { Chat, Legacy };

inline std::string_view to_string(ApiMode m) { return m == ApiMode::Chat ? "chat" : "legacy"; }

inline ApiMode parse_api_mode(std::string_view s) {
  if (util::iequals(s, "chat")) return ApiMode::Chat;
  if (util::iequals(s, "legacy")) return ApiMode::Legacy;
  throw ConfigError("unknown api mode '" + std::string(s) + "' (expected chat or legacy)");
}

struct Country {
  std::string code;  // alpha-3, as in the survey data
  std::string name;  // display name used in prompts
  friend bool operator==(const Country&, const Country&) = default;
};

struct PromptMeta {
  std::string model;
  QuestionId question = QuestionId::A008;
  std::optional<Country> country;  // empty for the baseline descriptor
  int variant = 0;

  std::string context() const { return country ? country->code : std::string("baseline"); }
};

struct PromptBundle {
  std::string system_text;    // respondent descriptor
  std::string user_text;      // question prompt, byte-identical to the bank
  std::string combined_text;  // descriptor + ' ' + question, sent alone in legacy mode
  ApiMode mode = ApiMode::Chat;
  PromptMeta meta;
};

inline PromptBundle assemble(QuestionId q, std::string descriptor, ApiMode mode, PromptMeta meta = {}) {
  PromptBundle b;
  b.user_text = std::string(question(q).prompt_text);
  b.combined_text = descriptor + " " + b.user_text;
  b.system_text = std::move(descriptor);
  b.mode = mode;
  b.meta = std::move(meta);
  b.meta.question = q;
  return b;
}

/// Every (variant, question) bundle for one model, optionally culturally prompted.
inline std::vector<PromptBundle> build_matrix(const std::string& model, ApiMode mode,
                                              const std::set<int>& variants,
                                              const std::vector<Country>& countries = {}) {
  std::vector<PromptBundle> out;
  const auto add = [&](const std::optional<Country>& country) {
    for (const int v : variants) {
      const auto descriptor = country ? cultural_descriptor(v, country->name) : baseline_descriptor(v);
      for (const auto q : kAllQuestions) {
        out.push_back(assemble(q, descriptor, mode, PromptMeta{model, q, country, v}));
      }
    }
  };
  if (countries.empty()) {
    add(std::nullopt);
  } else {
    for (const auto& c : countries) add(c);
  }
  return out;
}

/// Accepts "0-9", "0,3,5", "0" or combinations such as "0-2,7".
inline std::set<int> parse_variant_set(std::string_view text) {
  std::set<int> out;
  for (const auto& part : util::split(text, ',')) {
    const auto p = util::trim(part);
    if (p.empty()) continue;
    const auto dash = p.find('-');
    const auto bad = [&] { return ConfigError("bad variant list '" + std::string(text) + "'"); };
    if (dash == std::string_view::npos) {
      const auto v = util::parse_int(p);
      if (!v) throw bad();
      out.insert(static_cast<int>(*v));
    } else {
      const auto lo = util::parse_int(p.substr(0, dash));
      const auto hi = util::parse_int(p.substr(dash + 1));
      if (!lo || !hi || *lo > *hi) throw bad();
      for (long v = *lo; v <= *hi; ++v) out.insert(static_cast<int>(v));
    }
  }
  if (out.empty()) throw ConfigError("empty variant set");
  for (const int v : out) {
    if (v < 0 || v >= kVariantCount) throw ConfigError("variant " + std::to_string(v) + " outside 0..9");
  }
  return out;
}

/// Roster file: one `CODE<TAB>Display name` per line; '#' starts a comment.
inline std::vector<Country> load_roster(const std::filesystem::path& path) {
  std::vector<Country> out;
  std::set<std::string> seen;
  std::size_t n = 0;
  for (const auto& raw : util::read_lines(path)) {
    ++n;
    const auto line = util::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": expected CODE<TAB>name");
    }
    Country c{std::string(util::trim(line.substr(0, tab))), std::string(util::trim(line.substr(tab + 1)))};
    if (c.code.empty() || c.name.empty()) {
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": empty code or name");
    }
    if (!seen.insert(c.code).second) {
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": duplicate country " + c.code);
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace cultmap
