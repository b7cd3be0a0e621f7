#pragma once

// Extraction of survey answers from free-form model output.
//
// Each answer kind has its own token rule; when several candidates exist the
// last one wins, because models tend to restate the scale before answering.
// A reply with no usable token at all is a refusal. A reply whose only tokens
// are unusable (out of range, hedged, malformed) is a parse failure that is
// kept apart from refusals and flagged for review.

#include <algorithm>
#include <array>
#include <cctype>
#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cultmap/answer.hpp"
#include "cultmap/questions.hpp"
#include "cultmap/util.hpp"

namespace cultmap {

struct ParseFailure {
  std::string reason;
};

struct ParseResult {
  std::variant<ParsedAnswer, ParseFailure> value;
  bool needs_review = false;

  bool ok() const { return std::holds_alternative<ParsedAnswer>(value); }
  bool refused() const { return ok() && is_refusal(std::get<ParsedAnswer>(value)); }
  /// True when the answer can be encoded.
  bool usable() const { return ok() && !refused(); }
  const ParsedAnswer* answer() const { return std::get_if<ParsedAnswer>(&value); }
  const ParseFailure* failure() const { return std::get_if<ParseFailure>(&value); }
};

/// Compact label used by fixture files and review dumps:
/// scalar:3, choice:A, pair:2,1, set:independence|hard_work, refusal, error.
inline std::string label(const ParseResult& r) {
  if (r.failure()) return "error";
  return std::visit(
      [](const auto& a) -> std::string {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, Scalar>) {
          return "scalar:" + std::to_string(a.value);
        } else if constexpr (std::is_same_v<T, Choice>) {
          return std::string("choice:") + a.letter;
        } else if constexpr (std::is_same_v<T, GoalPair>) {
          return "pair:" + std::to_string(a.first) + "," + std::to_string(a.second);
        } else if constexpr (std::is_same_v<T, QualitySet>) {
          std::string s = "set:";
          for (std::size_t i = 0; i < a.qualities.size(); ++i) {
            if (i) s += "|";
            s += quality_info(a.qualities[i]).key;
          }
          return s;
        } else {
          return "refusal";
        }
      },
      *r.answer());
}

namespace parse_detail {

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '\'' || c == '_';
}

struct NumberToken {
  long value = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  bool decimal = false;
  bool scale_context = false;
};

inline std::vector<NumberToken> number_tokens(std::string_view s) {
  std::vector<NumberToken> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    NumberToken t{0, i, j, false, false};
    if (j + 1 < s.size() && s[j] == '.' && std::isdigit(static_cast<unsigned char>(s[j + 1]))) {
      t.decimal = true;
      t.end = j + 1;
      while (t.end < s.size() && std::isdigit(static_cast<unsigned char>(s[t.end]))) ++t.end;
    }
    // Attached to a word on either side (GPT-4, 3rd, A008) means not standalone.
    const bool glued_before =
        i > 0 && (is_word_char(s[i - 1]) || (s[i - 1] == '-' && i > 1 && is_word_char(s[i - 2])) ||
                  (s[i - 1] == '.' && i > 1 && std::isdigit(static_cast<unsigned char>(s[i - 2]))));
    const bool glued_after = t.end < s.size() && is_word_char(s[t.end]);
    if (!glued_before && !glued_after) {
      const auto digits = s.substr(i, j - i);
      t.value = digits.size() > 9 ? 999999999L : std::stol(std::string(digits));
      out.push_back(t);
    }
    i = t.end;
  }
  return out;
}

/// Lowercased words between two offsets, punctuation dropped.
inline std::vector<std::string> words_between(std::string_view s, std::size_t from, std::size_t to) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = from; i < to && i < s.size(); ++i) {
    if (std::isalpha(static_cast<unsigned char>(s[i]))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i]))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::string last_word_before(std::string_view s, std::size_t pos) {
  std::size_t i = pos;
  while (i > 0 && !std::isalpha(static_cast<unsigned char>(s[i - 1]))) {
    if (std::isdigit(static_cast<unsigned char>(s[i - 1]))) return {};
    --i;
  }
  std::size_t end = i;
  while (i > 0 && std::isalpha(static_cast<unsigned char>(s[i - 1]))) --i;
  return util::to_lower(s.substr(i, end - i));
}

inline char prev_non_space(std::string_view s, std::size_t pos) {
  while (pos > 0) {
    const char c = s[--pos];
    if (!std::isspace(static_cast<unsigned char>(c))) return c;
  }
  return '\0';
}

/// Marks tokens that restate the scale rather than answer: range endpoints
/// ("from 1 to 10", "1-10", "between 1 and 4"), label definitions ("where 1
/// is ...", ", 2 means ...") and denominators ("out of 10", "/10").
inline void mark_scale_context(std::string_view s, std::vector<NumberToken>& toks) {
  for (std::size_t k = 0; k < toks.size(); ++k) {
    auto& t = toks[k];
    const auto before = last_word_before(s, t.begin);
    if (before == "from" || before == "between") t.scale_context = true;
    if (k > 0) {
      const auto gap = words_between(s, toks[k - 1].end, t.begin);
      const auto raw_gap = util::trim(s.substr(toks[k - 1].end, t.begin - toks[k - 1].end));
      const bool range = (gap.size() == 1 && gap[0] == "to") ||
                         (gap.empty() && (raw_gap == "-" || raw_gap == "\xE2\x80\x93")) ||
                         (gap.size() == 1 && gap[0] == "and" && toks[k - 1].scale_context);
      if (range) {
        toks[k - 1].scale_context = true;
        t.scale_context = true;
      }
      if ((gap.size() == 2 && gap[0] == "out" && gap[1] == "of") || (gap.empty() && raw_gap == "/")) {
        t.scale_context = true;
      }
    }
    const auto after = words_between(s, t.end, std::min(s.size(), t.end + 12));
    const char prev = prev_non_space(s, t.begin);
    if (!after.empty() && (after[0] == "is" || after[0] == "means") &&
        (before == "where" || prev == ',' || prev == ';')) {
      t.scale_context = true;
    }
    if (t.end < s.size() && util::trim(s.substr(t.end, 2)).starts_with("=")) t.scale_context = true;
  }
}

inline bool only_separators(std::string_view s, std::size_t from, std::size_t to,
                            std::initializer_list<std::string_view> words, std::string_view punct) {
  for (std::size_t i = from; i < to; ++i) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c)) || std::isalpha(static_cast<unsigned char>(c))) continue;
    if (punct.find(c) == std::string_view::npos) return false;
  }
  for (const auto& w : words_between(s, from, to)) {
    if (std::find(words.begin(), words.end(), w) == words.end()) return false;
  }
  return true;
}

inline bool residue_is_blank(std::string_view s, const std::vector<std::pair<std::size_t, std::size_t>>& spans) {
  std::string rest(s);
  for (const auto& [b, e] : spans) {
    for (std::size_t i = b; i < e && i < rest.size(); ++i) rest[i] = ' ';
  }
  return std::all_of(rest.begin(), rest.end(), [](unsigned char c) {
    return std::isspace(c) || c == '.' || c == ',' || c == ';' || c == ':' || c == '"' || c == '(' || c == ')';
  });
}

inline ParseResult failure(std::string reason) { return {ParseFailure{std::move(reason)}, true}; }

inline ParseResult refusal(bool review) { return {ParsedAnswer{Refusal{"no valid answer token"}}, review}; }

inline ParseResult parse_scale(const IntegerScale& kind, std::string_view s) {
  auto toks = number_tokens(s);
  mark_scale_context(s, toks);
  std::vector<const NumberToken*> candidates;
  for (const auto& t : toks) {
    if (!t.scale_context) candidates.push_back(&t);
  }
  const NumberToken* chosen = nullptr;
  std::size_t chosen_idx = 0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto* t = candidates[k];
    if (!t->decimal && t->value >= kind.min && t->value <= kind.max) {
      chosen = t;
      chosen_idx = k;
    }
  }
  if (!chosen) {
    if (!candidates.empty()) return failure("no in-range score; saw '" + std::string(s.substr(candidates.back()->begin, candidates.back()->end - candidates.back()->begin)) + "'");
    return refusal(!util::trim(s).empty());
  }
  // "7 or 8": a hedge between two candidates is not an answer.
  const auto hedged_with = [&](std::size_t a, std::size_t b) {
    const auto gap = words_between(s, candidates[a]->end, candidates[b]->begin);
    return gap.size() == 1 && gap[0] == "or" &&
           only_separators(s, candidates[a]->end, candidates[b]->begin, {"or"}, ",");
  };
  if ((chosen_idx > 0 && hedged_with(chosen_idx - 1, chosen_idx)) ||
      (chosen_idx + 1 < candidates.size() && hedged_with(chosen_idx, chosen_idx + 1))) {
    return failure("hedged between several scores");
  }
  const bool bare = residue_is_blank(s, {{chosen->begin, chosen->end}});
  return {ParsedAnswer{Scalar{static_cast<int>(chosen->value)}}, !bare};
}

inline ParseResult parse_letter(const LetterChoice& kind, std::string_view s) {
  struct LetterToken {
    char upper;
    bool lower;
    std::size_t pos;
  };
  std::vector<LetterToken> toks;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isalpha(static_cast<unsigned char>(s[i]))) continue;
    const bool left_ok = i == 0 || !is_word_char(s[i - 1]);
    const bool right_ok = i + 1 == s.size() || !is_word_char(s[i + 1]);
    // "A person ..." and "I think ..." read as words, not options.
    std::size_t next = i + 1;
    while (next < s.size() && s[next] == ' ') ++next;
    const bool word_like = (s[i] == 'A' || s[i] == 'I') && next > i + 1 && next < s.size() &&
                           std::islower(static_cast<unsigned char>(s[next]));
    if (left_ok && right_ok && !word_like) {
      toks.push_back({static_cast<char>(std::toupper(static_cast<unsigned char>(s[i]))),
                      std::islower(static_cast<unsigned char>(s[i])) != 0, i});
    }
  }
  const auto trimmed = util::trim(s);
  const bool whole = trimmed.size() <= 4 && toks.size() == 1 && residue_is_blank(s, {{toks[0].pos, toks[0].pos + 1}});
  const auto explicit_mark = [&](const LetterToken& t) {
    const auto w = last_word_before(s, t.pos);
    const bool parens = t.pos > 0 && s[t.pos - 1] == '(' && t.pos + 1 < s.size() && s[t.pos + 1] == ')';
    return w == "option" || w == "answer" || w == "response" || w == "choice" || parens;
  };

  const LetterToken* chosen = nullptr;
  bool invalid_seen = false;
  for (const auto& t : toks) {
    const bool in_set = kind.options.find(t.upper) != std::string_view::npos;
    const bool marked = whole || explicit_mark(t);
    if (in_set && (!t.lower || marked)) {
      chosen = &t;
    } else if (!in_set && marked && t.upper != 'I' && !t.lower) {
      invalid_seen = true;
    }
  }
  if (!chosen) {
    if (invalid_seen) return failure("option outside " + std::string(kind.options));
    return refusal(!trimmed.empty());
  }
  return {ParsedAnswer{Choice{chosen->upper}}, !whole};
}

inline ParseResult parse_goals(std::string_view s) {
  auto toks = number_tokens(s);
  std::optional<GoalPair> best;
  std::pair<std::size_t, std::size_t> span{};
  bool malformed = false;
  for (std::size_t k = 0; k + 1 < toks.size(); ++k) {
    const auto& a = toks[k];
    const auto& b = toks[k + 1];
    if (a.decimal || b.decimal) continue;
    if (!only_separators(s, a.end, b.begin,
                         {"and", "then", "next", "most", "important", "second", "goal", "followed", "by"},
                         ",;:&/-")) {
      continue;
    }
    if (b.begin - a.end > 32) continue;
    if (a.value >= 1 && a.value <= 4 && b.value >= 1 && b.value <= 4 && a.value != b.value) {
      best = GoalPair{static_cast<int>(a.value), static_cast<int>(b.value)};
      span = {a.begin, b.end};
    } else {
      malformed = true;
    }
  }
  if (best) return {ParsedAnswer{*best}, !residue_is_blank(s, {span})};
  if (malformed || !toks.empty()) return failure("no pair of distinct goals in 1..4");
  return refusal(!util::trim(s).empty());
}

/// Lowercase, every non-alphanumeric run collapsed to one space, padded.
inline std::string normalize_words(std::string_view s) {
  std::string out = " ";
  for (const char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (out.back() != ' ') {
      out.push_back(' ');
    }
  }
  if (out.back() != ' ') out.push_back(' ');
  return out;
}

inline ParseResult parse_qualities(std::string_view s) {
  const auto norm = normalize_words(s);
  std::vector<std::pair<std::size_t, Quality>> found;
  std::string residue = norm;
  for (const auto& info : kQualityCatalog) {
    std::optional<std::size_t> first;
    for (const auto alias : info.aliases) {
      if (alias.empty()) continue;
      const std::string needle = " " + std::string(alias) + " ";
      for (auto pos = residue.find(needle); pos != std::string::npos; pos = residue.find(needle, pos + 1)) {
        if (!first || pos < *first) first = pos;
      }
      for (auto pos = residue.find(needle); pos != std::string::npos; pos = residue.find(needle)) {
        residue.replace(pos + 1, alias.size(), std::string(alias.size(), ' '));
      }
    }
    if (first) found.emplace_back(*first, info.id);
  }
  if (found.empty()) return refusal(!util::trim(s).empty());
  std::sort(found.begin(), found.end());
  QualitySet set;
  for (const auto& [pos, q] : found) {
    if (set.qualities.size() == 5) break;
    set.qualities.push_back(q);
  }
  const auto leftover = normalize_words(residue);
  const bool bare = leftover == " " || leftover == "  ";
  return {ParsedAnswer{std::move(set)}, !bare || found.size() > 5};
}

}  // namespace parse_detail

/// Never throws: every input maps to an answer, a refusal or a ParseFailure.
inline ParseResult parse(const QuestionSpec& spec, std::string_view raw) {
  try {
    return std::visit(
        [&](const auto& kind) -> ParseResult {
          using K = std::decay_t<decltype(kind)>;
          if constexpr (std::is_same_v<K, IntegerScale>) {
            return parse_detail::parse_scale(kind, raw);
          } else if constexpr (std::is_same_v<K, LetterChoice>) {
            return parse_detail::parse_letter(kind, raw);
          } else if constexpr (std::is_same_v<K, GoalPairKind>) {
            return parse_detail::parse_goals(raw);
          } else {
            return parse_detail::parse_qualities(raw);
          }
        },
        spec.kind);
  } catch (const std::exception& e) {
    return parse_detail::failure(std::string("parser fault: ") + e.what());
  }
}

inline ParseResult parse(QuestionId q, std::string_view raw) { return parse(question(q), raw); }

// ---------------------------------------------------------------------------
// Batch parsing

/// One cell of the response matrix.
struct CellKey {
  std::string model;
  std::string context;  // "baseline" or a country code
  int variant = 0;
  QuestionId question = QuestionId::A008;
  int repetition = 0;
  auto operator<=>(const CellKey&) const = default;
};

struct BatchCell {
  CellKey cell;
  std::string transcript_key;
};

struct ParsedCell {
  CellKey cell;
  std::string raw;
  std::optional<ParseResult> result;  // empty when the transcript is missing
};

struct ParseCounts {
  std::size_t scalar = 0, choice = 0, pair = 0, set = 0, refusal = 0, error = 0, missing = 0;
};

struct ParseReport {
  std::array<ParseCounts, kQuestionCount> per_question{};
  /// (model, context, question) where no variant produced a usable answer.
  std::vector<std::tuple<std::string, std::string, QuestionId>> all_null;

  std::size_t errors() const {
    std::size_t n = 0;
    for (const auto& c : per_question) n += c.error;
    return n;
  }
  std::size_t missing() const {
    std::size_t n = 0;
    for (const auto& c : per_question) n += c.missing;
    return n;
  }
};

struct ObservationTable {
  std::vector<ParsedCell> cells;  // sorted by CellKey
  ParseReport report;
};

class MissingCellError : public Error {
 public:
  using Error::Error;
};

/// `responses` maps transcript keys to raw model text; keys absent from the
/// map are gaps, which are an error unless `tolerate_gaps` is set.
inline ObservationTable parse_batch(std::vector<BatchCell> cells,
                                    const std::map<std::string, std::string>& responses,
                                    bool tolerate_gaps = false) {
  std::sort(cells.begin(), cells.end(), [](const BatchCell& a, const BatchCell& b) { return a.cell < b.cell; });
  ObservationTable table;
  std::map<std::tuple<std::string, std::string, QuestionId>, std::pair<bool, bool>> usable;  // seen, any usable
  for (const auto& bc : cells) {
    ParsedCell pc{bc.cell, {}, std::nullopt};
    auto& counts = table.report.per_question[index_of(bc.cell.question)];
    const auto it = responses.find(bc.transcript_key);
    if (it == responses.end()) {
      if (!tolerate_gaps) {
        throw MissingCellError("no response for " + bc.cell.model + "/" + bc.cell.context + "/v" +
                               std::to_string(bc.cell.variant) + "/" + std::string(code(bc.cell.question)));
      }
      ++counts.missing;
      table.cells.push_back(std::move(pc));
      continue;
    }
    pc.raw = it->second;
    pc.result = parse(bc.cell.question, pc.raw);
    auto& u = usable[{bc.cell.model, bc.cell.context, bc.cell.question}];
    u.first = true;
    if (const auto* f = pc.result->failure()) {
      (void)f;
      ++counts.error;
    } else {
      std::visit(
          [&](const auto& a) {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, Scalar>) ++counts.scalar;
            else if constexpr (std::is_same_v<T, Choice>) ++counts.choice;
            else if constexpr (std::is_same_v<T, GoalPair>) ++counts.pair;
            else if constexpr (std::is_same_v<T, QualitySet>) ++counts.set;
            else ++counts.refusal;
          },
          *pc.result->answer());
      if (pc.result->usable()) u.second = true;
    }
    table.cells.push_back(std::move(pc));
  }
  for (const auto& [k, u] : usable) {
    if (u.first && !u.second) table.report.all_null.push_back(k);
  }
  return table;
}

inline std::string format_parse_report(const ParseReport& r) {
  std::string out = "question\tscalar\tchoice\tpair\tset\trefusal\terror\tmissing\n";
  for (const auto q : kAllQuestions) {
    const auto& c = r.per_question[index_of(q)];
    out += std::string(code(q)) + "\t" + std::to_string(c.scalar) + "\t" + std::to_string(c.choice) +
           "\t" + std::to_string(c.pair) + "\t" + std::to_string(c.set) + "\t" +
           std::to_string(c.refusal) + "\t" + std::to_string(c.error) + "\t" + std::to_string(c.missing) + "\n";
  }
  for (const auto& [model, context, q] : r.all_null) {
    out += "# all-null\t" + model + "\t" + context + "\t" + std::string(code(q)) + "\n";
  }
  return out;
}

}  // namespace cultmap
