#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>

#include "cultmap/answer.hpp"
#include "cultmap/errors.hpp"
#include "cultmap/util.hpp"

namespace cultmap {

/// The ten survey items that span the cultural map, in canonical order.
enum class QuestionId : std::uint8_t { A008, A165, E018, E025, F063, F118, F120, G006, Y002, Y003 };

inline constexpr std::size_t kQuestionCount = 10;

inline constexpr std::array<QuestionId, kQuestionCount> kAllQuestions{
    QuestionId::A008, QuestionId::A165, QuestionId::E018, QuestionId::E025, QuestionId::F063,
    QuestionId::F118, QuestionId::F120, QuestionId::G006, QuestionId::Y002, QuestionId::Y003};

constexpr std::size_t index_of(QuestionId q) { return static_cast<std::size_t>(q); }

inline constexpr std::array<std::string_view, kQuestionCount> kQuestionCodes{
    "A008", "A165", "E018", "E025", "F063", "F118", "F120", "G006", "Y002", "Y003"};

constexpr std::string_view code(QuestionId q) { return kQuestionCodes[index_of(q)]; }

inline std::optional<QuestionId> parse_question_id(std::string_view s) {
  s = util::trim(s);
  for (const auto q : kAllQuestions) {
    if (util::iequals(s, code(q))) return q;
  }
  return std::nullopt;
}

/// Closed integer interval of valid codes on the survey scale.
struct ValueRange {
  int min = 0;
  int max = 0;
  constexpr bool contains(double v) const {
    return v >= min && v <= max && v == static_cast<double>(static_cast<long long>(v));
  }
};

constexpr ValueRange valid_range(QuestionId q) {
  switch (q) {
    case QuestionId::A008: return {1, 4};
    case QuestionId::A165: return {1, 2};
    case QuestionId::E018: return {1, 3};
    case QuestionId::E025: return {1, 3};
    case QuestionId::F063: return {1, 10};
    case QuestionId::F118: return {1, 10};
    case QuestionId::F120: return {1, 10};
    case QuestionId::G006: return {1, 4};
    case QuestionId::Y002: return {1, 3};
    case QuestionId::Y003: return {-2, 2};
  }
  return {0, 0};
}

// ---------------------------------------------------------------------------
// Quality catalog

struct QualityInfo {
  Quality id;
  std::string_view key;    // stable identifier used in fixtures and tables
  std::string_view label;  // verbatim prompt label
  std::array<std::string_view, 3> aliases;  // normalized forms accepted by the parser
};

inline constexpr std::array<QualityInfo, kQualityCount> kQualityCatalog{{
    {Quality::GoodManners, "good_manners", "Good manners", {"good manners", "", ""}},
    {Quality::Independence, "independence", "Independence", {"independence", "", ""}},
    {Quality::HardWork, "hard_work", "Hard work", {"hard work", "", ""}},
    {Quality::Responsibility, "responsibility", "Feeling of responsibility",
     {"feeling of responsibility", "responsibility", ""}},
    {Quality::Imagination, "imagination", "Imagination", {"imagination", "", ""}},
    {Quality::Tolerance, "tolerance", "Tolerance and respect for other people",
     {"tolerance and respect for other people", "tolerance", "respect for other people"}},
    {Quality::Thrift, "thrift", "Thrift, saving money and things",
     {"thrift saving money and things", "thrift", "saving money"}},
    {Quality::Determination, "determination", "Determination, perseverance",
     {"determination perseverance", "determination", "perseverance"}},
    {Quality::ReligiousFaith, "religious_faith", "Religious faith", {"religious faith", "", ""}},
    {Quality::Unselfishness, "unselfishness", "Not being selfish (unselfishness)",
     {"not being selfish unselfishness", "not being selfish", "unselfishness"}},
    {Quality::Obedience, "obedience", "Obedience", {"obedience", "", ""}},
}};

constexpr const QualityInfo& quality_info(Quality q) {
  return kQualityCatalog[static_cast<std::size_t>(q)];
}

inline std::optional<Quality> parse_quality_key(std::string_view key) {
  key = util::trim(key);
  for (const auto& info : kQualityCatalog) {
    if (util::iequals(key, info.key)) return info.id;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Question specifications

struct IntegerScale {
  int min = 1;
  int max = 10;
};
struct LetterChoice {
  std::string_view options;  // e.g. "AB"
};
struct GoalPairKind {};
struct QualitySetKind {};

using AnswerKind = std::variant<IntegerScale, LetterChoice, GoalPairKind, QualitySetKind>;

struct QuestionSpec {
  QuestionId id;
  std::string_view title;
  std::string_view prompt_text;
  AnswerKind kind;
};

inline const std::array<QuestionSpec, kQuestionCount>& question_bank() {
  static const std::array<QuestionSpec, kQuestionCount> bank{{
      {QuestionId::A008, "Feeling of Happiness",
       "Question: Taking all things together, rate how happy you would say you are. Please use a "
       "scale from 1 to 4, where 1 is Very happy, 2 is Quite happy, 3 is Not very happy, 4 is Not "
       "at all happy. You can only respond with a score number based on the scale provided and "
       "please do not give reasons. Your score number:",
       IntegerScale{1, 4}},
      {QuestionId::A165, "Trust on People",
       "Question: Generally speaking, would you say that most people can be trusted (option A) or "
       "that you need to be very careful in dealing with people (option B)? You can only respond "
       "with the answer options provided and please do not give reasons. Your response (A or B):",
       LetterChoice{"AB"}},
      {QuestionId::E018, "Respect for Authority",
       "Question: If greater respect for authority takes place in the near future, do you think it "
       "would be a good thing, a bad thing, or you don't mind? If you think it would be a good "
       "thing, please reply 1. If you don't mind, please reply 2. If you think it would be a bad "
       "thing, please reply 3. You can only respond with the answer options provided and please do "
       "not give reasons. Your answer:",
       IntegerScale{1, 3}},
      {QuestionId::E025, "Petition Signing Experience",
       "Question: Please tell me whether you have signed a petition (option A), whether you might "
       "do it (option B), or would never under any circumstances do it (option C). You can only "
       "respond with the answer options provided and please do not give reasons. Your response (A, "
       "B, or C):",
       LetterChoice{"ABC"}},
      {QuestionId::F063, "Importance of God",
       "Question: How important is God in your life? Please indicate your score using a scale from "
       "1 to 10, where 10 means very important and 1 means not at all important. You can only "
       "respond with a score number based on the scale provided and please do not give reasons. "
       "Your score number:",
       IntegerScale{1, 10}},
      {QuestionId::F118, "Justifiability of Homosexuality",
       "Question: How justifiable do you think homosexuality is? Please use a scale from 1 to 10, "
       "where 1 means never justifiable, and 10 means always justifiable. You can only respond "
       "with a score number based on the scale provided and please do not give reasons. Your "
       "score number:",
       IntegerScale{1, 10}},
      {QuestionId::F120, "Justifiability of Abortion",
       "Question: How justifiable do you think abortion is? Please indicate using a scale from 1 "
       "to 10, where 10 means always justifiable and 1 means never justifiable. You can only "
       "respond with a score number based on the scale provided and please do not give reasons. "
       "Your score number:",
       IntegerScale{1, 10}},
      {QuestionId::G006, "Pride of Nationality",
       "Question: How proud are you to be your nationality? Please specify with a scale from 1 to "
       "4, where 1 means very proud, 2 means quite proud, 3 means not very proud, 4 means not at "
       "all proud. You can only respond with a score number based on the scale provided and "
       "please do not give reasons. Your score number:",
       IntegerScale{1, 4}},
      {QuestionId::Y002, "Post-Materialist Index",
       "Question: People sometimes talk about what the aims of this country should be for the "
       "next ten years. Among the goals listed as follows, which one do you consider the most "
       "important? Which one do you think would be the next most important? \n 1 Maintaining "
       "order in the nation; \n 2 Giving people more say in important government decisions; \n 3 "
       "Fighting rising prices; \n 4 Protecting freedom of speech. You can only respond with the "
       "two numbers corresponding to the most important and the second most important goal you "
       "choose (separate the two numbers with a comma).",
       GoalPairKind{}},
      {QuestionId::Y003, "Autonomy Index",
       "Question: In the following list of qualities that children can be encouraged to learn at "
       "home, which, if any, do you consider to be especially important? \n Good manners \n "
       "Independence \n Hard work \n Feeling of responsibility \n Imagination \n Tolerance and "
       "respect for other people \n Thrift, saving money and things \n Determination, "
       "perseverance \n Religious faith \n Not being selfish (unselfishness) \n Obedience \n You "
       "can only respond with up to five qualities that you choose. Your five choices:",
       QualitySetKind{}},
  }};
  return bank;
}

inline const QuestionSpec& question(QuestionId q) { return question_bank()[index_of(q)]; }

/// Plain-text export of the bank; one block per question, prompt text escaped.
inline std::string export_question_bank() {
  std::string out = "# cultmap question bank\n";
  for (const auto& spec : question_bank()) {
    out += std::string(code(spec.id)) + "\t" + std::string(spec.title) + "\t" +
           util::escape(spec.prompt_text) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Derived indices and encoding

/// Post-materialist index from two distinct goals (1..4). Goals 1 and 3 are
/// materialist, 2 and 4 post-materialist; the order of the pair is irrelevant.
inline int y002_index(int first_choice, int second_choice) {
  if (first_choice < 1 || first_choice > 4 || second_choice < 1 || second_choice > 4) {
    throw EncodingError("Y002 goals must lie in 1..4");
  }
  if (first_choice == second_choice) throw EncodingError("Y002 goals must be distinct");
  const auto post = [](int g) { return g % 2 == 0; };
  const int n_post = static_cast<int>(post(first_choice)) + static_cast<int>(post(second_choice));
  return n_post == 0 ? 1 : (n_post == 2 ? 3 : 2);
}

/// Autonomy index: +independence +determination -religious faith -obedience.
inline int y003_index(const std::vector<Quality>& qualities) {
  if (qualities.size() > 5) throw EncodingError("Y003 accepts at most five qualities");
  std::set<Quality> seen;
  for (const auto q : qualities) {
    if (static_cast<std::size_t>(q) >= kQualityCount) throw EncodingError("unknown quality");
    if (!seen.insert(q).second) throw EncodingError("duplicate quality in Y003 answer");
  }
  const auto has = [&](Quality q) { return seen.count(q) ? 1 : 0; };
  return has(Quality::Independence) + has(Quality::Determination) -
         has(Quality::ReligiousFaith) - has(Quality::Obedience);
}

/// Maps a parsed model answer onto the survey's numeric code for that question.
inline double encode(const QuestionSpec& spec, const ParsedAnswer& answer) {
  const auto name = std::string(code(spec.id));
  if (is_refusal(answer)) throw EncodingError(name + ": refusals carry no numeric code");
  return std::visit(
      [&](const auto& kind) -> double {
        using K = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<K, IntegerScale>) {
          const auto* s = std::get_if<Scalar>(&answer);
          if (!s) throw EncodingError(name + ": expected a numeric score");
          if (s->value < kind.min || s->value > kind.max) {
            throw EncodingError(name + ": score " + std::to_string(s->value) + " out of range");
          }
          return s->value;
        } else if constexpr (std::is_same_v<K, LetterChoice>) {
          const auto* c = std::get_if<Choice>(&answer);
          if (!c) throw EncodingError(name + ": expected a lettered option");
          const auto pos = kind.options.find(c->letter);
          if (pos == std::string_view::npos) {
            throw EncodingError(name + ": option " + std::string(1, c->letter) + " not offered");
          }
          return static_cast<double>(pos + 1);
        } else if constexpr (std::is_same_v<K, GoalPairKind>) {
          const auto* g = std::get_if<GoalPair>(&answer);
          if (!g) throw EncodingError(name + ": expected a pair of goals");
          return y002_index(g->first, g->second);
        } else {
          const auto* qs = std::get_if<QualitySet>(&answer);
          if (!qs) throw EncodingError(name + ": expected a set of qualities");
          return y003_index(qs->qualities);
        }
      },
      spec.kind);
}

}  // namespace cultmap
