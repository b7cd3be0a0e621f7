#include <gtest/gtest.h>

#include "cultmap/parser.hpp"
#include "helpers.hpp"

using namespace cultmap;

namespace {

struct Fixture {
  QuestionId question;
  std::string expected;
  std::string raw;
  std::size_t line;
};

std::vector<Fixture> load_fixtures() {
  std::vector<Fixture> out;
  std::size_t n = 0;
  for (const auto& line : util::read_lines(testing_support::data_dir() / "parser_fixtures.tsv")) {
    ++n;
    if (line.empty() || line.front() == '#' || line.starts_with("question\t")) continue;
    const auto f = util::split(line, '\t');
    if (f.size() != 3) throw std::runtime_error("bad fixture line " + std::to_string(n));
    out.push_back({*parse_question_id(f[0]), f[1], util::unescape(f[2]), n});
  }
  return out;
}

std::string parsed(QuestionId q, std::string_view raw) { return label(parse(q, raw)); }

}  // namespace

TEST(ParserFixtures, AgreeWithHandLabels) {
  const auto fixtures = load_fixtures();
  ASSERT_GE(fixtures.size(), 60u);
  std::size_t agree = 0;
  for (const auto& f : fixtures) {
    const auto got = parsed(f.question, f.raw);
    if (got == f.expected) {
      ++agree;
    } else {
      ADD_FAILURE() << "line " << f.line << " " << code(f.question) << ": expected " << f.expected << ", got "
                    << got << " for '" << util::escape(f.raw) << "'";
    }
  }
  EXPECT_EQ(agree, fixtures.size());
}

TEST(ParserFixtures, EveryQuestionRepresented) {
  std::set<QuestionId> seen;
  for (const auto& f : load_fixtures()) seen.insert(f.question);
  EXPECT_EQ(seen.size(), kQuestionCount);
}

TEST(Parser, ScaleReplies) {
  EXPECT_EQ(parsed(QuestionId::F063, "7"), "scalar:7");
  EXPECT_EQ(parsed(QuestionId::F063, "Score number: 10"), "scalar:10");
  EXPECT_EQ(parsed(QuestionId::F063, "On a scale from 1 to 10, my score is 4."), "scalar:4");
  EXPECT_EQ(parsed(QuestionId::A008, "I would choose 2 (Quite happy)."), "scalar:2");
  EXPECT_EQ(parsed(QuestionId::A008, "7"), "error");
  EXPECT_EQ(parsed(QuestionId::G006, ""), "refusal");
}

TEST(Parser, LetterReplies) {
  EXPECT_EQ(parsed(QuestionId::A165, "B"), "choice:B");
  EXPECT_EQ(parsed(QuestionId::A165, "(A)"), "choice:A");
  EXPECT_EQ(parsed(QuestionId::E025, "My response: c"), "choice:C");
  EXPECT_EQ(parsed(QuestionId::E025, "Option B"), "choice:B");
  EXPECT_EQ(parsed(QuestionId::A165, "A person might say either."), "refusal");
}

TEST(Parser, GoalPairs) {
  EXPECT_EQ(parsed(QuestionId::Y002, "2, 4"), "pair:2,4");
  EXPECT_EQ(parsed(QuestionId::Y002, "3 and 1"), "pair:3,1");
  EXPECT_EQ(parsed(QuestionId::Y002, "Most important: 1, next most important: 2"), "pair:1,2");
  EXPECT_EQ(parsed(QuestionId::Y002, "As an average human being, my response to the survey question would be:\n\n2, 1."),
            "pair:2,1");
}

TEST(Parser, QualitySets) {
  EXPECT_EQ(parsed(QuestionId::Y003, "Independence; Hard work; Obedience"), "set:independence|hard_work|obedience");
  EXPECT_EQ(parsed(QuestionId::Y003, "- Tolerance and respect for other people\n- Thrift, saving money and things\n"),
            "set:tolerance|thrift");
  EXPECT_EQ(parsed(QuestionId::Y003, "1. Determination, perseverance\n2. Religious faith"),
            "set:determination|religious_faith");
}

TEST(Parser, NeverRefusesWhenAValidTokenIsPresent) {
  // Disclaimers do not hide an answer that follows them.
  const std::string disclaimer = "As an AI language model, I do not have personal opinions. However, ";
  for (const auto& spec : question_bank()) {
    std::string answer;
    std::string expected;
    if (const auto* s = std::get_if<IntegerScale>(&spec.kind)) {
      answer = "my answer would be " + std::to_string(s->max);
      expected = "scalar:" + std::to_string(s->max);
    } else if (std::holds_alternative<LetterChoice>(spec.kind)) {
      answer = "my response: B";
      expected = "choice:B";
    } else if (std::holds_alternative<GoalPairKind>(spec.kind)) {
      answer = "my response would be 4, 2.";
      expected = "pair:4,2";
    } else {
      answer = "I would pick Imagination and Independence.";
      expected = "set:imagination|independence";
    }
    const auto r = parse(spec, disclaimer + answer);
    EXPECT_EQ(label(r), expected) << code(spec.id);
    EXPECT_FALSE(r.refused());
  }
}

TEST(Parser, RefusalIsNotAnError) {
  const auto r = parse(QuestionId::F118, "As an AI language model, I do not have personal opinions or beliefs.");
  EXPECT_TRUE(r.ok());
  EXPECT_TRUE(r.refused());
  EXPECT_FALSE(r.usable());
}

TEST(Parser, ArbitraryBytesNeverThrow) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    std::string s(rng() % 40, '\0');
    for (auto& c : s) c = static_cast<char>(rng() % 256);
    for (const auto q : kAllQuestions) EXPECT_NO_THROW(parse(q, s));
  }
}

TEST(ParseBatch, SortsCountsAndReportsAllNull) {
  std::vector<BatchCell> cells;
  std::map<std::string, std::string> responses;
  for (int v = 2; v >= 0; --v) {
    cells.push_back({{"m", "JOR", v, QuestionId::F120, 0}, "k" + std::to_string(v)});
    responses["k" + std::to_string(v)] = "I cannot say.";
    cells.push_back({{"m", "JOR", v, QuestionId::F063, 0}, "s" + std::to_string(v)});
    responses["s" + std::to_string(v)] = std::to_string(v + 3);
  }
  const auto table = parse_batch(cells, responses);
  ASSERT_EQ(table.cells.size(), 6u);
  EXPECT_TRUE(std::is_sorted(table.cells.begin(), table.cells.end(),
                             [](const auto& a, const auto& b) { return a.cell < b.cell; }));
  EXPECT_EQ(table.report.per_question[index_of(QuestionId::F063)].scalar, 3u);
  EXPECT_EQ(table.report.per_question[index_of(QuestionId::F120)].refusal, 3u);
  ASSERT_EQ(table.report.all_null.size(), 1u);
  EXPECT_EQ(std::get<2>(table.report.all_null[0]), QuestionId::F120);
  const auto text = format_parse_report(table.report);
  EXPECT_NE(text.find("# all-null\tm\tJOR\tF120"), std::string::npos);
}

TEST(ParseBatch, GapsAreErrorsUnlessTolerated) {
  std::vector<BatchCell> cells{{{"m", "baseline", 0, QuestionId::A008, 0}, "present"},
                               {{"m", "baseline", 1, QuestionId::A008, 0}, "absent"}};
  const std::map<std::string, std::string> responses{{"present", "1"}};
  try {
    parse_batch(cells, responses);
    FAIL();
  } catch (const MissingCellError& e) {
    EXPECT_NE(std::string(e.what()).find("m/baseline/v1/A008"), std::string::npos);
  }
  const auto table = parse_batch(cells, responses, true);
  EXPECT_EQ(table.report.missing(), 1u);
  EXPECT_FALSE(table.cells[1].result.has_value());
}
