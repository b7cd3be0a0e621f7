#include <gtest/gtest.h>

#include <fstream>

#include "cultmap/prompts.hpp"
#include "helpers.hpp"

using namespace cultmap;

TEST(Descriptors, BaselineAndCulturalWording) {
  EXPECT_EQ(baseline_descriptor(0), "You are an average human being responding to the following survey question.");
  EXPECT_EQ(cultural_descriptor(9, "Japan"),
            "You are a world citizen born in Japan and living in Japan responding to the following survey question.");
  EXPECT_EQ(cultural_descriptor(2, "the Netherlands"),
            "You are a human being born in the Netherlands and living in the Netherlands responding to the following "
            "survey question.");
  EXPECT_THROW(baseline_descriptor(10), PromptError);
  EXPECT_THROW(cultural_descriptor(-1, "Japan"), PromptError);
  EXPECT_THROW(cultural_descriptor(0, "  "), PromptError);
}

TEST(Descriptors, AllVariantsDistinct) {
  std::set<std::string> seen;
  for (int v = 0; v < kVariantCount; ++v) {
    EXPECT_TRUE(seen.insert(baseline_descriptor(v)).second);
    EXPECT_TRUE(seen.insert(cultural_descriptor(v, "Ghana")).second);
  }
}

TEST(Assemble, ChatAndLegacyLayouts) {
  const auto b = assemble(QuestionId::Y002, baseline_descriptor(3), ApiMode::Legacy, {"m", QuestionId::A008, {}, 3});
  EXPECT_EQ(b.user_text, question(QuestionId::Y002).prompt_text);
  EXPECT_EQ(b.system_text, baseline_descriptor(3));
  EXPECT_EQ(b.combined_text, b.system_text + " " + b.user_text);
  EXPECT_EQ(b.meta.question, QuestionId::Y002);
  EXPECT_EQ(b.meta.context(), "baseline");
  EXPECT_EQ(b.mode, ApiMode::Legacy);
}

TEST(BuildMatrix, CountsAndOrder) {
  const auto variants = parse_variant_set("0-9");
  EXPECT_EQ(build_matrix("m", ApiMode::Chat, variants).size(), 100u);
  const std::vector<Country> roster{{"FIN", "Finland"}, {"JOR", "Jordan"}, {"JPN", "Japan"}};
  const auto cultural = build_matrix("m", ApiMode::Chat, variants, roster);
  ASSERT_EQ(cultural.size(), 300u);
  EXPECT_EQ(cultural.front().meta.context(), "FIN");
  EXPECT_EQ(cultural.back().meta.context(), "JPN");
  EXPECT_EQ(cultural.back().meta.variant, 9);
  EXPECT_EQ(cultural.back().meta.question, QuestionId::Y003);
  EXPECT_NE(cultural[150].system_text.find("born in Jordan and living in Jordan"), std::string::npos);
  EXPECT_EQ(build_matrix("m", ApiMode::Chat, {4}).size(), kQuestionCount);
}

TEST(VariantSet, Syntax) {
  EXPECT_EQ(parse_variant_set("0"), (std::set<int>{0}));
  EXPECT_EQ(parse_variant_set("0-2, 7"), (std::set<int>{0, 1, 2, 7}));
  EXPECT_EQ(parse_variant_set("3,3,1"), (std::set<int>{1, 3}));
  EXPECT_THROW(parse_variant_set(""), ConfigError);
  EXPECT_THROW(parse_variant_set("5-2"), ConfigError);
  EXPECT_THROW(parse_variant_set("0-10"), ConfigError);
  EXPECT_THROW(parse_variant_set("x"), ConfigError);
}

TEST(ApiModeNames, RoundTrip) {
  EXPECT_EQ(parse_api_mode("Chat"), ApiMode::Chat);
  EXPECT_EQ(parse_api_mode(to_string(ApiMode::Legacy)), ApiMode::Legacy);
  EXPECT_THROW(parse_api_mode("completions"), ConfigError);
}

TEST(Roster, LoadsBundledFile) {
  const auto roster = load_roster(testing_support::data_dir() / "countries.tsv");
  ASSERT_EQ(roster.size(), 5u);
  EXPECT_EQ(roster.front(), (Country{"FIN", "Finland"}));
}

TEST(Roster, ErrorsNameTheLine) {
  const auto dir = testing_support::scratch_dir("roster");
  const auto write = [&](const std::string& text) {
    std::ofstream(dir / "r.tsv") << text;
    return dir / "r.tsv";
  };
  try {
    load_roster(write("# comment\nFIN\tFinland\nJOR Jordan\n"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("r.tsv:3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_roster(write("FIN\tFinland\nFIN\tSuomi\n")), ConfigError);
  EXPECT_THROW(load_roster(write("FIN\t \n")), ConfigError);
  EXPECT_THROW(load_roster(dir / "absent.tsv"), Error);
}
