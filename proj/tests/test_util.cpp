#include <gtest/gtest.h>

#include "cultmap/kv_config.hpp"
#include "cultmap/util.hpp"

using namespace cultmap;

TEST(Util, TrimAndCase) {
  EXPECT_EQ(util::trim("  a b \t"), "a b");
  EXPECT_EQ(util::trim(""), "");
  EXPECT_TRUE(util::iequals("Chat", "cHAT"));
  EXPECT_FALSE(util::iequals("chat", "chats"));
}

TEST(Util, SplitKeepsEmptyFields) {
  const auto parts = util::split("a,,b,", ',');
  ASSERT_EQ(parts.size(), 4u);
  EXPECT_EQ(parts[1], "");
  EXPECT_EQ(parts[3], "");
}

TEST(Util, QuotedFieldsMayHoldDelimiters) {
  const auto parts = util::split_delimited(R"(FIN,"Helsinki, Uusimaa","say ""hi""")", ',');
  ASSERT_EQ(parts.size(), 3u);
  EXPECT_EQ(parts[1], "Helsinki, Uusimaa");
  EXPECT_EQ(parts[2], "say \"hi\"");
}

TEST(Util, NumberParsing) {
  EXPECT_EQ(util::parse_double(" 2.5 "), 2.5);
  EXPECT_FALSE(util::parse_double("2.5x"));
  EXPECT_FALSE(util::parse_double(""));
  EXPECT_EQ(util::parse_int("-4"), -4);
  EXPECT_FALSE(util::parse_int("4.0"));
}

TEST(Util, Formatting) {
  EXPECT_EQ(util::format_fixed(-0.00001, 4), "0.0000");
  EXPECT_EQ(util::format_fixed(1.23456, 2), "1.23");
  EXPECT_EQ(util::format_exact(0.1), "0.1");
  EXPECT_EQ(util::parse_double(util::format_exact(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Util, EscapeRoundTrip) {
  const std::string s = "line\none\ttab\\slash\r";
  EXPECT_EQ(util::escape(s), "line\\none\\ttab\\\\slash\\r");
  EXPECT_EQ(util::unescape(util::escape(s)), s);
}

TEST(Util, Sha256KnownVector) {
  EXPECT_EQ(util::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(KvConfig, SectionsAndComments) {
  const auto cfg = KvConfig::parse("top = 1\n# note\n[paths]\nivs = data.csv\n; other\n[model a]\nendpoint = x = y\n");
  EXPECT_EQ(cfg.get("top"), "1");
  EXPECT_EQ(cfg.get("ivs", "paths"), "data.csv");
  EXPECT_EQ(cfg.get("endpoint", "model a"), "x = y");
  EXPECT_FALSE(cfg.get("ivs"));
  const std::vector<std::string> order{"", "paths", "model a"};
  EXPECT_EQ(cfg.section_names(), order);
}

TEST(KvConfig, RejectsMalformedLines) {
  EXPECT_THROW(KvConfig::parse("[broken\n"), ConfigError);
  EXPECT_THROW(KvConfig::parse("no equals sign\n"), ConfigError);
  EXPECT_THROW(KvConfig::parse(" = value\n"), ConfigError);
}
