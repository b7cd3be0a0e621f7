#include <gtest/gtest.h>

#include <random>

#include "cultmap/metrics.hpp"
#include "helpers.hpp"
#include "oracles/oracles.hpp"

using namespace cultmap;

namespace {

const std::vector<double> kSampleA{3.000, 4.089, 3.603, 1.401, 1.701, 3.994, 0.521, 3.785, 3.688, 2.372,
                                   1.712, 1.614, 1.519, 2.280, 2.518, 2.714, 4.482, 3.671, 2.989, 4.456,
                                   1.361, 1.141, 2.950, 0.676, 0.643, 2.560, 2.365, 4.169, 3.017, 2.556};
const std::vector<double> kSampleB{3.777, 3.919, 3.884, 1.529, 0.146, 4.121, -0.050, 2.389, 3.613, 1.873,
                                   1.013, 0.957, 2.022, 1.611, 0.695, 3.506, 3.109, 2.964, 2.966, 2.056,
                                   0.075, 1.620, 2.283, -0.443, 0.213, 1.345, 1.825, 2.968, 1.122, 2.564};

std::vector<std::pair<double, double>> zip(const std::vector<double>& a, const std::vector<double>& b,
                                           std::size_t n) {
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(a[i], b[i]);
  return out;
}

std::vector<double> diffs_of(const std::vector<std::pair<double, double>>& p) {
  std::vector<double> d;
  for (const auto& [a, b] : p) d.push_back(a - b);
  return d;
}

ValuesModel fixture_model() {
  static const auto m = fit_values_model(testing_support::fixture_dataset()).model;
  return m;
}

AnswerVector full_answers() { return {2, 1, 2, 2, 6, 7, 5, 2, 2, 1}; }

}  // namespace

TEST(Ranks, AverageTiesAndCountThem) {
  const std::vector<double> v{3, 1, 3, 2, 3, 1};
  std::vector<std::size_t> ties;
  const auto r = average_ranks(v, &ties);
  EXPECT_EQ(r, (std::vector<double>{5, 1.5, 5, 3, 5, 1.5}));
  EXPECT_EQ(r, oracle::count_ranks(v));
  std::sort(ties.begin(), ties.end());
  EXPECT_EQ(ties, (std::vector<std::size_t>{2, 3}));
}

TEST(Wilcoxon, MatchesSignFlipEnumerationUpToFifteen) {
  std::mt19937_64 rng(20240601);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 6 + static_cast<std::size_t>(trial % 10);
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < n; ++i) {
      // One decimal place so tied magnitudes and zero differences both occur.
      const double a = std::round(synthetic::normal(rng) * 10) / 10;
      const double b = std::round((synthetic::normal(rng) + 0.3) * 10) / 10;
      pairs.emplace_back(a, b);
    }
    const auto diffs = diffs_of(pairs);
    if (std::count(diffs.begin(), diffs.end(), 0.0) > static_cast<long>(n) - 6) continue;
    const auto r = wilcoxon_signed_rank(pairs);
    EXPECT_TRUE(r.exact);
    EXPECT_NEAR(r.p_value, oracle::wilcoxon_enumeration(diffs), 1e-6) << "trial " << trial;
  }
}

TEST(Wilcoxon, AgreesWithPublishedImplementation) {
  const auto exact = wilcoxon_signed_rank(zip(kSampleA, kSampleB, 15));
  EXPECT_TRUE(exact.exact);
  EXPECT_NEAR(exact.p_value, 0.083251953125, 1e-3);
  // W+ and min(W+, W-) describe the same split of the rank sum.
  EXPECT_DOUBLE_EQ(std::min(exact.statistic, 120 - exact.statistic), 29);

  const auto approx = wilcoxon_signed_rank(zip(kSampleA, kSampleB, 30));
  EXPECT_FALSE(approx.exact);
  EXPECT_EQ(approx.n, 30u);
  EXPECT_DOUBLE_EQ(approx.statistic, 389);
  EXPECT_NEAR(approx.p_value, 0.0013335465161264345, 1e-3);
}

TEST(Wilcoxon, SymmetricDifferencesGiveLargeP) {
  std::vector<std::pair<double, double>> pairs;
  for (int k = 1; k <= 8; ++k) {
    pairs.emplace_back(k, 0);
    pairs.emplace_back(0, k);
  }
  EXPECT_GE(wilcoxon_signed_rank(pairs).p_value, 0.99);
}

TEST(Wilcoxon, UniformlyPositiveDifferencesGiveSmallP) {
  std::vector<std::pair<double, double>> pairs;
  for (int k = 1; k <= 20; ++k) pairs.emplace_back(k + 0.5 * k, k);
  const auto r = wilcoxon_signed_rank(pairs);
  EXPECT_LT(r.p_value, 0.001);
  EXPECT_DOUBLE_EQ(r.statistic, 210);
}

TEST(Wilcoxon, InvariantUnderNegationAndTranslation) {
  std::mt19937_64 rng(5);
  for (const std::size_t n : {8u, 20u, 40u}) {
    std::vector<std::pair<double, double>> pairs, swapped, shifted;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = std::floor(synthetic::normal(rng) * 8);
      const double b = std::floor(synthetic::normal(rng) * 8 + 2);
      pairs.emplace_back(a, b);
      swapped.emplace_back(b, a);
      shifted.emplace_back(a + 17, b + 17);
    }
    const auto r = wilcoxon_signed_rank(pairs);
    const auto s = wilcoxon_signed_rank(swapped);
    const auto t = wilcoxon_signed_rank(shifted);
    EXPECT_NEAR(r.p_value, s.p_value, 1e-12);
    EXPECT_DOUBLE_EQ(r.statistic + s.statistic, static_cast<double>(r.n * (r.n + 1)) / 2);
    EXPECT_EQ(r.p_value, t.p_value);
    EXPECT_EQ(r.statistic, t.statistic);
    EXPECT_GT(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
  }
}

TEST(Wilcoxon, RejectsDegenerateInput) {
  EXPECT_THROW(wilcoxon_signed_rank(std::vector<std::pair<double, double>>{{1, 1}, {2, 2}}), StatsError);
  EXPECT_THROW(wilcoxon_signed_rank(std::vector<std::pair<double, double>>{{1, 0}, {2, 0}, {3, 0}}), StatsError);
  std::vector<std::pair<double, double>> zeros_dropped{{1, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 0}, {6, 6}, {7, 7}};
  EXPECT_THROW(wilcoxon_signed_rank(zeros_dropped), StatsError);
}

TEST(KruskalWallis, MatchesOracleAndPublishedValues) {
  const std::vector<double> g1{2.1, 3.4, 1.9, 2.8, 3.0, 2.2, 2.2, 4.1};
  const std::vector<double> g2{1.2, 1.9, 0.8, 1.5, 2.2, 1.1};
  const std::vector<double> g3{3.3, 4.0, 2.9, 3.8, 3.1, 4.4, 3.6};
  const auto three = kruskal_wallis({g1, g2, g3});
  EXPECT_NEAR(three.statistic, oracle::kruskal_h({g1, g2, g3}), 1e-9);
  EXPECT_NEAR(three.statistic, 13.162439894524589, 1e-3);
  EXPECT_NEAR(three.p_value, 0.0013861572242165321, 1e-3);
  const auto two = kruskal_wallis({g1, g2});
  EXPECT_NEAR(two.statistic, 7.0819907407407365, 1e-3);
  EXPECT_NEAR(two.p_value, 0.007786246185846686, 1e-3);
}

TEST(KruskalWallis, RandomGroupsAgreeWithRankVarianceForm) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const int k = 2 + trial % 4;
    std::vector<std::vector<double>> groups(k);
    for (auto& g : groups) {
      const auto size = 2 + rng() % 7;
      for (std::size_t i = 0; i < size; ++i) g.push_back(std::round(synthetic::normal(rng) * 4) / 2);
    }
    const auto r = kruskal_wallis(groups);
    const double h = oracle::kruskal_h(groups);
    EXPECT_NEAR(r.statistic, h, 1e-9);
    if (h > 0) {
      EXPECT_NEAR(r.p_value, oracle::chi_square_tail(h, k - 1), 1e-9);
    }
  }
}

TEST(KruskalWallis, IdenticalGroupsAndErrors) {
  const std::vector<double> g{1, 2, 3, 4, 5};
  const auto r = kruskal_wallis({g, g, g});
  EXPECT_NEAR(r.statistic, 0.0, 1e-12);
  EXPECT_NEAR(r.p_value, 1.0, 1e-9);
  const auto tied = kruskal_wallis({{2, 2, 2}, {2, 2}});
  EXPECT_EQ(tied.statistic, 0.0);
  EXPECT_EQ(tied.p_value, 1.0);
  EXPECT_THROW(kruskal_wallis({g}), StatsError);
  EXPECT_THROW(kruskal_wallis({g, {}}), StatsError);
  EXPECT_THROW(kruskal_wallis({{1, 2}, {3, 4}}), StatsError);
}

TEST(Projection, AveragesCompleteVariantsOnly) {
  const auto model = fixture_model();
  std::vector<ModelObservation> obs;
  for (int v = 9; v >= 0; --v) {
    ModelObservation o{"m", "JOR", v, 0, full_answers()};
    o.answers[index_of(QuestionId::F063)] = 1 + v;
    if (v == 3 || v == 7) o.answers[index_of(QuestionId::F120)].reset();
    obs.push_back(o);
  }
  const auto p = project(obs, model);
  EXPECT_EQ(p.used, 8u);
  EXPECT_EQ(p.dropped, 2u);
  double x = 0, y = 0;
  for (const auto& o : obs) {
    if (!o.answers[index_of(QuestionId::F120)]) continue;
    const auto c = model.project(o.answers);
    x += c.x;
    y += c.y;
  }
  EXPECT_NEAR(p.coords.x, x / 8, 1e-12);
  EXPECT_NEAR(p.coords.y, y / 8, 1e-12);

  auto reversed = obs;
  std::reverse(reversed.begin(), reversed.end());
  EXPECT_EQ(project(reversed, model).coords, p.coords);
}

TEST(Projection, AlwaysNullItemExcludesTheContext) {
  std::vector<ModelObservation> obs;
  for (int v = 0; v < 10; ++v) {
    ModelObservation o{"m", "LBY", v, 0, full_answers()};
    o.answers[index_of(QuestionId::F118)].reset();
    obs.push_back(o);
  }
  try {
    project(obs, fixture_model());
    FAIL();
  } catch (const ExclusionError& e) {
    EXPECT_NE(std::string(e.what()).find("F118"), std::string::npos) << e.what();
  }
}

TEST(Projection, ObservationsFromParsedCells) {
  std::vector<BatchCell> cells;
  std::map<std::string, std::string> responses;
  const std::map<QuestionId, std::string> replies{
      {QuestionId::A008, "2"},  {QuestionId::A165, "B"},    {QuestionId::E018, "3"},  {QuestionId::E025, "(A)"},
      {QuestionId::F063, "9"},  {QuestionId::F118, "4"},    {QuestionId::F120, "6"},  {QuestionId::G006, "1"},
      {QuestionId::Y002, "2, 4"}, {QuestionId::Y003, "Independence; Obedience; Thrift"}};
  for (const auto& [q, text] : replies) {
    const auto key = std::string(code(q));
    cells.push_back({{"m", "baseline", 0, q, 0}, key});
    responses[key] = text;
  }
  responses["F118"] = "I would rather not say.";
  const auto obs = build_observations(parse_batch(cells, responses));
  ASSERT_EQ(obs.size(), 1u);
  const auto& o = obs.at({"m", "baseline"}).at(0);
  EXPECT_EQ(o.answers[index_of(QuestionId::A165)], 2.0);
  EXPECT_EQ(o.answers[index_of(QuestionId::E025)], 1.0);
  EXPECT_EQ(o.answers[index_of(QuestionId::Y002)], 3.0);
  EXPECT_EQ(o.answers[index_of(QuestionId::Y003)], 0.0);
  EXPECT_FALSE(o.answers[index_of(QuestionId::F118)].has_value());
}

TEST(Ranking, NearestAndFarthestWithTies) {
  const std::map<std::string, CulturalCoordinates> countries{
      {"BBB", {1, 0}}, {"AAA", {0, 1}}, {"CCC", {3, 4}}, {"DDD", {-3, -4}}, {"EEE", {0.5, 0}}};
  const auto e = rank_extremes({0, 0}, countries, 3);
  ASSERT_EQ(e.nearest.size(), 3u);
  EXPECT_EQ(e.nearest[0].country, "EEE");
  EXPECT_EQ(e.nearest[1].country, "AAA");
  EXPECT_EQ(e.nearest[2].country, "BBB");
  EXPECT_EQ(e.farthest[0].country, "CCC");
  EXPECT_EQ(e.farthest[1].country, "DDD");
  EXPECT_DOUBLE_EQ(e.farthest[0].distance, 5.0);
  EXPECT_THROW(rank_extremes({0, 0}, countries, 6), StatsError);
  EXPECT_THROW(rank_extremes({0, 0}, {}, 0), StatsError);
}

TEST(DistanceReport, ImprovementAndExclusions) {
  const std::map<std::string, CulturalCoordinates> ivs{
      {"FIN", {2, 1}}, {"JOR", {-2, -1}}, {"LBY", {-1, -1}}, {"USA", {1, -1}}};
  std::map<std::string, CulturalOutcome> cultural{
      {"FIN", CulturalCoordinates{2, 0.5}}, {"JOR", CulturalCoordinates{3, 3}}, {"LBY", std::string("refused F118")}};
  const auto rep = build_distance_report("m", {1, 1}, ivs, cultural);
  ASSERT_EQ(rep.rows.size(), 4u);
  EXPECT_TRUE(rep.rows[0].improved());
  EXPECT_FALSE(rep.rows[1].improved());
  EXPECT_EQ(rep.rows[2].excluded_reason, "refused F118");
  EXPECT_EQ(rep.rows[3].excluded_reason, "not in cultural roster");
  const auto s = improvement_summary(rep);
  EXPECT_EQ(s.compared, 2u);
  EXPECT_EQ(s.improved, 1u);
  EXPECT_DOUBLE_EQ(s.fraction_improved, 0.5);
  EXPECT_DOUBLE_EQ(s.mean_default, (1.0 + std::sqrt(13.0)) / 2);
  EXPECT_EQ(s.excluded.size(), 2u);
  EXPECT_EQ(paired_distances(rep).size(), 2u);

  const auto table = distance_table(rep, 3);
  const auto lines = util::split(table, '\n');
  EXPECT_EQ(lines[0], kDistanceColumns);
  EXPECT_EQ(lines[1], "FIN\t2.000\t1.000\t1.000\t1.000\t1.000\t2.000\t0.500\t0.500\t0.500\ttrue\tNA");
  EXPECT_EQ(lines[3], "LBY\t-1.000\t-1.000\t1.000\t1.000\t2.828\tNA\tNA\tNA\tNA\tNA\trefused F118");

  const auto baseline_only = build_distance_report("m", {1, 1}, ivs, std::nullopt);
  EXPECT_EQ(baseline_only.rows[0].excluded_reason, "cultural coordinates absent");
  EXPECT_THROW(improvement_summary(baseline_only), StatsError);
}
