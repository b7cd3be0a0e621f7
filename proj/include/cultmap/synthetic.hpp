#pragma once

// Deterministic synthetic survey data. Respondents are drawn around a
// per-country position on two latent value dimensions and answer the ten
// items through fixed monotone link functions.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cultmap/questions.hpp"
#include "cultmap/survey.hpp"
#include "cultmap/util.hpp"

namespace cultmap::synthetic {

/// Uniform in [0, 1) with 53 random bits; independent of the standard library's distributions.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// 64-bit FNV-1a; stable seed derivation from text.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct CountryProfile {
  std::string code;
  std::string name;
  std::string region;
  double self_expression = 0.0;
  double secular = 0.0;
  SurveySource source = SurveySource::WVS;
};

inline const std::vector<CountryProfile>& default_profiles() {
  static const std::vector<CountryProfile> profiles{
      {"BRA", "Brazil", "Latin America", 0.1, -1.1, SurveySource::WVS},
      {"FIN", "Finland", "Protestant Europe", 1.3, 0.9, SurveySource::EVS},
      {"GHA", "Ghana", "African-Islamic", -0.8, -1.8, SurveySource::WVS},
      {"IND", "India", "West & South Asia", -0.5, -0.6, SurveySource::WVS},
      {"JOR", "Jordan", "African-Islamic", -1.4, -1.3, SurveySource::WVS},
      {"JPN", "Japan", "Confucian", 0.3, 1.6, SurveySource::WVS},
      {"LBY", "Libya", "African-Islamic", -1.1, -1.0, SurveySource::WVS},
      {"NLD", "Netherlands", "Protestant Europe", 1.6, 0.8, SurveySource::EVS},
      {"THA", "Thailand", "West & South Asia", -0.3, -0.2, SurveySource::WVS},
      {"USA", "United States", "English-Speaking", 1.0, -0.5, SurveySource::WVS},
  };
  return profiles;
}

inline const CountryProfile* find_profile(std::string_view code) {
  for (const auto& p : default_profiles()) {
    if (p.code == code) return &p;
  }
  return nullptr;
}

/// Loadings of each item on (self-expression, secular); the sign gives the
/// direction in which the coded value increases.
inline constexpr std::array<std::array<double, 2>, kQuestionCount> kItemLinks{{
    {-1.0, 0.0},  // A008: higher is less happy
    {-1.0, 0.0},  // A165: 2 = need to be careful
    {0.0, 0.7},   // E018: 3 = more respect for authority is bad
    {-1.0, 0.0},  // E025: 3 = would never sign
    {0.0, -0.9},  // F063: 10 = God very important
    {1.1, 0.2},   // F118
    {0.3, 0.6},   // F120
    {0.0, 0.6},   // G006: 4 = not at all proud
    {1.0, 0.0},   // Y002: 3 = post-materialist
    {0.2, 0.7},   // Y003
}};

/// Maps a latent position (plus item noise) to a value on the item's scale.
inline int item_value(QuestionId q, double self_expression, double secular, double noise) {
  const auto r = valid_range(q);
  const auto& l = kItemLinks[index_of(q)];
  const double signal = std::tanh(0.8 * (l[0] * self_expression + l[1] * secular) + noise);
  const double mid = 0.5 * (r.min + r.max);
  const double half = 0.5 * (r.max - r.min) + 0.49;
  const auto v = static_cast<int>(std::lround(mid + half * signal));
  return std::clamp(v, r.min, r.max);
}

struct Options {
  std::uint64_t seed = 20240601;
  int rows_per_country = 20;
  int first_year = 2005;
  int last_year = 2022;
  double missing_rate = 0.05;
  double person_sd = 0.6;
  double item_sd = 0.45;
  /// Extra rows dated 1990..2004, for wave-filter tests.
  int legacy_rows_per_country = 0;
  /// Blanks one question for every row of one country.
  std::optional<std::pair<std::string, QuestionId>> drop_question;
  std::vector<CountryProfile> profiles = default_profiles();
};

struct Row {
  SurveyRecord record;
  std::array<int, kQuestionCount> coded{};  // written values, including missing codes
};

inline std::vector<Row> generate_rows(const Options& opt = {}) {
  std::mt19937_64 rng(opt.seed);
  std::vector<Row> rows;
  int id = 100000;
  const auto draw_year = [&](int lo, int hi) {
    return lo + static_cast<int>(uniform01(rng) * static_cast<double>(hi - lo + 1));
  };
  for (const auto& p : opt.profiles) {
    const int total = opt.rows_per_country + opt.legacy_rows_per_country;
    for (int i = 0; i < total; ++i) {
      Row row;
      auto& rec = row.record;
      rec.country = p.code;
      rec.source = p.source;
      rec.year = i < opt.rows_per_country ? draw_year(opt.first_year, opt.last_year) : draw_year(1990, 2004);
      rec.weight = std::round((0.5 + uniform01(rng)) * 10000.0) / 10000.0;
      rec.respondent = std::to_string(++id);
      const double s = p.self_expression + opt.person_sd * normal(rng);
      const double t = p.secular + opt.person_sd * normal(rng);
      for (const auto q : kAllQuestions) {
        const auto k = index_of(q);
        const int v = item_value(q, s, t, opt.item_sd * normal(rng));
        const bool dropped = opt.drop_question && opt.drop_question->first == p.code &&
                             opt.drop_question->second == q;
        if (dropped || uniform01(rng) < opt.missing_rate) {
          row.coded[k] = uniform01(rng) < 0.5 ? -4 : -5;
        } else {
          row.coded[k] = v;
          rec.answers[k] = v;
        }
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline constexpr std::string_view kIdColumn = "S007";

/// CSV in the default column layout with an S007 respondent id column.
inline std::string to_csv(const std::vector<Row>& rows) {
  std::string out = "COUNTRY_ALPHA,S020,S001,S017," + std::string(kIdColumn);
  for (const auto c : kQuestionCodes) out += "," + std::string(c);
  out += '\n';
  for (const auto& r : rows) {
    const auto& rec = r.record;
    out += rec.country + ',' + std::to_string(rec.year) + ',' +
           (rec.source == SurveySource::WVS ? "2" : "1") + ',' + util::format_fixed(rec.weight, 4) + ',' +
           rec.respondent;
    for (const int v : r.coded) out += ',' + std::to_string(v);
    out += '\n';
  }
  return out;
}

inline std::string schema_text() {
  return "# column mapping for the synthetic IVS extract\n"
         "country = COUNTRY_ALPHA\nyear = S020\nsource = S001\nweight = S017\nid = " +
         std::string(kIdColumn) + "\n";
}

inline SurveySchema schema() {
  SurveySchema s;
  s.respondent = std::string(kIdColumn);
  return s;
}

inline SurveyDataset generate_dataset(const Options& opt = {}) {
  return parse_survey(to_csv(generate_rows(opt)), schema(), "<synthetic>");
}

}  // namespace cultmap::synthetic
