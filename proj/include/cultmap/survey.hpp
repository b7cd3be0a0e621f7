#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "cultmap/errors.hpp"
#include "cultmap/kv_config.hpp"
#include "cultmap/questions.hpp"
#include "cultmap/util.hpp"

namespace cultmap {

enum class SurveySource { WVS, EVS };

inline std::string_view to_string(SurveySource s) { return s == SurveySource::WVS ? "WVS" : "EVS"; }

using AnswerVector = std::array<std::optional<double>, kQuestionCount>;

struct SurveyRecord {
  std::string country;  // ISO-3166-1 alpha-3
  int year = 0;
  SurveySource source = SurveySource::WVS;
  double weight = 1.0;
  AnswerVector answers{};
  std::optional<int> wave;
  std::string respondent;  // empty unless the schema maps an id column
  std::size_t line = 0;    // 1-based line in the source file

  friend bool operator==(const SurveyRecord&, const SurveyRecord&) = default;
};

struct SurveyDataset {
  std::vector<SurveyRecord> records;
  std::vector<std::string> provenance;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  double total_weight() const {
    double sum = 0.0;
    for (const auto& r : records) sum += r.weight;
    return sum;
  }

  std::set<std::string> countries() const {
    std::set<std::string> out;
    for (const auto& r : records) out.insert(r.country);
    return out;
  }

  friend bool operator==(const SurveyDataset&, const SurveyDataset&) = default;
};

/// Maps upstream column names onto the fields the toolkit needs.
struct SurveySchema {
  std::string country = "COUNTRY_ALPHA";
  std::string year = "S020";
  std::string source = "S001";
  std::string weight = "S017";
  std::optional<std::string> wave;
  std::optional<std::string> respondent;
  std::array<std::string, kQuestionCount> questions{"A008", "A165", "E018", "E025", "F063",
                                                   "F118", "F120", "G006", "Y002", "Y003"};

  static SurveySchema from_config(const KvConfig& cfg) {
    SurveySchema s;
    const auto set = [&](const char* key, std::string& field) {
      if (auto v = cfg.get(key)) field = *v;
    };
    set("country", s.country);
    set("year", s.year);
    set("source", s.source);
    set("weight", s.weight);
    if (auto v = cfg.get("wave")) s.wave = *v;
    if (auto v = cfg.get("id")) s.respondent = *v;
    for (const auto q : kAllQuestions) {
      if (auto v = cfg.get(std::string(code(q)))) s.questions[index_of(q)] = *v;
    }
    return s;
  }

  static SurveySchema load(const std::filesystem::path& path) {
    return from_config(KvConfig::load(path));
  }
};

inline int current_year() {
  const auto now = std::chrono::system_clock::now();
  const std::chrono::year_month_day ymd{std::chrono::floor<std::chrono::days>(now)};
  return static_cast<int>(ymd.year());
}

namespace detail {

inline std::optional<SurveySource> parse_source(std::string_view v) {
  v = util::trim(v);
  if (util::iequals(v, "WVS") || v == "2") return SurveySource::WVS;
  if (util::iequals(v, "EVS") || v == "1") return SurveySource::EVS;
  return std::nullopt;
}

}  // namespace detail

/// Parses a delimited survey table. The delimiter is a tab when the header
/// contains one, otherwise a comma. Answer cells that are empty, non-numeric
/// or outside the item's valid range are read as missing.
inline SurveyDataset parse_survey(std::string_view text, const SurveySchema& schema,
                                  std::string_view origin = "<memory>") {
  std::istringstream in{std::string(text)};
  std::string header;
  if (!std::getline(in, header)) throw LoadError(std::string(origin) + ": empty file");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  if (header.rfind("\xEF\xBB\xBF", 0) == 0) header.erase(0, 3);
  const char sep = header.find('\t') != std::string::npos ? '\t' : ',';

  const auto names = util::split_delimited(header, sep);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < names.size(); ++i) col[std::string(util::trim(names[i]))] = i;
  const auto require = [&](const std::string& name) {
    const auto it = col.find(name);
    if (it == col.end()) {
      throw LoadError(std::string(origin) + ": missing mandated column '" + name + "'");
    }
    return it->second;
  };
  const auto c_country = require(schema.country);
  const auto c_year = require(schema.year);
  const auto c_source = require(schema.source);
  const auto c_weight = require(schema.weight);
  std::optional<std::size_t> c_wave;
  std::optional<std::size_t> c_id;
  if (schema.wave) c_wave = require(*schema.wave);
  if (schema.respondent) c_id = require(*schema.respondent);
  std::array<std::size_t, kQuestionCount> c_q{};
  for (const auto q : kAllQuestions) c_q[index_of(q)] = require(schema.questions[index_of(q)]);

  const int max_year = current_year();
  SurveyDataset ds;
  std::set<std::tuple<SurveySource, std::string, std::string>> seen_ids;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (util::trim(line).empty()) continue;
    const auto cells = util::split_delimited(line, sep);
    const auto where = [&](const std::string& column) {
      return std::string(origin) + ": row " + std::to_string(line_no) + ", column '" + column +
             "'";
    };
    const auto cell = [&](std::size_t i, const std::string& column) -> std::string_view {
      if (i >= cells.size()) throw LoadError(where(column) + ": row has too few fields");
      return util::trim(cells[i]);
    };

    SurveyRecord r;
    r.line = line_no;
    r.country = std::string(cell(c_country, schema.country));
    if (r.country.size() != 3 ||
        !std::all_of(r.country.begin(), r.country.end(), [](unsigned char c) { return std::isupper(c); })) {
      throw LoadError(where(schema.country) + ": expected an ISO alpha-3 code, got '" + r.country + "'");
    }
    const auto year = util::parse_int(cell(c_year, schema.year));
    if (!year || *year < 1981 || *year > max_year) {
      throw LoadError(where(schema.year) + ": invalid survey year");
    }
    r.year = static_cast<int>(*year);
    const auto source = detail::parse_source(cell(c_source, schema.source));
    if (!source) throw LoadError(where(schema.source) + ": expected WVS or EVS");
    r.source = *source;
    const auto weight = util::parse_double(cell(c_weight, schema.weight));
    if (!weight) throw LoadError(where(schema.weight) + ": non-numeric weight");
    if (*weight < 0.0) throw LoadError(where(schema.weight) + ": negative weight");
    r.weight = *weight;
    if (c_wave) {
      const auto wave = util::parse_int(cell(*c_wave, *schema.wave));
      if (!wave) throw LoadError(where(*schema.wave) + ": non-numeric wave");
      r.wave = static_cast<int>(*wave);
    }
    if (c_id) {
      r.respondent = std::string(cell(*c_id, *schema.respondent));
      if (!seen_ids.emplace(r.source, r.country, r.respondent).second) {
        throw LoadError(where(*schema.respondent) + ": duplicate respondent '" + r.respondent + "'");
      }
    }
    for (const auto q : kAllQuestions) {
      const auto& column = schema.questions[index_of(q)];
      const auto v = util::parse_double(cell(c_q[index_of(q)], column));
      if (v && valid_range(q).contains(*v)) r.answers[index_of(q)] = *v;
    }
    ds.records.push_back(std::move(r));
  }
  ds.provenance.push_back("loaded " + std::to_string(ds.records.size()) + " records from " +
                          std::string(origin));
  return ds;
}

inline SurveyDataset load_survey(const std::filesystem::path& path, const SurveySchema& schema) {
  return parse_survey(util::read_file(path), schema, path.string());
}

struct YearRange {
  int first = 0;
  int last = 0;
};

/// Either an inclusive year span or an explicit set of wave numbers.
using WaveFilter = std::variant<YearRange, std::set<int>>;

inline SurveyDataset filter_waves(const SurveyDataset& ds, const WaveFilter& filter) {
  std::string description;
  std::function<bool(const SurveyRecord&)> keep;
  if (const auto* years = std::get_if<YearRange>(&filter)) {
    if (years->first > years->last) throw ConfigError("empty year range");
    description = "years " + std::to_string(years->first) + "-" + std::to_string(years->last);
    keep = [y = *years](const SurveyRecord& r) { return r.year >= y.first && r.year <= y.last; };
  } else {
    const auto& waves = std::get<std::set<int>>(filter);
    if (waves.empty()) throw ConfigError("empty wave set");
    description = "waves";
    for (const int w : waves) description += " " + std::to_string(w);
    keep = [&waves](const SurveyRecord& r) {
      if (!r.wave) throw ConfigError("wave filter requires a wave column in the schema");
      return waves.count(*r.wave) != 0;
    };
  }
  SurveyDataset out;
  out.provenance = ds.provenance;
  for (const auto& r : ds.records) {
    if (keep(r)) out.records.push_back(r);
  }
  if (out.records.empty()) throw EmptyDatasetError("filter " + description + " excludes every record");
  out.provenance.push_back("filtered to " + description + ": " + std::to_string(out.size()) +
                           " of " + std::to_string(ds.size()) + " records kept");
  return out;
}

struct Exclusion {
  std::string country;
  std::vector<QuestionId> missing;
  friend bool operator==(const Exclusion&, const Exclusion&) = default;
};

/// Countries where at least one item has no valid response at all.
inline std::vector<Exclusion> exclusion_report(const SurveyDataset& ds) {
  std::map<std::string, std::array<std::size_t, kQuestionCount>> valid;
  for (const auto& r : ds.records) {
    auto& counts = valid[r.country];
    for (std::size_t q = 0; q < kQuestionCount; ++q) {
      if (r.answers[q]) ++counts[q];
    }
  }
  std::vector<Exclusion> out;
  for (const auto& [country, counts] : valid) {
    Exclusion e{country, {}};
    for (const auto q : kAllQuestions) {
      if (counts[index_of(q)] == 0) e.missing.push_back(q);
    }
    if (!e.missing.empty()) out.push_back(std::move(e));
  }
  return out;
}

}  // namespace cultmap
