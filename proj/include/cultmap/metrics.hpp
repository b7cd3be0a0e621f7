#pragma once

// Projection of model answers onto the map, cultural distances, and the two
// nonparametric tests used to compare distance distributions.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "cultmap/errors.hpp"
#include "cultmap/parser.hpp"
#include "cultmap/questions.hpp"
#include "cultmap/util.hpp"
#include "cultmap/values.hpp"

namespace cultmap {

/// Encoded answers for one (model, context, variant, repetition).
struct ModelObservation {
  std::string model;
  std::string context;  // "baseline" or country code
  int variant = 0;
  int repetition = 0;
  AnswerVector answers{};
};

struct Projection {
  CulturalCoordinates coords;
  std::size_t used = 0;     // observations with all ten answers
  std::size_t dropped = 0;  // observations with at least one null
};

/// Averages the map coordinates of every complete observation. Observations
/// with a null answer are dropped; if none remain the context is excluded.
inline Projection project(std::span<const ModelObservation> observations, const ValuesModel& model) {
  std::vector<const ModelObservation*> sorted;
  for (const auto& o : observations) sorted.push_back(&o);
  std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
    return std::tie(a->variant, a->repetition) < std::tie(b->variant, b->repetition);
  });

  Projection p;
  std::array<std::size_t, kQuestionCount> nulls{};
  for (const auto* o : sorted) {
    bool complete = true;
    for (std::size_t q = 0; q < kQuestionCount; ++q) {
      if (!o->answers[q]) {
        complete = false;
        ++nulls[q];
      }
    }
    if (!complete) {
      ++p.dropped;
      continue;
    }
    const auto c = model.project(o->answers);
    p.coords.x += c.x;
    p.coords.y += c.y;
    ++p.used;
  }
  if (p.used == 0) {
    std::string reason = "no observation with all ten answers";
    std::string always_null;
    for (const auto q : kAllQuestions) {
      if (!sorted.empty() && nulls[index_of(q)] == sorted.size()) {
        always_null += (always_null.empty() ? "" : ",") + std::string(code(q));
      }
    }
    if (!always_null.empty()) reason += " (null in every variant: " + always_null + ")";
    throw ExclusionError(reason);
  }
  p.coords.x /= static_cast<double>(p.used);
  p.coords.y /= static_cast<double>(p.used);
  return p;
}

/// Groups parsed cells into observations; refusals, failures and gaps become nulls.
inline std::map<std::pair<std::string, std::string>, std::vector<ModelObservation>> build_observations(
    const ObservationTable& table) {
  std::map<std::tuple<std::string, std::string, int, int>, ModelObservation> obs;
  for (const auto& cell : table.cells) {
    const auto& k = cell.cell;
    auto& o = obs[{k.model, k.context, k.variant, k.repetition}];
    o.model = k.model;
    o.context = k.context;
    o.variant = k.variant;
    o.repetition = k.repetition;
    if (cell.result && cell.result->usable()) {
      try {
        o.answers[index_of(k.question)] = encode(question(k.question), *cell.result->answer());
      } catch (const EncodingError&) {
        // unencodable answers count as null
      }
    }
  }
  std::map<std::pair<std::string, std::string>, std::vector<ModelObservation>> out;
  for (auto& [k, o] : obs) out[{std::get<0>(k), std::get<1>(k)}].push_back(std::move(o));
  return out;
}

inline double euclid(const CulturalCoordinates& a, const CulturalCoordinates& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

struct RankedCountry {
  std::string country;
  double distance = 0.0;
};

struct Extremes {
  std::vector<RankedCountry> nearest;   // ascending distance
  std::vector<RankedCountry> farthest;  // descending distance
};

/// Ties are broken by country code in both lists.
inline Extremes rank_extremes(const CulturalCoordinates& point,
                              const std::map<std::string, CulturalCoordinates>& countries, std::size_t k) {
  if (countries.empty()) throw StatsError("no countries to rank");
  if (k > countries.size()) throw StatsError("k exceeds the number of countries");
  std::vector<RankedCountry> all;
  for (const auto& [c, coords] : countries) all.push_back({c, euclid(point, coords)});
  auto asc = all;
  std::sort(asc.begin(), asc.end(), [](const auto& a, const auto& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.country < b.country;
  });
  auto desc = all;
  std::sort(desc.begin(), desc.end(), [](const auto& a, const auto& b) {
    return a.distance != b.distance ? a.distance > b.distance : a.country < b.country;
  });
  asc.resize(k);
  desc.resize(k);
  return {std::move(asc), std::move(desc)};
}

// ---------------------------------------------------------------------------
// Distance report

struct DistanceRow {
  std::string country;
  CulturalCoordinates ivs;
  double d_default = 0.0;
  std::optional<CulturalCoordinates> cultural;
  std::optional<double> d_cultural;
  std::string excluded_reason;  // set whenever d_cultural is absent

  std::optional<double> delta() const {
    if (!d_cultural) return std::nullopt;
    return d_default - *d_cultural;
  }
  bool improved() const { return d_cultural && *d_cultural < d_default; }
};

struct DistanceReport {
  std::string model;
  CulturalCoordinates default_coords;
  bool has_cultural = false;
  std::vector<DistanceRow> rows;  // ordered by country code
};

/// Culturally prompted outcome for one country: coordinates or an exclusion reason.
using CulturalOutcome = std::variant<CulturalCoordinates, std::string>;

inline DistanceReport build_distance_report(const std::string& model, const CulturalCoordinates& default_coords,
                                            const std::map<std::string, CulturalCoordinates>& ivs,
                                            const std::optional<std::map<std::string, CulturalOutcome>>& cultural) {
  DistanceReport rep;
  rep.model = model;
  rep.default_coords = default_coords;
  rep.has_cultural = cultural.has_value();
  for (const auto& [country, coords] : ivs) {
    DistanceRow row;
    row.country = country;
    row.ivs = coords;
    row.d_default = euclid(default_coords, coords);
    if (!cultural) {
      row.excluded_reason = "cultural coordinates absent";
    } else if (const auto it = cultural->find(country); it == cultural->end()) {
      row.excluded_reason = "not in cultural roster";
    } else if (const auto* c = std::get_if<CulturalCoordinates>(&it->second)) {
      row.cultural = *c;
      row.d_cultural = euclid(*c, coords);
    } else {
      row.excluded_reason = std::get<std::string>(it->second);
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

struct ImprovementSummary {
  std::size_t compared = 0;
  std::size_t improved = 0;
  double fraction_improved = 0.0;
  double mean_default = 0.0;   // over compared rows
  double mean_cultural = 0.0;  // over compared rows
  std::vector<std::pair<std::string, std::string>> excluded;  // country, reason
};

inline ImprovementSummary improvement_summary(const DistanceReport& rep) {
  ImprovementSummary s;
  for (const auto& r : rep.rows) {
    if (!r.d_cultural) {
      s.excluded.emplace_back(r.country, r.excluded_reason);
      continue;
    }
    ++s.compared;
    if (r.improved()) ++s.improved;
    s.mean_default += r.d_default;
    s.mean_cultural += *r.d_cultural;
  }
  if (s.compared == 0) throw StatsError("every row is excluded; nothing to summarize");
  s.fraction_improved = static_cast<double>(s.improved) / static_cast<double>(s.compared);
  s.mean_default /= static_cast<double>(s.compared);
  s.mean_cultural /= static_cast<double>(s.compared);
  return s;
}

inline constexpr std::string_view kDistanceColumns =
    "country\tivs_x\tivs_y\tdefault_x\tdefault_y\td_default\tcultural_x\tcultural_y\td_cultural\tdelta\t"
    "improved\texcluded_reason";

/// Tab-delimited distance table; absent values are written as NA.
inline std::string distance_table(const DistanceReport& rep, int digits = 6) {
  const auto f = [&](double v) { return util::format_fixed(v, digits); };
  const auto opt = [&](const std::optional<double>& v) { return v ? f(*v) : std::string("NA"); };
  std::string out(kDistanceColumns);
  out += '\n';
  for (const auto& r : rep.rows) {
    out += r.country + '\t' + f(r.ivs.x) + '\t' + f(r.ivs.y) + '\t' + f(rep.default_coords.x) + '\t' +
           f(rep.default_coords.y) + '\t' + f(r.d_default) + '\t' +
           opt(r.cultural ? std::optional(r.cultural->x) : std::nullopt) + '\t' +
           opt(r.cultural ? std::optional(r.cultural->y) : std::nullopt) + '\t' + opt(r.d_cultural) + '\t' +
           opt(r.delta()) + '\t' + (r.d_cultural ? (r.improved() ? "true" : "false") : "NA") + '\t' +
           (r.excluded_reason.empty() ? "NA" : r.excluded_reason) + '\n';
  }
  return out;
}

/// Paired (d_default, d_cultural) values from the compared rows.
inline std::vector<std::pair<double, double>> paired_distances(const DistanceReport& rep) {
  std::vector<std::pair<double, double>> out;
  for (const auto& r : rep.rows) {
    if (r.d_cultural) out.emplace_back(r.d_default, *r.d_cultural);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nonparametric tests

struct StatTestResult {
  std::string method;
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  bool exact = false;
  std::string notes;
};

/// Average ranks (1-based) of `values`; also returns the tie-group sizes.
inline std::vector<double> average_ranks(std::span<const double> values, std::vector<std::size_t>* ties = nullptr) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    if (ties && j > i) ties->push_back(j - i + 1);
    i = j + 1;
  }
  return ranks;
}

inline constexpr std::size_t kWilcoxonExactLimit = 25;

/// Two-sided Wilcoxon signed-rank test on default minus cultural distances.
/// Zero differences are discarded and tied magnitudes share average ranks.
/// Up to 25 non-zero pairs the p-value comes from the exact sign-flip
/// distribution; beyond that from the tie-corrected normal approximation
/// with continuity correction.
inline StatTestResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> paired) {
  std::vector<double> diffs;
  std::size_t zeros = 0;
  for (const auto& [a, b] : paired) {
    const double d = a - b;
    if (d == 0.0) ++zeros;
    else diffs.push_back(d);
  }
  if (diffs.empty()) throw StatsError("all paired differences are zero");
  const std::size_t n = diffs.size();
  if (n < 6) throw StatsError("Wilcoxon needs at least six non-zero differences, got " + std::to_string(n));

  std::vector<double> mags(n);
  std::transform(diffs.begin(), diffs.end(), mags.begin(), [](double d) { return std::abs(d); });
  std::vector<std::size_t> ties;
  const auto ranks = average_ranks(mags, &ties);
  double w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (diffs[i] > 0.0) w_plus += ranks[i];
  }

  StatTestResult r;
  r.method = "wilcoxon-signed-rank";
  r.statistic = w_plus;
  r.n = n;
  r.notes = std::to_string(zeros) + " zero difference(s) discarded; " + std::to_string(ties.size()) +
            " tie group(s) given average ranks";

  const double nn = static_cast<double>(n);
  if (n <= kWilcoxonExactLimit) {
    // Doubled ranks are integers, so the sign-flip distribution is a DP over sums.
    std::vector<long> doubled(n);
    long total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      doubled[i] = std::lround(2.0 * ranks[i]);
      total += doubled[i];
    }
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1.0;
    for (const long d : doubled) {
      for (long s = total; s >= d; --s) count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - d)];
    }
    const long observed = std::lround(2.0 * w_plus);
    const long dev = std::labs(2 * observed - total);
    double extreme = 0.0;
    for (long s = 0; s <= total; ++s) {
      if (std::labs(2 * s - total) >= dev) extreme += count[static_cast<std::size_t>(s)];
    }
    r.p_value = std::min(1.0, extreme / std::ldexp(1.0, static_cast<int>(n)));
    r.exact = true;
    r.notes += "; exact sign-flip distribution";
    return r;
  }

  const double mean = nn * (nn + 1.0) / 4.0;
  double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
  for (const auto t : ties) {
    const double tt = static_cast<double>(t);
    var -= (tt * tt * tt - tt) / 48.0;
  }
  const double z = std::max(std::abs(w_plus - mean) - 0.5, 0.0) / std::sqrt(var);
  r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  r.notes += "; normal approximation with continuity correction";
  return r;
}

/// Kruskal-Wallis rank-sum test with tie correction; chi-square reference
/// distribution with (groups - 1) degrees of freedom.
inline StatTestResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw StatsError("Kruskal-Wallis needs at least two groups");
  std::vector<double> pooled;
  for (const auto& g : groups) {
    if (g.empty()) throw StatsError("Kruskal-Wallis groups must be non-empty");
    pooled.insert(pooled.end(), g.begin(), g.end());
  }
  const std::size_t total = pooled.size();
  if (total < 5) throw StatsError("Kruskal-Wallis needs at least five observations");
  std::vector<std::size_t> ties;
  const auto ranks = average_ranks(pooled, &ties);

  const double nn = static_cast<double>(total);
  double sum = 0.0;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    double rs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) rs += ranks[offset + i];
    offset += g.size();
    sum += rs * rs / static_cast<double>(g.size());
  }
  double correction = 1.0;
  double tie_sum = 0.0;
  for (const auto t : ties) {
    const double tt = static_cast<double>(t);
    tie_sum += tt * tt * tt - tt;
  }
  correction -= tie_sum / (nn * nn * nn - nn);

  StatTestResult r;
  r.method = "kruskal-wallis";
  r.n = total;
  const double df = static_cast<double>(groups.size() - 1);
  if (correction <= 0.0) {
    r.statistic = 0.0;
    r.p_value = 1.0;
    r.notes = "all observations tied";
    return r;
  }
  const double h = (12.0 / (nn * (nn + 1.0)) * sum - 3.0 * (nn + 1.0)) / correction;
  r.statistic = std::max(h, 0.0);
  r.p_value = std::clamp(boost::math::gamma_q(df / 2.0, r.statistic / 2.0), 0.0, 1.0);
  r.notes = std::to_string(groups.size()) + " groups; " + std::to_string(ties.size()) + " tie group(s)";
  return r;
}

}  // namespace cultmap
