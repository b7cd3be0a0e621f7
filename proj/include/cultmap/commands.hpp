#pragma once

// Command implementations behind the cultmap executable. Each command reads
// a RunConfig, writes its outputs under `out`, and returns a process exit code.

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cultmap/errors.hpp"
#include "cultmap/gateway.hpp"
#include "cultmap/kv_config.hpp"
#include "cultmap/metrics.hpp"
#include "cultmap/parser.hpp"
#include "cultmap/prompts.hpp"
#include "cultmap/report.hpp"
#include "cultmap/stub.hpp"
#include "cultmap/survey.hpp"
#include "cultmap/synthetic.hpp"
#include "cultmap/values.hpp"

namespace cultmap::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kValidation = 1, kPartial = 2, kFatal = 3 };

struct RunConfig {
  fs::path ivs, schema, transcripts, model_artifact, roster, regions, reference;
  fs::path out = "out";
  std::vector<ModelConfig> models;
  std::set<int> variants = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  ApiMode api = ApiMode::Chat;
  RunMode run_mode = RunMode::Replay;
  int parallel = 4;
  bool kaiser_normalization = false;
  bool weighted_aggregation = false;
  std::optional<YearRange> years;
  bool review = false;
  /// Injected transport for tests and fixture generation; null means HTTP.
  std::shared_ptr<Transport> transport;
  Gateway::Clock clock;
};

namespace detail {

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (util::iequals(v, "true") || v == "1" || util::iequals(v, "yes") || util::iequals(v, "on")) return true;
  if (util::iequals(v, "false") || v == "0" || util::iequals(v, "no") || util::iequals(v, "off")) return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

inline double parse_number(const std::string& v, const std::string& key) {
  const auto d = util::parse_double(v);
  if (!d) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return *d;
}

inline int parse_integer(const std::string& v, const std::string& key) {
  const auto d = util::parse_int(v);
  if (!d) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return static_cast<int>(*d);
}

inline std::string safe_name(std::string_view s) {
  std::string out;
  for (const char c : s) {
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  }
  return out;
}

}  // namespace detail

inline YearRange parse_year_range(const std::string& text) {
  const auto dash = text.find('-');
  const auto lo = util::parse_int(text.substr(0, dash));
  const auto hi = dash == std::string::npos ? lo : util::parse_int(text.substr(dash + 1));
  if (!lo || !hi || *lo > *hi) throw ConfigError("bad year range '" + text + "'");
  return {static_cast<int>(*lo), static_cast<int>(*hi)};
}

inline ModelConfig model_from_section(const std::string& name, const KvConfig::Section& s, ApiMode default_api) {
  ModelConfig m;
  m.model = name;
  m.api = default_api;
  for (const auto& [k, v] : s) {
    const auto key = "model " + name + "." + k;
    if (k == "endpoint") m.endpoint = v;
    else if (k == "api") m.api = parse_api_mode(v);
    else if (k == "temperature") m.sampling.temperature = detail::parse_number(v, key);
    else if (k == "top_p") m.sampling.top_p = detail::parse_number(v, key);
    else if (k == "frequency_penalty") m.sampling.frequency_penalty = detail::parse_number(v, key);
    else if (k == "presence_penalty") m.sampling.presence_penalty = detail::parse_number(v, key);
    else if (k == "max_tokens") m.sampling.max_tokens = detail::parse_integer(v, key);
    else if (k == "timeout_ms") m.timeout = std::chrono::milliseconds(detail::parse_integer(v, key));
    else if (k == "max_retries") m.max_retries = detail::parse_integer(v, key);
    else if (k == "backoff_ms") m.backoff_base = std::chrono::milliseconds(detail::parse_integer(v, key));
    else if (k == "backoff_factor") m.backoff_factor = detail::parse_number(v, key);
    else if (k == "api_key_env") m.api_key_env = v;
    else if (k == "repetitions") m.repetitions = detail::parse_integer(v, key);
    else throw ConfigError("unknown key " + key);
  }
  return m;
}

/// Relative paths are resolved against the config file's directory.
inline RunConfig parse_run_config(const KvConfig& kv, const fs::path& base = {}) {
  RunConfig c;
  const auto path = [&](const char* key, fs::path& field) {
    if (auto v = kv.get(key, "paths")) {
      fs::path p(*v);
      field = p.is_absolute() || base.empty() ? p : base / p;
    }
  };
  path("ivs", c.ivs);
  path("schema", c.schema);
  path("transcripts", c.transcripts);
  path("model", c.model_artifact);
  path("roster", c.roster);
  path("regions", c.regions);
  path("reference", c.reference);
  path("out", c.out);
  if (auto v = kv.get("variants", "run")) c.variants = parse_variant_set(*v);
  if (auto v = kv.get("api", "run")) c.api = parse_api_mode(*v);
  if (auto v = kv.get("mode", "run")) c.run_mode = parse_run_mode(*v);
  if (auto v = kv.get("parallel", "run")) c.parallel = detail::parse_integer(*v, "run.parallel");
  if (auto v = kv.get("kaiser_normalization", "run")) c.kaiser_normalization = detail::parse_bool(*v, "run.kaiser_normalization");
  if (auto v = kv.get("weighted_aggregation", "run")) c.weighted_aggregation = detail::parse_bool(*v, "run.weighted_aggregation");
  if (auto v = kv.get("years", "run")) c.years = parse_year_range(*v);
  for (const auto& name : kv.section_names()) {
    if (name.starts_with("model ")) {
      const auto id = std::string(util::trim(std::string_view(name).substr(6)));
      if (id.empty()) throw ConfigError("model section without a name");
      c.models.push_back(model_from_section(id, kv.section(name), c.api));
    }
  }
  return c;
}

inline RunConfig load_run_config(const fs::path& file) {
  return parse_run_config(KvConfig::load(file), file.parent_path());
}

inline void require_file(const fs::path& p, std::string_view what) {
  if (p.empty()) throw ConfigError(std::string(what) + " path is not set");
  if (!fs::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
}

inline void validate(const RunConfig& c) {
  if (c.parallel < 1 || c.parallel > 64) throw ConfigError("parallel must be within 1..64");
  for (const int v : c.variants) {
    if (v < 0 || v >= kVariantCount) throw ConfigError("variant " + std::to_string(v) + " outside 0..9");
  }
  std::set<std::string> names;
  for (const auto& m : c.models) {
    if (!names.insert(m.model).second) throw ConfigError("model " + m.model + " configured twice");
  }
}

// ---------------------------------------------------------------------------
// replicate-map

inline std::string coordinates_table(const AggregateResult& agg, const report::RegionMetadata& regions) {
  std::string out = "country\tregion\tx\ty\trecords\tyears\n";
  for (const auto& [code, cc] : agg.countries) {
    out += code + '\t' + regions.region_of(code) + '\t' + util::format_fixed(cc.coords.x, 6) + '\t' +
           util::format_fixed(cc.coords.y, 6) + '\t' + std::to_string(cc.records) + '\t' + std::to_string(cc.years) +
           '\n';
  }
  return out;
}

inline int cmd_replicate_map(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  validate(cfg);
  require_file(cfg.ivs, "IVS data");
  SurveySchema schema;
  std::string schema_text;
  if (!cfg.schema.empty()) {
    require_file(cfg.schema, "schema");
    schema_text = util::read_file(cfg.schema);
    schema = SurveySchema::from_config(KvConfig::parse(schema_text, cfg.schema.string()));
  }
  const auto data_text = util::read_file(cfg.ivs);
  auto ds = parse_survey(data_text, schema, cfg.ivs.string());
  if (cfg.years) ds = filter_waves(ds, *cfg.years);

  FitOptions opt;
  opt.varimax.kaiser_normalization = cfg.kaiser_normalization;
  opt.weighted_aggregation = cfg.weighted_aggregation;
  std::string options = std::string("kaiser=") + (opt.varimax.kaiser_normalization ? "1" : "0") +
                        " weighted=" + (opt.weighted_aggregation ? "1" : "0");
  if (cfg.years) options += " years=" + std::to_string(cfg.years->first) + "-" + std::to_string(cfg.years->last);
  const auto data_fp = util::sha256_hex(util::sha256_hex(data_text) + "\n" + util::sha256_hex(schema_text) + "\n" + options);
  const auto fit = fit_values_model(ds, opt, data_fp);

  const auto model_text = save_model(fit.model);
  const report::Provenance prov{util::sha256_hex(model_text), "none"};
  report::RegionMetadata regions;
  if (!cfg.regions.empty()) regions = report::load_regions(cfg.regions);

  util::write_file(cfg.out / "model.txt", model_text);
  util::write_file(cfg.out / "countries.tsv", prov.header() + coordinates_table(fit.countries, regions));

  std::string loadings = prov.header() + "question\tpc1\tpc2\tunrotated1\tunrotated2\n";
  for (const auto q : kAllQuestions) {
    const auto i = index_of(q);
    loadings += std::string(code(q)) + '\t' + util::format_fixed(fit.model.pca.loadings[i][0], 6) + '\t' +
                util::format_fixed(fit.model.pca.loadings[i][1], 6) + '\t' +
                util::format_fixed(fit.model.pca.unrotated[i][0], 6) + '\t' +
                util::format_fixed(fit.model.pca.unrotated[i][1], 6) + '\n';
  }
  util::write_file(cfg.out / "loadings.tsv", loadings);

  const std::size_t total = ds.countries().size();
  const auto& ev = fit.model.pca.explained_variance;
  std::string summary = prov.header() + "key\tvalue\n";
  const auto kv = [&](const std::string& k, const std::string& v) { summary += k + '\t' + v + '\n'; };
  kv("records", std::to_string(ds.size()));
  kv("complete_records", std::to_string(fit.scored_records));
  kv("countries_total", std::to_string(total));
  kv("countries_retained", std::to_string(fit.countries.countries.size()));
  kv("explained_pc1", util::format_fixed(ev[0], 6));
  kv("explained_pc2", util::format_fixed(ev[1], 6));
  kv("explained_total", util::format_fixed(ev[0] + ev[1], 6));
  kv("varimax_criterion_unrotated", util::format_fixed(fit.criterion_unrotated, 6));
  kv("varimax_criterion_rotated", util::format_fixed(fit.criterion_rotated, 6));
  kv("components_swapped", fit.model.pca.components_swapped ? "true" : "false");
  kv("kaiser_normalization", opt.varimax.kaiser_normalization ? "true" : "false");
  kv("weighted_aggregation", opt.weighted_aggregation ? "true" : "false");
  util::write_file(cfg.out / "summary.tsv", summary);

  std::map<std::string, std::string> missing_items;
  for (const auto& e : fit.exclusions) {
    std::string list;
    for (const auto q : e.missing) list += (list.empty() ? "" : ",") + std::string(code(q));
    missing_items[e.country] = list;
  }
  std::string excl = prov.header() + "country\treason\tmissing_questions\n";
  for (const auto& [country, reason] : fit.countries.excluded) {
    const auto it = missing_items.find(country);
    excl += country + '\t' + reason + '\t' + (it == missing_items.end() ? "NA" : it->second) + '\n';
  }
  util::write_file(cfg.out / "exclusions.tsv", excl);

  std::map<std::string, CulturalCoordinates> points;
  for (const auto& [c, cc] : fit.countries.countries) points[c] = cc.coords;
  util::write_file(cfg.out / "map.svg", report::map_svg(points, regions));

  for (const auto& line : ds.provenance) err << line << '\n';
  out << "retained " << fit.countries.countries.size() << " of " << total << " countries; explained variance "
      << util::format_fixed(ev[0] + ev[1], 4) << " (" << util::format_fixed(ev[0], 4) << " + "
      << util::format_fixed(ev[1], 4) << ")\n";
  for (const auto& [country, reason] : fit.countries.excluded) out << "excluded " << country << ": " << reason << '\n';
  out << "wrote " << (cfg.out / "model.txt").string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// audit

struct ContextResult {
  std::string model;
  std::string context;
  std::optional<Projection> projection;
  std::string excluded_reason;
  std::size_t observations = 0;
};

inline std::string coords_table(const std::vector<ContextResult>& rows) {
  std::string out = "model\tcontext\tx\ty\tvariants_used\tvariants_dropped\texcluded_reason\n";
  for (const auto& r : rows) {
    out += r.model + '\t' + r.context + '\t';
    if (r.projection) {
      out += util::format_fixed(r.projection->coords.x, 6) + '\t' + util::format_fixed(r.projection->coords.y, 6) +
             '\t' + std::to_string(r.projection->used) + '\t' + std::to_string(r.projection->dropped) + "\tNA\n";
    } else {
      out += "NA\tNA\t0\t" + std::to_string(r.observations) + '\t' + r.excluded_reason + '\n';
    }
  }
  return out;
}

inline int cmd_audit(const RunConfig& cfg, bool cultural, std::ostream& out, std::ostream& err) {
  validate(cfg);
  require_file(cfg.model_artifact, "model artifact");
  if (cfg.transcripts.empty()) throw ConfigError("transcript directory is not set");
  if (cfg.models.empty()) throw ConfigError("no models configured");
  std::vector<Country> roster;
  if (cultural) {
    require_file(cfg.roster, "country roster");
    roster = load_roster(cfg.roster);
    if (roster.empty()) throw ConfigError("country roster is empty");
  }
  const auto model_text = util::read_file(cfg.model_artifact);
  std::istringstream model_in(model_text);
  const auto values = load_model(model_in, cfg.model_artifact.string());

  TranscriptStore store(cfg.transcripts);
  std::vector<BatchCell> cells;
  std::map<std::string, std::string> responses;
  std::vector<std::string> failures;
  for (const auto& m : cfg.models) {
    for (const auto& w : sampling_warnings(m)) err << "warning: " << w << '\n';
    Gateway gw(m, store, cfg.run_mode, cfg.transport);
    if (cfg.clock) gw.set_clock(cfg.clock);
    const auto bundles = build_matrix(m.model, m.api, cfg.variants, cultural ? roster : std::vector<Country>{});
    const auto result = run_matrix(gw, bundles, cfg.parallel);
    const int reps = std::max(1, m.repetitions);
    for (const auto& b : bundles) {
      for (int r = 0; r < reps; ++r) {
        const auto key = transcript_key(m, b, r);
        cells.push_back({CellKey{m.model, b.meta.context(), b.meta.variant, b.meta.question, r}, key});
        const auto it = result.entries.find(key);
        if (it != result.entries.end() && it->second.status != TranscriptStatus::Error) {
          responses[key] = it->second.raw_response;
        }
      }
    }
    failures.insert(failures.end(), result.summary.failures.begin(), result.summary.failures.end());
    err << m.model << ": " << result.summary.total << " cells, " << result.summary.ok << " ok, "
        << result.summary.refused << " refused by API, " << result.summary.errors << " failed, "
        << result.summary.network_calls << " network calls\n";
  }

  const auto table = parse_batch(cells, responses, true);
  const auto groups = build_observations(table);
  std::vector<ContextResult> rows;
  for (const auto& [mc, obs] : groups) {
    ContextResult r{mc.first, mc.second, std::nullopt, {}, obs.size()};
    try {
      r.projection = project(obs, values);
    } catch (const ExclusionError& e) {
      r.excluded_reason = e.what();
    }
    rows.push_back(std::move(r));
  }

  const std::string mode = cultural ? "cultural" : "baseline";
  const report::Provenance prov{util::sha256_hex(model_text), store.fingerprint()};
  util::write_file(cfg.out / (mode + "_coords.tsv"), prov.header() + coords_table(rows));
  util::write_file(cfg.out / (mode + "_parse_report.tsv"), prov.header() + format_parse_report(table.report));

  std::string cell_table = "model\tcontext\tvariant\tquestion\trepetition\tlabel\tneeds_review\traw\n";
  std::string review;
  for (const auto& c : table.cells) {
    const auto lab = c.result ? label(*c.result) : std::string("missing");
    const bool flag = !c.result || c.result->needs_review;
    const auto line = c.cell.model + '\t' + c.cell.context + '\t' + std::to_string(c.cell.variant) + '\t' +
                      std::string(code(c.cell.question)) + '\t' + std::to_string(c.cell.repetition) + '\t' + lab +
                      '\t' + (flag ? "true" : "false") + '\t' + util::escape(c.raw) + '\n';
    cell_table += line;
    if (flag) review += line;
  }
  util::write_file(cfg.out / (mode + "_cells.tsv"), prov.header() + cell_table);

  for (const auto& r : rows) {
    if (r.projection) {
      out << r.model << '\t' << r.context << '\t' << util::format_fixed(r.projection->coords.x, 4) << '\t'
          << util::format_fixed(r.projection->coords.y, 4) << '\n';
    } else {
      out << r.model << '\t' << r.context << "\texcluded: " << r.excluded_reason << '\n';
    }
  }
  if (cfg.review && !review.empty()) out << "cells needing review:\n" << review;
  for (const auto& f : failures) err << "failed: " << f << '\n';
  return failures.empty() ? kOk : kPartial;
}

// ---------------------------------------------------------------------------
// report

struct CoordsFile {
  report::Provenance provenance;
  /// (model, context) -> coordinates or exclusion reason
  std::map<std::pair<std::string, std::string>, CulturalOutcome> contexts;
};

inline CoordsFile read_coords_file(const fs::path& path) {
  require_file(path, "coordinates table");
  const auto text = util::read_file(path);
  CoordsFile f;
  f.provenance = report::read_provenance(text);
  const auto t = report::parse_table(text, path.string());
  const auto m = t.column("model"), c = t.column("context"), x = t.column("x"), y = t.column("y"),
             why = t.column("excluded_reason");
  for (const auto& r : t.rows) {
    if (r[x] == "NA") {
      f.contexts[{r[m], r[c]}] = r[why];
    } else {
      f.contexts[{r[m], r[c]}] =
          CulturalCoordinates{report::table_number(r[x], "x"), report::table_number(r[y], "y")};
    }
  }
  return f;
}

inline std::map<std::string, CulturalCoordinates> read_country_table(const fs::path& path) {
  require_file(path, "country coordinate table");
  const auto t = report::parse_table(util::read_file(path), path.string());
  const auto c = t.column("country"), x = t.column("x"), y = t.column("y");
  std::map<std::string, CulturalCoordinates> out;
  for (const auto& r : t.rows) out[r[c]] = {report::table_number(r[x], "x"), report::table_number(r[y], "y")};
  return out;
}

inline std::string format_test(const StatTestResult& r) {
  return r.method + ": statistic=" + util::format_fixed(r.statistic, 4) + " p=" + util::format_fixed(r.p_value, 6) +
         " n=" + std::to_string(r.n) + (r.exact ? " (exact)" : "") + "; " + r.notes;
}

inline int cmd_report(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  validate(cfg);
  const auto countries = read_country_table(cfg.out / "countries.tsv");
  if (countries.empty()) throw ConfigError("country coordinate table is empty");
  const auto baseline = read_coords_file(cfg.out / "baseline_coords.tsv");
  std::optional<CoordsFile> cultural;
  if (fs::exists(cfg.out / "cultural_coords.tsv")) cultural = read_coords_file(cfg.out / "cultural_coords.tsv");
  report::RegionMetadata regions;
  if (!cfg.regions.empty()) regions = report::load_regions(cfg.regions);

  report::Provenance prov = baseline.provenance;
  if (cultural) {
    if (cultural->provenance.model_fingerprint != prov.model_fingerprint) {
      err << "warning: baseline and cultural coordinates come from different model artifacts\n";
    }
    if (cultural->provenance.transcript_fingerprint != prov.transcript_fingerprint) {
      prov.transcript_fingerprint += "+" + cultural->provenance.transcript_fingerprint;
    }
  }

  std::string summary = prov.header();
  std::map<std::string, double> observed;
  if (fs::exists(cfg.out / "summary.tsv")) {
    const auto t = report::parse_table(util::read_file(cfg.out / "summary.tsv"), "summary.tsv");
    for (const auto& r : t.rows) {
      if (r[0] == "explained_total") observed["ivs.explained_variance"] = report::table_number(r[1], r[0]);
      if (r[0] == "countries_retained") observed["ivs.countries_retained"] = report::table_number(r[1], r[0]);
    }
  }

  std::vector<report::MapPoint> model_points, cultural_points;
  std::vector<report::BoxGroup> boxes;
  std::vector<std::vector<double>> default_groups, cultural_groups;
  for (const auto& [key, outcome] : baseline.contexts) {
    const auto& model = key.first;
    if (key.second != "baseline") continue;
    const auto* coords = std::get_if<CulturalCoordinates>(&outcome);
    summary += "\n== " + model + "\n";
    if (!coords) {
      summary += "baseline excluded: " + std::get<std::string>(outcome) + "\n";
      err << "warning: " << model << " has no baseline coordinates\n";
      continue;
    }
    model_points.push_back({model, *coords});
    std::optional<std::map<std::string, CulturalOutcome>> model_cultural;
    if (cultural) {
      model_cultural.emplace();
      for (const auto& [ck, co] : cultural->contexts) {
        if (ck.first != model) continue;
        (*model_cultural)[ck.second] = co;
        if (const auto* cc = std::get_if<CulturalCoordinates>(&co)) cultural_points.push_back({model + ":" + ck.second, *cc});
      }
    }
    const auto rep = build_distance_report(model, *coords, countries, model_cultural);
    util::write_file(cfg.out / ("distances_" + detail::safe_name(model) + ".tsv"), prov.header() + distance_table(rep));

    summary += "default coordinates: x=" + util::format_fixed(coords->x, 4) + " y=" + util::format_fixed(coords->y, 4) + "\n";
    const auto ext = rank_extremes(*coords, countries, std::min<std::size_t>(3, countries.size()));
    summary += "nearest:";
    for (const auto& r : ext.nearest) summary += " " + r.country + " (d=" + util::format_fixed(r.distance, 2) + ")";
    summary += "\nfarthest:";
    for (const auto& r : ext.farthest) summary += " " + r.country + " (d=" + util::format_fixed(r.distance, 2) + ")";
    summary += "\n";

    report::BoxGroup box{model, {}, {}};
    double mean_default = 0.0;
    for (const auto& r : rep.rows) {
      box.before.push_back(r.d_default);
      mean_default += r.d_default;
      observed[model + ".d_default." + r.country] = r.d_default;
    }
    mean_default /= static_cast<double>(rep.rows.size());
    summary += "mean d_default (all countries): " + util::format_fixed(mean_default, 4) + "\n";
    default_groups.push_back(box.before);

    if (!cultural) {
      summary += "cultural coordinates absent\n";
    } else {
      try {
        const auto s = improvement_summary(rep);
        for (const auto& r : rep.rows) {
          if (r.d_cultural) box.after.push_back(*r.d_cultural);
        }
        cultural_groups.push_back(box.after);
        observed[model + ".mean_d_default"] = s.mean_default;
        observed[model + ".mean_d_cultural"] = s.mean_cultural;
        observed[model + ".fraction_improved"] = s.fraction_improved;
        summary += "compared countries: " + std::to_string(s.compared) + "\n";
        summary += "mean d_default: " + util::format_fixed(s.mean_default, 4) +
                   " -> mean d_cultural: " + util::format_fixed(s.mean_cultural, 4) + "\n";
        summary += "improved: " + std::to_string(s.improved) + "/" + std::to_string(s.compared) + " (" +
                   util::format_fixed(100.0 * s.fraction_improved, 1) + "%)\n";
        for (const auto& [c, why] : s.excluded) summary += "excluded " + c + ": " + why + "\n";
        try {
          summary += format_test(wilcoxon_signed_rank(paired_distances(rep))) + "\n";
        } catch (const StatsError& e) {
          summary += "wilcoxon-signed-rank: not computed (" + std::string(e.what()) + ")\n";
        }
      } catch (const StatsError& e) {
        summary += "cultural comparison not possible: " + std::string(e.what()) + "\n";
      }
    }
    boxes.push_back(std::move(box));
  }

  summary += "\n== across models\n";
  const auto kw = [&](const std::vector<std::vector<double>>& groups, const std::string& what) {
    try {
      summary += what + " " + format_test(kruskal_wallis(groups)) + "\n";
    } catch (const StatsError& e) {
      summary += what + " kruskal-wallis: not computed (" + std::string(e.what()) + ")\n";
    }
  };
  kw(default_groups, "default distances:");
  if (cultural) kw(cultural_groups, "cultural distances:");

  if (!cfg.reference.empty()) {
    require_file(cfg.reference, "reference values");
    const auto refs = report::parse_reference_values(util::read_file(cfg.reference), cfg.reference.string());
    std::vector<std::string> warnings;
    util::write_file(cfg.out / "reference_comparison.tsv",
                     prov.header() + report::compare_reference_values(refs, observed, &warnings));
    for (const auto& w : warnings) {
      summary += "warning: " + w + "\n";
      err << "warning: " << w << '\n';
    }
  }

  util::write_file(cfg.out / "report.txt", summary);
  util::write_file(cfg.out / "report_map.svg", report::map_svg(countries, regions, model_points, cultural_points));
  util::write_file(cfg.out / "boxplot.svg", report::boxplot_svg(boxes));
  out << summary;
  return kOk;
}

// ---------------------------------------------------------------------------
// gen-fixture

struct SurveyFixtureOptions {
  synthetic::Options synthetic;
  fs::path out_csv;
  fs::path out_schema;
};

inline int cmd_gen_survey(const SurveyFixtureOptions& o, std::ostream& out) {
  const auto rows = synthetic::generate_rows(o.synthetic);
  util::write_file(o.out_csv, synthetic::to_csv(rows));
  if (!o.out_schema.empty()) util::write_file(o.out_schema, synthetic::schema_text());
  out << "wrote " << rows.size() << " rows to " << o.out_csv.string() << '\n';
  return kOk;
}

/// Records stub-model transcripts for baseline and cultural prompting.
inline int cmd_gen_transcripts(RunConfig cfg, std::ostream& out, std::ostream& err) {
  validate(cfg);
  if (cfg.transcripts.empty()) throw ConfigError("transcript directory is not set");
  if (cfg.models.empty()) {
    for (const auto& m : stub::default_models()) {
      ModelConfig mc;
      mc.model = m.name;
      mc.api = cfg.api;
      cfg.models.push_back(mc);
    }
  }
  std::vector<Country> roster;
  if (!cfg.roster.empty()) roster = load_roster(cfg.roster);
  auto transport = std::make_shared<stub::StubTransport>(roster);
  TranscriptStore store(cfg.transcripts);
  std::size_t failures = 0;
  for (auto m : cfg.models) {
    if (!stub::find_model(m.model)) throw ConfigError("no stub model named " + m.model);
    m.api_key_env.clear();
    Gateway gw(m, store, RunMode::Hybrid, transport);
    gw.set_clock(cfg.clock ? cfg.clock : [] { return std::string("2024-01-01T00:00:00Z"); });
    for (const bool cultural : {false, true}) {
      if (cultural && roster.empty()) continue;
      const auto bundles = build_matrix(m.model, m.api, cfg.variants, cultural ? roster : std::vector<Country>{});
      const auto res = run_matrix(gw, bundles, cfg.parallel);
      failures += res.summary.errors;
      err << m.model << (cultural ? " cultural: " : " baseline: ") << res.summary.ok << " ok, "
          << res.summary.network_calls << " generated\n";
    }
  }
  out << "transcript store " << cfg.transcripts.string() << " holds " << store.size() << " records\n";
  return failures ? kPartial : kOk;
}

}  // namespace cultmap::cli
