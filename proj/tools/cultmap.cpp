// cultmap: replicate the cultural map, audit language models against it, and
// report cultural distances.

#include <iostream>

#include <CLI11.hpp>

#include "cultmap/commands.hpp"

namespace {

using namespace cultmap;
namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::string ivs, schema, transcripts, model_artifact, roster, regions, reference, out;
  std::string variants, api, run_mode, years;
  std::vector<std::string> models;
  int parallel = 0;
  bool kaiser = false, weighted = false, review = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("-c,--config", f.config, "Run configuration file")->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", f.out, "Output directory");
}

void add_run(CLI::App* cmd, Flags& f) {
  cmd->add_option("--model-artifact", f.model_artifact, "Frozen values model (model.txt)");
  cmd->add_option("--transcripts", f.transcripts, "Transcript store directory");
  cmd->add_option("--countries", f.roster, "Country roster (CODE<TAB>name)");
  cmd->add_option("--variants", f.variants, "Prompt variants, e.g. 0-9 or 0,3,5");
  cmd->add_option("--api", f.api, "Completion API: chat or legacy");
  cmd->add_option("--mode", f.run_mode, "Run mode: live, replay or hybrid");
  cmd->add_option("--parallel", f.parallel, "Concurrent requests")->check(CLI::Range(1, 64));
  cmd->add_option("--model", f.models, "Model identifier (repeatable); overrides configured models");
}

cli::RunConfig resolve(const Flags& f) {
  cli::RunConfig c = f.config.empty() ? cli::RunConfig{} : cli::load_run_config(f.config);
  const auto set = [](const std::string& v, fs::path& field) {
    if (!v.empty()) field = v;
  };
  set(f.ivs, c.ivs);
  set(f.schema, c.schema);
  set(f.transcripts, c.transcripts);
  set(f.model_artifact, c.model_artifact);
  set(f.roster, c.roster);
  set(f.regions, c.regions);
  set(f.reference, c.reference);
  set(f.out, c.out);
  if (c.model_artifact.empty()) c.model_artifact = c.out / "model.txt";
  if (!f.variants.empty()) c.variants = parse_variant_set(f.variants);
  if (!f.api.empty()) {
    c.api = parse_api_mode(f.api);
    for (auto& m : c.models) m.api = c.api;
  }
  if (!f.run_mode.empty()) c.run_mode = parse_run_mode(f.run_mode);
  if (!f.years.empty()) c.years = cli::parse_year_range(f.years);
  if (f.parallel > 0) c.parallel = f.parallel;
  if (f.kaiser) c.kaiser_normalization = true;
  if (f.weighted) c.weighted_aggregation = true;
  c.review = f.review;
  if (!f.models.empty()) {
    std::vector<ModelConfig> picked;
    for (const auto& name : f.models) {
      const auto it = std::find_if(c.models.begin(), c.models.end(), [&](const auto& m) { return m.model == name; });
      if (it != c.models.end()) {
        picked.push_back(*it);
      } else {
        ModelConfig m;
        m.model = name;
        m.api = c.api;
        picked.push_back(m);
      }
    }
    c.models = std::move(picked);
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cultural map replication and language-model cultural alignment audits"};
  app.set_version_flag("--version", std::string("cultmap ") + CULTMAP_VERSION);
  app.require_subcommand(1);
  Flags f;

  auto* replicate = app.add_subcommand("replicate-map", "Fit the values model and place countries on the map");
  add_common(replicate, f);
  replicate->add_option("--ivs", f.ivs, "Survey data (CSV or TSV)");
  replicate->add_option("--schema", f.schema, "Column mapping file");
  replicate->add_option("--regions", f.regions, "Region metadata for the map");
  replicate->add_option("--years", f.years, "Keep survey years in this range, e.g. 2005-2022");
  replicate->add_flag("--kaiser", f.kaiser, "Kaiser-normalize loadings before varimax");
  replicate->add_flag("--weighted-aggregation", f.weighted, "Weight records in country-year means");

  auto* audit = app.add_subcommand("audit", "Query models, parse answers and project them onto the map");
  audit->require_subcommand(1);
  auto* baseline = audit->add_subcommand("baseline", "Default respondent descriptors");
  auto* cultural = audit->add_subcommand("cultural", "Country-specific respondent descriptors");
  for (auto* cmd : {baseline, cultural}) {
    add_common(cmd, f);
    add_run(cmd, f);
    cmd->add_flag("--review", f.review, "List cells whose parse needs manual review");
  }

  auto* report = app.add_subcommand("report", "Distances, statistics and plots from audit outputs");
  add_common(report, f);
  report->add_option("--regions", f.regions, "Region metadata for the map");
  report->add_option("--reference", f.reference, "Reference values to compare against");

  auto* gen = app.add_subcommand("gen-fixture", "Generate synthetic survey data or stub transcripts");
  gen->require_subcommand(1);
  auto* gen_survey = gen->add_subcommand("survey", "Synthetic survey extract");
  cli::SurveyFixtureOptions survey_opt;
  std::string survey_out = "ivs_synthetic.csv", schema_out, drop;
  gen_survey->add_option("-o,--out", survey_out, "Output CSV");
  gen_survey->add_option("--schema-out", schema_out, "Also write the matching column mapping");
  gen_survey->add_option("--seed", survey_opt.synthetic.seed, "Random seed");
  gen_survey->add_option("--rows-per-country", survey_opt.synthetic.rows_per_country, "Rows per country")
      ->check(CLI::Range(1, 100000));
  gen_survey->add_option("--legacy-rows", survey_opt.synthetic.legacy_rows_per_country,
                         "Extra pre-2005 rows per country");
  gen_survey->add_option("--missing-rate", survey_opt.synthetic.missing_rate, "Share of missing answers")
      ->check(CLI::Range(0.0, 1.0));
  gen_survey->add_option("--drop", drop, "Blank one question for one country, e.g. LBY:F118");
  auto* gen_transcripts = gen->add_subcommand("transcripts", "Stub-model replay corpus");
  add_common(gen_transcripts, f);
  add_run(gen_transcripts, f);

  auto* questions = app.add_subcommand("questions", "Question bank utilities");
  questions->require_subcommand(1);
  auto* export_cmd = questions->add_subcommand("export", "Write the question bank");
  std::string export_out;
  export_cmd->add_option("-o,--out", export_out, "Output file (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (replicate->parsed()) return cli::cmd_replicate_map(resolve(f), std::cout, std::cerr);
    if (baseline->parsed()) return cli::cmd_audit(resolve(f), false, std::cout, std::cerr);
    if (cultural->parsed()) return cli::cmd_audit(resolve(f), true, std::cout, std::cerr);
    if (report->parsed()) return cli::cmd_report(resolve(f), std::cout, std::cerr);
    if (gen_survey->parsed()) {
      if (!drop.empty()) {
        const auto parts = util::split(drop, ':');
        const auto q = parts.size() == 2 ? parse_question_id(parts[1]) : std::nullopt;
        if (!q) throw ConfigError("--drop expects COUNTRY:QUESTION, got '" + drop + "'");
        survey_opt.synthetic.drop_question = std::pair{parts[0], *q};
      }
      survey_opt.out_csv = survey_out;
      survey_opt.out_schema = schema_out;
      return cli::cmd_gen_survey(survey_opt, std::cout);
    }
    if (gen_transcripts->parsed()) return cli::cmd_gen_transcripts(resolve(f), std::cout, std::cerr);
    if (export_cmd->parsed()) {
      const auto text = export_question_bank();
      if (export_out.empty()) {
        std::cout << text;
      } else {
        util::write_file(export_out, text);
      }
      return cli::kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kValidation;
  } catch (const LoadError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kValidation;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << '\n';
    return cli::kFatal;
  }
  return cli::kFatal;
}
