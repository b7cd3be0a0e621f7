#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cultmap/survey.hpp"
#include "cultmap/synthetic.hpp"

namespace testing_support {

inline std::filesystem::path data_dir() { return CULTMAP_DATA_DIR; }

inline const cultmap::SurveyDataset& fixture_dataset() {
  static const auto ds = cultmap::load_survey(data_dir() / "ivs_synthetic.csv", cultmap::synthetic::schema());
  return ds;
}

inline std::vector<std::optional<double>> column(const cultmap::SurveyDataset& ds, cultmap::QuestionId q) {
  std::vector<std::optional<double>> out;
  for (const auto& r : ds.records) out.push_back(r.answers[cultmap::index_of(q)]);
  return out;
}

inline std::vector<double> weights(const cultmap::SurveyDataset& ds) {
  std::vector<double> out;
  for (const auto& r : ds.records) out.push_back(r.weight);
  return out;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cultmap_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support
