#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cultmap/errors.hpp"
#include "cultmap/util.hpp"

namespace cultmap {

/// Minimal `key = value` file with optional `[section]` headers and `#` comments.
/// Keys outside any section live in the section named "".
class KvConfig {
 public:
  using Section = std::map<std::string, std::string>;

  static KvConfig parse(std::string_view text, std::string_view origin = "<memory>") {
    KvConfig cfg;
    cfg.order_.push_back("");
    cfg.sections_[""];
    std::string current;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      auto line = util::trim(text.substr(start, end - start));
      start = end + 1;
      ++line_no;
      if (line.empty() || line.front() == '#' || line.front() == ';') continue;
      if (line.front() == '[') {
        if (line.back() != ']') {
          throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) +
                            ": unterminated section header");
        }
        current = std::string(util::trim(line.substr(1, line.size() - 2)));
        if (!cfg.sections_.count(current)) cfg.order_.push_back(current);
        cfg.sections_[current];
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) +
                          ": expected key = value");
      }
      const auto key = std::string(util::trim(line.substr(0, eq)));
      if (key.empty()) {
        throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": empty key");
      }
      cfg.sections_[current][key] = std::string(util::trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static KvConfig load(const std::filesystem::path& path) {
    return parse(util::read_file(path), path.string());
  }

  bool has_section(const std::string& name) const { return sections_.count(name) != 0; }

  const Section& section(const std::string& name = "") const {
    static const Section kEmpty;
    const auto it = sections_.find(name);
    return it == sections_.end() ? kEmpty : it->second;
  }

  std::optional<std::string> get(const std::string& key, const std::string& sec = "") const {
    const auto& s = section(sec);
    const auto it = s.find(key);
    if (it == s.end()) return std::nullopt;
    return it->second;
  }

  /// Section names in file order, including the implicit "" section.
  const std::vector<std::string>& section_names() const { return order_; }

 private:
  std::map<std::string, Section> sections_;
  std::vector<std::string> order_;
};

}  // namespace cultmap
