#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cultmap/errors.hpp"
#include "cultmap/metrics.hpp"
#include "cultmap/util.hpp"
#include "cultmap/values.hpp"

#ifndef CULTMAP_VERSION
#define CULTMAP_VERSION "0.0.0"
#endif

namespace cultmap::report {

inline constexpr std::string_view kUnassigned = "Unassigned";
inline constexpr std::string_view kUnassignedColor = "#9e9e9e";

// ---------------------------------------------------------------------------
// Region metadata

struct RegionMetadata {
  std::vector<std::pair<std::string, std::string>> regions;  // label, color; file order
  std::map<std::string, std::string> country_region;         // code -> label

  std::string region_of(const std::string& code) const {
    const auto it = country_region.find(code);
    return it == country_region.end() ? std::string(kUnassigned) : it->second;
  }

  std::string color_of(const std::string& region) const {
    for (const auto& [label, color] : regions) {
      if (label == region) return color;
    }
    return std::string(kUnassignedColor);
  }
};

/// Lines are `region<TAB>label<TAB>#rrggbb` or `country<TAB>CODE<TAB>label`.
inline RegionMetadata parse_regions(std::string_view text, std::string_view origin = "<regions>") {
  RegionMetadata meta;
  std::size_t n = 0;
  for (const auto& raw : util::split(text, '\n')) {
    ++n;
    const auto line = util::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto cols = util::split(line, '\t');
    const auto where = std::string(origin) + ":" + std::to_string(n) + ": ";
    if (cols.size() != 3) throw ConfigError(where + "expected three tab-separated fields");
    const auto kind = util::trim(cols[0]);
    const auto a = std::string(util::trim(cols[1]));
    const auto b = std::string(util::trim(cols[2]));
    if (kind == "region") {
      if (b.size() != 7 || b.front() != '#') throw ConfigError(where + "color must look like #rrggbb");
      meta.regions.emplace_back(a, b);
    } else if (kind == "country") {
      const bool known = std::any_of(meta.regions.begin(), meta.regions.end(),
                                     [&](const auto& r) { return r.first == b; });
      if (!known) throw ConfigError(where + "region '" + b + "' is not declared");
      meta.country_region[a] = b;
    } else {
      throw ConfigError(where + "unknown record type '" + std::string(kind) + "'");
    }
  }
  return meta;
}

inline RegionMetadata load_regions(const std::filesystem::path& path) {
  return parse_regions(util::read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Provenance

struct Provenance {
  std::string model_fingerprint = "none";
  std::string transcript_fingerprint = "none";

  std::string header(std::string_view comment = "#") const {
    const auto c = std::string(comment);
    return c + " cultmap " + CULTMAP_VERSION + "\n" + c + " model-artifact " + model_fingerprint + "\n" + c +
           " transcripts " + transcript_fingerprint + "\n";
  }
};

/// Reads the provenance lines written by `Provenance::header`.
inline Provenance read_provenance(std::string_view text) {
  Provenance p;
  for (const auto& raw : util::split(text, '\n')) {
    const auto line = util::trim(raw);
    if (!line.starts_with("#")) break;
    const auto parts = util::split(util::trim(line.substr(1)), ' ');
    if (parts.size() != 2) continue;
    if (parts[0] == "model-artifact") p.model_fingerprint = std::string(parts[1]);
    if (parts[0] == "transcripts") p.transcript_fingerprint = std::string(parts[1]);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Tables

/// Rows of a tab-separated table with `#` comment lines and one header row.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return i;
    }
    throw LoadError("table has no column '" + std::string(name) + "'");
  }
};

inline Table parse_table(std::string_view text, std::string_view origin) {
  Table t;
  std::size_t n = 0;
  for (const auto& raw : util::split(text, '\n')) {
    ++n;
    if (raw.empty() || raw.front() == '#') continue;
    std::vector<std::string> cols;
    for (const auto& c : util::split(raw, '\t')) cols.emplace_back(c);
    if (t.columns.empty()) {
      t.columns = std::move(cols);
      continue;
    }
    if (cols.size() != t.columns.size()) {
      throw LoadError(std::string(origin) + ":" + std::to_string(n) + ": expected " +
                      std::to_string(t.columns.size()) + " fields, got " + std::to_string(cols.size()));
    }
    t.rows.push_back(std::move(cols));
  }
  if (t.columns.empty()) throw LoadError(std::string(origin) + ": empty table");
  return t;
}

inline double table_number(const std::string& s, std::string_view what) {
  const auto v = util::parse_double(s);
  if (!v) throw LoadError("non-numeric " + std::string(what) + " '" + s + "'");
  return *v;
}

// ---------------------------------------------------------------------------
// Reference values

struct ReferenceValue {
  std::string key;
  double value = 0.0;
  double tolerance = 0.0;
  std::string note;
};

/// `key<TAB>value<TAB>tolerance<TAB>note`.
inline std::vector<ReferenceValue> parse_reference_values(std::string_view text, std::string_view origin) {
  std::vector<ReferenceValue> out;
  const auto t = parse_table(text, origin);
  const auto k = t.column("key"), v = t.column("value"), tol = t.column("tolerance"), note = t.column("note");
  for (const auto& r : t.rows) {
    out.push_back({r[k], table_number(r[v], "reference value"), table_number(r[tol], "tolerance"), r[note]});
  }
  return out;
}

/// Observed values are compared against the references; never an assertion.
inline std::string compare_reference_values(const std::vector<ReferenceValue>& refs,
                                            const std::map<std::string, double>& observed,
                                            std::vector<std::string>* warnings = nullptr) {
  std::string out = "key\treference\ttolerance\tobserved\tdifference\tstatus\tnote\n";
  for (const auto& r : refs) {
    const auto it = observed.find(r.key);
    std::string obs = "NA", diff = "NA", status = "not observed";
    if (it != observed.end()) {
      const double d = it->second - r.value;
      obs = util::format_fixed(it->second, 4);
      diff = util::format_fixed(d, 4);
      status = std::abs(d) <= r.tolerance ? "within tolerance" : "drift";
      if (status == "drift" && warnings) {
        warnings->push_back("drift: " + r.key + " observed " + obs + ", reference " +
                            util::format_fixed(r.value, 4) + " +/- " + util::format_fixed(r.tolerance, 4));
      }
    }
    out += r.key + '\t' + util::format_fixed(r.value, 4) + '\t' + util::format_fixed(r.tolerance, 4) + '\t' + obs +
           '\t' + diff + '\t' + status + '\t' + r.note + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// SVG

namespace svg {

inline std::string num(double v) { return util::format_fixed(v, 2); }

inline std::string escape(std::string_view s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double width = 720, height = 560;
  double left = 60, right = 200, top = 40, bottom = 50;
  double x0 = -1, x1 = 1, y0 = -1, y1 = 1;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

inline std::pair<double, double> padded_range(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  return {std::floor(lo) - 0.5, std::ceil(hi) + 0.5};
}

inline std::string open(const Frame& f, std::string_view title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(f.width) + "\" height=\"" + num(f.height) +
         "\" viewBox=\"0 0 " + num(f.width) + " " + num(f.height) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         "<text x=\"" + num(f.width / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) +
         "</text>\n";
}

/// Integer grid lines with labels on both axes.
inline std::string axes(const Frame& f, std::string_view xlabel, std::string_view ylabel) {
  std::string out;
  for (double x = std::ceil(f.x0); x <= f.x1; x += 1.0) {
    out += "<line x1=\"" + num(f.px(x)) + "\" y1=\"" + num(f.py(f.y0)) + "\" x2=\"" + num(f.px(x)) + "\" y2=\"" +
           num(f.py(f.y1)) + "\" stroke=\"#e0e0e0\"/>\n";
    out += "<text x=\"" + num(f.px(x)) + "\" y=\"" + num(f.py(f.y0) + 14) + "\" text-anchor=\"middle\">" +
           util::format_fixed(x, 0) + "</text>\n";
  }
  for (double y = std::ceil(f.y0); y <= f.y1; y += 1.0) {
    out += "<line x1=\"" + num(f.px(f.x0)) + "\" y1=\"" + num(f.py(y)) + "\" x2=\"" + num(f.px(f.x1)) + "\" y2=\"" +
           num(f.py(y)) + "\" stroke=\"#e0e0e0\"/>\n";
    out += "<text x=\"" + num(f.px(f.x0) - 6) + "\" y=\"" + num(f.py(y) + 4) + "\" text-anchor=\"end\">" +
           util::format_fixed(y, 0) + "</text>\n";
  }
  out += "<rect x=\"" + num(f.left) + "\" y=\"" + num(f.top) + "\" width=\"" + num(f.width - f.left - f.right) +
         "\" height=\"" + num(f.height - f.top - f.bottom) + "\" fill=\"none\" stroke=\"#444\"/>\n";
  out += "<text x=\"" + num(f.px(0.5 * (f.x0 + f.x1))) + "\" y=\"" + num(f.height - 12) +
         "\" text-anchor=\"middle\">" + escape(xlabel) + "</text>\n";
  out += "<text transform=\"translate(16 " + num(f.py(0.5 * (f.y0 + f.y1))) +
         ") rotate(-90)\" text-anchor=\"middle\">" + escape(ylabel) + "</text>\n";
  return out;
}

}  // namespace svg

struct MapPoint {
  std::string label;
  CulturalCoordinates coords;
};

/// Countries coloured by region; model points in red, culturally prompted
/// model points as small hollow markers.
inline std::string map_svg(const std::map<std::string, CulturalCoordinates>& countries, const RegionMetadata& regions,
                           const std::vector<MapPoint>& models = {}, const std::vector<MapPoint>& cultural = {}) {
  double xlo = 0, xhi = 0, ylo = 0, yhi = 0;
  bool first = true;
  const auto extend = [&](const CulturalCoordinates& c) {
    if (first) {
      xlo = xhi = c.x;
      ylo = yhi = c.y;
      first = false;
    }
    xlo = std::min(xlo, c.x);
    xhi = std::max(xhi, c.x);
    ylo = std::min(ylo, c.y);
    yhi = std::max(yhi, c.y);
  };
  for (const auto& [c, xy] : countries) extend(xy);
  for (const auto& m : models) extend(m.coords);
  for (const auto& m : cultural) extend(m.coords);

  svg::Frame f;
  std::tie(f.x0, f.x1) = svg::padded_range(xlo, xhi);
  std::tie(f.y0, f.y1) = svg::padded_range(ylo, yhi);
  std::string out = svg::open(f, "Cultural map");
  out += svg::axes(f, "Survival vs. self-expression values", "Traditional vs. secular values");

  std::set<std::string> used;
  for (const auto& [code, xy] : countries) {
    const auto region = regions.region_of(code);
    used.insert(region);
    out += "<circle cx=\"" + svg::num(f.px(xy.x)) + "\" cy=\"" + svg::num(f.py(xy.y)) + "\" r=\"4\" fill=\"" +
           regions.color_of(region) + "\"><title>" + svg::escape(code + " (" + region + ")") + "</title></circle>\n";
    out += "<text x=\"" + svg::num(f.px(xy.x) + 6) + "\" y=\"" + svg::num(f.py(xy.y) + 4) + "\" fill=\"" +
           regions.color_of(region) + "\">" + svg::escape(code) + "</text>\n";
  }
  for (const auto& m : cultural) {
    out += "<circle cx=\"" + svg::num(f.px(m.coords.x)) + "\" cy=\"" + svg::num(f.py(m.coords.y)) +
           "\" r=\"3\" fill=\"none\" stroke=\"#d32f2f\"><title>" + svg::escape(m.label) + "</title></circle>\n";
  }
  for (const auto& m : models) {
    const double x = f.px(m.coords.x), y = f.py(m.coords.y);
    out += "<path d=\"M" + svg::num(x) + " " + svg::num(y - 6) + " L" + svg::num(x + 6) + " " + svg::num(y) + " L" +
           svg::num(x) + " " + svg::num(y + 6) + " L" + svg::num(x - 6) + " " + svg::num(y) +
           " Z\" fill=\"#d32f2f\"/>\n";
    out += "<text x=\"" + svg::num(x + 8) + "\" y=\"" + svg::num(y - 6) + "\" fill=\"#d32f2f\" font-weight=\"bold\">" +
           svg::escape(m.label) + "</text>\n";
  }

  double ly = f.top + 10;
  const double lx = f.width - f.right + 16;
  const auto legend = [&](const std::string& label, const std::string& color) {
    out += "<circle cx=\"" + svg::num(lx) + "\" cy=\"" + svg::num(ly) + "\" r=\"4\" fill=\"" + color + "\"/>\n";
    out += "<text x=\"" + svg::num(lx + 10) + "\" y=\"" + svg::num(ly + 4) + "\">" + svg::escape(label) + "</text>\n";
    ly += 16;
  };
  for (const auto& [label, color] : regions.regions) {
    if (used.count(label)) legend(label, color);
  }
  if (used.count(std::string(kUnassigned))) legend(std::string(kUnassigned), std::string(kUnassignedColor));
  if (!models.empty()) legend("Model (default prompt)", "#d32f2f");
  out += "</svg>\n";
  return out;
}

struct BoxStats {
  double q1 = 0, median = 0, q3 = 0, whisker_lo = 0, whisker_hi = 0;
  std::vector<double> outliers;
};

/// Linearly interpolated quantile of sorted data.
inline double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw StatsError("quantile of empty data");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline BoxStats box_stats(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  BoxStats b;
  b.q1 = quantile(v, 0.25);
  b.median = quantile(v, 0.5);
  b.q3 = quantile(v, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo = b.q1 - 1.5 * iqr, hi = b.q3 + 1.5 * iqr;
  b.whisker_lo = b.q1;
  b.whisker_hi = b.q3;
  for (const double x : v) {
    if (x < lo || x > hi) {
      b.outliers.push_back(x);
      continue;
    }
    b.whisker_lo = std::min(b.whisker_lo, x);
    b.whisker_hi = std::max(b.whisker_hi, x);
  }
  return b;
}

struct BoxGroup {
  std::string model;
  std::vector<double> before;  // default-prompt distances
  std::vector<double> after;   // culturally prompted distances
};

inline std::string boxplot_svg(const std::vector<BoxGroup>& groups) {
  double hi = 1.0;
  for (const auto& g : groups) {
    for (const double d : g.before) hi = std::max(hi, d);
    for (const double d : g.after) hi = std::max(hi, d);
  }
  svg::Frame f;
  f.right = 140;
  f.x0 = 0;
  f.x1 = static_cast<double>(std::max<std::size_t>(groups.size(), 1));
  f.y0 = 0;
  f.y1 = std::ceil(hi) + 0.5;
  std::string out = svg::open(f, "Distance to survey values, default vs. cultural prompting");
  for (double y = 0; y <= f.y1; y += 1.0) {
    out += "<line x1=\"" + svg::num(f.px(f.x0)) + "\" y1=\"" + svg::num(f.py(y)) + "\" x2=\"" + svg::num(f.px(f.x1)) +
           "\" y2=\"" + svg::num(f.py(y)) + "\" stroke=\"#e0e0e0\"/>\n";
    out += "<text x=\"" + svg::num(f.px(f.x0) - 6) + "\" y=\"" + svg::num(f.py(y) + 4) + "\" text-anchor=\"end\">" +
           util::format_fixed(y, 0) + "</text>\n";
  }
  out += "<text transform=\"translate(16 " + svg::num(f.py(0.5 * f.y1)) +
         ") rotate(-90)\" text-anchor=\"middle\">Euclidean distance</text>\n";

  const auto box = [&](const std::vector<double>& data, double center, const std::string& color) {
    if (data.empty()) return;
    const auto b = box_stats(data);
    const double half = 0.12 * (f.px(1) - f.px(0));
    const double cx = f.px(center);
    out += "<line x1=\"" + svg::num(cx) + "\" y1=\"" + svg::num(f.py(b.whisker_lo)) + "\" x2=\"" + svg::num(cx) +
           "\" y2=\"" + svg::num(f.py(b.whisker_hi)) + "\" stroke=\"" + color + "\"/>\n";
    out += "<rect x=\"" + svg::num(cx - half) + "\" y=\"" + svg::num(f.py(b.q3)) + "\" width=\"" +
           svg::num(2 * half) + "\" height=\"" + svg::num(f.py(b.q1) - f.py(b.q3)) + "\" fill=\"" + color +
           "\" fill-opacity=\"0.35\" stroke=\"" + color + "\"/>\n";
    out += "<line x1=\"" + svg::num(cx - half) + "\" y1=\"" + svg::num(f.py(b.median)) + "\" x2=\"" +
           svg::num(cx + half) + "\" y2=\"" + svg::num(f.py(b.median)) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    for (const double o : b.outliers) {
      out += "<circle cx=\"" + svg::num(cx) + "\" cy=\"" + svg::num(f.py(o)) + "\" r=\"2.5\" fill=\"none\" stroke=\"" +
             color + "\"/>\n";
    }
  };
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const double base = static_cast<double>(i);
    box(groups[i].before, base + 0.3, "#616161");
    box(groups[i].after, base + 0.7, "#7b1fa2");
    out += "<text x=\"" + svg::num(f.px(base + 0.5)) + "\" y=\"" + svg::num(f.py(0) + 16) +
           "\" text-anchor=\"middle\">" + svg::escape(groups[i].model) + "</text>\n";
  }
  const double lx = f.width - f.right + 16;
  out += "<rect x=\"" + svg::num(lx - 5) + "\" y=\"" + svg::num(f.top + 5) +
         "\" width=\"10\" height=\"10\" fill=\"#616161\" fill-opacity=\"0.35\" stroke=\"#616161\"/>\n";
  out += "<text x=\"" + svg::num(lx + 10) + "\" y=\"" + svg::num(f.top + 14) + "\">default prompt</text>\n";
  out += "<rect x=\"" + svg::num(lx - 5) + "\" y=\"" + svg::num(f.top + 21) +
         "\" width=\"10\" height=\"10\" fill=\"#7b1fa2\" fill-opacity=\"0.35\" stroke=\"#7b1fa2\"/>\n";
  out += "<text x=\"" + svg::num(lx + 10) + "\" y=\"" + svg::num(f.top + 30) + "\">cultural prompt</text>\n";
  out += "</svg>\n";
  return out;
}

}  // namespace cultmap::report
