#pragma once

// Cultural-map model: weighted standardization, pairwise-complete correlation,
// principal components, varimax rotation, orientation, scoring and rescaling.

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cultmap/errors.hpp"
#include "cultmap/questions.hpp"
#include "cultmap/survey.hpp"
#include "cultmap/util.hpp"

namespace cultmap {

template <std::size_t N>
using SquareMatrix = std::array<std::array<double, N>, N>;

/// Rows are items, columns are the two retained components.
template <std::size_t P>
using LoadingMatrix = std::array<std::array<double, 2>, P>;

using CorrelationMatrix = SquareMatrix<kQuestionCount>;
using Loadings = LoadingMatrix<kQuestionCount>;
using Rotation2 = SquareMatrix<2>;

inline constexpr Rotation2 kIdentity2{{{1.0, 0.0}, {0.0, 1.0}}};

// ---------------------------------------------------------------------------
// Standardization

struct StandardizationParams {
  std::array<double, kQuestionCount> mean{};
  std::array<double, kQuestionCount> sd{};

  double standardize(QuestionId q, double raw) const {
    return (raw - mean[index_of(q)]) / sd[index_of(q)];
  }

  /// Missing answers stay missing.
  AnswerVector standardize(const AnswerVector& raw) const {
    AnswerVector z{};
    for (const auto q : kAllQuestions) {
      if (const auto& v = raw[index_of(q)]) z[index_of(q)] = standardize(q, *v);
    }
    return z;
  }

  friend bool operator==(const StandardizationParams&, const StandardizationParams&) = default;
};

/// Weighted mean and population standard deviation per item, each over the
/// rows where that item is present.
inline StandardizationParams weighted_standardization(const SurveyDataset& ds) {
  StandardizationParams p;
  for (const auto q : kAllQuestions) {
    const auto qi = index_of(q);
    double sw = 0.0;
    double swx = 0.0;
    std::size_t n = 0;
    for (const auto& r : ds.records) {
      if (!r.answers[qi] || r.weight <= 0.0) continue;
      sw += r.weight;
      swx += r.weight * *r.answers[qi];
      ++n;
    }
    if (n < 2 || sw <= 0.0) {
      throw DegenerateDataError(std::string(code(q)) + ": fewer than two weighted observations");
    }
    const double mean = swx / sw;
    double ss = 0.0;
    for (const auto& r : ds.records) {
      if (!r.answers[qi] || r.weight <= 0.0) continue;
      const double d = *r.answers[qi] - mean;
      ss += r.weight * d * d;
    }
    const double sd = std::sqrt(ss / sw);
    if (!(sd > 0.0)) throw DegenerateDataError(std::string(code(q)) + ": zero variance");
    p.mean[qi] = mean;
    p.sd[qi] = sd;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Pairwise-complete weighted correlation

inline CorrelationMatrix pairwise_correlation(const SurveyDataset& ds,
                                              const StandardizationParams& params) {
  CorrelationMatrix m{};
  std::vector<std::array<double, kQuestionCount>> z;
  std::vector<std::array<bool, kQuestionCount>> present;
  std::vector<double> w;
  for (const auto& r : ds.records) {
    if (r.weight <= 0.0) continue;
    std::array<double, kQuestionCount> zr{};
    std::array<bool, kQuestionCount> pr{};
    for (const auto q : kAllQuestions) {
      if (const auto& v = r.answers[index_of(q)]) {
        zr[index_of(q)] = params.standardize(q, *v);
        pr[index_of(q)] = true;
      }
    }
    z.push_back(zr);
    present.push_back(pr);
    w.push_back(r.weight);
  }

  for (std::size_t p = 0; p < kQuestionCount; ++p) {
    m[p][p] = 1.0;
    for (std::size_t q = p + 1; q < kQuestionCount; ++q) {
      const auto pair_name = std::string(kQuestionCodes[p]) + "/" + std::string(kQuestionCodes[q]);
      double sw = 0.0, sx = 0.0, sy = 0.0;
      std::size_t n = 0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        if (!present[i][p] || !present[i][q]) continue;
        sw += w[i];
        sx += w[i] * z[i][p];
        sy += w[i] * z[i][q];
        ++n;
      }
      if (n < 2) {
        throw InsufficientOverlapError("pair " + pair_name + " has " + std::to_string(n) +
                                       " jointly present rows");
      }
      const double mx = sx / sw;
      const double my = sy / sw;
      double sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        if (!present[i][p] || !present[i][q]) continue;
        const double dx = z[i][p] - mx;
        const double dy = z[i][q] - my;
        sxx += w[i] * dx * dx;
        syy += w[i] * dy * dy;
        sxy += w[i] * dx * dy;
      }
      if (!(sxx > 0.0) || !(syy > 0.0)) {
        throw InsufficientOverlapError("pair " + pair_name + " has no variance on its overlap");
      }
      const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
      m[p][q] = r;
      m[q][p] = r;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Symmetric eigen-decomposition (cyclic Jacobi)

template <std::size_t N>
struct EigenSystem {
  std::array<double, N> values{};  // descending
  SquareMatrix<N> vectors{};       // column k pairs with values[k]
};

template <std::size_t N>
EigenSystem<N> symmetric_eigen(const SquareMatrix<N>& input, double tolerance = 1e-12) {
  SquareMatrix<N> a = input;
  SquareMatrix<N> v{};
  double norm = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    v[i][i] = 1.0;
    for (std::size_t j = 0; j < N; ++j) norm += a[i][j] * a[i][j];
  }
  norm = std::sqrt(norm);
  const auto off = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j)
        if (i != j) s += a[i][j] * a[i][j];
    return std::sqrt(s);
  };

  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps && off() > 1e-15 * norm; ++sweep) {
    for (std::size_t p = 0; p + 1 < N; ++p) {
      for (std::size_t q = p + 1; q < N; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < N; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < N; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < N; ++k) {
          const double vkp = v[k][p];
          const double vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }

  // Sign rule: first component with magnitude above 1e-12 is positive.
  for (std::size_t k = 0; k < N; ++k) {
    for (std::size_t i = 0; i < N; ++i) {
      if (std::abs(v[i][k]) > 1e-12) {
        if (v[i][k] < 0.0)
          for (std::size_t j = 0; j < N; ++j) v[j][k] = -v[j][k];
        break;
      }
    }
  }

  std::array<std::size_t, N> order{};
  std::iota(order.begin(), order.end(), std::size_t{0});
  const double tie = 1e-12 * std::max(norm, 1.0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (std::abs(a[x][x] - a[y][y]) > tie) return a[x][x] > a[y][y];
    for (std::size_t i = 0; i < N; ++i) {
      if (std::abs(v[i][x] - v[i][y]) > 1e-12) return v[i][x] > v[i][y];
    }
    return false;
  });

  EigenSystem<N> out;
  for (std::size_t k = 0; k < N; ++k) {
    out.values[k] = a[order[k]][order[k]];
    for (std::size_t i = 0; i < N; ++i) out.vectors[i][k] = v[i][order[k]];
  }

  double worst = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    for (std::size_t i = 0; i < N; ++i) {
      double av = 0.0;
      for (std::size_t j = 0; j < N; ++j) av += input[i][j] * out.vectors[j][k];
      worst = std::max(worst, std::abs(av - out.values[k] * out.vectors[i][k]));
    }
  }
  if (worst > tolerance * std::max(norm, 1.0)) {
    throw DecompositionError("eigen-decomposition did not converge (residual " +
                             util::format_exact(worst) + ")");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Principal components

struct UnrotatedPca {
  Loadings loadings{};
  std::array<double, kQuestionCount> eigenvalues{};
  std::array<double, 2> explained{};  // eigenvalue / number of items
};

inline UnrotatedPca fit_pca(const CorrelationMatrix& corr) {
  for (std::size_t i = 0; i < kQuestionCount; ++i) {
    if (std::abs(corr[i][i] - 1.0) > 1e-12) {
      throw DecompositionError("correlation matrix diagonal must be 1");
    }
    for (std::size_t j = i + 1; j < kQuestionCount; ++j) {
      if (!std::isfinite(corr[i][j]) || std::abs(corr[i][j] - corr[j][i]) > 1e-12) {
        throw DecompositionError("correlation matrix is not symmetric");
      }
    }
  }
  const auto eig = symmetric_eigen(corr);
  if (!(eig.values[1] > 1e-12)) {
    throw DecompositionError("fewer than two positive eigenvalues");
  }
  UnrotatedPca out;
  out.eigenvalues = eig.values;
  for (std::size_t k = 0; k < 2; ++k) {
    const double scale = std::sqrt(eig.values[k]);
    for (std::size_t i = 0; i < kQuestionCount; ++i) out.loadings[i][k] = eig.vectors[i][k] * scale;
    out.explained[k] = eig.values[k] / static_cast<double>(kQuestionCount);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Varimax

/// Raw varimax criterion: summed over components, the variance of squared loadings.
template <std::size_t P>
double varimax_criterion(const LoadingMatrix<P>& l) {
  double total = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    double s2 = 0.0, s4 = 0.0;
    for (std::size_t i = 0; i < P; ++i) {
      const double sq = l[i][k] * l[i][k];
      s2 += sq;
      s4 += sq * sq;
    }
    total += s4 / P - (s2 / P) * (s2 / P);
  }
  return total;
}

template <std::size_t P>
LoadingMatrix<P> apply_rotation(const LoadingMatrix<P>& l, const Rotation2& r) {
  LoadingMatrix<P> out{};
  for (std::size_t i = 0; i < P; ++i) {
    for (std::size_t k = 0; k < 2; ++k) out[i][k] = l[i][0] * r[0][k] + l[i][1] * r[1][k];
  }
  return out;
}

inline Rotation2 multiply(const Rotation2& a, const Rotation2& b) {
  Rotation2 out{};
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
  return out;
}

inline Rotation2 planar_rotation(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return Rotation2{{{c, -s}, {s, c}}};
}

struct VarimaxOptions {
  bool kaiser_normalization = false;
  int max_sweeps = 500;
  double tolerance = 1e-12;
};

template <std::size_t P>
struct VarimaxResult {
  LoadingMatrix<P> rotated{};
  Rotation2 rotation = kIdentity2;  // rotated = input * rotation
  double criterion_before = 0.0;
  double criterion_after = 0.0;
  int sweeps = 0;
};

/// Orthogonal two-factor varimax using the closed-form pairwise angle.
template <std::size_t P>
VarimaxResult<P> varimax(const LoadingMatrix<P>& input, const VarimaxOptions& opt = {}) {
  double g00 = 0.0, g01 = 0.0, g11 = 0.0;
  for (const auto& row : input) {
    g00 += row[0] * row[0];
    g01 += row[0] * row[1];
    g11 += row[1] * row[1];
  }
  const double trace = g00 + g11;
  if (!(trace > 0.0) || g00 * g11 - g01 * g01 <= 1e-12 * trace * trace) {
    throw RotationError("loadings are rank deficient");
  }

  std::array<double, P> h{};
  h.fill(1.0);
  LoadingMatrix<P> work = input;
  if (opt.kaiser_normalization) {
    for (std::size_t i = 0; i < P; ++i) {
      const double c = std::sqrt(input[i][0] * input[i][0] + input[i][1] * input[i][1]);
      if (c > 0.0) h[i] = c;
      work[i][0] /= h[i];
      work[i][1] /= h[i];
    }
  }

  VarimaxResult<P> res;
  res.criterion_before = varimax_criterion(input);
  double prev = varimax_criterion(work);
  Rotation2 total = kIdentity2;
  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
    for (const auto& row : work) {
      const double u = row[0] * row[0] - row[1] * row[1];
      const double v = 2.0 * row[0] * row[1];
      a += u;
      b += v;
      c += u * u - v * v;
      d += 2.0 * u * v;
    }
    const double num = d - 2.0 * a * b / P;
    const double den = c - (a * a - b * b) / P;
    const double angle = 0.25 * std::atan2(num, den);
    const auto step = planar_rotation(angle);
    const auto candidate = apply_rotation(work, step);
    const double cur = varimax_criterion(candidate);
    res.sweeps = sweep;
    if (cur < prev) break;  // never accept a step that lowers the criterion
    work = candidate;
    total = multiply(total, step);
    const double gain = cur - prev;
    prev = cur;
    if (gain < opt.tolerance) break;
  }

  res.rotation = total;
  res.rotated = apply_rotation(input, total);
  res.criterion_after = varimax_criterion(res.rotated);
  return res;
}

// ---------------------------------------------------------------------------
// Orientation

struct OrientedLoadings {
  Loadings loadings{};
  Rotation2 signed_permutation = kIdentity2;  // oriented = rotated * signed_permutation
  std::array<int, 2> flags{1, 1};
  bool swapped = false;
  std::array<double, 2> explained{};
};

/// Orders components by explained variance and fixes signs so F118 loads
/// positively on the first and F063 negatively on the second.
inline OrientedLoadings orient(const Loadings& rotated) {
  std::array<double, 2> var{};
  for (const auto& row : rotated) {
    var[0] += row[0] * row[0];
    var[1] += row[1] * row[1];
  }
  OrientedLoadings out;
  out.swapped = var[1] > var[0];
  const std::size_t first = out.swapped ? 1 : 0;
  const std::size_t second = 1 - first;

  const double f118 = rotated[index_of(QuestionId::F118)][first];
  if (std::abs(f118) <= 1e-12) {
    throw OrientationError("F118 does not load on the first component; orientation is ambiguous");
  }
  out.flags[0] = f118 > 0.0 ? 1 : -1;
  out.flags[1] = rotated[index_of(QuestionId::F063)][second] > 0.0 ? -1 : 1;

  out.signed_permutation = Rotation2{};
  out.signed_permutation[first][0] = out.flags[0];
  out.signed_permutation[second][1] = out.flags[1];
  out.loadings = apply_rotation(rotated, out.signed_permutation);
  out.explained = {var[first] / kQuestionCount, var[second] / kQuestionCount};
  return out;
}

// ---------------------------------------------------------------------------
// Model, scoring and rescaling

struct RescaleCoefficients {
  double x_scale = 1.81;
  double x_offset = 0.38;
  double y_scale = 1.61;
  double y_offset = -0.01;
  friend bool operator==(const RescaleCoefficients&, const RescaleCoefficients&) = default;
};

struct PcaModel {
  Loadings unrotated{};
  Loadings loadings{};               // rotated and oriented
  Rotation2 rotation = kIdentity2;   // loadings = unrotated * rotation
  std::array<double, 2> explained_variance{};
  std::array<double, 2> unrotated_explained{};
  std::array<int, 2> orientation_flags{1, 1};
  bool components_swapped = false;
  bool kaiser_normalization = false;
  RescaleCoefficients rescale;
  friend bool operator==(const PcaModel&, const PcaModel&) = default;
};

struct PcScores {
  double pc1 = 0.0;
  double pc2 = 0.0;
};

/// x: survival (-) to self-expression (+); y: traditional (-) to secular (+).
struct CulturalCoordinates {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const CulturalCoordinates&, const CulturalCoordinates&) = default;
};

inline PcScores score(const std::array<double, kQuestionCount>& z, const PcaModel& model) {
  PcScores s;
  for (std::size_t q = 0; q < kQuestionCount; ++q) {
    s.pc1 += z[q] * model.loadings[q][0];
    s.pc2 += z[q] * model.loadings[q][1];
  }
  return s;
}

inline PcScores score(const AnswerVector& z, const PcaModel& model) {
  std::array<double, kQuestionCount> full{};
  for (const auto q : kAllQuestions) {
    const auto& v = z[index_of(q)];
    if (!v) throw IncompleteObservationError("missing answer for " + std::string(code(q)));
    full[index_of(q)] = *v;
  }
  return score(full, model);
}

inline CulturalCoordinates rescale(const PcScores& s, const RescaleCoefficients& c = {}) {
  return {c.x_scale * s.pc1 + c.x_offset, c.y_scale * s.pc2 + c.y_offset};
}

/// Standardized projection of one complete raw answer vector.
struct ValuesModel {
  StandardizationParams standardization;
  PcaModel pca;
  std::string fingerprint;
  friend bool operator==(const ValuesModel&, const ValuesModel&) = default;

  CulturalCoordinates project(const AnswerVector& raw) const {
    return rescale(score(standardization.standardize(raw), pca), pca.rescale);
  }
};

// ---------------------------------------------------------------------------
// Country aggregation

struct ScoredRecord {
  std::string country;
  int year = 0;
  CulturalCoordinates coords;
  double weight = 1.0;
};

struct CountryCoordinates {
  CulturalCoordinates coords;
  std::size_t records = 0;
  std::size_t years = 0;
};

struct AggregateResult {
  std::map<std::string, CountryCoordinates> countries;
  std::map<std::string, std::string> excluded;  // country -> reason
};

/// Mean within each (country, year), then the unweighted mean of those year
/// means. With `weighted`, the within-year mean uses record weights instead.
inline AggregateResult aggregate_country(std::span<const ScoredRecord> records,
                                         const std::set<std::string>& expected = {},
                                         bool weighted = false) {
  struct Acc {
    double w = 0.0, x = 0.0, y = 0.0;
    std::size_t n = 0;
  };
  std::map<std::string, std::map<int, Acc>> by_year;
  for (const auto& r : records) {
    auto& acc = by_year[r.country][r.year];
    const double w = weighted ? r.weight : 1.0;
    acc.w += w;
    acc.x += w * r.coords.x;
    acc.y += w * r.coords.y;
    ++acc.n;
  }
  AggregateResult out;
  for (const auto& [country, years] : by_year) {
    CountryCoordinates cc;
    std::size_t used = 0;
    for (const auto& [year, acc] : years) {
      cc.records += acc.n;
      if (!(acc.w > 0.0)) continue;
      cc.coords.x += acc.x / acc.w;
      cc.coords.y += acc.y / acc.w;
      ++used;
    }
    if (used == 0) {
      out.excluded[country] = "no scoreable records with positive weight";
      continue;
    }
    cc.years = used;
    cc.coords.x /= static_cast<double>(used);
    cc.coords.y /= static_cast<double>(used);
    out.countries[country] = cc;
  }
  for (const auto& c : expected) {
    if (!out.countries.count(c) && !out.excluded.count(c)) {
      out.excluded[c] = "no record with all ten answers present";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// End-to-end fit

struct FitOptions {
  VarimaxOptions varimax;
  bool weighted_aggregation = false;
};

struct FitResult {
  ValuesModel model;
  CorrelationMatrix correlation{};
  UnrotatedPca unrotated;
  double criterion_unrotated = 0.0;
  double criterion_rotated = 0.0;
  std::vector<Exclusion> exclusions;
  AggregateResult countries;
  std::size_t scored_records = 0;
};

inline std::vector<ScoredRecord> score_records(const SurveyDataset& ds, const ValuesModel& model) {
  std::vector<ScoredRecord> out;
  for (const auto& r : ds.records) {
    const bool complete =
        std::all_of(r.answers.begin(), r.answers.end(), [](const auto& v) { return v.has_value(); });
    if (!complete) continue;
    out.push_back({r.country, r.year, model.project(r.answers), r.weight});
  }
  return out;
}

inline FitResult fit_values_model(const SurveyDataset& ds, const FitOptions& opt = {},
                                  std::string fingerprint = {}) {
  FitResult res;
  res.exclusions = exclusion_report(ds);
  auto& model = res.model;
  model.fingerprint = std::move(fingerprint);
  model.standardization = weighted_standardization(ds);
  res.correlation = pairwise_correlation(ds, model.standardization);
  res.unrotated = fit_pca(res.correlation);
  const auto vm = varimax(res.unrotated.loadings, opt.varimax);
  const auto oriented = orient(vm.rotated);

  auto& pca = model.pca;
  pca.unrotated = res.unrotated.loadings;
  pca.loadings = oriented.loadings;
  pca.rotation = multiply(vm.rotation, oriented.signed_permutation);
  pca.explained_variance = oriented.explained;
  pca.unrotated_explained = res.unrotated.explained;
  pca.orientation_flags = oriented.flags;
  pca.components_swapped = oriented.swapped;
  pca.kaiser_normalization = opt.varimax.kaiser_normalization;
  res.criterion_unrotated = vm.criterion_before;
  res.criterion_rotated = varimax_criterion(pca.loadings);

  const auto scored = score_records(ds, model);
  res.scored_records = scored.size();
  res.countries = aggregate_country(scored, ds.countries(), opt.weighted_aggregation);
  return res;
}

// ---------------------------------------------------------------------------
// Model artifact

inline constexpr std::string_view kModelFormat = "cultmap-values-model";
inline constexpr int kModelFormatVersion = 1;

inline void save_model(std::ostream& out, const ValuesModel& m) {
  using util::format_exact;
  const auto& p = m.pca;
  out << kModelFormat << ' ' << kModelFormatVersion << '\n';
  out << "fingerprint " << (m.fingerprint.empty() ? "-" : m.fingerprint) << '\n';
  out << "kaiser_normalization " << (p.kaiser_normalization ? 1 : 0) << '\n';
  out << "components_swapped " << (p.components_swapped ? 1 : 0) << '\n';
  out << "orientation " << p.orientation_flags[0] << ' ' << p.orientation_flags[1] << '\n';
  out << "explained " << format_exact(p.explained_variance[0]) << ' '
      << format_exact(p.explained_variance[1]) << '\n';
  out << "unrotated_explained " << format_exact(p.unrotated_explained[0]) << ' '
      << format_exact(p.unrotated_explained[1]) << '\n';
  out << "rotation " << format_exact(p.rotation[0][0]) << ' ' << format_exact(p.rotation[0][1])
      << ' ' << format_exact(p.rotation[1][0]) << ' ' << format_exact(p.rotation[1][1]) << '\n';
  out << "rescale " << format_exact(p.rescale.x_scale) << ' ' << format_exact(p.rescale.x_offset)
      << ' ' << format_exact(p.rescale.y_scale) << ' ' << format_exact(p.rescale.y_offset) << '\n';
  out << "# question mean sd unrotated1 unrotated2 loading1 loading2\n";
  for (const auto q : kAllQuestions) {
    const auto i = index_of(q);
    out << "question " << code(q) << ' ' << format_exact(m.standardization.mean[i]) << ' '
        << format_exact(m.standardization.sd[i]) << ' ' << format_exact(p.unrotated[i][0]) << ' '
        << format_exact(p.unrotated[i][1]) << ' ' << format_exact(p.loadings[i][0]) << ' '
        << format_exact(p.loadings[i][1]) << '\n';
  }
  out << "end\n";
}

inline std::string save_model(const ValuesModel& m) {
  std::ostringstream ss;
  save_model(ss, m);
  return ss.str();
}

inline ValuesModel load_model(std::istream& in, std::string_view origin = "<model>") {
  const auto fail = [&](const std::string& what) -> LoadError {
    return LoadError(std::string(origin) + ": " + what);
  };
  std::string line;
  if (!std::getline(in, line)) throw fail("empty model artifact");
  {
    std::istringstream hs(line);
    std::string fmt;
    int version = 0;
    hs >> fmt >> version;
    if (fmt != kModelFormat) throw fail("not a cultmap values model");
    if (version != kModelFormatVersion) throw fail("unsupported model version " + std::to_string(version));
  }
  ValuesModel m;
  std::array<bool, kQuestionCount> seen{};
  bool ended = false;
  const auto nums = [&](std::istringstream& ls, std::size_t n) {
    std::vector<double> v;
    std::string tok;
    while (ls >> tok) {
      const auto d = util::parse_double(tok);
      if (!d) throw fail("bad number '" + tok + "'");
      v.push_back(*d);
    }
    if (v.size() != n) throw fail("expected " + std::to_string(n) + " values");
    return v;
  };
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    auto& p = m.pca;
    if (key == "fingerprint") {
      ls >> m.fingerprint;
      if (m.fingerprint == "-") m.fingerprint.clear();
    } else if (key == "kaiser_normalization") {
      p.kaiser_normalization = nums(ls, 1)[0] != 0.0;
    } else if (key == "components_swapped") {
      p.components_swapped = nums(ls, 1)[0] != 0.0;
    } else if (key == "orientation") {
      const auto v = nums(ls, 2);
      p.orientation_flags = {static_cast<int>(v[0]), static_cast<int>(v[1])};
    } else if (key == "explained") {
      const auto v = nums(ls, 2);
      p.explained_variance = {v[0], v[1]};
    } else if (key == "unrotated_explained") {
      const auto v = nums(ls, 2);
      p.unrotated_explained = {v[0], v[1]};
    } else if (key == "rotation") {
      const auto v = nums(ls, 4);
      p.rotation = Rotation2{{{v[0], v[1]}, {v[2], v[3]}}};
    } else if (key == "rescale") {
      const auto v = nums(ls, 4);
      p.rescale = {v[0], v[1], v[2], v[3]};
    } else if (key == "question") {
      std::string id;
      ls >> id;
      const auto q = parse_question_id(id);
      if (!q) throw fail("unknown question '" + id + "'");
      const auto v = nums(ls, 6);
      const auto i = index_of(*q);
      m.standardization.mean[i] = v[0];
      m.standardization.sd[i] = v[1];
      p.unrotated[i] = {v[2], v[3]};
      p.loadings[i] = {v[4], v[5]};
      seen[i] = true;
    } else if (key == "end") {
      ended = true;
      break;
    } else {
      throw fail("unknown record '" + key + "'");
    }
  }
  if (!ended) throw fail("truncated model artifact");
  for (const auto q : kAllQuestions) {
    if (!seen[index_of(q)]) throw fail("missing question " + std::string(code(q)));
    if (!(m.standardization.sd[index_of(q)] > 0.0)) throw fail("non-positive sd");
  }
  return m;
}

inline ValuesModel load_model(const std::filesystem::path& path) {
  std::istringstream in(util::read_file(path));
  return load_model(in, path.string());
}

}  // namespace cultmap
