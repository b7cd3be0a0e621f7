#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace cultmap {

/// Child qualities offered by the autonomy question, in prompt order.
enum class Quality : std::uint8_t {
  GoodManners,
  Independence,
  HardWork,
  Responsibility,
  Imagination,
  Tolerance,
  Thrift,
  Determination,
  ReligiousFaith,
  Unselfishness,
  Obedience,
};

inline constexpr std::size_t kQualityCount = 11;

struct Scalar {
  int value = 0;
  friend bool operator==(const Scalar&, const Scalar&) = default;
};

struct Choice {
  char letter = 'A';  // always upper case
  friend bool operator==(const Choice&, const Choice&) = default;
};

/// Most important and next most important goal, 1-based, as answered.
struct GoalPair {
  int first = 0;
  int second = 0;
  friend bool operator==(const GoalPair&, const GoalPair&) = default;
};

/// Chosen qualities in order of appearance.
struct QualitySet {
  std::vector<Quality> qualities;
  friend bool operator==(const QualitySet&, const QualitySet&) = default;
};

struct Refusal {
  std::string reason;
  friend bool operator==(const Refusal&, const Refusal&) { return true; }
};

using ParsedAnswer = std::variant<Scalar, Choice, GoalPair, QualitySet, Refusal>;

inline bool is_refusal(const ParsedAnswer& a) { return std::holds_alternative<Refusal>(a); }

}  // namespace cultmap
