#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace cmsa {

/// Sentiment polarity. The enumerator order is the fixed class order used
/// for argmax tie-breaking and for class indices 0..2.
enum class Label : int { Negative = 0, Neutral = 1, Positive = 2 };

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<Label, kNumClasses> kAllLabels = {
    Label::Negative, Label::Neutral, Label::Positive};

using ClassProbs = std::array<double, kNumClasses>;

constexpr std::size_t index_of(Label l) noexcept {
  return static_cast<std::size_t>(l);
}
constexpr Label label_at(std::size_t i) noexcept {
  return static_cast<Label>(static_cast<int>(i));
}

std::string_view to_string(Label l) noexcept;

/// Parses "positive" | "negative" | "neutral". Returns nullopt otherwise.
std::optional<Label> parse_label(std::string_view s) noexcept;

/// Parses a label, throwing DataError naming the offending value.
Label parse_label_or_throw(std::string_view s);

/// Index of the largest entry; ties go to the earliest class in the
/// Negative < Neutral < Positive order.
Label argmax_label(const ClassProbs& p) noexcept;

}  // namespace cmsa
