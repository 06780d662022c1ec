#include "cmsa/label.hpp"

#include <string>

#include "cmsa/error.hpp"

namespace cmsa {

std::string_view to_string(Label l) noexcept {
  switch (l) {
    case Label::Negative: return "negative";
    case Label::Neutral: return "neutral";
    case Label::Positive: return "positive";
  }
  return "neutral";
}

std::optional<Label> parse_label(std::string_view s) noexcept {
  if (s == "negative") return Label::Negative;
  if (s == "neutral") return Label::Neutral;
  if (s == "positive") return Label::Positive;
  return std::nullopt;
}

Label parse_label_or_throw(std::string_view s) {
  if (auto l = parse_label(s)) return *l;
  throw DataError("unknown label \"" + std::string(s) + "\"");
}

Label argmax_label(const ClassProbs& p) noexcept {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    if (p[c] > p[best]) best = c;
  }
  return label_at(best);
}

}  // namespace cmsa
