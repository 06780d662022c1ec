#pragma once

#include <optional>
#include <span>

#include "cmsa/label.hpp"

namespace cmsa::annotate {

/// True iff the first two annotators disagree and a third label is needed.
constexpr bool needs_adjudication(Label a1, Label a2) noexcept {
  return a1 != a2;
}

/// Strict-majority vote over 1..3 labels. nullopt means Unresolved: two
/// unequal labels (awaiting a third) or three pairwise-distinct labels.
/// Throws std::invalid_argument on empty input or more than three labels.
std::optional<Label> majority_vote(std::span<const Label> labels);

}  // namespace cmsa::annotate
