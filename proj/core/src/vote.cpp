#include "cmsa/vote.hpp"

#include <array>
#include <stdexcept>

namespace cmsa::annotate {

std::optional<Label> majority_vote(std::span<const Label> labels) {
  if (labels.empty()) throw std::invalid_argument("majority_vote: no labels");
  if (labels.size() > 3) {
    throw std::invalid_argument("majority_vote: more than three labels");
  }
  std::array<std::size_t, kNumClasses> votes{};
  for (Label l : labels) ++votes[index_of(l)];
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (2 * votes[c] > labels.size()) return label_at(c);
  }
  return std::nullopt;
}

}  // namespace cmsa::annotate
