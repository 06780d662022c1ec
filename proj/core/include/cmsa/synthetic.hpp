#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cmsa/corpus.hpp"

namespace cmsa::synthetic {

struct ToyOptions {
  std::size_t n = 200;
  std::uint64_t seed = 0;
  // Skewed like the real data; the rest is neutral.
  double negative_fraction = 0.5;
  double positive_fraction = 0.25;
};

struct DictRow {
  std::string surface;
  std::string gloss;
  std::string source;  // "finglish" or "slang"
};

/// Generated code-mixed corpus: every text carries at least one
/// class-specific cue word and shared filler words.
struct ToyCorpus {
  corpus::Dataset dataset;
  std::vector<std::pair<std::string, std::uint64_t>> lexicon;
  std::vector<DictRow> dictionary;
};

/// Throws std::invalid_argument when a class would get fewer than 10 records.
ToyCorpus make_toy_corpus(const ToyOptions& opts = {});

/// Writes data.ndjson, lexicon.tsv and dict.tsv into `dir`.
void write_toy_corpus(const ToyCorpus& c, const std::filesystem::path& dir);

}  // namespace cmsa::synthetic
