#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cmsa/codeswitch.hpp"

namespace cmsa::textrep {

inline constexpr std::string_view kPad = "[PAD]";
inline constexpr std::string_view kUnk = "[UNK]";
inline constexpr std::string_view kContinuation = "##";
inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kUnkId = 1;

/// Dense piece -> index map. Index 0 is [PAD], index 1 is [UNK].
class SubwordVocab {
 public:
  SubwordVocab();

  /// Returns the index of `piece`, inserting it if new.
  std::size_t add(std::string_view piece);
  std::optional<std::size_t> find(std::string_view piece) const;
  bool contains(std::string_view piece) const { return find(piece).has_value(); }
  const std::string& piece(std::size_t id) const { return pieces_.at(id); }
  std::size_t size() const noexcept { return pieces_.size(); }
  const std::vector<std::string>& pieces() const noexcept { return pieces_; }

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// One piece per line; the line number is the index. The first two lines
/// must be [PAD] and [UNK].
SubwordVocab load_vocab(const std::filesystem::path& path);
void save_vocab(const SubwordVocab& vocab, const std::filesystem::path& path);

/// Whole words seen at least `min_word_freq` times plus every character
/// and its "##" continuation, so wordpiece never fails on the input words.
SubwordVocab build_vocab(const std::vector<std::string>& words,
                         std::size_t min_word_freq = 2);

/// Greedy longest-match-first segmentation over code points. Returns
/// {"[UNK]"} when any position has no match or the word is too long.
std::vector<std::string> wordpiece(std::string_view word,
                                   const SubwordVocab& vocab,
                                   std::size_t max_word_chars = 100);
std::vector<std::size_t> wordpiece_ids(std::string_view word,
                                       const SubwordVocab& vocab,
                                       std::size_t max_word_chars = 100);

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t rows, std::size_t dim, bool trainable = false);

  /// Uniform in [-scale, scale], seeded. The [PAD] row is zero.
  static EmbeddingTable random(std::size_t rows, std::size_t dim,
                               std::uint64_t seed, double scale = 0.05);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  bool trainable() const noexcept { return trainable_; }
  void set_trainable(bool t) noexcept { trainable_ = t; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  bool operator==(const EmbeddingTable&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  bool trainable_ = false;
  std::vector<double> data_;
};

enum class TableFormat { Text, Binary };

/// Text: header "V d" then V lines of d decimals (round-trip precision).
/// Binary: "EMB1", u32 V, u32 d, then V*d float32, all little-endian.
void save_table(const EmbeddingTable& table, const std::filesystem::path& path,
                TableFormat format);
/// Detects the format from the magic bytes.
EmbeddingTable load_table(const std::filesystem::path& path);

/// Padded T_max x d input matrix. Rows at or past `length` are zero and
/// masked out. `ids` holds the piece index of each valid row.
struct EmbeddedSequence {
  std::size_t max_len = 0;
  std::size_t dim = 0;
  std::size_t length = 0;
  std::vector<double> values;  // max_len * dim, row-major
  std::vector<std::uint8_t> mask;
  std::vector<std::size_t> ids;

  std::span<const double> row(std::size_t t) const {
    return {values.data() + t * dim, dim};
  }
};

/// Text units that would be embedded for a tokenized text, in order.
std::vector<std::string> embedding_units(const codeswitch::TokenizedText& tt,
                                         bool use_gloss);

/// Piece ids of a tokenized text before truncation.
std::vector<std::size_t> piece_ids(const codeswitch::TokenizedText& tt,
                                   const SubwordVocab& vocab, bool use_gloss);

EmbeddedSequence encode_ids(std::span<const std::size_t> ids,
                            const EmbeddingTable& table, std::size_t max_len);

/// Throws ShapeError when the table rows do not match the vocab size.
EmbeddedSequence encode_sequence(const codeswitch::TokenizedText& tt,
                                 const SubwordVocab& vocab,
                                 const EmbeddingTable& table,
                                 std::size_t max_len, bool use_gloss);

}  // namespace cmsa::textrep
