#include "cmsa/textrep.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cmsa/error.hpp"
#include "cmsa/rng.hpp"
#include "io_util.hpp"
#include "utf8_util.hpp"

namespace cmsa::textrep {

SubwordVocab::SubwordVocab() {
  add(kPad);
  add(kUnk);
}

std::size_t SubwordVocab::add(std::string_view piece) {
  auto [it, inserted] = index_.try_emplace(std::string(piece), pieces_.size());
  if (inserted) pieces_.emplace_back(piece);
  return it->second;
}

std::optional<std::size_t> SubwordVocab::find(std::string_view piece) const {
  auto it = index_.find(std::string(piece));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

SubwordVocab load_vocab(const std::filesystem::path& path) {
  auto in = detail::open_input(path, std::ios::in | std::ios::binary);
  std::string raw;
  std::vector<std::string> lines;
  while (std::getline(in, raw)) lines.emplace_back(detail::strip_cr(raw));
  if (lines.size() < 2 || lines[0] != kPad || lines[1] != kUnk) {
    throw DataError("vocab must start with [PAD] and [UNK]");
  }
  SubwordVocab vocab;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    if (lines[i].empty()) throw DataError("empty vocab piece", i + 1);
    if (vocab.add(lines[i]) != i) throw DataError("duplicate vocab piece \"" + lines[i] + "\"", i + 1);
  }
  return vocab;
}

void save_vocab(const SubwordVocab& vocab, const std::filesystem::path& path) {
  std::string out;
  for (const auto& p : vocab.pieces()) {
    out += p;
    out += '\n';
  }
  detail::write_file_atomic(path, out);
}

SubwordVocab build_vocab(const std::vector<std::string>& words, std::size_t min_word_freq) {
  std::map<std::string, std::size_t> freq;
  for (const auto& w : words) {
    if (!w.empty()) ++freq[w];
  }
  std::set<std::string> pieces;
  for (const auto& [w, n] : freq) {
    if (n >= min_word_freq) pieces.insert(w);
    for (auto& ch : detail::split_code_points(w)) {
      pieces.insert(std::string(kContinuation) + ch);
      pieces.insert(std::move(ch));
    }
  }
  SubwordVocab vocab;
  for (const auto& p : pieces) vocab.add(p);
  return vocab;
}

std::vector<std::size_t> wordpiece_ids(std::string_view word, const SubwordVocab& vocab,
                                       std::size_t max_word_chars) {
  // Byte offset of every code point boundary.
  std::vector<std::size_t> bounds{0};
  for (std::size_t i = 0; i < word.size();) {
    detail::next_code_point(word, i);
    bounds.push_back(i);
  }
  const std::size_t n = bounds.size() - 1;
  if (n == 0 || n > max_word_chars) return {kUnkId};

  std::vector<std::size_t> out;
  std::string candidate;
  std::size_t start = 0;
  while (start < n) {
    std::optional<std::size_t> match;
    std::size_t end = n;
    for (; end > start; --end) {
      candidate.clear();
      if (start > 0) candidate = kContinuation;
      candidate.append(word.substr(bounds[start], bounds[end] - bounds[start]));
      if ((match = vocab.find(candidate))) break;
    }
    if (!match) return {kUnkId};
    out.push_back(*match);
    start = end;
  }
  return out;
}

std::vector<std::string> wordpiece(std::string_view word, const SubwordVocab& vocab,
                                   std::size_t max_word_chars) {
  std::vector<std::string> out;
  for (auto id : wordpiece_ids(word, vocab, max_word_chars)) out.push_back(vocab.piece(id));
  return out;
}

EmbeddingTable::EmbeddingTable(std::size_t rows, std::size_t dim, bool trainable)
    : rows_(rows), dim_(dim), trainable_(trainable), data_(rows * dim, 0.0) {}

EmbeddingTable EmbeddingTable::random(std::size_t rows, std::size_t dim, std::uint64_t seed,
                                      double scale) {
  EmbeddingTable t(rows, dim, true);
  Rng rng(seed);
  for (auto& v : t.data_) v = rng.uniform(-scale, scale);
  if (rows > kPadId) std::fill_n(t.data_.begin(), dim, 0.0);
  return t;
}

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

EmbeddingTable load_binary(const std::string& bytes) {
  if (bytes.size() < 12) throw DataError("truncated embedding header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t rows = get_u32(p + 4);
  const std::size_t dim = get_u32(p + 8);
  if (bytes.size() != 12 + 4 * rows * dim) {
    throw DataError("embedding file size does not match header " + std::to_string(rows) +
                    "x" + std::to_string(dim));
  }
  EmbeddingTable t(rows, dim);
  auto data = t.data();
  for (std::size_t i = 0; i < rows * dim; ++i) {
    const float f = std::bit_cast<float>(get_u32(p + 12 + 4 * i));
    if (!std::isfinite(f)) throw DataError("non-finite embedding value at index " + std::to_string(i));
    data[i] = static_cast<double>(f);
  }
  return t;
}

EmbeddingTable load_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw DataError("empty embedding file");
  std::size_t rows = 0, dim = 0;
  {
    std::istringstream header(line);
    if (!(header >> rows >> dim)) throw DataError("header must be \"V d\"", 1);
  }
  EmbeddingTable t(rows, dim);
  auto data = t.data();
  std::size_t r = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = detail::strip_cr(line);
    if (view.find_first_not_of(" \t") == std::string_view::npos) continue;
    if (r >= rows) throw DataError("more rows than the declared " + std::to_string(rows), line_no);
    std::size_t c = 0;
    const char* p = view.data();
    const char* end = p + view.size();
    while (p < end) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p == end) break;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) throw DataError("malformed number", line_no);
      if (!std::isfinite(v)) throw DataError("non-finite embedding value", line_no);
      if (c >= dim) throw DataError("row has more than " + std::to_string(dim) + " values", line_no);
      data[r * dim + c++] = v;
      p = next;
    }
    if (c != dim) throw DataError("row has " + std::to_string(c) + " values, expected " +
                                  std::to_string(dim), line_no);
    ++r;
  }
  if (r != rows) {
    throw DataError("header declares " + std::to_string(rows) + " rows but file has " +
                    std::to_string(r));
  }
  return t;
}

}  // namespace

void save_table(const EmbeddingTable& table, const std::filesystem::path& path,
                TableFormat format) {
  for (double v : table.data()) {
    if (!std::isfinite(v)) throw Error("cannot save a non-finite embedding value");
  }
  std::string out;
  if (format == TableFormat::Binary) {
    out.append(kMagic, 4);
    put_u32(out, static_cast<std::uint32_t>(table.rows()));
    put_u32(out, static_cast<std::uint32_t>(table.dim()));
    for (double v : table.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  } else {
    out = std::to_string(table.rows()) + " " + std::to_string(table.dim()) + "\n";
    char buf[32];
    for (std::size_t r = 0; r < table.rows(); ++r) {
      const auto row = table.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, row[c]);
        if (c) out.push_back(' ');
        out.append(buf, end);
      }
      out.push_back('\n');
    }
  }
  detail::write_file_atomic(path, out);
}

EmbeddingTable load_table(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0) return load_binary(bytes);
  return load_text(bytes);
}

std::vector<std::string> embedding_units(const codeswitch::TokenizedText& tt, bool use_gloss) {
  std::vector<std::string> units;
  for (const auto& tok : tt.tokens) {
    if (use_gloss && tok.translation) {
      std::istringstream words(codeswitch::normalize_text(*tok.translation));
      std::string w;
      bool any = false;
      while (words >> w) {
        units.push_back(w);
        any = true;
      }
      if (any) continue;
    }
    units.push_back(tok.surface);
  }
  return units;
}

std::vector<std::size_t> piece_ids(const codeswitch::TokenizedText& tt,
                                   const SubwordVocab& vocab, bool use_gloss) {
  std::vector<std::size_t> ids;
  for (const auto& unit : embedding_units(tt, use_gloss)) {
    const auto pieces = wordpiece_ids(unit, vocab);
    ids.insert(ids.end(), pieces.begin(), pieces.end());
  }
  return ids;
}

EmbeddedSequence encode_ids(std::span<const std::size_t> ids, const EmbeddingTable& table,
                            std::size_t max_len) {
  EmbeddedSequence seq;
  seq.max_len = max_len;
  seq.dim = table.dim();
  seq.length = std::min(ids.size(), max_len);
  seq.values.assign(max_len * seq.dim, 0.0);
  seq.mask.assign(max_len, 0);
  seq.ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(seq.length));
  for (std::size_t t = 0; t < seq.length; ++t) {
    if (ids[t] >= table.rows()) throw ShapeError("piece id out of embedding range");
    const auto row = table.row(ids[t]);
    std::copy(row.begin(), row.end(), seq.values.begin() + static_cast<std::ptrdiff_t>(t * seq.dim));
    seq.mask[t] = 1;
  }
  return seq;
}

EmbeddedSequence encode_sequence(const codeswitch::TokenizedText& tt, const SubwordVocab& vocab,
                                 const EmbeddingTable& table, std::size_t max_len,
                                 bool use_gloss) {
  if (table.rows() != vocab.size()) {
    throw ShapeError("embedding table has " + std::to_string(table.rows()) +
                     " rows but vocab has " + std::to_string(vocab.size()) + " pieces");
  }
  const auto ids = piece_ids(tt, vocab, use_gloss);
  return encode_ids(ids, table, max_len);
}

}  // namespace cmsa::textrep
