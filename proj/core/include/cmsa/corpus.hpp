#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cmsa/label.hpp"

namespace cmsa::corpus {

struct Tweet {
  std::string id;
  std::string text;
  std::vector<std::string> terms;
  std::optional<Label> label_a1;
  std::optional<Label> label_a2;
  std::optional<Label> label_a3;
  std::optional<Label> label_final;

  bool operator==(const Tweet&) const = default;
};

/// Throws DataError when the annotation fields break the adjudication
/// rules (third label without a disagreement, final label that is not the
/// majority of the present labels).
void validate_labels(const Tweet& t);

/// Ordered collection of tweets with unique ids.
class Dataset {
 public:
  Dataset() = default;

  /// Appends a record. Throws DataError on an empty or duplicate id, or
  /// when the record's labels break the adjudication rules.
  void add(Tweet t);

  const std::vector<Tweet>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const Tweet& operator[](std::size_t i) const { return records_[i]; }
  const Tweet* find(std::string_view id) const;

  auto begin() const noexcept { return records_.begin(); }
  auto end() const noexcept { return records_.end(); }

  /// Records that carry a final label, in dataset order.
  std::vector<const Tweet*> labeled() const;

 private:
  std::vector<Tweet> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Format { Ndjson, Csv };

/// Replaces every user mention ('@' + 1..15 of [A-Za-z0-9_] not preceded
/// or followed by such a character) with "@USERMENTION".
std::string redact_mentions(std::string_view text);

inline constexpr std::string_view kMentionToken = "@USERMENTION";

/// Reads a dataset file. Texts are passed through redact_mentions.
Dataset ingest(const std::filesystem::path& path, Format format);
Dataset ingest_stream(std::istream& in, Format format);

/// One JSON object per line in the canonical corpus schema.
std::string to_ndjson_line(const Tweet& t);
Tweet parse_ndjson_line(std::string_view line, std::size_t line_no);

void write_ndjson(std::ostream& out, const Dataset& ds);
void write_csv(std::ostream& out, const Dataset& ds);
void export_dataset(const std::filesystem::path& path, const Dataset& ds,
                    Format format);

struct DatasetStats {
  std::size_t n = 0;
  std::size_t n_final = 0;
  std::map<Label, double> per_label_fraction;
  /// Absent when no record carries both first-round labels.
  std::optional<double> unanimity_rate;
  std::size_t n_double_annotated = 0;
  std::map<std::string, std::size_t> term_counts;
};

/// Throws std::invalid_argument on an empty dataset.
DatasetStats compute_stats(const Dataset& ds);

/// Terms (already normalized) that occur as whole tokens of the normalized
/// text, in input order, without duplicates.
std::vector<std::string> match_search_terms(
    std::string_view text, const std::vector<std::string>& terms);

}  // namespace cmsa::corpus
