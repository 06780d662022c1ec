#include "cmsa/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "cmsa/codeswitch.hpp"
#include "cmsa/error.hpp"
#include "cmsa/vote.hpp"
#include "io_util.hpp"
#include "json.hpp"
#include "utf8_util.hpp"

#include <unicode/uchar.h>

namespace cmsa::corpus {

using nlohmann::json;

void validate_labels(const Tweet& t) {
  if (t.label_a3) {
    if (!t.label_a1 || !t.label_a2) {
      throw DataError("tweet " + t.id + ": label_a3 without both label_a1 and label_a2");
    }
    if (!annotate::needs_adjudication(*t.label_a1, *t.label_a2)) {
      throw DataError("tweet " + t.id + ": label_a3 present but label_a1 and label_a2 agree");
    }
  }
  if (!t.label_final) return;
  std::vector<Label> present;
  for (const auto& l : {t.label_a1, t.label_a2, t.label_a3}) {
    if (l) present.push_back(*l);
  }
  // A final label without any annotator labels is accepted as given.
  if (present.empty()) return;
  const auto majority = annotate::majority_vote(present);
  if (!majority || *majority != *t.label_final) {
    throw DataError("tweet " + t.id + ": label_final \"" +
                    std::string(to_string(*t.label_final)) +
                    "\" is not the majority of the annotator labels");
  }
}

void Dataset::add(Tweet t) {
  if (t.id.empty()) throw DataError("empty tweet id");
  if (index_.contains(t.id)) throw DataError("duplicate tweet id \"" + t.id + "\"");
  validate_labels(t);
  index_.emplace(t.id, records_.size());
  records_.push_back(std::move(t));
}

const Tweet* Dataset::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &records_[it->second];
}

std::vector<const Tweet*> Dataset::labeled() const {
  std::vector<const Tweet*> out;
  for (const auto& t : records_) {
    if (t.label_final) out.push_back(&t);
  }
  return out;
}

std::string redact_mentions(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '@') {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && detail::is_ascii_word(text[j])) ++j;
    const std::size_t run = j - i - 1;
    const UChar32 before = detail::previous_code_point(text, i);
    const bool preceded_by_word = before >= 0 && (before == '_' || u_isalnum(before));
    if (run >= 1 && run <= 15 && !preceded_by_word) {
      out.append(kMentionToken);
      i = j;
    } else {
      out.push_back(text[i++]);
    }
  }
  return out;
}

namespace {

std::optional<Label> label_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw DataError(std::string(key) + " must be a string or null");
  const auto s = it->get<std::string>();
  if (s.empty()) return std::nullopt;
  return parse_label_or_throw(s);
}

json label_json(const std::optional<Label>& l) {
  return l ? json(std::string(to_string(*l))) : json(nullptr);
}

std::optional<Label> label_cell(std::string_view cell) {
  if (cell.empty()) return std::nullopt;
  return parse_label_or_throw(cell);
}

// RFC 4180 reader: quoted fields may hold separators, quotes ("") and
// newlines. Returns false at end of input.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields,
                     std::size_t& line) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      ++line;
      if (!field.empty() && field.back() == '\r') field.pop_back();
      fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(c);
    }
  }
  if (in_quotes) throw DataError("unterminated quoted field", line);
  if (!any) return false;
  if (!field.empty() && field.back() == '\r') field.pop_back();
  fields.push_back(std::move(field));
  return true;
}

std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

constexpr std::array<std::string_view, 7> kCsvColumns = {
    "id", "text", "terms", "label_a1", "label_a2", "label_a3", "label_final"};

Dataset ingest_csv(std::istream& in) {
  Dataset ds;
  std::vector<std::string> fields;
  std::size_t line = 1;
  if (!read_csv_record(in, fields, line)) return ds;
  if (!fields.empty() && fields[0].starts_with("\xEF\xBB\xBF")) fields[0].erase(0, 3);
  if (fields.size() != kCsvColumns.size() ||
      !std::equal(fields.begin(), fields.end(), kCsvColumns.begin())) {
    throw DataError("CSV header must be id,text,terms,label_a1,label_a2,label_a3,label_final", 1);
  }
  for (;;) {
    const std::size_t record_line = line;
    if (!read_csv_record(in, fields, line)) break;
    if (fields.size() == 1 && fields[0].empty()) continue;
    try {
      if (fields.size() != kCsvColumns.size()) {
        throw DataError("expected 7 columns, got " + std::to_string(fields.size()));
      }
      Tweet t;
      t.id = fields[0];
      t.text = redact_mentions(fields[1]);
      if (!fields[2].empty()) {
        for (auto term : detail::split(fields[2], ';')) {
          if (!term.empty()) t.terms.emplace_back(term);
        }
      }
      t.label_a1 = label_cell(fields[3]);
      t.label_a2 = label_cell(fields[4]);
      t.label_a3 = label_cell(fields[5]);
      t.label_final = label_cell(fields[6]);
      ds.add(std::move(t));
    } catch (const DataError& e) {
      if (e.line()) throw;
      throw DataError(e.what(), record_line);
    }
  }
  return ds;
}

Dataset ingest_ndjson(std::istream& in) {
  Dataset ds;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto text = detail::strip_cr(raw);
    if (text.find_first_not_of(" \t") == std::string_view::npos) continue;
    try {
      ds.add(parse_ndjson_line(text, line));
    } catch (const DataError& e) {
      if (e.line()) throw;
      throw DataError(e.what(), line);
    }
  }
  return ds;
}

}  // namespace

Tweet parse_ndjson_line(std::string_view line, std::size_t line_no) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed JSON: ") + e.what(), line_no);
  }
  try {
    if (!obj.is_object()) throw DataError("record is not a JSON object");
    Tweet t;
    auto id = obj.find("id");
    if (id == obj.end()) throw DataError("missing field \"id\"");
    if (id->is_number_integer()) {
      t.id = std::to_string(id->get<long long>());
    } else if (id->is_string()) {
      t.id = id->get<std::string>();
    } else {
      throw DataError("\"id\" must be a string");
    }
    auto text = obj.find("text");
    if (text == obj.end() || !text->is_string()) {
      throw DataError("missing or non-string field \"text\"");
    }
    t.text = redact_mentions(text->get<std::string>());
    if (auto terms = obj.find("terms"); terms != obj.end() && !terms->is_null()) {
      if (!terms->is_array()) throw DataError("\"terms\" must be an array");
      for (const auto& term : *terms) {
        if (!term.is_string()) throw DataError("\"terms\" entries must be strings");
        t.terms.push_back(term.get<std::string>());
      }
    }
    t.label_a1 = label_field(obj, "label_a1");
    t.label_a2 = label_field(obj, "label_a2");
    t.label_a3 = label_field(obj, "label_a3");
    t.label_final = label_field(obj, "label_final");
    return t;
  } catch (const DataError& e) {
    if (e.line()) throw;
    throw DataError(e.what(), line_no);
  }
}

std::string to_ndjson_line(const Tweet& t) {
  nlohmann::ordered_json obj;
  obj["id"] = t.id;
  obj["text"] = t.text;
  obj["terms"] = t.terms;
  obj["label_a1"] = label_json(t.label_a1);
  obj["label_a2"] = label_json(t.label_a2);
  obj["label_a3"] = label_json(t.label_a3);
  obj["label_final"] = label_json(t.label_final);
  return obj.dump(-1, ' ', false, json::error_handler_t::replace);
}

Dataset ingest_stream(std::istream& in, Format format) {
  return format == Format::Csv ? ingest_csv(in) : ingest_ndjson(in);
}

Dataset ingest(const std::filesystem::path& path, Format format) {
  auto in = detail::open_input(path, std::ios::in | std::ios::binary);
  return ingest_stream(in, format);
}

void write_ndjson(std::ostream& out, const Dataset& ds) {
  for (const auto& t : ds) out << to_ndjson_line(t) << '\n';
}

void write_csv(std::ostream& out, const Dataset& ds) {
  out << "id,text,terms,label_a1,label_a2,label_a3,label_final\n";
  auto cell = [](const std::optional<Label>& l) {
    return l ? std::string(to_string(*l)) : std::string();
  };
  for (const auto& t : ds) {
    std::string terms;
    for (std::size_t i = 0; i < t.terms.size(); ++i) {
      if (i) terms += ';';
      terms += t.terms[i];
    }
    out << csv_escape(t.id) << ',' << csv_escape(t.text) << ',' << csv_escape(terms)
        << ',' << cell(t.label_a1) << ',' << cell(t.label_a2) << ','
        << cell(t.label_a3) << ',' << cell(t.label_final) << '\n';
  }
}

void export_dataset(const std::filesystem::path& path, const Dataset& ds, Format format) {
  std::ostringstream ss;
  if (format == Format::Csv) {
    write_csv(ss, ds);
  } else {
    write_ndjson(ss, ds);
  }
  detail::write_file_atomic(path, ss.str());
}

DatasetStats compute_stats(const Dataset& ds) {
  if (ds.empty()) throw std::invalid_argument("compute_stats: empty dataset");
  DatasetStats s;
  s.n = ds.size();
  std::array<std::size_t, kNumClasses> counts{};
  std::size_t agree = 0;
  for (const auto& t : ds) {
    if (t.label_final) {
      ++counts[index_of(*t.label_final)];
      ++s.n_final;
    }
    if (t.label_a1 && t.label_a2) {
      ++s.n_double_annotated;
      if (*t.label_a1 == *t.label_a2) ++agree;
    }
    for (const auto& term : t.terms) ++s.term_counts[term];
  }
  if (s.n_final > 0) {
    for (Label l : kAllLabels) {
      s.per_label_fraction[l] =
          static_cast<double>(counts[index_of(l)]) / static_cast<double>(s.n_final);
    }
  }
  if (s.n_double_annotated > 0) {
    s.unanimity_rate =
        static_cast<double>(agree) / static_cast<double>(s.n_double_annotated);
  }
  return s;
}

std::vector<std::string> match_search_terms(std::string_view text,
                                            const std::vector<std::string>& terms) {
  std::vector<std::string> found;
  if (text.empty()) return found;
  const auto tt = codeswitch::tokenize(codeswitch::normalize_text(text));
  std::unordered_set<std::string_view> words;
  for (const auto& tok : tt.tokens) {
    if (tok.is_word()) {
      words.insert(tok.surface);
    } else if (tok.cls == codeswitch::TokenClass::Hashtag) {
      words.insert(std::string_view(tok.surface).substr(1));
    }
  }
  for (const auto& term : terms) {
    if (words.contains(term) &&
        std::find(found.begin(), found.end(), term) == found.end()) {
      found.push_back(term);
    }
  }
  return found;
}

}  // namespace cmsa::corpus
