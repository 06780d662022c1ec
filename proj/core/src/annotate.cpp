#include "cmsa/annotate.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <mutex>
#include <stdexcept>

#include "cmsa/error.hpp"
#include "io_util.hpp"
#include "json.hpp"

namespace cmsa::annotate {

std::string_view to_string(Annotator a) noexcept {
  switch (a) {
    case Annotator::A1: return "A1";
    case Annotator::A2: return "A2";
    case Annotator::A3: return "A3";
  }
  return "?";
}

Annotator parse_annotator(std::string_view s) {
  if (s == "A1") return Annotator::A1;
  if (s == "A2") return Annotator::A2;
  if (s == "A3") return Annotator::A3;
  throw std::invalid_argument("unknown annotator \"" + std::string(s) + "\"");
}

std::string_view to_string(Status s) noexcept {
  switch (s) {
    case Status::Unlabeled: return "unlabeled";
    case Status::PartiallyLabeled: return "partially_labeled";
    case Status::Agreed: return "agreed";
    case Status::AwaitingThird: return "awaiting_third";
    case Status::Finalized: return "finalized";
    case Status::Unresolved: return "unresolved";
  }
  return "?";
}

std::string format_timestamp(Clock::time_point t) {
  using namespace std::chrono;
  const auto ms = floor<milliseconds>(t);
  const auto day = floor<days>(ms);
  const year_month_day ymd{day};
  const hh_mm_ss hms{ms - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()),
                static_cast<int>(hms.subseconds().count()));
  return buf;
}

Clock::time_point parse_timestamp(std::string_view s) {
  using namespace std::chrono;
  auto bad = [&] { return DataError("invalid timestamp \"" + std::string(s) + "\""); };
  auto num = [&](std::size_t pos, std::size_t len) {
    if (pos + len > s.size()) throw bad();
    int v = 0;
    const auto* first = s.data() + pos;
    auto [p, ec] = std::from_chars(first, first + len, v);
    if (ec != std::errc() || p != first + len) throw bad();
    return v;
  };
  auto expect = [&](std::size_t pos, char c) {
    if (pos >= s.size() || s[pos] != c) throw bad();
  };
  const int y = num(0, 4);
  expect(4, '-');
  const int mo = num(5, 2);
  expect(7, '-');
  const int d = num(8, 2);
  expect(10, 'T');
  const int h = num(11, 2);
  expect(13, ':');
  const int mi = num(14, 2);
  expect(16, ':');
  const int sec = num(17, 2);
  std::size_t pos = 19;
  int millis = 0;
  if (pos < s.size() && s[pos] == '.') {
    millis = num(pos + 1, 3);
    pos += 4;
  }
  expect(pos, 'Z');
  if (pos + 1 != s.size()) throw bad();
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 59) throw bad();
  return time_point_cast<Clock::duration>(sys_days{ymd} + hours{h} + minutes{mi} +
                                          seconds{sec} + milliseconds{millis});
}

std::string to_json(const AnnotationRecord& r) {
  nlohmann::ordered_json j;
  j["tweet_id"] = r.tweet_id;
  j["annotator"] = to_string(r.annotator);
  j["label"] = to_string(r.label);
  j["submitted_at"] = format_timestamp(r.submitted_at);
  j["revision"] = r.revision;
  return j.dump();
}

AnnotationRecord record_from_json(std::string_view line, std::size_t line_no) {
  try {
    const auto j = nlohmann::json::parse(line);
    AnnotationRecord r;
    r.tweet_id = j.at("tweet_id").get<std::string>();
    r.annotator = parse_annotator(j.at("annotator").get<std::string>());
    r.label = parse_label_or_throw(j.at("label").get<std::string>());
    r.submitted_at = parse_timestamp(j.at("submitted_at").get<std::string>());
    r.revision = j.at("revision").get<int>();
    if (r.revision < 0) throw DataError("negative revision");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed event: ") + e.what(), line_no);
  } catch (const DataError& e) {
    if (e.line()) throw;
    throw DataError(e.what(), line_no);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what(), line_no);
  }
}

Status derive_status(const std::array<std::optional<Label>, 3>& l) {
  const auto& [a1, a2, a3] = l;
  if (a3) {
    std::array<Label, 3> all;
    std::size_t n = 0;
    for (const auto& x : l) {
      if (x) all[n++] = *x;
    }
    return majority_vote(std::span<const Label>(all.data(), n)) ? Status::Finalized
                                                                 : Status::Unresolved;
  }
  if (a1 && a2) return *a1 == *a2 ? Status::Agreed : Status::AwaitingThird;
  if (a1 || a2) return Status::PartiallyLabeled;
  return Status::Unlabeled;
}

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string_view strip_zeros(std::string_view s) {
  while (s.size() > 1 && s.front() == '0') s.remove_prefix(1);
  return s;
}

std::array<std::optional<Label>, 3> labels_of(
    const std::array<std::optional<AnnotationRecord>, 3>& recs) {
  std::array<std::optional<Label>, 3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    if (recs[i]) out[i] = recs[i]->label;
  }
  return out;
}

std::size_t slot(Annotator a) { return static_cast<std::size_t>(a); }

// Workflow checks shared by live writes and log replay.
void check_submit(const std::array<std::optional<AnnotationRecord>, 3>& recs,
                  const std::string& id, Annotator a, Label label) {
  if (const auto& prev = recs[slot(a)]) {
    if (prev->label == label) return;
    throw ConflictError("tweet " + id + " already has label \"" +
                        std::string(to_string(prev->label)) + "\" from " +
                        std::string(to_string(a)) + "; use revise to change it");
  }
  if (a == Annotator::A3 && derive_status(labels_of(recs)) != Status::AwaitingThird) {
    throw PolicyError("tweet " + id + " is not awaiting a third annotator");
  }
}

void check_revise(const std::array<std::optional<AnnotationRecord>, 3>& recs,
                  const std::string& id, Annotator a, Label label) {
  if (!recs[slot(a)]) {
    throw NotFoundError("tweet " + id + " has no label from " + std::string(to_string(a)) +
                        " to revise");
  }
  if (a != Annotator::A3 && recs[slot(Annotator::A3)]) {
    auto next = labels_of(recs);
    next[slot(a)] = label;
    if (*next[0] == *next[1]) {
      throw PolicyError("revising tweet " + id +
                        " would leave a third label on an agreed tweet");
    }
  }
}

}  // namespace

bool AnnotationStore::IdLess::operator()(std::string_view a, std::string_view b) const noexcept {
  const bool na = all_digits(a), nb = all_digits(b);
  if (na != nb) return na;
  if (na) {
    const auto sa = strip_zeros(a), sb = strip_zeros(b);
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    if (sa != sb) return sa < sb;
  }
  return a < b;
}

AnnotationStore::AnnotationStore(corpus::Dataset tweets,
                                 std::optional<std::filesystem::path> event_log, Now now)
    : log_path_(std::move(event_log)), now_(std::move(now)) {
  for (const auto& t : tweets) {
    Entry e;
    e.tweet = t;
    e.tweet.label_a1 = e.tweet.label_a2 = e.tweet.label_a3 = e.tweet.label_final = std::nullopt;
    entries_.emplace(t.id, std::move(e));
    order_.push_back(t.id);
  }
  if (!log_path_) return;
  if (std::filesystem::exists(*log_path_)) {
    auto in = detail::open_input(*log_path_);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto view = detail::strip_cr(line);
      if (view.find_first_not_of(" \t") == std::string_view::npos) continue;
      apply(record_from_json(view, line_no), line_no);
    }
  }
  log_.open(*log_path_, std::ios::out | std::ios::app | std::ios::binary);
  if (!log_) throw Error("cannot open event log " + log_path_->string());
}

void AnnotationStore::apply(const AnnotationRecord& r, std::size_t line_no) {
  auto it = entries_.find(r.tweet_id);
  if (it == entries_.end()) throw DataError("event for unknown tweet " + r.tweet_id, line_no);
  auto& recs = it->second.records;
  try {
    if (r.revision == 0) {
      if (recs[slot(r.annotator)]) {
        throw DataError("second submission from " + std::string(to_string(r.annotator)) +
                        " for tweet " + r.tweet_id + " without a revision");
      }
      check_submit(recs, r.tweet_id, r.annotator, r.label);
    } else {
      check_revise(recs, r.tweet_id, r.annotator, r.label);
      if (r.revision <= recs[slot(r.annotator)]->revision) {
        throw DataError("revision numbers must increase for tweet " + r.tweet_id);
      }
    }
  } catch (const Error& e) {
    throw DataError(e.what(), line_no);
  }
  recs[slot(r.annotator)] = r;
}

void AnnotationStore::append_log(const AnnotationRecord& r) {
  if (!log_path_) return;
  log_ << to_json(r) << '\n';
  log_.flush();
  if (!log_) throw Error("failed to append to event log " + log_path_->string());
}

AnnotationStore::Entry& AnnotationStore::entry_or_throw(std::string_view id) {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw NotFoundError("unknown tweet " + std::string(id));
  return it->second;
}

const AnnotationStore::Entry& AnnotationStore::entry_or_throw(std::string_view id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw NotFoundError("unknown tweet " + std::string(id));
  return it->second;
}

SubmitResult AnnotationStore::submit_label(std::string_view tweet_id, Annotator annotator,
                                           Label label) {
  std::unique_lock lock(mu_);
  auto& e = entry_or_throw(tweet_id);
  check_submit(e.records, e.tweet.id, annotator, label);
  if (const auto& prev = e.records[slot(annotator)]) return {*prev, false};
  AnnotationRecord r{e.tweet.id, annotator, label, now_(), 0};
  append_log(r);
  e.records[slot(annotator)] = r;
  return {r, true};
}

AnnotationRecord AnnotationStore::revise_label(std::string_view tweet_id, Annotator annotator,
                                               Label label) {
  std::unique_lock lock(mu_);
  auto& e = entry_or_throw(tweet_id);
  check_revise(e.records, e.tweet.id, annotator, label);
  AnnotationRecord r{e.tweet.id, annotator, label, now_(),
                     e.records[slot(annotator)]->revision + 1};
  append_log(r);
  e.records[slot(annotator)] = r;
  return r;
}

std::optional<corpus::Tweet> AnnotationStore::next_task(Annotator annotator) const {
  std::shared_lock lock(mu_);
  for (const auto& [id, e] : entries_) {
    const bool wanted = annotator == Annotator::A3
                            ? derive_status(labels_of(e.records)) == Status::AwaitingThird
                            : !e.records[slot(annotator)];
    if (!wanted) continue;
    corpus::Tweet t = e.tweet;
    const auto l = labels_of(e.records);
    t.label_a1 = l[0];
    t.label_a2 = l[1];
    t.label_a3 = l[2];
    return t;
  }
  return std::nullopt;
}

Status AnnotationStore::status(std::string_view tweet_id) const {
  std::shared_lock lock(mu_);
  return derive_status(labels_of(entry_or_throw(tweet_id).records));
}

std::array<std::optional<Label>, 3> AnnotationStore::labels(std::string_view tweet_id) const {
  std::shared_lock lock(mu_);
  return labels_of(entry_or_throw(tweet_id).records);
}

corpus::Dataset AnnotationStore::export_final() const {
  std::shared_lock lock(mu_);
  corpus::Dataset out;
  for (const auto& id : order_) {
    const auto& e = entries_.find(id)->second;
    corpus::Tweet t = e.tweet;
    const auto l = labels_of(e.records);
    t.label_a1 = l[0];
    t.label_a2 = l[1];
    t.label_a3 = l[2];
    const auto s = derive_status(l);
    if (s == Status::Agreed || s == Status::Finalized) {
      std::vector<Label> present;
      for (const auto& x : l) {
        if (x) present.push_back(*x);
      }
      t.label_final = majority_vote(present);
    }
    out.add(std::move(t));
  }
  return out;
}

StoreStats AnnotationStore::stats() const {
  StoreStats s;
  const auto ds = export_final();
  if (!ds.empty()) s.dataset = corpus::compute_stats(ds);
  for (auto st : {Status::Unlabeled, Status::PartiallyLabeled, Status::Agreed,
                  Status::AwaitingThird, Status::Finalized, Status::Unresolved}) {
    s.per_status[st] = 0;
  }
  for (const auto& t : ds) ++s.per_status[derive_status({t.label_a1, t.label_a2, t.label_a3})];
  return s;
}

std::string stats_to_json(const StoreStats& s) {
  nlohmann::ordered_json j;
  j["n"] = s.dataset.n;
  j["n_final"] = s.dataset.n_final;
  nlohmann::ordered_json frac = nlohmann::ordered_json::object();
  for (Label l : kAllLabels) {
    auto it = s.dataset.per_label_fraction.find(l);
    frac[std::string(to_string(l))] = it == s.dataset.per_label_fraction.end() ? 0.0 : it->second;
  }
  j["per_label_fraction"] = frac;
  j["unanimity_rate"] = s.dataset.unanimity_rate ? nlohmann::ordered_json(*s.dataset.unanimity_rate)
                                                 : nlohmann::ordered_json(nullptr);
  j["n_double_annotated"] = s.dataset.n_double_annotated;
  j["term_counts"] = s.dataset.term_counts;
  nlohmann::ordered_json st = nlohmann::ordered_json::object();
  for (const auto& [status, n] : s.per_status) st[std::string(to_string(status))] = n;
  j["per_status"] = st;
  auto awaiting = s.per_status.find(Status::AwaitingThird);
  j["adjudication_queue"] = awaiting == s.per_status.end() ? 0 : awaiting->second;
  return j.dump();
}

}  // namespace cmsa::annotate
