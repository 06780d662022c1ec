#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "cmsa/corpus.hpp"
#include "cmsa/label.hpp"
#include "cmsa/vote.hpp"

namespace cmsa::annotate {

enum class Annotator { A1 = 0, A2 = 1, A3 = 2 };

std::string_view to_string(Annotator a) noexcept;
/// Throws std::invalid_argument for anything but "A1", "A2", "A3".
Annotator parse_annotator(std::string_view s);

enum class Status {
  Unlabeled,
  PartiallyLabeled,
  Agreed,
  AwaitingThird,
  Finalized,
  Unresolved,
};

std::string_view to_string(Status s) noexcept;

using Clock = std::chrono::system_clock;

struct AnnotationRecord {
  std::string tweet_id;
  Annotator annotator = Annotator::A1;
  Label label = Label::Neutral;
  Clock::time_point submitted_at;
  int revision = 0;

  bool operator==(const AnnotationRecord&) const = default;
};

/// ISO-8601 UTC with millisecond precision, e.g. 2020-01-02T03:04:05.678Z.
std::string format_timestamp(Clock::time_point t);
Clock::time_point parse_timestamp(std::string_view s);

/// Event-log line: {tweet_id, annotator, label, submitted_at, revision}.
std::string to_json(const AnnotationRecord& r);
AnnotationRecord record_from_json(std::string_view line, std::size_t line_no);

/// Status implied by the current labels of one tweet.
Status derive_status(const std::array<std::optional<Label>, 3>& labels);

struct SubmitResult {
  AnnotationRecord record;
  /// False when an identical submission was already recorded.
  bool created = true;
};

struct StoreStats {
  corpus::DatasetStats dataset;
  std::map<Status, std::size_t> per_status;
};

/// Annotation state for a fixed set of tweets. Writes are serialized and
/// appended to an optional NDJSON event log; the state is rebuilt by
/// replaying that log on construction. Reads may run concurrently.
class AnnotationStore {
 public:
  using Now = std::function<Clock::time_point()>;

  /// Existing labels on the tweets are ignored; the log is the source of
  /// truth. Throws DataError when the log references unknown tweets or
  /// breaks the workflow rules.
  explicit AnnotationStore(corpus::Dataset tweets,
                           std::optional<std::filesystem::path> event_log = std::nullopt,
                           Now now = [] { return Clock::now(); });

  /// Records a label. Throws NotFoundError (unknown tweet), ConflictError
  /// (a different label already recorded), PolicyError (A3 outside the
  /// disagreement queue).
  SubmitResult submit_label(std::string_view tweet_id, Annotator annotator, Label label);

  /// Replaces an existing label and bumps its revision. Throws
  /// NotFoundError when there is nothing to revise and PolicyError when
  /// the change would leave a third label on an agreed tweet.
  AnnotationRecord revise_label(std::string_view tweet_id, Annotator annotator,
                                Label label);

  /// A1/A2: lowest-id tweet they have not labeled. A3: lowest-id tweet
  /// awaiting a third label. nullopt when the queue is empty.
  std::optional<corpus::Tweet> next_task(Annotator annotator) const;

  Status status(std::string_view tweet_id) const;
  std::array<std::optional<Label>, 3> labels(std::string_view tweet_id) const;

  /// Every tweet with its labels; label_final set for Agreed/Finalized.
  corpus::Dataset export_final() const;
  StoreStats stats() const;
  std::size_t size() const noexcept { return order_.size(); }

 private:
  struct Entry {
    corpus::Tweet tweet;
    std::array<std::optional<AnnotationRecord>, 3> records;
  };

  void apply(const AnnotationRecord& r, std::size_t line_no);
  void append_log(const AnnotationRecord& r);
  Entry& entry_or_throw(std::string_view id);
  const Entry& entry_or_throw(std::string_view id) const;

  // Numeric ids compare by value, others lexicographically.
  struct IdLess {
    using is_transparent = void;
    bool operator()(std::string_view a, std::string_view b) const noexcept;
  };

  mutable std::shared_mutex mu_;
  std::map<std::string, Entry, IdLess> entries_;
  std::vector<std::string> order_;  // dataset order for export
  std::optional<std::filesystem::path> log_path_;
  std::ofstream log_;
  Now now_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  /// Include the first two labels when serving A3 tasks.
  bool reveal_prior_labels = false;
};

/// HTTP/JSON front end over an AnnotationStore.
///   GET  /api/tasks/next?annotator=A1|A2|A3  -> 200 {tweet_id,text,terms} | 204
///   POST /api/labels         {tweet_id,annotator,label} -> 201 | 200 | 409
///   POST /api/labels/revise  {tweet_id,annotator,label} -> 200
///   GET  /api/stats                                     -> stats JSON
///   GET  /api/export                                    -> NDJSON
class AnnotationServer {
 public:
  AnnotationServer(std::shared_ptr<AnnotationStore> store, ServerOptions opts = {});
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  /// Binds and serves on a background thread; returns the bound port
  /// (useful with port 0). Throws cmsa::Error when binding fails.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// JSON body of GET /api/stats.
std::string stats_to_json(const StoreStats& s);

}  // namespace cmsa::annotate
