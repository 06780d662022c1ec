#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmsa/label.hpp"

namespace cmsa::eval {

struct FoldAssignment {
  std::size_t k = 0;
  std::vector<std::size_t> fold;  // fold index per record

  std::vector<std::size_t> test_indices(std::size_t f) const;
  std::vector<std::size_t> train_indices(std::size_t f) const;
};

/// Stratified split: per class a seeded shuffle, then round-robin fold
/// assignment continuing across classes. Throws std::invalid_argument for
/// k < 2 or a present class with fewer than k members.
FoldAssignment kfold_split(std::span<const Label> labels, std::size_t k,
                           std::uint64_t seed);

using Confusion = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  /// Set when the class was never predicted; its precision is then 0.
  bool no_predictions = false;
};

/// Metrics of one evaluation; report-level values are support-weighted.
struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Confusion confusion{};  // confusion[gold][pred]
  std::array<ClassMetrics, kNumClasses> per_class{};
  std::size_t n = 0;
};

/// Throws std::invalid_argument on length mismatch or empty input.
Metrics compute_metrics(std::span<const Label> golds, std::span<const Label> preds);
Metrics metrics_from_confusion(const Confusion& confusion);

struct MetricsReport {
  std::string model;
  std::vector<Metrics> folds;
  double accuracy = 0.0;  // across-fold means
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Confusion confusion{};  // summed over folds
};

MetricsReport aggregate(std::string model, std::vector<Metrics> folds);

/// A model trained on one fold's training portion.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual Label predict(std::size_t record) const = 0;
};

/// Records are referred to by index into the caller's dataset.
using PipelineFit = std::function<std::unique_ptr<Predictor>(
    std::span<const std::size_t> train, std::uint64_t fold_seed)>;

struct CvOptions {
  std::size_t k = 10;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

/// Runs one pipeline over stratified folds. Test indices are never passed
/// to `fit`. Fold failures are rethrown as cmsa::Error naming the fold.
MetricsReport cross_validate(std::string model, std::span<const Label> labels,
                             const PipelineFit& fit, const CvOptions& opts);

/// Several named pipelines that share training per fold. `fit` returns one
/// predictor per name, in order.
using MultiPipelineFit = std::function<std::vector<std::unique_ptr<Predictor>>(
    std::span<const std::size_t> train, std::uint64_t fold_seed)>;

std::vector<MetricsReport> cross_validate_many(std::vector<std::string> models,
                                               std::span<const Label> labels,
                                               const MultiPipelineFit& fit,
                                               const CvOptions& opts);

enum class ReportFormat { TextTable, Csv, Json };

std::optional<ReportFormat> parse_report_format(std::string_view s) noexcept;

/// Text mirrors the usual results table (2 decimals); CSV has
/// model,fold,accuracy,precision,recall,f1 rows plus "mean" rows; JSON keeps
/// full precision.
std::string render_report(std::span<const MetricsReport> reports, ReportFormat format);

/// Inverse of the JSON rendering.
std::vector<MetricsReport> parse_report_json(std::string_view json);

}  // namespace cmsa::eval
