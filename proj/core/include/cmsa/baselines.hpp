#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cmsa/label.hpp"

namespace cmsa::baselines {

/// Sparse row: (column, value) pairs sorted by column, no zeros stored.
struct SparseRow {
  std::vector<std::pair<std::size_t, double>> entries;

  double at(std::size_t col) const;
  bool operator==(const SparseRow&) const = default;
};

struct FeatureMatrix {
  std::size_t cols = 0;
  std::vector<SparseRow> rows;

  std::size_t size() const noexcept { return rows.size(); }
  /// Dense copy, for small matrices and tests.
  std::vector<std::vector<double>> dense() const;
};

enum class BowMode { Counts, TfIdf };

class BowVectorizer {
 public:
  BowVectorizer() = default;

  /// Columns in first-occurrence order. idf = ln((1+N)/(1+df)) + 1.
  static std::pair<BowVectorizer, FeatureMatrix> fit_transform(
      const std::vector<std::vector<std::string>>& docs, BowMode mode);

  /// Rebuilds a fitted vectorizer; idf must be empty for Counts.
  static BowVectorizer from_parts(BowMode mode, std::vector<std::string> columns,
                                  std::vector<double> idf);

  /// Unseen tokens are dropped.
  SparseRow transform(const std::vector<std::string>& doc) const;
  FeatureMatrix transform_all(const std::vector<std::vector<std::string>>& docs) const;

  std::size_t size() const noexcept { return columns_.size(); }
  BowMode mode() const noexcept { return mode_; }
  const std::vector<std::string>& columns() const noexcept { return columns_; }
  const std::vector<double>& idf() const noexcept { return idf_; }

 private:
  BowMode mode_ = BowMode::Counts;
  std::vector<std::string> columns_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> idf_;
};

struct NbConfig {
  double alpha = 1.0;
  /// When false, a class missing from the training labels gets zero prior.
  bool require_all_classes = true;
};

/// Multinomial naive Bayes with additive smoothing, stored in log space.
struct NBModel {
  double alpha = 1.0;
  std::size_t features = 0;
  std::array<double, kNumClasses> log_prior{};
  std::array<std::vector<double>, kNumClasses> log_likelihood;
};

/// Throws std::invalid_argument for alpha <= 0, negative counts, length
/// mismatch, or (by default) a class absent from y.
NBModel nb_fit(const FeatureMatrix& X, std::span<const Label> y, const NbConfig& cfg = {});

struct Prediction {
  Label label = Label::Neutral;
  ClassProbs probs{};
};

Prediction nb_predict(const NBModel& model, const SparseRow& x);

struct TreeNode {
  // Internal node: x[feature] <= threshold goes left.
  std::size_t feature = 0;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  // Leaf: normalized class histogram (zero on internal nodes).
  ClassProbs histogram{};

  bool is_leaf() const noexcept { return left < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  const TreeNode& leaf_for(const SparseRow& x) const;
  bool operator==(const DecisionTree&) const = default;
};

struct RfConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 0;  // 0 = unlimited
  std::size_t min_leaf = 1;
  std::size_t features_per_split = 0;  // 0 = ceil(sqrt(F))
  bool bootstrap = true;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

struct RFModel {
  RfConfig cfg;
  std::size_t features = 0;
  std::vector<DecisionTree> trees;
  bool operator==(const RFModel& o) const { return features == o.features && trees == o.trees; }
};

/// Gini-split CART tree on the given sample indices (repeats allowed).
/// Ties in gain go to the lowest feature index, then the lowest threshold.
DecisionTree fit_tree(const FeatureMatrix& X, std::span<const Label> y,
                      std::span<const std::size_t> samples, const RfConfig& cfg,
                      std::uint64_t seed);

/// Throws std::invalid_argument when fewer than two samples are given.
RFModel rf_fit(const FeatureMatrix& X, std::span<const Label> y, const RfConfig& cfg = {});
Prediction rf_predict(const RFModel& model, const SparseRow& x);

void save_nb(const NBModel& m, const std::filesystem::path& path);
NBModel load_nb(const std::filesystem::path& path);
void save_rf(const RFModel& m, const std::filesystem::path& path);
RFModel load_rf(const std::filesystem::path& path);

}  // namespace cmsa::baselines
