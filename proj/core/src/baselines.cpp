#include "cmsa/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "cmsa/error.hpp"
#include "cmsa/rng.hpp"
#include "io_util.hpp"
#include "json.hpp"

namespace cmsa::baselines {

double SparseRow::at(std::size_t col) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), col,
                             [](const auto& e, std::size_t c) { return e.first < c; });
  return it != entries.end() && it->first == col ? it->second : 0.0;
}

std::vector<std::vector<double>> FeatureMatrix::dense() const {
  std::vector<std::vector<double>> out(rows.size(), std::vector<double>(cols, 0.0));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& [c, v] : rows[r].entries) out[r][c] = v;
  }
  return out;
}

std::pair<BowVectorizer, FeatureMatrix> BowVectorizer::fit_transform(
    const std::vector<std::vector<std::string>>& docs, BowMode mode) {
  if (docs.empty()) throw std::invalid_argument("bow_fit_transform: no documents");
  BowVectorizer v;
  v.mode_ = mode;
  std::vector<std::size_t> df;
  for (const auto& doc : docs) {
    std::unordered_set<std::size_t> seen;
    for (const auto& tok : doc) {
      auto [it, inserted] = v.index_.try_emplace(tok, v.columns_.size());
      if (inserted) {
        v.columns_.push_back(tok);
        df.push_back(0);
      }
      if (seen.insert(it->second).second) ++df[it->second];
    }
  }
  if (mode == BowMode::TfIdf) {
    const double n = static_cast<double>(docs.size());
    v.idf_.resize(df.size());
    for (std::size_t c = 0; c < df.size(); ++c) {
      v.idf_[c] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[c]))) + 1.0;
    }
  }
  auto X = v.transform_all(docs);
  return {std::move(v), std::move(X)};
}

BowVectorizer BowVectorizer::from_parts(BowMode mode, std::vector<std::string> columns,
                                        std::vector<double> idf) {
  if (mode == BowMode::TfIdf ? idf.size() != columns.size() : !idf.empty()) {
    throw std::invalid_argument("vectorizer: idf does not match the columns");
  }
  BowVectorizer v;
  v.mode_ = mode;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (!v.index_.emplace(columns[c], c).second) {
      throw std::invalid_argument("vectorizer: duplicate column \"" + columns[c] + "\"");
    }
  }
  v.columns_ = std::move(columns);
  v.idf_ = std::move(idf);
  return v;
}

SparseRow BowVectorizer::transform(const std::vector<std::string>& doc) const {
  std::map<std::size_t, double> counts;
  for (const auto& tok : doc) {
    if (auto it = index_.find(tok); it != index_.end()) counts[it->second] += 1.0;
  }
  SparseRow row;
  row.entries.reserve(counts.size());
  for (const auto& [c, n] : counts) {
    row.entries.emplace_back(c, mode_ == BowMode::TfIdf ? n * idf_[c] : n);
  }
  return row;
}

FeatureMatrix BowVectorizer::transform_all(
    const std::vector<std::vector<std::string>>& docs) const {
  FeatureMatrix X;
  X.cols = columns_.size();
  X.rows.reserve(docs.size());
  for (const auto& d : docs) X.rows.push_back(transform(d));
  return X;
}

NBModel nb_fit(const FeatureMatrix& X, std::span<const Label> y, const NbConfig& cfg) {
  if (!(cfg.alpha > 0.0)) throw std::invalid_argument("nb_fit: alpha must be positive");
  if (X.size() != y.size()) throw std::invalid_argument("nb_fit: X and y differ in length");
  if (X.size() == 0) throw std::invalid_argument("nb_fit: no training documents");
  NBModel m;
  m.alpha = cfg.alpha;
  m.features = X.cols;
  std::array<std::size_t, kNumClasses> docs{};
  std::array<std::vector<double>, kNumClasses> counts;
  std::array<double, kNumClasses> totals{};
  for (auto& c : counts) c.assign(X.cols, 0.0);
  for (std::size_t i = 0; i < X.size(); ++i) {
    const std::size_t c = index_of(y[i]);
    ++docs[c];
    for (const auto& [col, v] : X.rows[i].entries) {
      if (v < 0.0) throw std::invalid_argument("nb_fit: negative count");
      counts[c][col] += v;
      totals[c] += v;
    }
  }
  const double n = static_cast<double>(X.size());
  const double f = static_cast<double>(X.cols);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (docs[c] == 0 && cfg.require_all_classes) {
      throw std::invalid_argument("nb_fit: class \"" + std::string(to_string(label_at(c))) +
                                  "\" has no training documents");
    }
    m.log_prior[c] = docs[c] == 0 ? -std::numeric_limits<double>::infinity()
                                  : std::log(static_cast<double>(docs[c]) / n);
    m.log_likelihood[c].resize(X.cols);
    const double denom = totals[c] + cfg.alpha * f;
    for (std::size_t t = 0; t < X.cols; ++t) {
      m.log_likelihood[c][t] = std::log((counts[c][t] + cfg.alpha) / denom);
    }
  }
  return m;
}

Prediction nb_predict(const NBModel& model, const SparseRow& x) {
  std::array<double, kNumClasses> score{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    score[c] = model.log_prior[c];
    if (std::isinf(score[c])) continue;
    for (const auto& [col, v] : x.entries) {
      if (col < model.features) score[c] += v * model.log_likelihood[c][col];
    }
  }
  const double top = *std::max_element(score.begin(), score.end());
  double z = 0.0;
  for (double s : score) z += std::isinf(s) ? 0.0 : std::exp(s - top);
  Prediction p;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    p.probs[c] = std::isinf(score[c]) ? 0.0 : std::exp(score[c] - top) / z;
  }
  p.label = argmax_label(p.probs);
  return p;
}

const TreeNode& DecisionTree::leaf_for(const SparseRow& x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    i = static_cast<std::size_t>(x.at(nodes[i].feature) <= nodes[i].threshold ? nodes[i].left
                                                                            : nodes[i].right);
  }
  return nodes[i];
}

namespace {

using Counts = std::array<std::size_t, kNumClasses>;

double gini(const Counts& c, std::size_t n) {
  if (n == 0) return 0.0;
  double sum_sq = 0.0;
  for (auto k : c) {
    const double p = static_cast<double>(k) / static_cast<double>(n);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

struct Split {
  bool found = false;
  double gain = 0.0;
  std::size_t feature = 0;
  double threshold = 0.0;
};

bool better(const Split& cand, const Split& best) {
  if (!best.found) return true;
  if (cand.gain != best.gain) return cand.gain > best.gain;
  if (cand.feature != best.feature) return cand.feature < best.feature;
  return cand.threshold < best.threshold;
}

// Best threshold on one feature; returns false when the feature is constant.
bool scan_feature(const FeatureMatrix& X, std::span<const Label> y,
                  const std::vector<std::size_t>& samples, std::size_t feature,
                  const Counts& parent, double parent_gini, std::size_t min_leaf, Split& best) {
  std::vector<std::pair<double, std::size_t>> vals;
  vals.reserve(samples.size());
  for (auto s : samples) vals.emplace_back(X.rows[s].at(feature), index_of(y[s]));
  std::sort(vals.begin(), vals.end());
  if (vals.front().first == vals.back().first) return false;
  const std::size_t n = vals.size();
  Counts left{};
  for (std::size_t i = 0; i + 1 < n; ++i) {
    ++left[vals[i].second];
    if (vals[i].first == vals[i + 1].first) continue;
    const std::size_t nl = i + 1, nr = n - nl;
    if (nl < min_leaf || nr < min_leaf) continue;
    Counts right;
    for (std::size_t c = 0; c < kNumClasses; ++c) right[c] = parent[c] - left[c];
    const double gain = parent_gini - (static_cast<double>(nl) * gini(left, nl) +
                                       static_cast<double>(nr) * gini(right, nr)) /
                                          static_cast<double>(n);
    Split cand{true, gain, feature, 0.5 * (vals[i].first + vals[i + 1].first)};
    if (better(cand, best)) best = cand;
  }
  return true;
}

ClassProbs normalized(const Counts& c, std::size_t n) {
  ClassProbs h{};
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    h[k] = static_cast<double>(c[k]) / static_cast<double>(n);
  }
  return h;
}

}  // namespace

DecisionTree fit_tree(const FeatureMatrix& X, std::span<const Label> y,
                      std::span<const std::size_t> samples, const RfConfig& cfg,
                      std::uint64_t seed) {
  if (samples.empty()) throw std::invalid_argument("fit_tree: no samples");
  const std::size_t mtry =
      cfg.features_per_split > 0
          ? std::min(cfg.features_per_split, X.cols)
          : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(X.cols))));
  const std::size_t min_leaf = std::max<std::size_t>(1, cfg.min_leaf);
  Rng rng(seed);
  DecisionTree tree;

  struct Pending {
    std::size_t node;
    std::size_t depth;
    std::vector<std::size_t> samples;
  };
  std::vector<Pending> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, 0, std::vector<std::size_t>(samples.begin(), samples.end())});

  while (!stack.empty()) {
    Pending cur = std::move(stack.back());
    stack.pop_back();
    Counts counts{};
    for (auto s : cur.samples) ++counts[index_of(y[s])];
    const std::size_t n = cur.samples.size();
    tree.nodes[cur.node].histogram = normalized(counts, n);

    const bool pure = std::count(counts.begin(), counts.end(), 0) == kNumClasses - 1;
    const bool depth_cap = cfg.max_depth > 0 && cur.depth >= cfg.max_depth;
    if (pure || depth_cap || n < 2 * min_leaf) continue;

    // Only features that are non-zero somewhere in the node can vary.
    std::vector<std::size_t> active;
    {
      std::unordered_set<std::size_t> seen;
      for (auto s : cur.samples) {
        for (const auto& [col, v] : X.rows[s].entries) {
          if (seen.insert(col).second) active.push_back(col);
        }
      }
      std::sort(active.begin(), active.end());
    }
    Split best;
    const double parent_gini = gini(counts, n);
    std::size_t visited = 0;
    for (std::size_t k = 0; k < active.size() && visited < mtry; ++k) {
      std::swap(active[k], active[k + rng.below(active.size() - k)]);
      if (scan_feature(X, y, cur.samples, active[k], counts, parent_gini, min_leaf, best)) {
        ++visited;
      }
    }
    if (!best.found || best.gain <= 1e-12) continue;

    std::vector<std::size_t> left, right;
    for (auto s : cur.samples) {
      (X.rows[s].at(best.feature) <= best.threshold ? left : right).push_back(s);
    }
    const auto l = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[cur.node];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.histogram = {};
    node.left = l;
    node.right = l + 1;
    stack.push_back({static_cast<std::size_t>(l + 1), cur.depth + 1, std::move(right)});
    stack.push_back({static_cast<std::size_t>(l), cur.depth + 1, std::move(left)});
  }
  return tree;
}

RFModel rf_fit(const FeatureMatrix& X, std::span<const Label> y, const RfConfig& cfg) {
  if (X.size() != y.size()) throw std::invalid_argument("rf_fit: X and y differ in length");
  if (X.size() < 2) throw std::invalid_argument("rf_fit: need at least two samples");
  if (cfg.n_trees == 0) throw std::invalid_argument("rf_fit: n_trees must be positive");
  RFModel model;
  model.cfg = cfg;
  model.features = X.cols;
  model.trees.resize(cfg.n_trees);
  const std::size_t n = X.size();
  auto build = [&](std::size_t t) {
    const std::uint64_t tree_seed = derive_seed(cfg.seed, t);
    std::vector<std::size_t> samples(n);
    if (cfg.bootstrap) {
      Rng rng(tree_seed);
      for (auto& s : samples) s = rng.below(n);
    } else {
      std::iota(samples.begin(), samples.end(), 0);
    }
    model.trees[t] = fit_tree(X, y, samples, cfg, derive_seed(tree_seed, 1));
  };
  const std::size_t jobs = std::clamp<std::size_t>(cfg.jobs, 1, cfg.n_trees);
  if (jobs == 1) {
    for (std::size_t t = 0; t < cfg.n_trees; ++t) build(t);
  } else {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        for (std::size_t t = w; t < cfg.n_trees; t += jobs) build(t);
      });
    }
  }
  return model;
}

Prediction rf_predict(const RFModel& model, const SparseRow& x) {
  Prediction p;
  for (const auto& tree : model.trees) {
    const auto& h = tree.leaf_for(x).histogram;
    for (std::size_t c = 0; c < kNumClasses; ++c) p.probs[c] += h[c];
  }
  const double n = static_cast<double>(model.trees.size());
  for (auto& v : p.probs) v /= n;
  p.label = argmax_label(p.probs);
  return p;
}

namespace {

using nlohmann::json;

json node_json(const DecisionTree& t, std::size_t i) {
  const auto& n = t.nodes[i];
  if (n.is_leaf()) return {{"leaf", n.histogram}};
  return {{"feature", n.feature},
          {"threshold", n.threshold},
          {"left", node_json(t, static_cast<std::size_t>(n.left))},
          {"right", node_json(t, static_cast<std::size_t>(n.right))}};
}

// Children are allocated as a consecutive pair, matching fit_tree.
void node_from_json(const json& j, DecisionTree& t, std::size_t id) {
  if (j.contains("leaf")) {
    const auto h = j.at("leaf").get<std::vector<double>>();
    if (h.size() != kNumClasses) throw DataError("leaf histogram must have three entries");
    std::copy(h.begin(), h.end(), t.nodes[id].histogram.begin());
    return;
  }
  const auto l = static_cast<std::int32_t>(t.nodes.size());
  t.nodes.emplace_back();
  t.nodes.emplace_back();
  auto& node = t.nodes[id];
  node.feature = j.at("feature").get<std::size_t>();
  node.threshold = j.at("threshold").get<double>();
  node.left = l;
  node.right = l + 1;
  node_from_json(j.at("left"), t, static_cast<std::size_t>(l));
  node_from_json(j.at("right"), t, static_cast<std::size_t>(l + 1));
}

json maybe_inf(double v) { return std::isinf(v) ? json(nullptr) : json(v); }

}  // namespace

void save_nb(const NBModel& m, const std::filesystem::path& path) {
  json j;
  j["alpha"] = m.alpha;
  j["features"] = m.features;
  j["log_prior"] = json::array();
  for (double v : m.log_prior) j["log_prior"].push_back(maybe_inf(v));
  j["log_likelihood"] = m.log_likelihood;
  detail::write_file_atomic(path, j.dump());
}

NBModel load_nb(const std::filesystem::path& path) {
  try {
    const auto j = json::parse(detail::read_file(path));
    NBModel m;
    m.alpha = j.at("alpha").get<double>();
    m.features = j.at("features").get<std::size_t>();
    const auto& prior = j.at("log_prior");
    const auto& lik = j.at("log_likelihood");
    if (prior.size() != kNumClasses || lik.size() != kNumClasses) {
      throw DataError("naive Bayes model must have three classes");
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      m.log_prior[c] = prior[c].is_null() ? -std::numeric_limits<double>::infinity()
                                          : prior[c].get<double>();
      m.log_likelihood[c] = lik[c].get<std::vector<double>>();
      if (m.log_likelihood[c].size() != m.features) throw DataError("likelihood width mismatch");
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError("malformed naive Bayes model: " + std::string(e.what()));
  }
}

void save_rf(const RFModel& m, const std::filesystem::path& path) {
  json trees = json::array();
  for (const auto& t : m.trees) trees.push_back(node_json(t, 0));
  const json j = {{"features", m.features}, {"n_trees", m.trees.size()}, {"trees", trees}};
  detail::write_file_atomic(path, j.dump());
}

RFModel load_rf(const std::filesystem::path& path) {
  try {
    const auto j = json::parse(detail::read_file(path));
    RFModel m;
    m.features = j.at("features").get<std::size_t>();
    for (const auto& tj : j.at("trees")) {
      DecisionTree t;
      t.nodes.emplace_back();
      node_from_json(tj, t, 0);
      m.trees.push_back(std::move(t));
    }
    m.cfg.n_trees = m.trees.size();
    if (m.trees.empty()) throw DataError("random forest has no trees");
    return m;
  } catch (const json::exception& e) {
    throw DataError("malformed random forest model: " + std::string(e.what()));
  }
}

}  // namespace cmsa::baselines
