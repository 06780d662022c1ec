#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cmsa/baselines.hpp"
#include "cmsa/error.hpp"
#include "cmsa/rng.hpp"
#include "test_util.hpp"

using namespace cmsa;
using namespace cmsa::baselines;

namespace {

using Docs = std::vector<std::vector<std::string>>;

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

SparseRow row_of(std::initializer_list<std::pair<std::size_t, double>> e) {
  SparseRow r;
  r.entries = e;
  return r;
}

TreeNode leaf(ClassProbs h) {
  TreeNode n;
  n.histogram = h;
  return n;
}

/// Posterior computed directly in probability space.
ClassProbs direct_posterior(const NBModel& m, const std::vector<double>& x) {
  ClassProbs joint{};
  double z = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    double p = std::exp(m.log_prior[c]);
    for (std::size_t t = 0; t < x.size(); ++t) {
      p *= std::pow(std::exp(m.log_likelihood[c][t]), x[t]);
    }
    joint[c] = p;
    z += p;
  }
  for (auto& v : joint) v /= z;
  return joint;
}

}  // namespace

TEST_CASE("bag-of-words counts") {
  const auto [vec, X] = BowVectorizer::fit_transform({{"a", "b"}, {"a"}}, BowMode::Counts);
  CHECK(vec.columns() == std::vector<std::string>{"a", "b"});
  CHECK(X.dense() == std::vector<std::vector<double>>{{1, 1}, {1, 0}});
  CHECK(vec.idf().empty());
  CHECK(vec.transform({"a", "a", "zzz"}) == row_of({{0, 2.0}}));
  CHECK(vec.transform({"zzz", "yyy"}).entries.empty());
  CHECK(vec.transform({}).entries.empty());
}

TEST_CASE("empty documents give zero rows") {
  const auto [vec, X] = BowVectorizer::fit_transform({{}, {"x"}, {}}, BowMode::Counts);
  CHECK(X.cols == 1);
  CHECK(X.dense() == std::vector<std::vector<double>>{{0}, {1}, {0}});
}

TEST_CASE("tf-idf weights") {
  const auto [vec, X] = BowVectorizer::fit_transform({{"a", "b", "b"}, {"a"}}, BowMode::TfIdf);
  const double idf_b = std::log(3.0 / 2.0) + 1.0;
  REQUIRE(vec.idf().size() == 2);
  CHECK(vec.idf()[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(vec.idf()[1] == doctest::Approx(idf_b).epsilon(1e-15));
  CHECK(X.rows[0].at(0) == doctest::Approx(1.0));
  CHECK(X.rows[0].at(1) == doctest::Approx(2 * idf_b));
  CHECK(X.rows[1].at(1) == 0.0);
  const auto again = BowVectorizer::from_parts(BowMode::TfIdf, vec.columns(), vec.idf());
  CHECK(again.transform({"b"}) == vec.transform({"b"}));
  CHECK_THROWS_AS(BowVectorizer::from_parts(BowMode::TfIdf, {"a"}, {}), std::invalid_argument);
  CHECK_THROWS_AS(BowVectorizer::from_parts(BowMode::Counts, {"a", "a"}, {}),
                  std::invalid_argument);
}

TEST_CASE("naive Bayes hand-computed posterior") {
  // Two positive "good" documents and one negative "bad" document, so the
  // fitted priors are 2/3 and 1/3 and F = 2.
  const auto [vec, X] = BowVectorizer::fit_transform({{"good"}, {"good"}, {"bad"}}, BowMode::Counts);
  const std::vector<Label> y{Label::Positive, Label::Positive, Label::Negative};
  CHECK_THROWS_AS(nb_fit(X, y), std::invalid_argument);
  const auto m = nb_fit(X, y, NbConfig{1.0, false});
  CHECK(std::isinf(m.log_prior[index_of(Label::Neutral)]));
  const auto p = nb_predict(m, vec.transform({"good"}));
  const double want = (2.0 / 3 * 3.0 / 4) / (2.0 / 3 * 3.0 / 4 + 1.0 / 3 * 1.0 / 3);
  CHECK(want == doctest::Approx(0.818).epsilon(1e-3));
  CHECK(p.probs[index_of(Label::Positive)] == doctest::Approx(want).epsilon(1e-12));
  CHECK(p.probs[index_of(Label::Neutral)] == 0.0);
  CHECK(p.label == Label::Positive);
}

TEST_CASE("naive Bayes symmetry and empty documents") {
  const auto [vec, X] =
      BowVectorizer::fit_transform({{"a", "a", "b"}, {"b", "b", "a"}, {"c"}}, BowMode::Counts);
  const std::vector<Label> y{Label::Negative, Label::Positive, Label::Neutral};
  const auto m = nb_fit(X, y);
  const auto p = nb_predict(m, vec.transform({"a", "b"}));
  CHECK(p.probs[0] == doctest::Approx(p.probs[2]).epsilon(1e-12));
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(std::exp(m.log_prior[c]) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }
  const auto empty = nb_predict(m, SparseRow{});
  for (double v : empty.probs) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(empty.label == Label::Negative);

  const auto [v2, X2] = BowVectorizer::fit_transform({{"x"}, {"y"}, {"y"}, {"z"}}, BowMode::Counts);
  const std::vector<Label> y2{Label::Negative, Label::Positive, Label::Positive, Label::Neutral};
  CHECK(nb_predict(nb_fit(X2, y2), SparseRow{}).label == Label::Positive);
}

TEST_CASE("naive Bayes parameters are normalized") {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    Docs docs;
    std::vector<Label> y;
    for (int i = 0; i < 12; ++i) {
      std::vector<std::string> d;
      for (std::size_t k = 0; k < 1 + rng.below(5); ++k) d.push_back("w" + std::to_string(rng.below(7)));
      docs.push_back(d);
      y.push_back(static_cast<Label>(i % 3));
    }
    const auto [vec, X] = BowVectorizer::fit_transform(docs, BowMode::Counts);
    const auto m = nb_fit(X, y, NbConfig{rng.uniform(0.1, 3.0), true});
    double prior_sum = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      prior_sum += std::exp(m.log_prior[c]);
      double lik = 0.0;
      for (double v : m.log_likelihood[c]) lik += std::exp(v);
      CHECK(std::abs(lik - 1.0) < 1e-9);
    }
    CHECK(std::abs(prior_sum - 1.0) < 1e-12);
  }
}

TEST_CASE("naive Bayes log-space posterior matches a direct computation") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t F = 1 + rng.below(4);
    FeatureMatrix X;
    X.cols = F;
    std::vector<Label> y;
    for (int i = 0; i < 6; ++i) {
      SparseRow r;
      for (std::size_t t = 0; t < F; ++t) {
        if (auto n = rng.below(3)) r.entries.emplace_back(t, static_cast<double>(n));
      }
      X.rows.push_back(r);
      y.push_back(static_cast<Label>(i % 3));
    }
    const auto m = nb_fit(X, y, NbConfig{rng.uniform(0.5, 2.0), true});
    std::vector<double> x(F);
    SparseRow sx;
    for (std::size_t t = 0; t < F; ++t) {
      x[t] = static_cast<double>(rng.below(4));
      if (x[t] != 0) sx.entries.emplace_back(t, x[t]);
    }
    const auto got = nb_predict(m, sx).probs;
    const auto want = direct_posterior(m, x);
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(got[c] - want[c]) < 1e-12);
  }
}

TEST_CASE("large smoothing flattens towards the prior") {
  const auto [vec, X] = BowVectorizer::fit_transform(
      {{"good", "good"}, {"good"}, {"bad", "bad"}, {"meh"}}, BowMode::Counts);
  const std::vector<Label> y{Label::Positive, Label::Positive, Label::Negative, Label::Neutral};
  const auto x = vec.transform({"bad", "bad", "bad"});
  const auto sharp = nb_fit(X, y, NbConfig{1.0, true});
  const auto flat = nb_fit(X, y, NbConfig{1e6, true});
  const ClassProbs prior{0.25, 0.25, 0.5};
  auto distance = [&](const ClassProbs& p) {
    double d = 0.0;
    for (std::size_t c = 0; c < 3; ++c) d += std::abs(p[c] - prior[c]);
    return d;
  };
  const auto ps = nb_predict(sharp, x).probs;
  const auto pf = nb_predict(flat, x).probs;
  CHECK(ps[index_of(Label::Negative)] > 0.5);
  CHECK(distance(pf) < distance(ps));
  CHECK(distance(pf) < 1e-4);
  CHECK(nb_predict(flat, x).label == Label::Positive);
}

TEST_CASE("naive Bayes input validation") {
  const auto [vec, X] = BowVectorizer::fit_transform({{"a"}, {"b"}, {"c"}}, BowMode::Counts);
  const std::vector<Label> y{Label::Negative, Label::Neutral, Label::Positive};
  CHECK_THROWS_AS(nb_fit(X, y, NbConfig{0.0, true}), std::invalid_argument);
  CHECK_THROWS_AS(nb_fit(X, std::vector<Label>{Label::Negative}), std::invalid_argument);
  FeatureMatrix neg = X;
  neg.rows[0].entries[0].second = -1.0;
  CHECK_THROWS_AS(nb_fit(neg, y), std::invalid_argument);
}

TEST_CASE("random forest with a single class") {
  const auto [vec, X] = BowVectorizer::fit_transform({{"a"}, {"b"}, {"a", "c"}}, BowMode::TfIdf);
  const std::vector<Label> y(3, Label::Neutral);
  RfConfig cfg;
  cfg.n_trees = 5;
  const auto m = rf_fit(X, y, cfg);
  CHECK(m.trees.size() == 5);
  for (const auto& t : m.trees) CHECK(t.nodes.size() == 1);
  for (const auto& x : {vec.transform({"a"}), vec.transform({"zzz"}), vec.transform({"b", "c"})}) {
    const auto p = rf_predict(m, x);
    CHECK(p.label == Label::Neutral);
    CHECK(p.probs[1] == 1.0);
  }
}

TEST_CASE("random forest separates two one-hot points") {
  const auto [vec, X] = BowVectorizer::fit_transform({{"good"}, {"bad"}}, BowMode::Counts);
  const std::vector<Label> y{Label::Positive, Label::Negative};
  RfConfig cfg;
  cfg.n_trees = 1;
  cfg.bootstrap = false;
  const auto m = rf_fit(X, y, cfg);
  REQUIRE(m.trees.size() == 1);
  CHECK(m.trees[0].nodes.size() == 3);
  CHECK(rf_predict(m, X.rows[0]).label == Label::Positive);
  CHECK(rf_predict(m, X.rows[1]).label == Label::Negative);
  CHECK(m.trees[0].nodes[0].threshold == 0.5);
}

TEST_CASE("unlimited trees fit distinct training points exactly") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    FeatureMatrix X;
    X.cols = 5;
    std::vector<Label> y;
    for (std::size_t i = 0; i < 12; ++i) {
      // Column i % 5 bit pattern plus a unique id column keeps rows distinct.
      SparseRow r;
      for (std::size_t t = 0; t < 4; ++t) {
        if (rng.below(2)) r.entries.emplace_back(t, rng.uniform(0.5, 2));
      }
      r.entries.emplace_back(4, static_cast<double>(i + 1));
      X.rows.push_back(r);
      y.push_back(static_cast<Label>(rng.below(3)));
    }
    RfConfig cfg;
    cfg.features_per_split = 5;
    const auto tree = fit_tree(X, y, all_indices(12), cfg, rng.next_u64());
    for (std::size_t i = 0; i < 12; ++i) CHECK(argmax_label(tree.leaf_for(X.rows[i]).histogram) == y[i]);
  }
}

TEST_CASE("depth and leaf limits") {
  FeatureMatrix X;
  X.cols = 1;
  std::vector<Label> y;
  for (std::size_t i = 0; i < 8; ++i) {
    X.rows.push_back(row_of({{0, static_cast<double>(i + 1)}}));
    y.push_back(i % 2 ? Label::Positive : Label::Negative);
  }
  RfConfig cfg;
  cfg.max_depth = 1;
  const auto stump = fit_tree(X, y, all_indices(8), cfg, 1);
  CHECK(stump.nodes.size() == 3);
  cfg.max_depth = 0;
  cfg.min_leaf = 4;
  const auto coarse = fit_tree(X, y, all_indices(8), cfg, 1);
  for (const auto& n : coarse.nodes) {
    if (n.is_leaf()) {
      CHECK(n.histogram[0] + n.histogram[1] + n.histogram[2] == doctest::Approx(1.0));
    }
  }
  CHECK(coarse.nodes.size() <= 3);
}

TEST_CASE("one tree without bootstrap is a plain decision tree") {
  Rng rng(4);
  Docs docs;
  std::vector<Label> y;
  for (int i = 0; i < 40; ++i) {
    std::vector<std::string> d;
    for (std::size_t k = 0; k < 1 + rng.below(4); ++k) d.push_back("w" + std::to_string(rng.below(9)));
    docs.push_back(d);
    y.push_back(static_cast<Label>(rng.below(3)));
  }
  const auto [vec, X] = BowVectorizer::fit_transform(docs, BowMode::TfIdf);
  RfConfig cfg;
  cfg.n_trees = 1;
  cfg.bootstrap = false;
  cfg.features_per_split = X.cols;
  cfg.seed = 77;
  const auto forest = rf_fit(X, y, cfg);
  const auto tree = fit_tree(X, y, all_indices(X.size()), cfg, 12345);
  CHECK(forest.trees[0] == tree);
}

TEST_CASE("random forest is a pure function of the seed") {
  Rng rng(5);
  Docs docs;
  std::vector<Label> y;
  for (int i = 0; i < 60; ++i) {
    std::vector<std::string> d;
    for (std::size_t k = 0; k < 1 + rng.below(5); ++k) d.push_back("w" + std::to_string(rng.below(15)));
    docs.push_back(d);
    y.push_back(static_cast<Label>(rng.below(3)));
  }
  const auto [vec, X] = BowVectorizer::fit_transform(docs, BowMode::TfIdf);
  RfConfig cfg;
  cfg.n_trees = 15;
  cfg.seed = 8;
  const auto a = rf_fit(X, y, cfg);
  const auto b = rf_fit(X, y, cfg);
  cfg.jobs = 3;
  const auto threaded = rf_fit(X, y, cfg);
  CHECK(a == b);
  CHECK(a == threaded);
  for (const auto& r : X.rows) CHECK(rf_predict(a, r).probs == rf_predict(b, r).probs);
  cfg.seed = 9;
  CHECK_FALSE(a == rf_fit(X, y, cfg));
}

TEST_CASE("random forest prediction averages leaf histograms") {
  RFModel m;
  m.features = 1;
  m.trees.push_back(DecisionTree{{leaf({1, 0, 0})}});
  CHECK(rf_predict(m, SparseRow{}).probs == ClassProbs{1, 0, 0});

  m.trees.push_back(DecisionTree{{leaf({0, 1, 0})}});
  const auto tie = rf_predict(m, SparseRow{});
  CHECK(tie.probs == ClassProbs{0.5, 0.5, 0});
  CHECK(tie.label == Label::Negative);

  // Three trees: a split on feature 0 at 0.5 and two leaves.
  RFModel hand;
  hand.features = 1;
  DecisionTree split;
  TreeNode root;
  root.feature = 0;
  root.threshold = 0.5;
  root.left = 1;
  root.right = 2;
  split.nodes = {root, leaf({0.5, 0.5, 0}), leaf({0, 0.25, 0.75})};
  hand.trees = {split, DecisionTree{{leaf({0.2, 0.2, 0.6})}}, DecisionTree{{leaf({0.1, 0.8, 0.1})}}};
  const auto high = rf_predict(hand, row_of({{0, 1.0}}));
  CHECK(high.probs[0] == doctest::Approx((0 + 0.2 + 0.1) / 3));
  CHECK(high.probs[1] == doctest::Approx((0.25 + 0.2 + 0.8) / 3));
  CHECK(high.probs[2] == doctest::Approx((0.75 + 0.6 + 0.1) / 3));
  CHECK(high.label == Label::Positive);
  const auto low = rf_predict(hand, SparseRow{});
  CHECK(low.probs[1] == doctest::Approx((0.5 + 0.2 + 0.8) / 3));
  CHECK(low.label == Label::Neutral);
}

TEST_CASE("random forest input validation") {
  FeatureMatrix X;
  X.cols = 1;
  X.rows.push_back(row_of({{0, 1.0}}));
  const std::vector<Label> y{Label::Positive};
  CHECK_THROWS_AS(rf_fit(X, y), std::invalid_argument);
  X.rows.push_back(SparseRow{});
  RfConfig cfg;
  cfg.n_trees = 0;
  CHECK_THROWS_AS(rf_fit(X, std::vector<Label>{Label::Positive, Label::Negative}, cfg),
                  std::invalid_argument);
}

TEST_CASE("model files round-trip") {
  testing::TempDir dir;
  Rng rng(6);
  Docs docs;
  std::vector<Label> y;
  for (int i = 0; i < 30; ++i) {
    docs.push_back({"w" + std::to_string(rng.below(6)), "w" + std::to_string(rng.below(6))});
    y.push_back(static_cast<Label>(i % 2 ? 0 : 2));
  }
  const auto [vec, X] = BowVectorizer::fit_transform(docs, BowMode::Counts);
  const auto nb = nb_fit(X, y, NbConfig{0.5, false});
  save_nb(nb, dir / "nb.json");
  const auto nb2 = load_nb(dir / "nb.json");
  CHECK(nb2.alpha == nb.alpha);
  CHECK(nb2.features == nb.features);
  CHECK(std::isinf(nb2.log_prior[1]));
  for (const auto& r : X.rows) CHECK(nb_predict(nb2, r).probs == nb_predict(nb, r).probs);

  RfConfig cfg;
  cfg.n_trees = 7;
  const auto rf = rf_fit(X, y, cfg);
  save_rf(rf, dir / "rf.json");
  const auto rf2 = load_rf(dir / "rf.json");
  CHECK(rf2 == rf);

  testing::write_text(dir / "bad.json", R"({"alpha":1,"features":1,"log_prior":[0,0],"log_likelihood":[[0],[0]]})");
  CHECK_THROWS_AS(load_nb(dir / "bad.json"), DataError);
  testing::write_text(dir / "empty_rf.json", R"({"features":1,"n_trees":0,"trees":[]})");
  CHECK_THROWS_AS(load_rf(dir / "empty_rf.json"), DataError);
}
