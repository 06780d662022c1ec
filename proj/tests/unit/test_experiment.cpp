#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "cmsa/error.hpp"
#include "cmsa/experiment.hpp"
#include "cmsa/synthetic.hpp"

using namespace cmsa;
using namespace cmsa::experiment;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("cmsa-exp-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig toy_config(const fs::path& dir) {
  RunConfig c;
  c.paths.lexicon = dir / "lexicon.tsv";
  c.paths.dictionaries = {dir / "dict.tsv"};
  c.seed = 7;
  c.train.hidden = 8;
  c.train.attention_width = 8;
  c.train.epochs = 5;
  c.train.learning_rate = 0.01;
  c.embedding_dim = 8;
  c.max_len = 24;
  return c;
}

std::vector<Example> toy_examples(const fs::path& dir, const RunConfig& c, std::size_t n = 200) {
  synthetic::ToyOptions o;
  o.n = n;
  o.seed = 3;
  const auto toy = synthetic::make_toy_corpus(o);
  synthetic::write_toy_corpus(toy, dir);
  return prepare_examples(toy.dataset, make_preprocessor(c), c.use_gloss);
}

}  // namespace

TEST_CASE("empty config keeps the defaults") {
  const auto c = config_from_json("{}");
  const RunConfig d;
  CHECK(c.k == 10);
  CHECK(c.train == d.train);
  CHECK(c.train.hidden == 32);
  CHECK(c.train.batch_size == 16);
  CHECK(c.train.patience == 3);
  CHECK(c.train.clip_norm == 5.0);
  CHECK(c.objective == ensemble::WeightObjective::CrossEntropy);
  CHECK(c.offline);
  CHECK_FALSE(c.paths.dataset);
  CHECK_FALSE(c.translator_endpoint);
}

TEST_CASE("config values and errors") {
  const auto c = config_from_json(R"({"k":5,"seed":9,"train":{"hidden":12,"epochs":4},
      "ensemble":{"objective":"neg_accuracy"},"rf":{"n_trees":7},
      "representation":{"max_len":20,"use_gloss":false},"translator_endpoint":"http://x"})");
  CHECK(c.k == 5);
  CHECK(c.seed == 9);
  CHECK(c.train.hidden == 12);
  CHECK(c.train.epochs == 4);
  CHECK(c.objective == ensemble::WeightObjective::NegAccuracy);
  CHECK(c.rf.n_trees == 7);
  CHECK(c.max_len == 20);
  CHECK_FALSE(c.use_gloss);
  CHECK(*c.translator_endpoint == "http://x");

  CHECK_THROWS_AS(config_from_json(R"({"kk":5})"), DataError);
  CHECK_THROWS_WITH_AS(config_from_json(R"({"train":{"hiden":5}})"),
                       doctest::Contains("train.hiden"), DataError);
  CHECK_THROWS_AS(config_from_json(R"({"k":"ten"})"), DataError);
  CHECK_THROWS_AS(config_from_json(R"({"k":1})"), DataError);
  CHECK_THROWS_AS(config_from_json(R"({"ensemble":{"validation_fraction":1.0}})"), DataError);
  CHECK_THROWS_AS(config_from_json(R"({"ensemble":{"objective":"mse"}})"), DataError);
  CHECK_THROWS_AS(config_from_json(R"({"representation":{"max_len":0}})"), DataError);
  CHECK_THROWS_AS(config_from_json("{oops"), DataError);
  CHECK_THROWS_AS(config_from_json("[]"), DataError);
}

TEST_CASE("config round trip and path resolution") {
  auto c = config_from_json(R"({"k":4,"seed":11,"nb":{"alpha":0.5},
      "paths":{"dataset":"data.ndjson","dictionaries":["d1.tsv","/abs/d2.tsv"],"out_dir":"out"}})");
  const auto again = config_from_json(config_to_json(c));
  CHECK(config_to_json(again) == config_to_json(c));
  CHECK(again.nb.alpha == 0.5);
  CHECK(again.paths.dictionaries.size() == 2);

  const auto dir = scratch("config");
  {
    std::ofstream f(dir / "run.json");
    f << config_to_json(c);
  }
  const auto loaded = load_config(dir / "run.json");
  CHECK(*loaded.paths.dataset == dir / "data.ndjson");
  CHECK(loaded.paths.dictionaries[0] == dir / "d1.tsv");
  CHECK(loaded.paths.dictionaries[1] == fs::path("/abs/d2.tsv"));
  CHECK(loaded.paths.out_dir == dir / "out");
  CHECK_THROWS_AS(load_config(dir / "missing.json"), DataError);
}

TEST_CASE("model lists") {
  CHECK(parse_model_list("all").size() == 6);
  const auto two = parse_model_list("rf,nb,rf");
  REQUIRE(two.size() == 2);
  CHECK(two[0] == ModelKind::RandomForest);
  CHECK(two[1] == ModelKind::NaiveBayes);
  for (auto k : parse_model_list("all")) CHECK(parse_model_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_model_list("nb,svm"), std::invalid_argument);
  CHECK_THROWS_AS(parse_model_list(""), std::invalid_argument);
  CHECK_FALSE(parse_model_kind("NB"));
}

TEST_CASE("toy corpus shape") {
  synthetic::ToyOptions o;
  o.n = 200;
  const auto toy = synthetic::make_toy_corpus(o);
  CHECK(toy.dataset.size() == 200);
  std::array<int, 3> counts{};
  for (const auto& t : toy.dataset) {
    REQUIRE(t.label_final);
    ++counts[index_of(*t.label_final)];
    CHECK_NOTHROW(corpus::validate_labels(t));
  }
  CHECK(counts[index_of(Label::Negative)] == 100);
  CHECK(counts[index_of(Label::Positive)] == 50);
  CHECK(counts[index_of(Label::Neutral)] == 50);
  CHECK_FALSE(toy.lexicon.empty());
  CHECK_FALSE(toy.dictionary.empty());

  // Same seed, same corpus.
  CHECK(synthetic::make_toy_corpus(o).dataset.records() == toy.dataset.records());

  o.n = 30;
  CHECK_THROWS_AS(synthetic::make_toy_corpus(o), std::invalid_argument);
}

TEST_CASE("prepare_examples keeps only final labels") {
  corpus::Dataset ds;
  corpus::Tweet a;
  a.id = "1";
  a.text = "فیلم خوب بود";
  a.label_a1 = a.label_a2 = a.label_final = Label::Positive;
  corpus::Tweet b;
  b.id = "2";
  b.text = "no label yet";
  ds.add(a);
  ds.add(b);
  const auto ex = prepare_examples(ds, make_preprocessor(RunConfig{}), true);
  REQUIRE(ex.size() == 1);
  CHECK(ex[0].id == "1");
  CHECK(ex[0].label == Label::Positive);
  CHECK_FALSE(ex[0].units.empty());
}

TEST_CASE("naive bayes separates the toy corpus") {
  const auto dir = scratch("nb");
  auto c = toy_config(dir);
  const auto ex = toy_examples(dir, c);
  const std::vector<ModelKind> kinds{ModelKind::NaiveBayes};
  const auto reports = evaluate(ex, kinds, c);
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].model == "nb");
  CHECK(reports[0].folds.size() == 10);
  CHECK(reports[0].accuracy >= 0.9);

  // Deterministic for a fixed seed.
  CHECK(evaluate(ex, kinds, c)[0].accuracy == reports[0].accuracy);
}

TEST_CASE("representation is built from the training split only") {
  const auto dir = scratch("rep");
  auto c = toy_config(dir);
  c.min_word_freq = 1;
  const auto ex = toy_examples(dir, c);
  const std::vector<std::size_t> none;
  const auto empty = build_representation(ex, none, c, 1);
  std::vector<std::size_t> all(ex.size());
  std::iota(all.begin(), all.end(), 0);
  const auto full = build_representation(ex, all, c, 1);
  CHECK(full.vocab.size() > empty.vocab.size());
  CHECK(full.table.rows() == full.vocab.size());
  CHECK(full.table.dim() == c.embedding_dim);

  const auto seq = encode(ex[0], full, c);
  CHECK(seq.label == ex[0].label);
}

TEST_CASE("artifacts round trip") {
  const auto dir = scratch("art");
  auto c = toy_config(dir);
  const auto ex = toy_examples(dir, c, 120);
  const auto kinds = parse_model_list("all");
  const auto a = train_artifacts(ex, kinds, c);
  REQUIRE(a.rep);
  REQUIRE(a.ensemble);
  REQUIRE(a.nb);
  REQUIRE(a.rf);
  const auto& w = a.ensemble->weights.weights.w;
  CHECK(w[0] + w[1] + w[2] == doctest::Approx(1.0));

  const auto out = dir / "model";
  save_artifacts(a, out, c);
  for (const char* f : {"config.json", "vocab.txt", "embeddings.txt", "model-a.json",
                        "weights.json", "nb.json", "rf.json"}) {
    CHECK(fs::exists(out / f));
  }
  const auto b = load_artifacts(out);
  REQUIRE(b.ensemble);
  REQUIRE(b.nb);
  REQUIRE(b.rf);
  CHECK(b.ensemble->weights.weights.w == w);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(b.nb->predict(ex[i].units).probs == a.nb->predict(ex[i].units).probs);
    CHECK(b.rf->predict(ex[i].units).probs == a.rf->predict(ex[i].units).probs);
    const auto sa = encode(ex[i], *a.rep, c);
    const auto sb = encode(ex[i], *b.rep, c);
    for (std::size_t m = 0; m < 3; ++m) {
      CHECK(nn::forward(sb.seq, b.ensemble->members[m]).probs ==
            nn::forward(sa.seq, a.ensemble->members[m]).probs);
    }
  }
  CHECK_THROWS_AS(load_artifacts(dir / "nothing"), DataError);
}
