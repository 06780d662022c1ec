#include "cmsa/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>
#include <stdexcept>

#include "cmsa/error.hpp"
#include "cmsa/rng.hpp"
#include "cmsa/translator.hpp"
#include "io_util.hpp"
#include "json.hpp"

namespace cmsa::experiment {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Reads known keys from a JSON object and rejects the rest.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw DataError("config: \"" + where_ + "\" must be an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) {
        throw DataError("config: unknown key \"" + where_ + key + "\"");
      }
    }
  }

  template <typename T>
  void get(const char* key, T& into) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    try {
      into = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw DataError("config: bad value for \"" + where_ + key + "\"");
    }
  }
  void path(const char* key, std::optional<fs::path>& into) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    into = fs::path(j_.at(key).get<std::string>());
  }
  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string prefix(const char* key) const { return where_ + key + "."; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string, std::less<>> seen_;
};

json opt_path(const std::optional<fs::path>& p) {
  return p ? json(p->string()) : json(nullptr);
}

}  // namespace

void RunConfig::resolve_paths(const fs::path& base) {
  auto fix = [&](fs::path& p) {
    if (!p.empty() && p.is_relative()) p = (base / p).lexically_normal();
  };
  for (auto* p : {&paths.dataset, &paths.lexicon, &paths.vocab, &paths.embeddings,
                  &paths.translation_cache}) {
    if (*p) fix(**p);
  }
  for (auto& d : paths.dictionaries) fix(d);
  fix(paths.out_dir);
}

RunConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Reader top(j, "");
  if (const auto* p = top.sub("paths")) {
    Reader r(*p, "paths.");
    r.path("dataset", c.paths.dataset);
    r.path("lexicon", c.paths.lexicon);
    r.path("vocab", c.paths.vocab);
    r.path("embeddings", c.paths.embeddings);
    r.path("translation_cache", c.paths.translation_cache);
    std::vector<std::string> dicts;
    r.get("dictionaries", dicts);
    for (auto& d : dicts) c.paths.dictionaries.emplace_back(d);
    std::string out = c.paths.out_dir.string();
    r.get("out_dir", out);
    c.paths.out_dir = out;
  }
  if (const auto* p = top.sub("train")) {
    Reader r(*p, "train.");
    auto& t = c.train;
    r.get("hidden", t.hidden);
    r.get("layers", t.layers);
    r.get("encoder_layers", t.encoder_layers);
    r.get("attention_width", t.attention_width);
    r.get("learning_rate", t.learning_rate);
    r.get("beta1", t.beta1);
    r.get("beta2", t.beta2);
    r.get("epsilon", t.epsilon);
    r.get("epochs", t.epochs);
    r.get("batch_size", t.batch_size);
    r.get("clip_norm", t.clip_norm);
    r.get("patience", t.patience);
    r.get("train_embeddings", t.train_embeddings);
  }
  if (const auto* p = top.sub("ensemble")) {
    Reader r(*p, "ensemble.");
    std::string objective(to_string(c.objective));
    r.get("objective", objective);
    const auto o = ensemble::parse_objective(objective);
    if (!o) throw DataError("config: unknown ensemble objective \"" + objective + "\"");
    c.objective = *o;
    r.get("validation_fraction", c.validation_fraction);
    auto& nm = c.nelder_mead;
    r.get("max_iter", nm.max_iter);
    r.get("x_tol", nm.x_tol);
    r.get("f_tol", nm.f_tol);
    r.get("restarts", nm.restarts);
    r.get("initial_step", nm.initial_step);
    r.get("restart_jitter", nm.restart_jitter);
  }
  if (const auto* p = top.sub("nb")) {
    Reader r(*p, "nb.");
    r.get("alpha", c.nb.alpha);
  }
  if (const auto* p = top.sub("rf")) {
    Reader r(*p, "rf.");
    r.get("n_trees", c.rf.n_trees);
    r.get("max_depth", c.rf.max_depth);
    r.get("min_leaf", c.rf.min_leaf);
    r.get("features_per_split", c.rf.features_per_split);
    r.get("bootstrap", c.rf.bootstrap);
    r.get("jobs", c.rf.jobs);
  }
  if (const auto* p = top.sub("representation")) {
    Reader r(*p, "representation.");
    r.get("embedding_dim", c.embedding_dim);
    r.get("max_len", c.max_len);
    r.get("min_word_freq", c.min_word_freq);
    r.get("min_lexicon_freq", c.min_lexicon_freq);
    r.get("use_gloss", c.use_gloss);
  }
  top.get("k", c.k);
  top.get("seed", c.seed);
  top.get("offline", c.offline);
  top.get("jobs", c.jobs);
  std::string endpoint;
  top.get("translator_endpoint", endpoint);
  if (!endpoint.empty()) c.translator_endpoint = endpoint;

  if (c.validation_fraction < 0.0 || c.validation_fraction >= 1.0) {
    throw DataError("config: ensemble.validation_fraction must be in [0, 1)");
  }
  if (c.k < 2) throw DataError("config: k must be at least 2");
  if (c.max_len == 0 || c.embedding_dim == 0) {
    throw DataError("config: max_len and embedding_dim must be positive");
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  auto c = config_from_json(detail::read_file(path));
  c.resolve_paths(path.parent_path());
  return c;
}

std::string config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  std::vector<std::string> dicts;
  for (const auto& d : c.paths.dictionaries) dicts.push_back(d.string());
  j["paths"] = {{"dataset", opt_path(c.paths.dataset)},
                {"lexicon", opt_path(c.paths.lexicon)},
                {"dictionaries", dicts},
                {"vocab", opt_path(c.paths.vocab)},
                {"embeddings", opt_path(c.paths.embeddings)},
                {"translation_cache", opt_path(c.paths.translation_cache)},
                {"out_dir", c.paths.out_dir.string()}};
  const auto& t = c.train;
  j["train"] = {{"hidden", t.hidden},
                {"layers", t.layers},
                {"encoder_layers", t.encoder_layers},
                {"attention_width", t.attention_width},
                {"learning_rate", t.learning_rate},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"epsilon", t.epsilon},
                {"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"clip_norm", t.clip_norm},
                {"patience", t.patience},
                {"train_embeddings", t.train_embeddings}};
  const auto& nm = c.nelder_mead;
  j["ensemble"] = {{"objective", to_string(c.objective)},
                   {"validation_fraction", c.validation_fraction},
                   {"max_iter", nm.max_iter},
                   {"x_tol", nm.x_tol},
                   {"f_tol", nm.f_tol},
                   {"restarts", nm.restarts},
                   {"initial_step", nm.initial_step},
                   {"restart_jitter", nm.restart_jitter}};
  j["nb"] = {{"alpha", c.nb.alpha}};
  j["rf"] = {{"n_trees", c.rf.n_trees},
             {"max_depth", c.rf.max_depth},
             {"min_leaf", c.rf.min_leaf},
             {"features_per_split", c.rf.features_per_split},
             {"bootstrap", c.rf.bootstrap},
             {"jobs", c.rf.jobs}};
  j["representation"] = {{"embedding_dim", c.embedding_dim},
                         {"max_len", c.max_len},
                         {"min_word_freq", c.min_word_freq},
                         {"min_lexicon_freq", c.min_lexicon_freq},
                         {"use_gloss", c.use_gloss}};
  j["k"] = c.k;
  j["seed"] = c.seed;
  j["offline"] = c.offline;
  j["jobs"] = c.jobs;
  j["translator_endpoint"] = c.translator_endpoint ? json(*c.translator_endpoint) : json(nullptr);
  return j.dump(2) + "\n";
}

std::string_view to_string(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::NaiveBayes: return "nb";
    case ModelKind::RandomForest: return "rf";
    case ModelKind::ModelA: return "model-a";
    case ModelKind::ModelB: return "model-b";
    case ModelKind::ModelC: return "model-c";
    case ModelKind::Ensemble: return "ensemble";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view s) noexcept {
  for (auto k : {ModelKind::NaiveBayes, ModelKind::RandomForest, ModelKind::ModelA,
                 ModelKind::ModelB, ModelKind::ModelC, ModelKind::Ensemble}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

std::vector<ModelKind> parse_model_list(std::string_view s) {
  if (s == "all") {
    return {ModelKind::NaiveBayes, ModelKind::RandomForest, ModelKind::ModelA,
            ModelKind::ModelB,     ModelKind::ModelC,       ModelKind::Ensemble};
  }
  std::vector<ModelKind> out;
  for (auto part : detail::split(s, ',')) {
    const auto k = parse_model_kind(part);
    if (!k) throw std::invalid_argument("unknown model \"" + std::string(part) + "\"");
    if (std::find(out.begin(), out.end(), *k) == out.end()) out.push_back(*k);
  }
  if (out.empty()) throw std::invalid_argument("no model given");
  return out;
}

codeswitch::Preprocessor make_preprocessor(const RunConfig& cfg) {
  auto lexicon = cfg.paths.lexicon
                     ? std::make_shared<const codeswitch::PersianLexicon>(
                           codeswitch::load_lexicon(*cfg.paths.lexicon, cfg.min_lexicon_freq))
                     : std::make_shared<const codeswitch::PersianLexicon>(cfg.min_lexicon_freq);
  auto dict = std::make_shared<codeswitch::TranslationDict>();
  for (const auto& d : cfg.paths.dictionaries) codeswitch::load_dictionary(d, *dict);
  auto cache = cfg.paths.translation_cache
                   ? std::make_shared<codeswitch::TranslationCache>(*cfg.paths.translation_cache)
                   : std::make_shared<codeswitch::TranslationCache>();
  std::shared_ptr<codeswitch::TranslatorClient> client;
  if (!cfg.offline && cfg.translator_endpoint) {
    client = std::make_shared<codeswitch::HttpTranslator>(
        codeswitch::HttpTranslatorConfig{*cfg.translator_endpoint});
  }
  codeswitch::TranslateOptions opts;
  opts.offline = cfg.offline;
  return codeswitch::Preprocessor(std::move(lexicon), std::move(dict), opts, std::move(cache),
                                  std::move(client));
}

std::vector<Example> prepare_examples(const corpus::Dataset& ds,
                                      const codeswitch::Preprocessor& pre, bool use_gloss) {
  std::vector<Example> out;
  for (const auto& t : ds) {
    if (!t.label_final) continue;
    Example ex;
    ex.id = t.id;
    ex.label = *t.label_final;
    ex.tokens = pre.run(t.text);
    ex.units = textrep::embedding_units(ex.tokens, use_gloss);
    out.push_back(std::move(ex));
  }
  return out;
}

Representation build_representation(std::span<const Example> examples,
                                    std::span<const std::size_t> train, const RunConfig& cfg,
                                    std::uint64_t seed) {
  Representation rep;
  if (cfg.paths.vocab) {
    rep.vocab = textrep::load_vocab(*cfg.paths.vocab);
  } else {
    std::vector<std::string> words;
    for (auto i : train) {
      words.insert(words.end(), examples[i].units.begin(), examples[i].units.end());
    }
    rep.vocab = textrep::build_vocab(words, cfg.min_word_freq);
  }
  if (cfg.paths.embeddings) {
    rep.table = textrep::load_table(*cfg.paths.embeddings);
    if (rep.table.rows() != rep.vocab.size()) {
      throw ShapeError("embedding table has " + std::to_string(rep.table.rows()) +
                       " rows but the vocab has " + std::to_string(rep.vocab.size()) +
                       " pieces");
    }
  } else {
    rep.table = textrep::EmbeddingTable::random(rep.vocab.size(), cfg.embedding_dim, seed);
  }
  rep.table.set_trainable(cfg.train.train_embeddings);
  return rep;
}

nn::LabeledSequence encode(const Example& ex, const Representation& rep, const RunConfig& cfg) {
  return {textrep::encode_sequence(ex.tokens, rep.vocab, rep.table, cfg.max_len, cfg.use_gloss),
          ex.label};
}

ensemble::WeightFit fit_weights(const std::array<const nn::ModelParams*, 3>& members,
                                std::span<const nn::LabeledSequence> data, const RunConfig& cfg,
                                std::uint64_t seed) {
  ensemble::PredictionMatrix pm;
  for (const auto& ex : data) {
    for (std::size_t m = 0; m < 3; ++m) pm.probs[m].push_back(nn::forward(ex.seq, *members[m]).probs);
    pm.golds.push_back(ex.label);
  }
  auto nm = cfg.nelder_mead;
  nm.seed = seed;
  return ensemble::optimize_weights(pm, cfg.objective, nm);
}

EnsembleModel train_ensemble(std::span<const nn::LabeledSequence> data, const RunConfig& cfg,
                             std::uint64_t seed, const textrep::EmbeddingTable* table) {
  if (data.empty()) throw TrainingError("no training examples");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0));
  rng.shuffle(std::span<std::size_t>(order));
  std::size_t n_val = 0;
  if (cfg.validation_fraction > 0.0 && data.size() >= 2) {
    n_val = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(cfg.validation_fraction * data.size())), 1,
        data.size() - 1);
  }
  std::vector<nn::LabeledSequence> val, fit;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? val : fit).push_back(data[order[i]]);
  }

  EnsembleModel model;
  for (std::size_t m = 0; m < kMemberVariants.size(); ++m) {
    auto tc = cfg.train;
    tc.seed = derive_seed(seed, 10 + m);
    const auto* emb = tc.train_embeddings ? table : nullptr;
    model.members[m] = nn::train(kMemberVariants[m], fit, val, tc, emb).params;
  }
  const std::array<const nn::ModelParams*, 3> ptrs{&model.members[0], &model.members[1],
                                                   &model.members[2]};
  model.weights = fit_weights(ptrs, val.empty() ? std::span<const nn::LabeledSequence>(fit)
                                                : std::span<const nn::LabeledSequence>(val),
                              cfg, derive_seed(seed, 20));
  return model;
}

baselines::Prediction BaselineModel::predict(const std::vector<std::string>& units) const {
  const auto row = vectorizer.transform(units);
  if (nb) return baselines::nb_predict(*nb, row);
  if (rf) return baselines::rf_predict(*rf, row);
  throw Error("baseline model is not fitted");
}

BaselineModel train_baseline(ModelKind kind, std::span<const Example> examples,
                             std::span<const std::size_t> train, const RunConfig& cfg,
                             std::uint64_t seed) {
  if (kind != ModelKind::NaiveBayes && kind != ModelKind::RandomForest) {
    throw std::invalid_argument("train_baseline: not a baseline model");
  }
  std::vector<std::vector<std::string>> docs;
  std::vector<Label> y;
  for (auto i : train) {
    docs.push_back(examples[i].units);
    y.push_back(examples[i].label);
  }
  BaselineModel m;
  m.kind = kind;
  // Multinomial NB wants raw counts; the forest gets tf-idf weights.
  const auto mode =
      kind == ModelKind::NaiveBayes ? baselines::BowMode::Counts : baselines::BowMode::TfIdf;
  auto [vec, X] = baselines::BowVectorizer::fit_transform(docs, mode);
  m.vectorizer = std::move(vec);
  if (kind == ModelKind::NaiveBayes) {
    auto nb_cfg = cfg.nb;
    nb_cfg.require_all_classes = false;
    m.nb = baselines::nb_fit(X, y, nb_cfg);
  } else {
    auto rf_cfg = cfg.rf;
    rf_cfg.seed = seed;
    m.rf = baselines::rf_fit(X, y, rf_cfg);
  }
  return m;
}

namespace {

class FnPredictor : public eval::Predictor {
 public:
  explicit FnPredictor(std::function<Label(std::size_t)> f) : f_(std::move(f)) {}
  Label predict(std::size_t record) const override { return f_(record); }

 private:
  std::function<Label(std::size_t)> f_;
};

bool is_neural(ModelKind k) {
  return k == ModelKind::ModelA || k == ModelKind::ModelB || k == ModelKind::ModelC ||
         k == ModelKind::Ensemble;
}

struct NeuralFold {
  Representation rep;
  EnsembleModel model;
};

}  // namespace

std::vector<eval::MetricsReport> evaluate(std::span<const Example> examples,
                                          std::span<const ModelKind> kinds, const RunConfig& cfg) {
  if (examples.empty()) throw DataError("no labeled records to evaluate");
  std::vector<std::string> names;
  std::vector<Label> labels;
  for (auto k : kinds) names.emplace_back(to_string(k));
  for (const auto& ex : examples) labels.push_back(ex.label);
  const bool neural = std::any_of(kinds.begin(), kinds.end(), is_neural);

  eval::MultiPipelineFit fit = [&](std::span<const std::size_t> train, std::uint64_t fold_seed) {
    std::shared_ptr<NeuralFold> nf;
    if (neural) {
      nf = std::make_shared<NeuralFold>();
      nf->rep = build_representation(examples, train, cfg, derive_seed(fold_seed, 1));
      std::vector<nn::LabeledSequence> seqs;
      seqs.reserve(train.size());
      for (auto i : train) seqs.push_back(encode(examples[i], nf->rep, cfg));
      nf->model = train_ensemble(seqs, cfg, derive_seed(fold_seed, 2), &nf->rep.table);
    }
    std::vector<std::unique_ptr<eval::Predictor>> out;
    for (auto k : kinds) {
      switch (k) {
        case ModelKind::NaiveBayes:
        case ModelKind::RandomForest: {
          auto bm = std::make_shared<BaselineModel>(
              train_baseline(k, examples, train, cfg,
                             derive_seed(fold_seed, k == ModelKind::NaiveBayes ? 3 : 4)));
          out.push_back(std::make_unique<FnPredictor>(
              [bm, examples](std::size_t i) { return bm->predict(examples[i].units).label; }));
          break;
        }
        case ModelKind::ModelA:
        case ModelKind::ModelB:
        case ModelKind::ModelC: {
          const std::size_t m = static_cast<std::size_t>(k) - static_cast<std::size_t>(ModelKind::ModelA);
          out.push_back(std::make_unique<FnPredictor>([nf, m, examples, &cfg](std::size_t i) {
            const auto seq = encode(examples[i], nf->rep, cfg).seq;
            return argmax_label(nn::forward(seq, nf->model.members[m]).probs);
          }));
          break;
        }
        case ModelKind::Ensemble:
          out.push_back(std::make_unique<FnPredictor>([nf, examples, &cfg](std::size_t i) {
            const auto seq = encode(examples[i], nf->rep, cfg).seq;
            const auto& mm = nf->model.members;
            return ensemble::predict_ensemble({&mm[0], &mm[1], &mm[2]}, nf->model.weights.weights,
                                              seq)
                .label;
          }));
          break;
      }
    }
    return out;
  };
  eval::CvOptions opts;
  opts.k = cfg.k;
  opts.seed = cfg.seed;
  opts.jobs = cfg.jobs;
  return eval::cross_validate_many(std::move(names), labels, fit, opts);
}

Artifacts train_artifacts(std::span<const Example> examples, std::span<const ModelKind> kinds,
                          const RunConfig& cfg) {
  if (examples.empty()) throw DataError("no labeled records to train on");
  std::vector<std::size_t> all(examples.size());
  std::iota(all.begin(), all.end(), 0);
  Artifacts a;
  if (std::any_of(kinds.begin(), kinds.end(), is_neural)) {
    a.rep = build_representation(examples, all, cfg, derive_seed(cfg.seed, 1));
    std::vector<nn::LabeledSequence> seqs;
    seqs.reserve(examples.size());
    for (const auto& ex : examples) seqs.push_back(encode(ex, *a.rep, cfg));
    a.ensemble = train_ensemble(seqs, cfg, derive_seed(cfg.seed, 2), &a.rep->table);
  }
  for (auto k : kinds) {
    if (k == ModelKind::NaiveBayes) {
      a.nb = train_baseline(k, examples, all, cfg, derive_seed(cfg.seed, 3));
    } else if (k == ModelKind::RandomForest) {
      a.rf = train_baseline(k, examples, all, cfg, derive_seed(cfg.seed, 4));
    }
  }
  return a;
}

namespace {

const char* kMemberFiles[3] = {"model-a.json", "model-b.json", "model-c.json"};

void save_vectorizer(const baselines::BowVectorizer& v, const fs::path& path) {
  const json j = {{"mode", v.mode() == baselines::BowMode::TfIdf ? "tfidf" : "counts"},
                  {"columns", v.columns()},
                  {"idf", v.idf()}};
  detail::write_file_atomic(path, j.dump());
}

baselines::BowVectorizer load_vectorizer(const fs::path& path) {
  try {
    const auto j = json::parse(detail::read_file(path));
    const auto mode = j.at("mode").get<std::string>();
    if (mode != "tfidf" && mode != "counts") throw DataError("unknown vectorizer mode " + mode);
    return baselines::BowVectorizer::from_parts(
        mode == "tfidf" ? baselines::BowMode::TfIdf : baselines::BowMode::Counts,
        j.at("columns").get<std::vector<std::string>>(), j.at("idf").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw DataError("malformed vectorizer " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace

void save_artifacts(const Artifacts& a, const fs::path& dir, const RunConfig& cfg) {
  fs::create_directories(dir);
  detail::write_file_atomic(dir / "config.json", config_to_json(cfg));
  if (a.rep) {
    textrep::save_vocab(a.rep->vocab, dir / "vocab.txt");
    textrep::save_table(a.rep->table, dir / "embeddings.txt", textrep::TableFormat::Text);
  }
  if (a.ensemble) {
    for (std::size_t m = 0; m < 3; ++m) {
      nn::save_checkpoint({a.ensemble->members[m], cfg.train}, dir / kMemberFiles[m]);
    }
    ensemble::save_weights(a.ensemble->weights, dir / "weights.json");
  }
  fs::create_directories(dir);
  if (a.nb) {
    save_vectorizer(a.nb->vectorizer, dir / "nb-vectorizer.json");
    baselines::save_nb(*a.nb->nb, dir / "nb.json");
  }
  if (a.rf) {
    save_vectorizer(a.rf->vectorizer, dir / "rf-vectorizer.json");
    baselines::save_rf(*a.rf->rf, dir / "rf.json");
  }
}

Artifacts load_artifacts(const fs::path& dir) {
  Artifacts a;
  if (fs::exists(dir / "vocab.txt")) {
    Representation rep;
    rep.vocab = textrep::load_vocab(dir / "vocab.txt");
    rep.table = textrep::load_table(dir / "embeddings.txt");
    a.rep = std::move(rep);
  }
  if (fs::exists(dir / kMemberFiles[0])) {
    EnsembleModel em;
    for (std::size_t m = 0; m < 3; ++m) em.members[m] = nn::load_checkpoint(dir / kMemberFiles[m]).params;
    if (fs::exists(dir / "weights.json")) em.weights = ensemble::load_weights(dir / "weights.json");
    a.ensemble = std::move(em);
  }
  if (fs::exists(dir / "nb.json")) {
    BaselineModel m;
    m.kind = ModelKind::NaiveBayes;
    m.vectorizer = load_vectorizer(dir / "nb-vectorizer.json");
    m.nb = baselines::load_nb(dir / "nb.json");
    a.nb = std::move(m);
  }
  if (fs::exists(dir / "rf.json")) {
    BaselineModel m;
    m.kind = ModelKind::RandomForest;
    m.vectorizer = load_vectorizer(dir / "rf-vectorizer.json");
    m.rf = baselines::load_rf(dir / "rf.json");
    a.rf = std::move(m);
  }
  if (!a.ensemble && !a.nb && !a.rf) throw DataError("no model files in " + dir.string());
  return a;
}

}  // namespace cmsa::experiment
