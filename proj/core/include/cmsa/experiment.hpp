#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmsa/baselines.hpp"
#include "cmsa/codeswitch.hpp"
#include "cmsa/corpus.hpp"
#include "cmsa/ensemble.hpp"
#include "cmsa/eval.hpp"
#include "cmsa/nn.hpp"
#include "cmsa/textrep.hpp"

namespace cmsa::experiment {

struct Paths {
  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> lexicon;
  std::vector<std::filesystem::path> dictionaries;
  std::optional<std::filesystem::path> vocab;
  std::optional<std::filesystem::path> embeddings;
  std::optional<std::filesystem::path> translation_cache;
  std::filesystem::path out_dir = ".";
};

/// Everything one run depends on. `seed` feeds every random choice.
struct RunConfig {
  Paths paths;
  nn::TrainConfig train;
  ensemble::WeightObjective objective = ensemble::WeightObjective::CrossEntropy;
  ensemble::NelderMeadConfig nelder_mead;
  double validation_fraction = 0.1;
  baselines::NbConfig nb;
  baselines::RfConfig rf;
  std::size_t embedding_dim = 64;
  std::size_t max_len = 64;
  std::size_t min_word_freq = 2;
  std::uint64_t min_lexicon_freq = 1;
  bool use_gloss = true;
  std::size_t k = 10;
  std::uint64_t seed = 0;
  bool offline = true;
  std::size_t jobs = 1;
  std::optional<std::string> translator_endpoint;

  /// Relative paths are resolved against `base`.
  void resolve_paths(const std::filesystem::path& base);
};

/// Absent or null keys keep their defaults; unknown keys are errors.
RunConfig config_from_json(std::string_view json);
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& cfg);

enum class ModelKind { NaiveBayes, RandomForest, ModelA, ModelB, ModelC, Ensemble };

std::string_view to_string(ModelKind k) noexcept;
/// nb, rf, model-a, model-b, model-c, ensemble.
std::optional<ModelKind> parse_model_kind(std::string_view s) noexcept;
/// Accepts a comma-separated list or "all". Throws std::invalid_argument.
std::vector<ModelKind> parse_model_list(std::string_view s);

/// One labeled record after preprocessing.
struct Example {
  std::string id;
  Label label = Label::Neutral;
  codeswitch::TokenizedText tokens;
  std::vector<std::string> units;  // what gets embedded / counted
};

/// Builds the preprocessor from the configured lexicon, dictionaries and
/// translation cache. Without a lexicon every word is a candidate.
codeswitch::Preprocessor make_preprocessor(const RunConfig& cfg);

/// Preprocesses the records carrying a final label, in dataset order.
std::vector<Example> prepare_examples(const corpus::Dataset& ds,
                                      const codeswitch::Preprocessor& pre, bool use_gloss);

struct Representation {
  textrep::SubwordVocab vocab;
  textrep::EmbeddingTable table;
};

/// Loads the configured vocab/table, or builds the vocab from the given
/// training examples and draws a seeded random table.
Representation build_representation(std::span<const Example> examples,
                                    std::span<const std::size_t> train, const RunConfig& cfg,
                                    std::uint64_t seed);

nn::LabeledSequence encode(const Example& ex, const Representation& rep, const RunConfig& cfg);

inline constexpr std::array<nn::Variant, 3> kMemberVariants{
    nn::Variant::Stacked, nn::Variant::Attention, nn::Variant::Pooling};

struct EnsembleModel {
  std::array<nn::ModelParams, 3> members;
  ensemble::WeightFit weights;
};

/// Splits a seeded validation slice off `data` (used for early stopping and
/// weight fitting), trains the three members and fits the weights.
EnsembleModel train_ensemble(std::span<const nn::LabeledSequence> data, const RunConfig& cfg,
                             std::uint64_t seed, const textrep::EmbeddingTable* table);

/// Fits the ensemble weights of already trained members on `data`.
ensemble::WeightFit fit_weights(const std::array<const nn::ModelParams*, 3>& members,
                                std::span<const nn::LabeledSequence> data, const RunConfig& cfg,
                                std::uint64_t seed);

/// A fitted bag-of-words baseline.
struct BaselineModel {
  ModelKind kind = ModelKind::NaiveBayes;
  baselines::BowVectorizer vectorizer;
  std::optional<baselines::NBModel> nb;
  std::optional<baselines::RFModel> rf;

  baselines::Prediction predict(const std::vector<std::string>& units) const;
};

BaselineModel train_baseline(ModelKind kind, std::span<const Example> examples,
                             std::span<const std::size_t> train, const RunConfig& cfg,
                             std::uint64_t seed);

/// Stratified k-fold evaluation of the requested models. Neural members
/// and the ensemble share one training run per fold.
std::vector<eval::MetricsReport> evaluate(std::span<const Example> examples,
                                          std::span<const ModelKind> kinds, const RunConfig& cfg);

/// A full-data model directory: config.json, vocab.txt, embeddings.txt,
/// model-{a,b,c}.json, weights.json, and for baselines {nb,rf}-vectorizer.json
/// plus nb.json / rf.json.
struct Artifacts {
  std::optional<Representation> rep;
  std::optional<EnsembleModel> ensemble;
  std::optional<BaselineModel> nb;
  std::optional<BaselineModel> rf;
};

Artifacts train_artifacts(std::span<const Example> examples, std::span<const ModelKind> kinds,
                          const RunConfig& cfg);
void save_artifacts(const Artifacts& a, const std::filesystem::path& dir, const RunConfig& cfg);
Artifacts load_artifacts(const std::filesystem::path& dir);

}  // namespace cmsa::experiment
