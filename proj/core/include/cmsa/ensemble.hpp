#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmsa/label.hpp"
#include "cmsa/nn.hpp"

namespace cmsa::ensemble {

inline constexpr std::size_t kNumMembers = 3;

/// Convex combination coefficients, one per member model.
struct EnsembleWeights {
  std::array<double, kNumMembers> w{1.0 / 3, 1.0 / 3, 1.0 / 3};

  static EnsembleWeights uniform() { return {}; }
  /// Throws std::invalid_argument unless w >= 0 and sums to 1 +- 1e-9.
  void validate() const;
};

/// Per member an N x 3 probability matrix, plus the gold labels.
struct PredictionMatrix {
  std::array<std::vector<ClassProbs>, kNumMembers> probs;
  std::vector<Label> golds;

  std::size_t size() const noexcept { return golds.size(); }
  /// Rows on the simplex and equal N across members; throws otherwise.
  void validate() const;
};

/// sum_m w_m * rows[m]. Throws std::invalid_argument when the weights or
/// a row is off the simplex.
ClassProbs weighted_average(const std::array<ClassProbs, kNumMembers>& rows,
                            const EnsembleWeights& w);

struct NelderMeadConfig {
  std::size_t max_iter = 2000;
  double x_tol = 1e-8;
  double f_tol = 1e-12;
  std::size_t restarts = 5;
  std::uint64_t seed = 0;
  double initial_step = 1.0;
  double restart_jitter = 0.5;
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
};

using Objective = std::function<double(std::span<const double>)>;

/// Downhill simplex (reflection 1, expansion 2, contraction 0.5, shrink
/// 0.5). The first run starts at x0, later runs at seeded jitters of x0;
/// the best vertex over all runs is returned. Throws std::invalid_argument
/// when f(x0) is not finite.
NelderMeadResult nelder_mead(const Objective& f, std::span<const double> x0,
                             const NelderMeadConfig& cfg = {});

enum class WeightObjective { CrossEntropy, NegAccuracy };

std::string_view to_string(WeightObjective o) noexcept;
std::optional<WeightObjective> parse_objective(std::string_view s) noexcept;

/// Softmax map from unconstrained u to the simplex.
EnsembleWeights weights_from_logits(std::span<const double> u);

double evaluate_objective(const PredictionMatrix& preds, const EnsembleWeights& w,
                          WeightObjective objective);

struct WeightFit {
  EnsembleWeights weights;
  WeightObjective objective = WeightObjective::CrossEntropy;
  double objective_value = 0.0;
  double uniform_value = 0.0;
  std::uint64_t seed = 0;
};

/// Nelder-Mead over u in R^3 started from u = 0, mapped through softmax.
/// Never returns weights whose objective exceeds the uniform weights'.
/// Throws std::invalid_argument when N = 0.
WeightFit optimize_weights(const PredictionMatrix& preds, WeightObjective objective,
                           const NelderMeadConfig& cfg = {});

struct EnsemblePrediction {
  Label label = Label::Neutral;
  ClassProbs probs{};
  std::array<ClassProbs, kNumMembers> member_probs{};
};

EnsemblePrediction predict_ensemble(
    const std::array<const nn::ModelParams*, kNumMembers>& models,
    const EnsembleWeights& w, const textrep::EmbeddedSequence& seq);

/// {"w": [..], "objective": str, "objective_value": float, "seed": int}
void save_weights(const WeightFit& fit, const std::filesystem::path& path);
WeightFit load_weights(const std::filesystem::path& path);

}  // namespace cmsa::ensemble
