#include "cmsa/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "cmsa/error.hpp"
#include "cmsa/rng.hpp"
#include "io_util.hpp"
#include "json.hpp"

namespace cmsa::ensemble {

namespace {

constexpr double kSimplexTol = 1e-9;

bool on_simplex(const ClassProbs& p) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= -kSimplexTol) || !std::isfinite(v)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= kSimplexTol;
}

}  // namespace

void EnsembleWeights::validate() const {
  double sum = 0.0;
  for (double v : w) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("ensemble weight is negative or non-finite");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSimplexTol) throw std::invalid_argument("ensemble weights do not sum to 1");
}

void PredictionMatrix::validate() const {
  for (const auto& member : probs) {
    if (member.size() != golds.size()) {
      throw std::invalid_argument("prediction matrix: member row count differs from gold count");
    }
    for (const auto& row : member) {
      if (!on_simplex(row)) throw std::invalid_argument("prediction matrix: row off the simplex");
    }
  }
}

ClassProbs weighted_average(const std::array<ClassProbs, kNumMembers>& rows,
                            const EnsembleWeights& w) {
  w.validate();
  ClassProbs out{};
  for (std::size_t m = 0; m < kNumMembers; ++m) {
    if (!on_simplex(rows[m])) throw std::invalid_argument("weighted_average: row off the simplex");
    for (std::size_t c = 0; c < kNumClasses; ++c) out[c] += w.w[m] * rows[m][c];
  }
  return out;
}

namespace {

NelderMeadResult simplex_run(const Objective& f, std::vector<double> start,
                             const NelderMeadConfig& cfg) {
  const std::size_t n = start.size();
  std::vector<std::vector<double>> x(n + 1, start);
  std::vector<double> fx(n + 1);
  NelderMeadResult r;
  auto eval = [&](const std::vector<double>& p) {
    ++r.evaluations;
    const double v = f(p);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  for (std::size_t i = 0; i < n; ++i) x[i + 1][i] += cfg.initial_step;
  for (std::size_t i = 0; i <= n; ++i) fx[i] = eval(x[i]);

  std::vector<std::size_t> idx(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  auto sort_simplex = [&] {
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
    std::vector<std::vector<double>> xs(n + 1);
    std::vector<double> fs(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
      xs[k] = std::move(x[idx[k]]);
      fs[k] = fx[idx[k]];
    }
    x.swap(xs);
    fx.swap(fs);
  };
  auto along = [&](double t, std::vector<double>& out) {
    // out = centroid + t * (centroid - worst)
    for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + t * (centroid[j] - x[n][j]);
  };

  for (;;) {
    sort_simplex();
    double diameter = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t j = 0; j < n; ++j) diameter = std::max(diameter, std::abs(x[i][j] - x[0][j]));
    }
    if (r.iterations >= cfg.max_iter || diameter < cfg.x_tol || fx[n] - fx[0] < cfg.f_tol) break;
    ++r.iterations;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) centroid[j] += x[i][j] / static_cast<double>(n);
    }
    along(1.0, xr);
    const double fr = eval(xr);
    if (fr < fx[0]) {
      along(2.0, xe);
      const double fe = eval(xe);
      if (fe < fr) {
        x[n] = xe;
        fx[n] = fe;
      } else {
        x[n] = xr;
        fx[n] = fr;
      }
      continue;
    }
    if (fr < fx[n - 1]) {
      x[n] = xr;
      fx[n] = fr;
      continue;
    }
    bool shrink = false;
    if (fr < fx[n]) {
      along(0.5, xc);
      const double fc = eval(xc);
      if (fc <= fr) {
        x[n] = xc;
        fx[n] = fc;
      } else {
        shrink = true;
      }
    } else {
      along(-0.5, xc);
      const double fc = eval(xc);
      if (fc < fx[n]) {
        x[n] = xc;
        fx[n] = fc;
      } else {
        shrink = true;
      }
    }
    if (shrink) {
      for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 0; j < n; ++j) x[i][j] = x[0][j] + 0.5 * (x[i][j] - x[0][j]);
        fx[i] = eval(x[i]);
      }
    }
  }
  r.x = x[0];
  r.f = fx[0];
  return r;
}

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, std::span<const double> x0,
                             const NelderMeadConfig& cfg) {
  std::vector<double> start(x0.begin(), x0.end());
  const double f0 = f(start);
  if (!std::isfinite(f0)) throw std::invalid_argument("nelder_mead: f(x0) is not finite");
  NelderMeadResult best{start, f0, 0, 1};
  if (start.empty()) return best;
  Rng rng(cfg.seed);
  const std::size_t runs = std::max<std::size_t>(1, cfg.restarts);
  std::size_t iterations = 0, evaluations = 1;
  for (std::size_t run = 0; run < runs; ++run) {
    std::vector<double> from = start;
    if (run > 0) {
      for (auto& v : from) v += cfg.restart_jitter * rng.normal();
    }
    auto r = simplex_run(f, from, cfg);
    iterations += r.iterations;
    evaluations += r.evaluations;
    if (r.f < best.f) best = std::move(r);
  }
  best.iterations = iterations;
  best.evaluations = evaluations;
  return best;
}

std::string_view to_string(WeightObjective o) noexcept {
  return o == WeightObjective::CrossEntropy ? "cross_entropy" : "neg_accuracy";
}

std::optional<WeightObjective> parse_objective(std::string_view s) noexcept {
  if (s == "cross_entropy") return WeightObjective::CrossEntropy;
  if (s == "neg_accuracy") return WeightObjective::NegAccuracy;
  return std::nullopt;
}

EnsembleWeights weights_from_logits(std::span<const double> u) {
  if (u.size() != kNumMembers) throw std::invalid_argument("weights_from_logits: need 3 logits");
  const auto p = nn::softmax(u);
  EnsembleWeights w;
  for (std::size_t m = 0; m < kNumMembers; ++m) w.w[m] = p[m];
  return w;
}

namespace {

ClassProbs mix(const PredictionMatrix& preds, std::size_t i, const EnsembleWeights& w) {
  ClassProbs out{};
  for (std::size_t m = 0; m < kNumMembers; ++m) {
    for (std::size_t c = 0; c < kNumClasses; ++c) out[c] += w.w[m] * preds.probs[m][i][c];
  }
  return out;
}

}  // namespace

double evaluate_objective(const PredictionMatrix& preds, const EnsembleWeights& w,
                          WeightObjective objective) {
  const std::size_t n = preds.size();
  if (n == 0) throw std::invalid_argument("evaluate_objective: empty prediction matrix");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = mix(preds, i, w);
    const std::size_t gold = index_of(preds.golds[i]);
    if (objective == WeightObjective::CrossEntropy) {
      total -= std::log(std::max(p[gold], std::numeric_limits<double>::min()));
    } else {
      total -= argmax_label(p) == preds.golds[i] ? 1.0 : 0.0;
    }
  }
  return total / static_cast<double>(n);
}

WeightFit optimize_weights(const PredictionMatrix& preds, WeightObjective objective,
                           const NelderMeadConfig& cfg) {
  if (preds.size() == 0) throw std::invalid_argument("optimize_weights: N = 0");
  preds.validate();
  const auto f = [&](std::span<const double> u) {
    return evaluate_objective(preds, weights_from_logits(u), objective);
  };
  const std::array<double, kNumMembers> u0{0.0, 0.0, 0.0};
  const auto r = nelder_mead(f, u0, cfg);
  WeightFit fit;
  fit.objective = objective;
  fit.seed = cfg.seed;
  fit.uniform_value = evaluate_objective(preds, EnsembleWeights::uniform(), objective);
  fit.weights = weights_from_logits(r.x);
  fit.objective_value = evaluate_objective(preds, fit.weights, objective);
  if (!(fit.objective_value <= fit.uniform_value)) {
    fit.weights = EnsembleWeights::uniform();
    fit.objective_value = fit.uniform_value;
  }
  return fit;
}

EnsemblePrediction predict_ensemble(const std::array<const nn::ModelParams*, kNumMembers>& models,
                                    const EnsembleWeights& w,
                                    const textrep::EmbeddedSequence& seq) {
  EnsemblePrediction out;
  for (std::size_t m = 0; m < kNumMembers; ++m) {
    if (!models[m]) throw std::invalid_argument("predict_ensemble: missing member model");
    out.member_probs[m] = nn::forward(seq, *models[m]).probs;
  }
  out.probs = weighted_average(out.member_probs, w);
  out.label = argmax_label(out.probs);
  return out;
}

void save_weights(const WeightFit& fit, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["w"] = fit.weights.w;
  j["objective"] = std::string(to_string(fit.objective));
  j["objective_value"] = fit.objective_value;
  j["seed"] = fit.seed;
  detail::write_file_atomic(path, j.dump(2) + "\n");
}

WeightFit load_weights(const std::filesystem::path& path) {
  try {
    const auto j = nlohmann::json::parse(detail::read_file(path));
    WeightFit fit;
    const auto w = j.at("w").get<std::vector<double>>();
    if (w.size() != kNumMembers) throw DataError("weights file must hold three weights");
    std::copy(w.begin(), w.end(), fit.weights.w.begin());
    fit.weights.validate();
    const auto obj = parse_objective(j.at("objective").get<std::string>());
    if (!obj) throw DataError("unknown objective in weights file");
    fit.objective = *obj;
    fit.objective_value = j.at("objective_value").get<double>();
    fit.seed = j.value("seed", std::uint64_t{0});
    return fit;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed weights file " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError("invalid weights file " + path.string() + ": " + e.what());
  }
}

}  // namespace cmsa::ensemble
