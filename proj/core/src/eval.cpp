#include "cmsa/eval.hpp"

#include <algorithm>
#include <charconv>
#include <exception>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cmsa/error.hpp"
#include "cmsa/rng.hpp"
#include "json.hpp"

namespace cmsa::eval {

std::vector<std::size_t> FoldAssignment::test_indices(std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] == f) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::train_indices(std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] != f) out.push_back(i);
  }
  return out;
}

FoldAssignment kfold_split(std::span<const Label> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold_split: k must be at least 2");
  std::array<std::vector<std::size_t>, kNumClasses> strata;
  for (std::size_t i = 0; i < labels.size(); ++i) strata[index_of(labels[i])].push_back(i);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (!strata[c].empty() && strata[c].size() < k) {
      throw std::invalid_argument("kfold_split: class \"" + std::string(to_string(label_at(c))) +
                                  "\" has " + std::to_string(strata[c].size()) +
                                  " records, fewer than k = " + std::to_string(k));
    }
  }
  FoldAssignment out;
  out.k = k;
  out.fold.assign(labels.size(), 0);
  std::size_t next = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& members = strata[c];
    Rng rng(derive_seed(seed, c));
    rng.shuffle(std::span<std::size_t>(members));
    for (auto i : members) out.fold[i] = next++ % k;
  }
  return out;
}

Metrics metrics_from_confusion(const Confusion& cm) {
  Metrics m;
  m.confusion = cm;
  std::size_t n = 0, trace = 0;
  std::array<std::size_t, kNumClasses> predicted{};
  for (std::size_t g = 0; g < kNumClasses; ++g) {
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      n += cm[g][p];
      predicted[p] += cm[g][p];
    }
    trace += cm[g][g];
  }
  if (n == 0) throw std::invalid_argument("metrics: empty confusion matrix");
  m.n = n;
  const double N = static_cast<double>(n);
  m.accuracy = static_cast<double>(trace) / N;
  // Each class term is support * numerator / denominator, multiplied first so
  // the recall term reduces to TP exactly and weighted recall equals accuracy.
  double wp = 0.0, wr = 0.0, wf = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& pc = m.per_class[c];
    const std::size_t tp = cm[c][c];
    std::size_t support = 0;
    for (std::size_t p = 0; p < kNumClasses; ++p) support += cm[c][p];
    const std::size_t fp = predicted[c] - tp;
    const std::size_t fn = support - tp;
    const double s = static_cast<double>(support);
    const double t = static_cast<double>(tp);
    pc.support = support;
    pc.no_predictions = predicted[c] == 0;
    if (predicted[c] > 0) {
      pc.precision = t / static_cast<double>(predicted[c]);
      wp += s * t / static_cast<double>(predicted[c]);
    }
    if (support > 0) {
      pc.recall = t / s;
      wr += s * t / s;
    }
    if (2 * tp + fp + fn > 0) {
      const double denom = static_cast<double>(2 * tp + fp + fn);
      pc.f1 = 2.0 * t / denom;
      wf += s * 2.0 * t / denom;
    }
  }
  m.precision = wp / N;
  m.recall = wr / N;
  m.f1 = wf / N;
  return m;
}

Metrics compute_metrics(std::span<const Label> golds, std::span<const Label> preds) {
  if (golds.size() != preds.size()) {
    throw std::invalid_argument("compute_metrics: " + std::to_string(golds.size()) + " golds vs " +
                                std::to_string(preds.size()) + " predictions");
  }
  if (golds.empty()) throw std::invalid_argument("compute_metrics: empty input");
  Confusion cm{};
  for (std::size_t i = 0; i < golds.size(); ++i) ++cm[index_of(golds[i])][index_of(preds[i])];
  return metrics_from_confusion(cm);
}

MetricsReport aggregate(std::string model, std::vector<Metrics> folds) {
  MetricsReport r;
  r.model = std::move(model);
  r.folds = std::move(folds);
  if (r.folds.empty()) return r;
  for (const auto& m : r.folds) {
    r.accuracy += m.accuracy;
    r.precision += m.precision;
    r.recall += m.recall;
    r.f1 += m.f1;
    for (std::size_t g = 0; g < kNumClasses; ++g) {
      for (std::size_t p = 0; p < kNumClasses; ++p) r.confusion[g][p] += m.confusion[g][p];
    }
  }
  const double k = static_cast<double>(r.folds.size());
  r.accuracy /= k;
  r.precision /= k;
  r.recall /= k;
  r.f1 /= k;
  return r;
}

std::vector<MetricsReport> cross_validate_many(std::vector<std::string> models,
                                               std::span<const Label> labels,
                                               const MultiPipelineFit& fit,
                                               const CvOptions& opts) {
  const auto folds = kfold_split(labels, opts.k, opts.seed);
  std::vector<std::vector<Metrics>> per_model(models.size(), std::vector<Metrics>(opts.k));
  std::vector<std::exception_ptr> errors(opts.k);

  auto run_fold = [&](std::size_t f) {
    try {
      const auto train = folds.train_indices(f);
      const auto test = folds.test_indices(f);
      auto predictors = fit(train, derive_seed(opts.seed, 1000 + f));
      if (predictors.size() != models.size()) {
        throw Error("pipeline returned " + std::to_string(predictors.size()) +
                    " predictors for " + std::to_string(models.size()) + " models");
      }
      std::vector<Label> golds;
      golds.reserve(test.size());
      for (auto i : test) golds.push_back(labels[i]);
      for (std::size_t m = 0; m < models.size(); ++m) {
        std::vector<Label> preds;
        preds.reserve(test.size());
        for (auto i : test) preds.push_back(predictors[m]->predict(i));
        per_model[m][f] = compute_metrics(golds, preds);
      }
    } catch (...) {
      errors[f] = std::current_exception();
    }
  };

  const std::size_t jobs = std::clamp<std::size_t>(opts.jobs, 1, opts.k);
  if (jobs == 1) {
    for (std::size_t f = 0; f < opts.k; ++f) run_fold(f);
  } else {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        for (std::size_t f = w; f < opts.k; f += jobs) run_fold(f);
      });
    }
  }

  for (std::size_t f = 0; f < opts.k; ++f) {
    if (!errors[f]) continue;
    try {
      std::rethrow_exception(errors[f]);
    } catch (const std::exception& e) {
      throw Error("fold " + std::to_string(f) + ": " + e.what());
    }
  }

  std::vector<MetricsReport> out;
  out.reserve(models.size());
  for (std::size_t m = 0; m < models.size(); ++m) {
    out.push_back(aggregate(std::move(models[m]), std::move(per_model[m])));
  }
  return out;
}

MetricsReport cross_validate(std::string model, std::span<const Label> labels,
                             const PipelineFit& fit, const CvOptions& opts) {
  MultiPipelineFit multi = [&](std::span<const std::size_t> train, std::uint64_t seed) {
    std::vector<std::unique_ptr<Predictor>> v;
    v.push_back(fit(train, seed));
    return v;
  };
  return std::move(cross_validate_many({std::move(model)}, labels, multi, opts).front());
}

std::optional<ReportFormat> parse_report_format(std::string_view s) noexcept {
  if (s == "text" || s == "text-table" || s == "table") return ReportFormat::TextTable;
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  return std::nullopt;
}

namespace {

using nlohmann::json;

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

json confusion_json(const Confusion& c) {
  json j = json::array();
  for (const auto& row : c) j.push_back(row);
  return j;
}

Confusion confusion_from(const json& j) {
  Confusion c{};
  if (j.size() != kNumClasses) throw DataError("confusion matrix must be 3x3");
  for (std::size_t g = 0; g < kNumClasses; ++g) {
    if (j[g].size() != kNumClasses) throw DataError("confusion matrix must be 3x3");
    for (std::size_t p = 0; p < kNumClasses; ++p) c[g][p] = j[g][p].get<std::size_t>();
  }
  return c;
}

json metrics_json(const Metrics& m) {
  json pc = json::array();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& x = m.per_class[c];
    pc.push_back({{"label", to_string(label_at(c))},
                  {"precision", x.precision},
                  {"recall", x.recall},
                  {"f1", x.f1},
                  {"support", x.support},
                  {"no_predictions", x.no_predictions}});
  }
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall},
          {"f1", m.f1},             {"n", m.n},                 {"confusion", confusion_json(m.confusion)},
          {"per_class", pc}};
}

Metrics metrics_from(const json& j) {
  Metrics m;
  m.accuracy = j.at("accuracy").get<double>();
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.n = j.at("n").get<std::size_t>();
  m.confusion = confusion_from(j.at("confusion"));
  const auto& pc = j.at("per_class");
  if (pc.size() != kNumClasses) throw DataError("per_class must have three entries");
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& x = m.per_class[c];
    x.precision = pc[c].at("precision").get<double>();
    x.recall = pc[c].at("recall").get<double>();
    x.f1 = pc[c].at("f1").get<double>();
    x.support = pc[c].at("support").get<std::size_t>();
    x.no_predictions = pc[c].at("no_predictions").get<bool>();
  }
  return m;
}

std::string render_text(std::span<const MetricsReport> reports) {
  std::size_t width = std::string_view("Model Name").size();
  for (const auto& r : reports) width = std::max(width, r.model.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "Model Name";
  for (const char* h : {"Accuracy", "Precision", "Recall", "F1"}) {
    os << "  " << std::right << std::setw(9) << h;
  }
  os << '\n';
  os << std::fixed << std::setprecision(2);
  for (const auto& r : reports) {
    os << std::left << std::setw(static_cast<int>(width)) << r.model;
    for (double v : {r.accuracy, r.precision, r.recall, r.f1}) {
      os << "  " << std::right << std::setw(9) << v;
    }
    os << '\n';
  }
  return os.str();
}

std::string render_csv(std::span<const MetricsReport> reports) {
  std::string out = "model,fold,accuracy,precision,recall,f1\n";
  auto row = [&](const std::string& model, const std::string& fold, double a, double p, double r,
                 double f) {
    out += csv_field(model) + ',' + fold + ',' + shortest(a) + ',' + shortest(p) + ',' +
           shortest(r) + ',' + shortest(f) + '\n';
  };
  for (const auto& r : reports) {
    for (std::size_t f = 0; f < r.folds.size(); ++f) {
      const auto& m = r.folds[f];
      row(r.model, std::to_string(f), m.accuracy, m.precision, m.recall, m.f1);
    }
    row(r.model, "mean", r.accuracy, r.precision, r.recall, r.f1);
  }
  return out;
}

std::string render_json(std::span<const MetricsReport> reports) {
  json arr = json::array();
  for (const auto& r : reports) {
    json folds = json::array();
    for (const auto& m : r.folds) folds.push_back(metrics_json(m));
    arr.push_back({{"model", r.model},
                   {"folds", folds},
                   {"mean",
                    {{"accuracy", r.accuracy},
                     {"precision", r.precision},
                     {"recall", r.recall},
                     {"f1", r.f1}}},
                   {"confusion", confusion_json(r.confusion)}});
  }
  return arr.dump(2) + "\n";
}

}  // namespace

std::string render_report(std::span<const MetricsReport> reports, ReportFormat format) {
  switch (format) {
    case ReportFormat::TextTable: return render_text(reports);
    case ReportFormat::Csv: return render_csv(reports);
    case ReportFormat::Json: return render_json(reports);
  }
  return {};
}

std::vector<MetricsReport> parse_report_json(std::string_view text) {
  try {
    const auto arr = json::parse(text);
    if (!arr.is_array()) throw DataError("report JSON must be an array");
    std::vector<MetricsReport> out;
    for (const auto& j : arr) {
      MetricsReport r;
      r.model = j.at("model").get<std::string>();
      for (const auto& f : j.at("folds")) r.folds.push_back(metrics_from(f));
      const auto& mean = j.at("mean");
      r.accuracy = mean.at("accuracy").get<double>();
      r.precision = mean.at("precision").get<double>();
      r.recall = mean.at("recall").get<double>();
      r.f1 = mean.at("f1").get<double>();
      r.confusion = confusion_from(j.at("confusion"));
      out.push_back(std::move(r));
    }
    return out;
  } catch (const json::exception& e) {
    throw DataError("malformed report JSON: " + std::string(e.what()));
  }
}

}  // namespace cmsa::eval
