#include <doctest.h>

#include <algorithm>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "cmsa/error.hpp"
#include "cmsa/eval.hpp"
#include "cmsa/rng.hpp"

using namespace cmsa;
using namespace cmsa::eval;

namespace {

std::vector<Label> expand(const Confusion& c, std::vector<Label>& preds) {
  std::vector<Label> golds;
  for (std::size_t g = 0; g < 3; ++g) {
    for (std::size_t p = 0; p < 3; ++p) {
      for (std::size_t i = 0; i < c[g][p]; ++i) {
        golds.push_back(static_cast<Label>(g));
        preds.push_back(static_cast<Label>(p));
      }
    }
  }
  return golds;
}

std::vector<Label> with_counts(std::size_t neg, std::size_t neu, std::size_t pos) {
  std::vector<Label> y;
  y.insert(y.end(), neg, Label::Negative);
  y.insert(y.end(), neu, Label::Neutral);
  y.insert(y.end(), pos, Label::Positive);
  return y;
}

class FnPredictor final : public Predictor {
 public:
  explicit FnPredictor(std::function<Label(std::size_t)> f) : f_(std::move(f)) {}
  Label predict(std::size_t record) const override { return f_(record); }

 private:
  std::function<Label(std::size_t)> f_;
};

Label shifted(Label l) { return static_cast<Label>((index_of(l) + 1) % 3); }

/// Predicts a training record's own label and a wrong label for anything
/// it has not seen, so any leaked test record shows up as a correct answer.
PipelineFit memorizer(std::span<const Label> labels) {
  return [labels](std::span<const std::size_t> train, std::uint64_t) {
    std::set<std::size_t> seen(train.begin(), train.end());
    return std::make_unique<FnPredictor>([labels, seen](std::size_t r) {
      return seen.count(r) ? labels[r] : shifted(labels[r]);
    });
  };
}

}  // namespace

TEST_CASE("hand confusion matrix") {
  const Confusion c{{{2, 1, 0}, {0, 3, 0}, {1, 0, 3}}};
  std::vector<Label> preds;
  const auto golds = expand(c, preds);
  const auto m = compute_metrics(golds, preds);
  CHECK(m.n == 10);
  CHECK(m.confusion == c);
  CHECK(m.accuracy == doctest::Approx(0.8));
  CHECK(m.recall == doctest::Approx(0.8));
  // Precision: (3 * 2/3 + 3 * 3/4 + 4 * 1) / 10.
  CHECK(m.precision == doctest::Approx(0.825));
  // F1: (3 * 2/3 + 3 * 6/7 + 4 * 6/7) / 10.
  CHECK(m.f1 == doctest::Approx(0.8));
  CHECK(m.per_class[0].precision == doctest::Approx(2.0 / 3));
  CHECK(m.per_class[1].precision == doctest::Approx(0.75));
  CHECK(m.per_class[1].recall == 1.0);
  CHECK(m.per_class[1].f1 == doctest::Approx(6.0 / 7));
  CHECK(m.per_class[2].recall == doctest::Approx(0.75));
  CHECK(m.per_class[2].support == 4);
  CHECK(metrics_from_confusion(c).f1 == m.f1);
}

TEST_CASE("perfect predictions") {
  const auto y = with_counts(5, 3, 2);
  const auto m = compute_metrics(y, y);
  CHECK(m.accuracy == 1.0);
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == 1.0);
}

TEST_CASE("a class never predicted has flagged zero precision") {
  const std::vector<Label> golds{Label::Negative, Label::Neutral, Label::Positive};
  const std::vector<Label> preds{Label::Negative, Label::Negative, Label::Positive};
  const auto m = compute_metrics(golds, preds);
  CHECK(m.per_class[1].no_predictions);
  CHECK(m.per_class[1].precision == 0.0);
  CHECK(m.per_class[1].f1 == 0.0);
  CHECK_FALSE(m.per_class[0].no_predictions);
}

TEST_CASE("metric input errors") {
  const std::vector<Label> a{Label::Negative, Label::Neutral};
  const std::vector<Label> b{Label::Negative};
  CHECK_THROWS_AS(compute_metrics(a, b), std::invalid_argument);
  CHECK_THROWS_AS(compute_metrics({}, {}), std::invalid_argument);
}

TEST_CASE("weighted recall equals accuracy exactly") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(200);
    std::vector<Label> golds(n), preds(n);
    for (std::size_t i = 0; i < n; ++i) {
      golds[i] = static_cast<Label>(rng.below(3));
      preds[i] = static_cast<Label>(rng.below(3));
    }
    const auto m = compute_metrics(golds, preds);
    CHECK(m.recall == m.accuracy);
    std::size_t total = 0, trace = 0;
    for (std::size_t g = 0; g < 3; ++g) {
      for (std::size_t p = 0; p < 3; ++p) total += m.confusion[g][p];
      trace += m.confusion[g][g];
    }
    CHECK(total == n);
    CHECK(m.accuracy == static_cast<double>(trace) / static_cast<double>(n));
    for (double v : {m.accuracy, m.precision, m.recall, m.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    for (const auto& c : m.per_class) {
      if (c.precision + c.recall > 0) {
        CHECK(c.f1 == doctest::Approx(2 * c.precision * c.recall / (c.precision + c.recall)));
      }
    }
  }
}

TEST_CASE("folds for one class of ten are singletons") {
  const std::vector<Label> y(10, Label::Positive);
  const auto f = kfold_split(y, 10, 3);
  for (std::size_t k = 0; k < 10; ++k) CHECK(f.test_indices(k).size() == 1);
}

TEST_CASE("folds partition the records") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng.below(9);
    const auto y = with_counts(k + rng.below(40), k + rng.below(20), k + rng.below(20));
    const auto f = kfold_split(y, k, rng.next_u64());
    REQUIRE(f.fold.size() == y.size());
    std::vector<int> seen(y.size(), 0);
    std::size_t lo = y.size(), hi = 0;
    for (std::size_t fi = 0; fi < k; ++fi) {
      const auto test = f.test_indices(fi);
      const auto train = f.train_indices(fi);
      CHECK(test.size() + train.size() == y.size());
      for (auto i : test) {
        ++seen[i];
        CHECK(std::find(train.begin(), train.end(), i) == train.end());
      }
      lo = std::min(lo, test.size());
      hi = std::max(hi, test.size());
      // Per stratum sizes differ by at most one across folds.
      for (std::size_t c = 0; c < 3; ++c) {
        const auto n_c = static_cast<std::size_t>(
            std::count(y.begin(), y.end(), static_cast<Label>(c)));
        const auto in = static_cast<std::size_t>(std::count_if(
            test.begin(), test.end(), [&](std::size_t i) { return index_of(y[i]) == c; }));
        CHECK(in >= n_c / k);
        CHECK(in <= (n_c + k - 1) / k);
      }
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("3640 records in ten folds") {
  // Strata sizes that divide evenly by ten.
  const auto even = with_counts(2170, 910, 560);
  const auto f = kfold_split(even, 10, 7);
  for (std::size_t k = 0; k < 10; ++k) CHECK(f.test_indices(k).size() == 364);
  // Uneven strata still give near-equal folds.
  const auto uneven = with_counts(2173, 907, 560);
  const auto g = kfold_split(uneven, 10, 7);
  for (std::size_t k = 0; k < 10; ++k) {
    CHECK(g.test_indices(k).size() >= 363);
    CHECK(g.test_indices(k).size() <= 365);
  }
}

TEST_CASE("fold split errors and determinism") {
  const auto y = with_counts(20, 3, 20);
  CHECK_THROWS_AS(kfold_split(y, 1, 0), std::invalid_argument);
  try {
    kfold_split(y, 5, 0);
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("neutral") != std::string::npos);
  }
  const auto present = with_counts(20, 0, 20);
  CHECK_NOTHROW(kfold_split(present, 10, 0));
  const auto a = kfold_split(present, 5, 42);
  const auto b = kfold_split(present, 5, 42);
  const auto c = kfold_split(present, 5, 43);
  CHECK(a.fold == b.fold);
  CHECK(a.fold != c.fold);
}

TEST_CASE("constant predictor on balanced data scores one third") {
  const auto y = with_counts(30, 30, 30);
  const PipelineFit constant = [](std::span<const std::size_t>, std::uint64_t) {
    return std::make_unique<FnPredictor>([](std::size_t) { return Label::Neutral; });
  };
  const auto r = cross_validate("constant", y, constant, CvOptions{10, 1, 1});
  CHECK(r.folds.size() == 10);
  CHECK(r.accuracy == doctest::Approx(1.0 / 3));
  CHECK(r.recall == doctest::Approx(1.0 / 3));
}

TEST_CASE("cross-validation is deterministic and thread-count independent") {
  Rng rng(3);
  std::vector<Label> y;
  for (int i = 0; i < 120; ++i) y.push_back(static_cast<Label>(rng.below(3)));
  const PipelineFit noisy = [&y](std::span<const std::size_t> train, std::uint64_t seed) {
    auto r = std::make_shared<Rng>(seed);
    std::map<std::size_t, Label> table;
    for (std::size_t i = 0; i < y.size(); ++i) table[i] = static_cast<Label>(r->below(3));
    (void)train;
    return std::make_unique<FnPredictor>([table](std::size_t i) { return table.at(i); });
  };
  const auto a = cross_validate("noisy", y, noisy, CvOptions{10, 5, 1});
  const auto b = cross_validate("noisy", y, noisy, CvOptions{10, 5, 1});
  const auto c = cross_validate("noisy", y, noisy, CvOptions{10, 5, 4});
  CHECK(render_report(std::span(&a, 1), ReportFormat::Json) ==
        render_report(std::span(&b, 1), ReportFormat::Json));
  CHECK(render_report(std::span(&a, 1), ReportFormat::Json) ==
        render_report(std::span(&c, 1), ReportFormat::Json));
  const auto d = cross_validate("noisy", y, noisy, CvOptions{10, 6, 1});
  CHECK(render_report(std::span(&a, 1), ReportFormat::Json) !=
        render_report(std::span(&d, 1), ReportFormat::Json));
}

TEST_CASE("leakage canary") {
  const auto y = with_counts(40, 20, 20);
  const CvOptions opts{10, 9, 2};
  const auto honest = cross_validate("memorizer", y, memorizer(y), opts);
  // The harness never shows a test record to fit, so the memorizer is always wrong.
  CHECK(honest.accuracy == 0.0);

  // Duplicating one test record into training is visible immediately.
  const auto folds = kfold_split(y, opts.k, opts.seed);
  auto train = folds.train_indices(0);
  const auto test = folds.test_indices(0);
  train.push_back(test.front());
  const auto leaky = memorizer(y)(train, 0);
  CHECK(leaky->predict(test.front()) == y[test.front()]);

  std::mutex mu;
  const PipelineFit spy = [&](std::span<const std::size_t> tr, std::uint64_t) {
    std::lock_guard lock(mu);
    std::set<std::size_t> s(tr.begin(), tr.end());
    CHECK(s.size() == tr.size());
    CHECK(tr.size() == y.size() - y.size() / opts.k);
    return memorizer(y)(tr, 0);
  };
  cross_validate("spy", y, spy, opts);
}

TEST_CASE("fold failures name the fold") {
  const auto y = with_counts(10, 10, 10);
  int calls = 0;
  const PipelineFit failing = [&](std::span<const std::size_t>, std::uint64_t) -> std::unique_ptr<Predictor> {
    if (calls++ == 2) throw TrainingError("diverged");
    return std::make_unique<FnPredictor>([](std::size_t) { return Label::Neutral; });
  };
  try {
    cross_validate("bad", y, failing, CvOptions{5, 0, 1});
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string what = e.what();
    CHECK(what.find("fold 2") != std::string::npos);
    CHECK(what.find("diverged") != std::string::npos);
  }
}

TEST_CASE("cross_validate_many shares training across models") {
  const auto y = with_counts(20, 20, 20);
  int fits = 0;
  const MultiPipelineFit both = [&](std::span<const std::size_t>, std::uint64_t) {
    ++fits;
    std::vector<std::unique_ptr<Predictor>> out;
    out.push_back(std::make_unique<FnPredictor>([](std::size_t) { return Label::Negative; }));
    out.push_back(std::make_unique<FnPredictor>([&y](std::size_t i) { return y[i]; }));
    return out;
  };
  const auto reports = cross_validate_many({"always-negative", "oracle"}, y, both, CvOptions{5, 0, 1});
  CHECK(fits == 5);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].model == "always-negative");
  CHECK(reports[0].accuracy == doctest::Approx(1.0 / 3));
  CHECK(reports[1].accuracy == 1.0);
  CHECK(reports[1].confusion[2][2] == 20);
}

TEST_CASE("aggregate averages per-fold values") {
  std::vector<Label> p1, p2;
  const auto g1 = expand(Confusion{{{2, 1, 0}, {0, 3, 0}, {1, 0, 3}}}, p1);
  const auto g2 = expand(Confusion{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}, p2);
  const auto r = aggregate("m", {compute_metrics(g1, p1), compute_metrics(g2, p2)});
  CHECK(r.accuracy == doctest::Approx(0.9));
  CHECK(r.precision == doctest::Approx((0.825 + 1.0) / 2));
  CHECK(r.confusion[0][0] == 3);
  CHECK(r.confusion[2][0] == 1);
}

TEST_CASE("report rendering") {
  const auto y = with_counts(3, 3, 3);
  const auto perfect = aggregate("Perfect", {compute_metrics(y, y)});
  std::vector<Label> p;
  const auto g = expand(Confusion{{{2, 1, 0}, {0, 3, 0}, {1, 0, 3}}}, p);
  const auto hand = aggregate("Hand", {compute_metrics(g, p), compute_metrics(y, y)});
  const std::vector<MetricsReport> both{perfect, hand};

  SUBCASE("text table") {
    const auto text = render_report(both, ReportFormat::TextTable);
    std::istringstream in(text);
    std::string header, first, second, extra;
    std::getline(in, header);
    std::getline(in, first);
    std::getline(in, second);
    CHECK_FALSE(std::getline(in, extra));
    CHECK(header.starts_with("Model Name"));
    CHECK(header.find("Accuracy") < header.find("Precision"));
    CHECK(header.find("Precision") < header.find("Recall"));
    CHECK(header.find("Recall") < header.find("F1"));
    CHECK(first.starts_with("Perfect"));
    std::istringstream cells(first.substr(first.find(' ')));
    std::string a, b, c, d;
    cells >> a >> b >> c >> d;
    CHECK(a + " " + b + " " + c + " " + d == "1.00 1.00 1.00 1.00");
    CHECK(second.starts_with("Hand"));
    CHECK(second.find("0.90") != std::string::npos);
  }
  SUBCASE("json round-trip then text") {
    const auto json = render_report(both, ReportFormat::Json);
    const auto back = parse_report_json(json);
    REQUIRE(back.size() == 2);
    CHECK(back[1].model == "Hand");
    CHECK(back[1].precision == hand.precision);
    CHECK(back[1].folds.size() == 2);
    CHECK(back[1].folds[0].confusion == hand.folds[0].confusion);
    CHECK(render_report(back, ReportFormat::TextTable) == render_report(both, ReportFormat::TextTable));
    CHECK(render_report(back, ReportFormat::Json) == json);
    CHECK_THROWS_AS(parse_report_json("{}"), DataError);
    CHECK_THROWS_AS(parse_report_json("[{\"model\":1}]"), DataError);
  }
  SUBCASE("csv") {
    const auto csv = render_report(both, ReportFormat::Csv);
    std::istringstream in(csv);
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    REQUIRE(lines.size() == 1 + 2 + 3);
    CHECK(lines[0] == "model,fold,accuracy,precision,recall,f1");
    CHECK(lines[1] == "Perfect,0,1,1,1,1");
    CHECK(lines[2] == "Perfect,mean,1,1,1,1");
    CHECK(lines[3] == "Hand,0,0.8,0.825,0.8,0.8");
    CHECK(lines[5].starts_with("Hand,mean,0.9,"));
  }
  SUBCASE("format names") {
    CHECK(parse_report_format("text") == ReportFormat::TextTable);
    CHECK(parse_report_format("csv") == ReportFormat::Csv);
    CHECK(parse_report_format("json") == ReportFormat::Json);
    CHECK_FALSE(parse_report_format("xml"));
  }
}
