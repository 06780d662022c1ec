#include "cmsa/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "cmsa/error.hpp"
#include "cmsa/rng.hpp"

namespace cmsa::synthetic {

namespace {

struct Cue {
  const char* surface;
  const char* gloss;   // nullptr for Persian and Latin words
  const char* source;  // "finglish" / "slang"
};

struct ClassPool {
  std::vector<const char*> persian;
  std::vector<Cue> loan;
  std::vector<const char*> latin;
};

const std::array<ClassPool, kNumClasses>& pools() {
  static const std::array<ClassPool, kNumClasses> p{{
      // negative
      {{"بد", "افتضاح", "زشت", "ناراحت", "غمگین", "خسته"},
       {{"بورینگ", "boring", "finglish"},
        {"دیپرس", "depressed", "finglish"},
        {"استرس", "stress", "finglish"},
        {"ضدحال", "bummer", "slang"}},
       {"hate", "worst", "sad"}},
      // neutral
      {{"ساعت", "جلسه", "برنامه", "خبر", "گزارش", "اطلاعیه"},
       {{"سینگل", "single", "finglish"},
        {"میتینگ", "meeting", "finglish"},
        {"آنلاین", "online", "finglish"}},
       {"news", "update", "today"}},
      // positive
      {{"خوب", "عالی", "قشنگ", "خوشحال", "زیبا", "محشر"},
       {{"پرفکت", "perfect", "finglish"},
        {"هپی", "happy", "finglish"},
        {"سوپر", "super", "finglish"},
        {"خفن", "awesome", "slang"}},
       {"love", "great", "nice"}},
  }};
  return p;
}

const std::vector<const char*>& filler() {
  static const std::vector<const char*> f{"امروز", "من", "این", "فیلم", "رو", "دیدم", "با",
                                          "دوستم", "رفتیم", "بیرون", "هوا", "کتاب", "خوندم",
                                          "و", "که", "هم"};
  return f;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[rng.below(v.size())];
}

}  // namespace

ToyCorpus make_toy_corpus(const ToyOptions& opts) {
  const auto n_neg = static_cast<std::size_t>(std::llround(opts.negative_fraction * opts.n));
  const auto n_pos = static_cast<std::size_t>(std::llround(opts.positive_fraction * opts.n));
  if (n_neg + n_pos > opts.n) throw std::invalid_argument("toy corpus: fractions exceed 1");
  const std::size_t n_neu = opts.n - n_neg - n_pos;
  if (n_neg < 10 || n_pos < 10 || n_neu < 10) {
    throw std::invalid_argument("toy corpus: every class needs at least 10 records");
  }
  std::vector<Label> golds;
  golds.insert(golds.end(), n_neg, Label::Negative);
  golds.insert(golds.end(), n_neu, Label::Neutral);
  golds.insert(golds.end(), n_pos, Label::Positive);
  Rng rng(opts.seed);
  rng.shuffle(std::span<Label>(golds));

  ToyCorpus out;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const Label gold = golds[i];
    const auto& pool = pools()[index_of(gold)];
    std::vector<std::string> words;
    std::vector<std::string> terms;
    const std::size_t n_fill = 3 + rng.below(3);
    for (std::size_t k = 0; k < n_fill; ++k) words.emplace_back(pick(rng, filler()));
    const std::size_t n_cue = 1 + rng.below(2);
    for (std::size_t k = 0; k < n_cue; ++k) {
      switch (rng.below(3)) {
        case 0: words.emplace_back(pick(rng, pool.persian)); break;
        case 1: {
          const auto& cue = pick(rng, pool.loan);
          words.emplace_back(cue.surface);
          if (std::string_view(cue.source) == "finglish") terms.emplace_back(cue.surface);
          break;
        }
        default: words.emplace_back(pick(rng, pool.latin)); break;
      }
    }
    // Cue words go anywhere in the sentence.
    rng.shuffle(std::span<std::string>(words));
    if (rng.uniform() < 0.2) words.insert(words.begin(), "@user_" + std::to_string(rng.below(50)));
    if (rng.uniform() < 0.1) words.emplace_back("https://t.co/x" + std::to_string(i));
    if (rng.uniform() < 0.1) words.emplace_back("#فیلم");

    std::string text;
    for (const auto& w : words) {
      if (!text.empty()) text += ' ';
      text += w;
    }

    corpus::Tweet t;
    t.id = std::to_string(i + 1);
    t.text = corpus::redact_mentions(text);
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
    t.terms = std::move(terms);
    t.label_a1 = gold;
    if (rng.uniform() < 0.75) {
      t.label_a2 = gold;
    } else {
      t.label_a2 = label_at((index_of(gold) + 1 + rng.below(2)) % kNumClasses);
      t.label_a3 = gold;
      if (rng.uniform() < 0.5) std::swap(t.label_a1, t.label_a2);
    }
    t.label_final = gold;
    out.dataset.add(std::move(t));
  }

  std::vector<const char*> persian(filler());
  for (const auto& p : pools()) persian.insert(persian.end(), p.persian.begin(), p.persian.end());
  for (const char* w : persian) out.lexicon.emplace_back(w, 5 + rng.below(46));
  for (const auto& p : pools()) {
    for (const auto& cue : p.loan) out.dictionary.push_back({cue.surface, cue.gloss, cue.source});
  }
  return out;
}

void write_toy_corpus(const ToyCorpus& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  corpus::export_dataset(dir / "data.ndjson", c.dataset, corpus::Format::Ndjson);
  {
    std::ofstream lex(dir / "lexicon.tsv", std::ios::binary);
    for (const auto& [w, n] : c.lexicon) lex << w << '\t' << n << '\n';
    if (!lex) throw Error("cannot write " + (dir / "lexicon.tsv").string());
  }
  std::ofstream dict(dir / "dict.tsv", std::ios::binary);
  for (const auto& r : c.dictionary) dict << r.surface << '\t' << r.gloss << '\t' << r.source << '\n';
  if (!dict) throw Error("cannot write " + (dir / "dict.tsv").string());
}

}  // namespace cmsa::synthetic
