// cmsa: command-line entry point for the code-mixed sentiment toolkit.

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "cmsa/annotate.hpp"
#include "cmsa/codeswitch.hpp"
#include "cmsa/corpus.hpp"
#include "cmsa/error.hpp"
#include "cmsa/eval.hpp"
#include "cmsa/experiment.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace cmsa;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::string data;
  std::string lexicon;
  std::vector<std::string> dicts;
  std::string vocab;
  std::string embeddings;
  std::string model;
  std::optional<std::size_t> k;
  std::optional<std::uint64_t> seed;
  bool offline = false;
  bool online = false;
  std::optional<std::size_t> jobs;
  std::string out;
  // subcommand specific
  std::string format;
  std::string log;
  std::string host = "127.0.0.1";
  int port = 8080;
  bool reveal = false;
  std::string kind = "ensemble";
};

experiment::RunConfig resolve_config(const Flags& f) {
  experiment::RunConfig cfg;
  if (!f.config.empty()) cfg = experiment::load_config(f.config);
  if (!f.data.empty()) cfg.paths.dataset = f.data;
  if (!f.lexicon.empty()) cfg.paths.lexicon = f.lexicon;
  if (!f.dicts.empty()) cfg.paths.dictionaries.assign(f.dicts.begin(), f.dicts.end());
  if (!f.vocab.empty()) cfg.paths.vocab = f.vocab;
  if (!f.embeddings.empty()) cfg.paths.embeddings = f.embeddings;
  if (f.k) cfg.k = *f.k;
  if (f.seed) cfg.seed = *f.seed;
  if (f.offline) cfg.offline = true;
  if (f.online) cfg.offline = false;
  if (f.jobs) cfg.jobs = *f.jobs;
  if (!f.out.empty()) cfg.paths.out_dir = f.out;
  cfg.resolve_paths(fs::current_path());
  return cfg;
}

const fs::path& require_dataset(const experiment::RunConfig& cfg) {
  if (!cfg.paths.dataset) throw UsageError("--data is required");
  return *cfg.paths.dataset;
}

corpus::Format format_of(const fs::path& p) {
  return p.extension() == ".csv" ? corpus::Format::Csv : corpus::Format::Ndjson;
}

corpus::Dataset load_dataset(const experiment::RunConfig& cfg) {
  const auto& p = require_dataset(cfg);
  return corpus::ingest(p, format_of(p));
}

// Writes to --out when given, stdout otherwise.
void emit(const Flags& f, const std::string& text) {
  if (f.out.empty() || f.out == "-") {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream out(f.out, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + f.out);
  out << text;
  if (!out) throw Error("write failed: " + f.out);
}

std::string percent(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << v * 100.0 << '%';
  return os.str();
}

int cmd_ingest(const Flags& f) {
  const auto ds = load_dataset(resolve_config(f));
  std::ostringstream os;
  if (f.format == "csv") {
    corpus::write_csv(os, ds);
  } else {
    corpus::write_ndjson(os, ds);
  }
  emit(f, os.str());
  std::cerr << "ingested " << ds.size() << " records\n";
  return 0;
}

int cmd_stats(const Flags& f) {
  const auto ds = load_dataset(resolve_config(f));
  const auto s = corpus::compute_stats(ds);
  if (f.format == "json") {
    annotate::StoreStats st;
    st.dataset = s;
    emit(f, annotate::stats_to_json(st) + "\n");
    return 0;
  }
  std::ostringstream os;
  os << "n=" << s.n << '\n';
  os << "n_final=" << s.n_final << '\n';
  os << "unanimity=" << (s.unanimity_rate ? percent(*s.unanimity_rate) : "n/a") << '\n';
  for (Label l : kAllLabels) {
    auto it = s.per_label_fraction.find(l);
    os << to_string(l) << '=' << (it == s.per_label_fraction.end() ? "n/a" : percent(it->second))
       << '\n';
  }
  for (const auto& [term, n] : s.term_counts) os << "term " << term << '=' << n << '\n';
  emit(f, os.str());
  return 0;
}

annotate::AnnotationServer* g_server = nullptr;

int cmd_annotate_serve(const Flags& f) {
  auto ds = load_dataset(resolve_config(f));
  std::optional<fs::path> log;
  if (!f.log.empty()) log = f.log;
  auto store = std::make_shared<annotate::AnnotationStore>(std::move(ds), log);
  annotate::ServerOptions opts;
  opts.host = f.host;
  opts.port = f.port;
  opts.reveal_prior_labels = f.reveal;
  annotate::AnnotationServer server(store, opts);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  const int port = server.start();
  std::cerr << "serving " << store->size() << " tweets on http://" << opts.host << ':' << port
            << '\n';
  std::cout << port << std::endl;
  // start() serves on a background thread; wait here until a signal stops it.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  int sig = 0;
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  sigwait(&set, &sig);
  server.stop();
  g_server = nullptr;
  return 0;
}

int cmd_export_final(const Flags& f) {
  auto ds = load_dataset(resolve_config(f));
  std::optional<fs::path> log;
  if (!f.log.empty()) log = f.log;
  annotate::AnnotationStore store(std::move(ds), log);
  std::ostringstream os;
  corpus::write_ndjson(os, store.export_final());
  emit(f, os.str());
  return 0;
}

int cmd_preprocess(const Flags& f) {
  const auto cfg = resolve_config(f);
  const auto ds = load_dataset(cfg);
  const auto pre = experiment::make_preprocessor(cfg);
  std::ostringstream os;
  std::size_t misses_total = 0;
  for (const auto& t : ds) {
    std::vector<codeswitch::Miss> misses;
    const auto tt = pre.run(t.text, &misses);
    nlohmann::ordered_json j;
    j["id"] = t.id;
    j["tokens"] = nlohmann::ordered_json::parse(codeswitch::tokens_to_json(tt));
    j["units"] = textrep::embedding_units(tt, cfg.use_gloss);
    os << j.dump() << '\n';
    for (const auto& m : misses) std::cerr << "untranslated " << m.word << ": " << m.reason << '\n';
    misses_total += misses.size();
  }
  emit(f, os.str());
  std::cerr << "preprocessed " << ds.size() << " records, " << misses_total
            << " untranslated candidates\n";
  return 0;
}

std::vector<experiment::Example> load_examples(const experiment::RunConfig& cfg) {
  const auto ds = load_dataset(cfg);
  auto ex = experiment::prepare_examples(ds, experiment::make_preprocessor(cfg), cfg.use_gloss);
  if (ex.empty()) throw DataError("dataset has no records with a final label");
  return ex;
}

std::vector<experiment::ModelKind> model_list(const std::string& s, const char* fallback) {
  try {
    return experiment::parse_model_list(s.empty() ? fallback : s);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

int cmd_train(const Flags& f) {
  auto cfg = resolve_config(f);
  if (f.out.empty()) throw UsageError("--out <dir> is required");
  const auto kinds = model_list(f.model, "ensemble");
  const auto examples = load_examples(cfg);
  const auto start = std::chrono::steady_clock::now();
  const auto artifacts = experiment::train_artifacts(examples, kinds, cfg);
  experiment::save_artifacts(artifacts, cfg.paths.out_dir, cfg);
  const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
  std::cerr << "trained on " << examples.size() << " records in " << took.count() << " s\n";
  if (artifacts.ensemble) {
    const auto& w = artifacts.ensemble->weights.weights.w;
    std::cout << "weights " << w[0] << ' ' << w[1] << ' ' << w[2] << '\n';
  }
  return 0;
}

fs::path model_dir(const Flags& f) {
  if (f.model.empty()) throw UsageError("--model <dir> is required");
  return f.model;
}

int cmd_optimize_ensemble(const Flags& f) {
  const auto dir = model_dir(f);
  auto cfg = experiment::load_config(dir / "config.json");
  const auto overrides = resolve_config(f);
  cfg.paths.dataset = overrides.paths.dataset;
  if (f.seed) cfg.seed = *f.seed;
  auto artifacts = experiment::load_artifacts(dir);
  if (!artifacts.ensemble || !artifacts.rep) throw DataError(dir.string() + " has no ensemble members");
  const auto examples = load_examples(cfg);
  std::vector<nn::LabeledSequence> seqs;
  for (const auto& ex : examples) seqs.push_back(experiment::encode(ex, *artifacts.rep, cfg));
  const auto& m = artifacts.ensemble->members;
  const auto fit = experiment::fit_weights({&m[0], &m[1], &m[2]}, seqs, cfg, cfg.seed);
  const fs::path out = f.out.empty() ? dir / "weights.json" : fs::path(f.out);
  ensemble::save_weights(fit, out);
  std::cout << "weights " << fit.weights.w[0] << ' ' << fit.weights.w[1] << ' ' << fit.weights.w[2]
            << "\nobjective " << fit.objective_value << " (uniform " << fit.uniform_value << ")\n";
  return 0;
}

int cmd_evaluate(const Flags& f) {
  const auto cfg = resolve_config(f);
  const auto kinds = model_list(f.model, "all");
  const auto fmt = eval::parse_report_format(f.format.empty() ? "text" : f.format);
  if (!fmt) throw UsageError("unknown --format \"" + f.format + "\"");
  const auto examples = load_examples(cfg);
  const auto start = std::chrono::steady_clock::now();
  const auto reports = experiment::evaluate(examples, kinds, cfg);
  const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
  std::cerr << cfg.k << "-fold evaluation of " << examples.size() << " records took "
            << took.count() << " s\n";
  emit(f, eval::render_report(reports, *fmt));
  return 0;
}

int cmd_predict(const Flags& f) {
  const auto dir = model_dir(f);
  auto cfg = experiment::load_config(dir / "config.json");
  const auto artifacts = experiment::load_artifacts(dir);
  const auto kind = experiment::parse_model_kind(f.kind);
  if (!kind) throw UsageError("unknown --kind \"" + f.kind + "\"");
  const auto pre = experiment::make_preprocessor(cfg);

  std::ifstream file;
  std::istream* in = &std::cin;
  if (!f.data.empty()) {
    file.open(f.data, std::ios::binary);
    if (!file) throw DataError("cannot open " + f.data);
    in = &file;
  }
  std::ostringstream os;
  std::string line;
  while (std::getline(*in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    experiment::Example ex;
    ex.tokens = pre.run(line);
    ex.units = textrep::embedding_units(ex.tokens, cfg.use_gloss);
    ClassProbs probs{};
    nlohmann::ordered_json j;
    j["text"] = line;
    switch (*kind) {
      case experiment::ModelKind::NaiveBayes:
      case experiment::ModelKind::RandomForest: {
        const auto& bm = *kind == experiment::ModelKind::NaiveBayes ? artifacts.nb : artifacts.rf;
        if (!bm) throw DataError(dir.string() + " has no " + std::string(to_string(*kind)) + " model");
        probs = bm->predict(ex.units).probs;
        break;
      }
      default: {
        if (!artifacts.ensemble || !artifacts.rep) {
          throw DataError(dir.string() + " has no neural models");
        }
        const auto seq = experiment::encode(ex, *artifacts.rep, cfg).seq;
        const auto& m = artifacts.ensemble->members;
        if (*kind == experiment::ModelKind::Ensemble) {
          const auto p =
              ensemble::predict_ensemble({&m[0], &m[1], &m[2]}, artifacts.ensemble->weights.weights, seq);
          probs = p.probs;
          auto members = nlohmann::ordered_json::object();
          for (std::size_t i = 0; i < 3; ++i) {
            members[std::string(nn::to_string(experiment::kMemberVariants[i]))] = p.member_probs[i];
          }
          j["member_probs"] = members;
        } else {
          const auto idx = static_cast<std::size_t>(*kind) -
                           static_cast<std::size_t>(experiment::ModelKind::ModelA);
          probs = nn::forward(seq, m[idx]).probs;
        }
      }
    }
    j["label"] = to_string(argmax_label(probs));
    auto pj = nlohmann::ordered_json::object();
    for (Label l : kAllLabels) pj[std::string(to_string(l))] = probs[index_of(l)];
    j["probs"] = pj;
    auto cands = nlohmann::ordered_json::array();
    for (const auto& tok : ex.tokens.tokens) {
      if (tok.cls != codeswitch::TokenClass::NonPersianCandidate) continue;
      cands.push_back({{"surface", tok.surface},
                       {"translation", tok.translation ? nlohmann::ordered_json(*tok.translation)
                                                       : nlohmann::ordered_json(nullptr)}});
    }
    j["candidates"] = cands;
    os << j.dump() << '\n';
  }
  const std::string out = os.str();
  if (f.out.empty()) {
    std::cout << out;
  } else {
    Flags g = f;
    emit(g, out);
  }
  return 0;
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON run configuration");
  sub->add_option("--data", f.data, "dataset file (.ndjson or .csv)");
  sub->add_option("--lexicon", f.lexicon, "Persian lexicon TSV (word<TAB>count)");
  sub->add_option("--dict", f.dicts, "translation dictionary TSV (repeatable)");
  sub->add_option("--vocab", f.vocab, "subword vocabulary file");
  sub->add_option("--embeddings", f.embeddings, "embedding table file");
  sub->add_option("--k", f.k, "number of cross-validation folds");
  sub->add_option("--seed", f.seed, "run seed");
  sub->add_flag("--offline", f.offline, "never call the remote translator (default)");
  sub->add_flag("--online", f.online, "allow remote translation of unknown candidates");
  sub->add_option("--jobs", f.jobs, "parallel folds / trees");
  sub->add_option("--out", f.out, "output file or directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cmsa: code-mixed Persian-English sentiment analysis"};
  app.name("cmsa");
  app.footer(
      "Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.\n"
      "Environment: CMSA_TRANSLATOR_API_KEY holds the translator API key used with --online.");
  app.require_subcommand(1);
  Flags f;

  auto* ingest = app.add_subcommand("ingest", "read a dataset and write canonical NDJSON");
  add_common(ingest, f);
  ingest->add_option("--format", f.format, "output format: ndjson (default) or csv");

  auto* stats = app.add_subcommand("stats", "print dataset statistics");
  add_common(stats, f);
  stats->add_option("--format", f.format, "text (default) or json");

  auto* serve = app.add_subcommand("annotate-serve", "serve the annotation HTTP API");
  add_common(serve, f);
  serve->add_option("--log", f.log, "append-only annotation event log");
  serve->add_option("--host", f.host, "bind address");
  serve->add_option("--port", f.port, "port (0 picks a free one)");
  serve->add_flag("--reveal-prior-labels", f.reveal, "show A1/A2 labels to the third annotator");

  auto* exp = app.add_subcommand("export-final", "replay an event log and export final labels");
  add_common(exp, f);
  exp->add_option("--log", f.log, "annotation event log");

  auto* pre = app.add_subcommand("preprocess", "tokenize, detect and translate every record");
  add_common(pre, f);

  auto* train = app.add_subcommand("train", "train models on the full dataset");
  add_common(train, f);
  train->add_option("--model", f.model, "comma list of nb,rf,model-a,model-b,model-c,ensemble");

  auto* opt = app.add_subcommand("optimize-ensemble", "refit ensemble weights on a dataset");
  add_common(opt, f);
  opt->add_option("--model", f.model, "model directory written by train");

  auto* ev = app.add_subcommand("evaluate", "stratified k-fold cross-validation");
  add_common(ev, f);
  ev->add_option("--model", f.model, "comma list of models or \"all\"");
  ev->add_option("--format", f.format, "text (default), csv or json");

  auto* pr = app.add_subcommand("predict", "label raw text lines from --data or stdin");
  add_common(pr, f);
  pr->add_option("--model", f.model, "model directory written by train");
  pr->add_option("--kind", f.kind, "which model to use (default ensemble)");

  if (argc < 2) {
    std::cerr << app.help();
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*ingest) return cmd_ingest(f);
    if (*stats) return cmd_stats(f);
    if (*serve) return cmd_annotate_serve(f);
    if (*exp) return cmd_export_final(f);
    if (*pre) return cmd_preprocess(f);
    if (*train) return cmd_train(f);
    if (*opt) return cmd_optimize_ensemble(f);
    if (*ev) return cmd_evaluate(f);
    if (*pr) return cmd_predict(f);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
