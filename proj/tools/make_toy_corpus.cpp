// Writes the generated code-mixed toy corpus (data, lexicon, dictionary).

#include <CLI11.hpp>

#include <iostream>

#include "cmsa/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"make_toy_corpus: generate a small class-separable code-mixed corpus"};
  std::string out = "toy";
  cmsa::synthetic::ToyOptions opts;
  app.add_option("--out", out, "output directory");
  app.add_option("--n", opts.n, "number of records");
  app.add_option("--seed", opts.seed, "generator seed");
  CLI11_PARSE(app, argc, argv);
  try {
    const auto corpus = cmsa::synthetic::make_toy_corpus(opts);
    cmsa::synthetic::write_toy_corpus(corpus, out);
    std::cerr << "wrote " << corpus.dataset.size() << " records to " << out << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
