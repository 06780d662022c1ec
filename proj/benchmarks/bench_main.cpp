#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "cmsa/baselines.hpp"
#include "cmsa/codeswitch.hpp"
#include "cmsa/nn.hpp"
#include "cmsa/rng.hpp"
#include "cmsa/textrep.hpp"

using namespace cmsa;

namespace {

textrep::EmbeddedSequence random_seq(std::size_t len, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  textrep::EmbeddedSequence s;
  s.max_len = len;
  s.dim = dim;
  s.length = len;
  s.mask.assign(len, 1);
  for (std::size_t t = 0; t < len; ++t) s.ids.push_back(t);
  s.values.resize(len * dim);
  for (auto& v : s.values) v = rng.uniform(-1, 1);
  return s;
}

void BM_Tokenize(benchmark::State& state) {
  const std::string text = "این فیلم خیلی بورینگ بود @user_1 ولی موزیکش پرفکت بود https://t.co/x #فیلم";
  for (auto _ : state) benchmark::DoNotOptimize(codeswitch::tokenize(text));
}
BENCHMARK(BM_Tokenize);

void BM_Wordpiece(benchmark::State& state) {
  const auto vocab = textrep::build_vocab({"happy", "happy", "ness", "ness", "unhappiness"}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(textrep::wordpiece("unhappiness", vocab));
}
BENCHMARK(BM_Wordpiece);

void BM_Forward(benchmark::State& state) {
  const auto variant = static_cast<nn::Variant>(state.range(0));
  nn::TrainConfig cfg;
  const auto params = nn::init_params(variant, nn::dims_for(variant, 64, cfg), 1);
  const auto seq = random_seq(32, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward(seq, params));
}
BENCHMARK(BM_Forward)->Arg(0)->Arg(1)->Arg(2);

void BM_Gradient(benchmark::State& state) {
  const auto variant = static_cast<nn::Variant>(state.range(0));
  nn::TrainConfig cfg;
  const auto params = nn::init_params(variant, nn::dims_for(variant, 64, cfg), 1);
  auto grad = params.zeros_like();
  const auto seq = random_seq(32, 64, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(nn::loss_and_gradient(seq, Label::Positive, params, grad));
  }
}
BENCHMARK(BM_Gradient)->Arg(0)->Arg(1)->Arg(2);

}  // namespace

BENCHMARK_MAIN();
