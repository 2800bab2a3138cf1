#include <benchmark/benchmark.h>

#include "advseq/grammar.hpp"
#include "advseq/rng.hpp"

namespace {

using namespace advseq;

const grammar::Cfg& story_grammar() {
  static grammar::Cfg cfg =
      grammar::load_cfg_file(std::string(ADVSEQ_DATA_DIR) + "/grammars/simple.cfg");
  return cfg;
}

void BM_EarleyLength5(benchmark::State& state) {
  const grammar::Cfg& cfg = story_grammar();
  std::mt19937_64 rng = seeded_engine(7);
  const std::vector<std::string> sample = grammar::sample_cfg(cfg, 5, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(grammar::earley_recognize(cfg, sample));
  }
}
BENCHMARK(BM_EarleyLength5);

void BM_EarleyLength50(benchmark::State& state) {
  const grammar::Cfg& cfg = story_grammar();
  std::vector<std::string> tokens;
  for (int clause = 0; clause < 6; ++clause) {
    for (const char* w : {"the", "brave", "knight", "sees", "the", "old", "grail", "and"}) {
      tokens.push_back(w);
    }
  }
  tokens.pop_back();  // 47 tokens; pad to 50 with a prepositional phrase
  for (const char* w : {"near", "the", "castle"}) tokens.push_back(w);
  for (auto _ : state) {
    benchmark::DoNotOptimize(grammar::earley_recognize(cfg, tokens));
  }
}
BENCHMARK(BM_EarleyLength50)->Unit(benchmark::kMillisecond);

void BM_SampleLength11(benchmark::State& state) {
  const grammar::Cfg& cfg = story_grammar();
  std::mt19937_64 rng = seeded_engine(8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(grammar::sample_cfg(cfg, 11, rng));
  }
}
BENCHMARK(BM_SampleLength11);

void BM_ViterbiLength7(benchmark::State& state) {
  grammar::CfgBuilder builder;
  builder.rule("S", {"NP", "VP"});
  builder.rule("NP", {"Det", "N"});
  builder.rule("NP", {"Det", "Adj", "N"});
  builder.rule("VP", {"V", "NP"});
  builder.rule("Det", {"the"});
  builder.rule("Det", {"a"});
  builder.rule("N", {"knight"});
  builder.rule("N", {"grail"});
  builder.rule("Adj", {"holy"});
  builder.rule("V", {"sees"});
  grammar::Pcfg pcfg{builder.build(), {1.0, 0.6, 0.4, 1.0, 0.5, 0.5, 0.5, 0.5, 1.0, 1.0}};
  const grammar::Pcfg binary = grammar::binarize_pcfg(pcfg);
  const std::vector<std::string> tokens{"the", "knight", "sees", "a", "holy", "grail"};
  for (auto _ : state) {
    benchmark::DoNotOptimize(grammar::viterbi_nll(binary, tokens));
  }
}
BENCHMARK(BM_ViterbiLength7);

}  // namespace
