#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "advseq/metrics.hpp"
#include "advseq/rng.hpp"

using namespace advseq;
namespace mt = advseq::metrics;
namespace gr = advseq::grammar;

namespace {

mt::TokenSeq seq(std::initializer_list<const char*> tokens) {
  mt::TokenSeq out;
  for (const char* t : tokens) out.emplace_back(t);
  return out;
}

}  // namespace

TEST_CASE("grammar accuracy counts accepted samples") {
  const gr::Cfg cfg = gr::load_cfg("S -> a | a a\n");
  std::vector<mt::TokenSeq> all_valid{seq({"a"}), seq({"a", "a"})};
  CHECK(mt::grammar_accuracy(all_valid, cfg) == doctest::Approx(1.0));

  std::vector<mt::TokenSeq> gibberish{seq({"z"}), seq({"q", "w"})};
  CHECK(mt::grammar_accuracy(gibberish, cfg) == doctest::Approx(0.0));

  std::vector<mt::TokenSeq> half;
  for (int i = 0; i < 640; ++i) half.push_back(seq({"a"}));
  for (int i = 0; i < 640; ++i) half.push_back(seq({"a", "a", "a"}));
  CHECK(mt::grammar_accuracy(half, cfg) == doctest::Approx(0.5));

  CHECK_THROWS_AS((void)mt::grammar_accuracy({}, cfg), Error);
}

TEST_CASE("uniqueness is distinct over total") {
  std::vector<mt::TokenSeq> identical(1280, seq({"a", "b"}));
  CHECK(mt::uniqueness(identical) == doctest::Approx(1.0 / 1280.0));

  std::vector<mt::TokenSeq> distinct{seq({"a"}), seq({"b"}), seq({"c"})};
  CHECK(mt::uniqueness(distinct) == doctest::Approx(1.0));

  std::vector<mt::TokenSeq> mixed{seq({"a"}), seq({"a"}), seq({"b"}), seq({"c"})};
  CHECK(mt::uniqueness(mixed) == doctest::Approx(0.75));

  CHECK_THROWS_AS((void)mt::uniqueness({}), Error);
}

TEST_CASE("uniqueness and accuracy stay within [0,1] with the floor 1/n") {
  std::mt19937_64 rng = seeded_engine(60);
  const gr::Cfg cfg = gr::load_cfg("S -> a | b | a b\n");
  std::uniform_int_distribution<int> len(1, 2);
  std::uniform_int_distribution<int> tok(0, 2);
  const char* words[3] = {"a", "b", "z"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<mt::TokenSeq> samples;
    const int n = 1 + trial % 7;
    for (int i = 0; i < n; ++i) {
      mt::TokenSeq s;
      for (int j = 0; j < len(rng); ++j) s.emplace_back(words[tok(rng)]);
      samples.push_back(std::move(s));
    }
    const double acc = mt::grammar_accuracy(samples, cfg);
    const double uniq = mt::uniqueness(samples);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    CHECK(uniq >= 1.0 / static_cast<double>(n));
    CHECK(uniq <= 1.0);
  }
}

TEST_CASE("nll stats aggregate viterbi scores with a no-parse ceiling") {
  gr::CfgBuilder builder;
  builder.rule("S", {"a"});
  builder.rule("S", {"b"});
  const gr::Pcfg pcfg{builder.build(), {0.25, 0.75}};

  std::vector<mt::TokenSeq> samples{seq({"a"}), seq({"b"}), seq({"z"}), seq({"b"}),
                                    seq({"a"})};
  const mt::NllStats stats = mt::nll_stats(samples, pcfg, 100.0);
  CHECK(stats.sample_count == 5);
  CHECK(stats.no_parse_rate == doctest::Approx(0.2));
  // manual aggregation: two -log(1/4), two -log(3/4), one ceiling
  const double a = -std::log(0.25), b = -std::log(0.75);
  CHECK(stats.mean == doctest::Approx((2 * a + 2 * b + 100.0) / 5.0).epsilon(1e-12));
  std::vector<double> values{a, b, 100.0, b, a};
  std::sort(values.begin(), values.end());
  CHECK(stats.median == doctest::Approx(values[2]).epsilon(1e-12));
}

TEST_CASE("nll curve evaluates each snapshot once") {
  gr::CfgBuilder builder;
  builder.rule("S", {"a"});
  const gr::Pcfg pcfg{builder.build(), {1.0}};
  std::vector<std::int64_t> seen;
  const auto curve = mt::nll_curve(
      3, 4, pcfg,
      [&seen](std::int64_t snapshot, std::int64_t count) {
        seen.push_back(snapshot);
        return std::vector<mt::TokenSeq>(static_cast<std::size_t>(count), seq({"a"}));
      });
  CHECK(seen == std::vector<std::int64_t>{0, 1, 2});
  REQUIRE(curve.size() == 3);
  for (const mt::NllStats& s : curve) {
    CHECK(s.mean == doctest::Approx(0.0));
    CHECK(s.no_parse_rate == 0.0);
    CHECK(s.sample_count == 4);
  }
}

TEST_CASE("corpus bleu reproduces the hand-derived example") {
  // candidate "the cat sat" against the single reference
  // "the cat sat on the mat": unigram 3/3, bigram 2/2, brevity exp(1 - 6/3)
  std::vector<mt::TokenSeq> candidates{seq({"the", "cat", "sat"})};
  std::vector<mt::TokenSeq> references{seq({"the", "cat", "sat", "on", "the", "mat"})};
  const double score = mt::corpus_bleu(candidates, references, 2);
  CHECK(score == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.4f", score);
  CHECK(std::string(buf) == "0.3679");
}

TEST_CASE("corpus bleu is 1 when candidates equal references") {
  std::vector<mt::TokenSeq> set{seq({"a", "b", "c"}), seq({"d", "e"}), seq({"f"})};
  CHECK(mt::corpus_bleu(set, set, 2) == doctest::Approx(1.0));
  CHECK(mt::corpus_bleu(set, set, 3) == doctest::Approx(1.0));
}

TEST_CASE("corpus bleu is 0 with no unigram overlap and without smoothing") {
  std::vector<mt::TokenSeq> candidates{seq({"x", "y"})};
  std::vector<mt::TokenSeq> references{seq({"a", "b"})};
  CHECK(mt::corpus_bleu(candidates, references, 2) == 0.0);
}

TEST_CASE("corpus bleu is permutation invariant") {
  std::vector<mt::TokenSeq> candidates{seq({"a", "b"}), seq({"b", "c", "d"}),
                                       seq({"a", "c"})};
  std::vector<mt::TokenSeq> references{seq({"a", "b", "c"}), seq({"b", "c", "d", "e"})};
  const double base = mt::corpus_bleu(candidates, references, 2);
  std::vector<mt::TokenSeq> cand_perm{candidates[2], candidates[0], candidates[1]};
  std::vector<mt::TokenSeq> ref_perm{references[1], references[0]};
  CHECK(mt::corpus_bleu(cand_perm, references, 2) == doctest::Approx(base).epsilon(1e-15));
  CHECK(mt::corpus_bleu(candidates, ref_perm, 2) == doctest::Approx(base).epsilon(1e-15));
}

TEST_CASE("corpus bleu validates inputs") {
  std::vector<mt::TokenSeq> some{seq({"a"})};
  CHECK_THROWS_AS((void)mt::corpus_bleu({}, some, 2), Error);
  CHECK_THROWS_AS((void)mt::corpus_bleu(some, {}, 2), Error);
  CHECK_THROWS_AS((void)mt::corpus_bleu(some, some, 0), Error);
}

TEST_CASE("eval csv rows match the documented header") {
  CHECK(std::string(mt::kEvalCsvHeader) ==
        "epoch,step,d_loss,g_loss,accuracy,uniqueness,mean_nll,no_parse_rate");
  mt::EvalReport report;
  report.epoch = 3;
  report.step = 120;
  report.d_loss = 0.5;
  report.g_loss = -1.25;
  report.accuracy = 0.875;
  report.uniqueness = 1.0;
  CHECK(mt::eval_csv_row(report) == "3,120,0.5,-1.25,0.875,1,,");
  report.mean_nll = 12.5;
  report.no_parse_rate = 0.0;
  CHECK(mt::eval_csv_row(report) == "3,120,0.5,-1.25,0.875,1,12.5,0");
}
