#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advseq/grammar.hpp"

namespace advseq::metrics {

using TokenSeq = std::vector<std::string>;

/// Fraction of samples accepted by Earley recognition under the grammar.
double grammar_accuracy(std::span<const TokenSeq> samples, const grammar::Cfg& cfg);

/// Distinct samples / total samples, exact sequence equality.
double uniqueness(std::span<const TokenSeq> samples);

struct NllStats {
  double mean = 0.0;
  double median = 0.0;
  double no_parse_rate = 0.0;
  std::int64_t sample_count = 0;
};

inline constexpr double kDefaultNoParseCeiling = 1e6;

/// Viterbi NLL statistics over a sample set. Unparseable samples score as
/// the ceiling and are also reported as a separate rate.
NllStats nll_stats(std::span<const TokenSeq> samples, const grammar::Pcfg& binarized,
                   double no_parse_ceiling = kDefaultNoParseCeiling);

/// Per-snapshot NLL statistics: one sampler call per snapshot, eval_size
/// samples each.
std::vector<NllStats> nll_curve(
    std::int64_t snapshots, std::int64_t eval_size, const grammar::Pcfg& binarized,
    const std::function<std::vector<TokenSeq>(std::int64_t snapshot, std::int64_t count)>& sample,
    double no_parse_ceiling = kDefaultNoParseCeiling);

/// Corpus-level BLEU-n: modified n-gram precision with uniform weights over
/// orders 1..max_n, geometric mean, brevity penalty against the effective
/// reference length. The whole reference set serves every candidate; no
/// smoothing (a zero match at any order gives 0).
double corpus_bleu(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references,
                   int max_n);

struct EvalReport {
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  std::optional<double> accuracy;
  std::optional<double> uniqueness;
  std::optional<double> mean_nll;
  std::optional<double> no_parse_rate;
  std::int64_t sample_count = 0;
};

inline constexpr const char* kEvalCsvHeader =
    "epoch,step,d_loss,g_loss,accuracy,uniqueness,mean_nll,no_parse_rate";

/// One CSV row matching kEvalCsvHeader; absent fields are empty, numbers are
/// printed at full precision.
std::string eval_csv_row(const EvalReport& report);

}  // namespace advseq::metrics
