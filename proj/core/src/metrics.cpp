#include "advseq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace advseq::metrics {

double grammar_accuracy(std::span<const TokenSeq> samples, const grammar::Cfg& cfg) {
  if (samples.empty()) throw Error("grammar_accuracy: empty sample set");
  std::int64_t accepted = 0;
  for (const TokenSeq& s : samples) {
    if (grammar::earley_recognize(cfg, s)) ++accepted;
  }
  return static_cast<double>(accepted) / static_cast<double>(samples.size());
}

double uniqueness(std::span<const TokenSeq> samples) {
  if (samples.empty()) throw Error("uniqueness: empty sample set");
  std::set<TokenSeq> distinct(samples.begin(), samples.end());
  return static_cast<double>(distinct.size()) / static_cast<double>(samples.size());
}

NllStats nll_stats(std::span<const TokenSeq> samples, const grammar::Pcfg& binarized,
                   double no_parse_ceiling) {
  if (samples.empty()) throw Error("nll_stats: empty sample set");
  std::vector<double> values;
  values.reserve(samples.size());
  std::int64_t no_parse = 0;
  for (const TokenSeq& s : samples) {
    const std::optional<double> nll = grammar::viterbi_nll(binarized, s);
    if (nll.has_value()) {
      values.push_back(*nll);
    } else {
      values.push_back(no_parse_ceiling);
      ++no_parse;
    }
  }
  NllStats stats;
  stats.sample_count = static_cast<std::int64_t>(samples.size());
  stats.no_parse_rate = static_cast<double>(no_parse) / static_cast<double>(samples.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  stats.mean = sum / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size();
  stats.median = (m % 2 == 1) ? values[m / 2] : 0.5 * (values[m / 2 - 1] + values[m / 2]);
  return stats;
}

std::vector<NllStats> nll_curve(
    std::int64_t snapshots, std::int64_t eval_size, const grammar::Pcfg& binarized,
    const std::function<std::vector<TokenSeq>(std::int64_t, std::int64_t)>& sample,
    double no_parse_ceiling) {
  std::vector<NllStats> curve;
  curve.reserve(static_cast<std::size_t>(snapshots));
  for (std::int64_t s = 0; s < snapshots; ++s) {
    const std::vector<TokenSeq> batch = sample(s, eval_size);
    curve.push_back(nll_stats(batch, binarized, no_parse_ceiling));
  }
  return curve;
}

namespace {

using Ngram = std::vector<std::string>;

void count_ngrams(const TokenSeq& seq, int order, std::map<Ngram, std::int64_t>& counts) {
  if (static_cast<int>(seq.size()) < order) return;
  for (std::size_t i = 0; i + static_cast<std::size_t>(order) <= seq.size(); ++i) {
    counts[Ngram(seq.begin() + static_cast<std::ptrdiff_t>(i),
                 seq.begin() + static_cast<std::ptrdiff_t>(i) + order)]++;
  }
}

}  // namespace

double corpus_bleu(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references,
                   int max_n) {
  if (candidates.empty()) throw Error("corpus_bleu: empty candidate set");
  if (references.empty()) throw Error("corpus_bleu: empty reference set");
  if (max_n < 1) throw Error("corpus_bleu: max_n must be >= 1");

  // max reference count per n-gram, shared by every candidate
  std::vector<std::map<Ngram, std::int64_t>> ref_max(static_cast<std::size_t>(max_n));
  for (const TokenSeq& ref : references) {
    for (int order = 1; order <= max_n; ++order) {
      std::map<Ngram, std::int64_t> counts;
      count_ngrams(ref, order, counts);
      auto& target = ref_max[static_cast<std::size_t>(order - 1)];
      for (const auto& [gram, c] : counts) {
        auto it = target.find(gram);
        if (it == target.end()) {
          target.emplace(gram, c);
        } else {
          it->second = std::max(it->second, c);
        }
      }
    }
  }

  std::vector<std::int64_t> matched(static_cast<std::size_t>(max_n), 0);
  std::vector<std::int64_t> total(static_cast<std::size_t>(max_n), 0);
  std::int64_t candidate_length = 0;
  std::int64_t effective_reference_length = 0;

  for (const TokenSeq& cand : candidates) {
    candidate_length += static_cast<std::int64_t>(cand.size());
    // closest reference length; ties resolved to the shorter
    std::int64_t best_ref = static_cast<std::int64_t>(references[0].size());
    for (const TokenSeq& ref : references) {
      const std::int64_t len = static_cast<std::int64_t>(ref.size());
      const std::int64_t cur = std::abs(len - static_cast<std::int64_t>(cand.size()));
      const std::int64_t best = std::abs(best_ref - static_cast<std::int64_t>(cand.size()));
      if (cur < best || (cur == best && len < best_ref)) best_ref = len;
    }
    effective_reference_length += best_ref;

    for (int order = 1; order <= max_n; ++order) {
      std::map<Ngram, std::int64_t> counts;
      count_ngrams(cand, order, counts);
      const auto& clip = ref_max[static_cast<std::size_t>(order - 1)];
      for (const auto& [gram, c] : counts) {
        total[static_cast<std::size_t>(order - 1)] += c;
        auto it = clip.find(gram);
        if (it != clip.end()) {
          matched[static_cast<std::size_t>(order - 1)] += std::min(c, it->second);
        }
      }
    }
  }

  double log_precision = 0.0;
  for (int order = 1; order <= max_n; ++order) {
    const std::int64_t m = matched[static_cast<std::size_t>(order - 1)];
    const std::int64_t t = total[static_cast<std::size_t>(order - 1)];
    if (m == 0 || t == 0) return 0.0;  // no smoothing
    log_precision += std::log(static_cast<double>(m) / static_cast<double>(t));
  }
  log_precision /= static_cast<double>(max_n);

  double brevity = 1.0;
  if (candidate_length < effective_reference_length) {
    brevity = std::exp(1.0 - static_cast<double>(effective_reference_length) /
                                 static_cast<double>(candidate_length));
  }
  return brevity * std::exp(log_precision);
}

std::string eval_csv_row(const EvalReport& report) {
  std::ostringstream os;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
  };
  os << report.epoch << ',' << report.step << ',';
  num(report.d_loss);
  os << ',';
  num(report.g_loss);
  for (const std::optional<double>& field :
       {report.accuracy, report.uniqueness, report.mean_nll, report.no_parse_rate}) {
    os << ',';
    if (field.has_value()) num(*field);
  }
  return os.str();
}

}  // namespace advseq::metrics
