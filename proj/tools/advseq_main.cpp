#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "advseq/config.hpp"
#include "advseq/data.hpp"
#include "advseq/grammar.hpp"
#include "advseq/metrics.hpp"
#include "advseq/rng.hpp"
#include "advseq/trainer.hpp"

namespace {

using advseq::Error;

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + tmp);
    os << content;
    if (!os) throw Error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::vector<advseq::metrics::TokenSeq> load_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open samples file: " + path);
  std::vector<advseq::metrics::TokenSeq> samples;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream is(line);
    advseq::metrics::TokenSeq tokens;
    std::string tok;
    while (is >> tok) tokens.push_back(tok);
    if (!tokens.empty()) samples.push_back(std::move(tokens));
  }
  return samples;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string join_tokens(const advseq::metrics::TokenSeq& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"adversarial sequence generation laboratory"};
  app.require_subcommand(1);

  // sample-cfg
  auto* sample_cmd = app.add_subcommand("sample-cfg", "sample sentences of a fixed length from a CFG");
  std::string sample_grammar, sample_out;
  std::int64_t sample_length = 5, sample_count = 0;
  std::uint64_t sample_seed = 0;
  sample_cmd->add_option("--grammar", sample_grammar, "grammar file")->required();
  sample_cmd->add_option("--length", sample_length, "tokens per sentence")->required();
  sample_cmd->add_option("--count", sample_count, "number of sentences")->required();
  sample_cmd->add_option("--seed", sample_seed, "rng seed");
  sample_cmd->add_option("--out", sample_out, "output file, one sentence per line")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "run an adversarial training experiment");
  std::string train_config;
  train_cmd->add_option("--config", train_config, "experiment config file")->required();

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "greedy-decode samples from a checkpoint");
  std::string gen_checkpoint, gen_out, gen_condition;
  std::int64_t gen_count = 64;
  std::uint64_t gen_seed = 0;
  gen_cmd->add_option("--checkpoint", gen_checkpoint, "checkpoint file")->required();
  gen_cmd->add_option("--count", gen_count, "number of samples")->required();
  gen_cmd->add_option("--seed", gen_seed, "rng seed");
  gen_cmd->add_option("--out", gen_out, "output file (stdout when omitted)");
  gen_cmd->add_option("--condition", gen_condition, "present|absent for conditional models")
      ->check(CLI::IsMember({"present", "absent"}));

  // eval-cfg
  auto* evalcfg_cmd = app.add_subcommand("eval-cfg", "grammar accuracy and uniqueness of samples");
  std::string evalcfg_grammar, evalcfg_samples, evalcfg_out;
  evalcfg_cmd->add_option("--grammar", evalcfg_grammar, "grammar file")->required();
  evalcfg_cmd->add_option("--samples", evalcfg_samples, "samples file, one per line")->required();
  evalcfg_cmd->add_option("--out", evalcfg_out, "CSV output file");

  // induce-pcfg
  auto* induce_cmd = app.add_subcommand("induce-pcfg", "estimate a PCFG from a bracketed treebank");
  std::string induce_treebank, induce_out;
  std::int64_t induce_top_k = 2000;
  induce_cmd->add_option("--treebank", induce_treebank, "treebank file, one tree per line")->required();
  induce_cmd->add_option("--top-k", induce_top_k, "terminal vocabulary cap (0 = unlimited)");
  induce_cmd->add_option("--out", induce_out, "PCFG output file")->required();

  // eval-nll
  auto* evalnll_cmd = app.add_subcommand("eval-nll", "Viterbi NLL of samples under a PCFG");
  std::string evalnll_pcfg, evalnll_samples, evalnll_out;
  double evalnll_ceiling = advseq::metrics::kDefaultNoParseCeiling;
  evalnll_cmd->add_option("--pcfg", evalnll_pcfg, "PCFG file")->required();
  evalnll_cmd->add_option("--samples", evalnll_samples, "samples file, one per line")->required();
  evalnll_cmd->add_option("--ceiling", evalnll_ceiling, "NLL assigned to unparseable samples");
  evalnll_cmd->add_option("--out", evalnll_out, "CSV output file");

  // bleu
  auto* bleu_cmd = app.add_subcommand("bleu", "corpus-level BLEU-n against a reference set");
  std::string bleu_candidates, bleu_references, bleu_out;
  int bleu_n = 2;
  bleu_cmd->add_option("--candidates", bleu_candidates, "candidate sentences file")->required();
  bleu_cmd->add_option("--references", bleu_references, "reference sentences file")->required();
  bleu_cmd->add_option("--n", bleu_n, "maximum n-gram order (2 or 3)")->check(CLI::IsMember({2, 3}));
  bleu_cmd->add_option("--out", bleu_out, "CSV output file");

  CLI11_PARSE(app, argc, argv);

  if (sample_cmd->parsed()) {
    const advseq::grammar::Cfg cfg = advseq::grammar::load_cfg_file(sample_grammar);
    std::mt19937_64 rng = advseq::seeded_engine(sample_seed);
    std::string out;
    for (std::int64_t i = 0; i < sample_count; ++i) {
      out += join_tokens(advseq::grammar::sample_cfg(cfg, sample_length, rng));
      out += '\n';
    }
    write_file_atomic(sample_out, out);
    std::cout << "wrote " << sample_count << " samples to " << sample_out << "\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    const advseq::train::ExperimentConfig cfg =
        advseq::train::ExperimentConfig::load_file(train_config);
    const advseq::train::TrainResult result = advseq::train::train(cfg);
    std::cout << "run_dir=" << result.run_dir << " epochs=" << result.epochs_run
              << " steps=" << result.steps_run;
    if (result.last_accuracy.has_value()) {
      std::cout << " accuracy=" << fixed4(*result.last_accuracy);
    }
    std::cout << " uniqueness=" << fixed4(result.last_uniqueness) << "\n";
    return 0;
  }

  if (gen_cmd->parsed()) {
    advseq::train::GeneratorBundle bundle = advseq::train::load_generator(gen_checkpoint);
    std::optional<bool> condition;
    if (!gen_condition.empty()) condition = gen_condition == "present";
    std::mt19937_64 rng = advseq::seeded_engine(gen_seed, 17);
    const std::vector<advseq::metrics::TokenSeq> samples = advseq::train::generate_samples(
        *bundle.generator, bundle.vocab, gen_count, bundle.sequence_length, rng, condition);
    std::string out;
    for (const auto& s : samples) {
      out += join_tokens(s);
      out += '\n';
    }
    if (gen_out.empty()) {
      std::cout << out;
    } else {
      write_file_atomic(gen_out, out);
      std::cout << "wrote " << samples.size() << " samples to " << gen_out << "\n";
    }
    return 0;
  }

  if (evalcfg_cmd->parsed()) {
    const advseq::grammar::Cfg cfg = advseq::grammar::load_cfg_file(evalcfg_grammar);
    const auto samples = load_samples(evalcfg_samples);
    const double accuracy = advseq::metrics::grammar_accuracy(samples, cfg);
    const double uniq = advseq::metrics::uniqueness(samples);
    std::cout << "accuracy=" << fixed4(accuracy) << " uniqueness=" << fixed4(uniq)
              << " samples=" << samples.size() << "\n";
    if (!evalcfg_out.empty()) {
      advseq::metrics::EvalReport report;
      report.accuracy = accuracy;
      report.uniqueness = uniq;
      report.sample_count = static_cast<std::int64_t>(samples.size());
      write_file_atomic(evalcfg_out, std::string(advseq::metrics::kEvalCsvHeader) + "\n" +
                                         advseq::metrics::eval_csv_row(report) + "\n");
    }
    return 0;
  }

  if (induce_cmd->parsed()) {
    const auto trees = advseq::grammar::load_treebank_file(induce_treebank);
    const advseq::grammar::Pcfg pcfg = advseq::grammar::induce_pcfg(trees, induce_top_k);
    write_file_atomic(induce_out, advseq::grammar::format_pcfg(pcfg));
    std::cout << "induced " << pcfg.cfg.productions.size() << " productions from "
              << trees.size() << " trees into " << induce_out << "\n";
    return 0;
  }

  if (evalnll_cmd->parsed()) {
    const advseq::grammar::Pcfg pcfg =
        advseq::grammar::binarize_pcfg(advseq::grammar::load_pcfg_file(evalnll_pcfg));
    const auto samples = load_samples(evalnll_samples);
    const advseq::metrics::NllStats stats =
        advseq::metrics::nll_stats(samples, pcfg, evalnll_ceiling);
    std::cout << "mean_nll=" << fixed4(stats.mean) << " median_nll=" << fixed4(stats.median)
              << " no_parse_rate=" << fixed4(stats.no_parse_rate) << " samples="
              << stats.sample_count << "\n";
    if (!evalnll_out.empty()) {
      advseq::metrics::EvalReport report;
      report.mean_nll = stats.mean;
      report.no_parse_rate = stats.no_parse_rate;
      report.sample_count = stats.sample_count;
      write_file_atomic(evalnll_out, std::string(advseq::metrics::kEvalCsvHeader) + "\n" +
                                         advseq::metrics::eval_csv_row(report) + "\n");
    }
    return 0;
  }

  if (bleu_cmd->parsed()) {
    const auto candidates = load_samples(bleu_candidates);
    const auto references = load_samples(bleu_references);
    const double score = advseq::metrics::corpus_bleu(candidates, references, bleu_n);
    std::cout << "bleu=" << fixed4(score) << " n=" << bleu_n << " candidates="
              << candidates.size() << " references=" << references.size() << "\n";
    if (!bleu_out.empty()) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", score);
      write_file_atomic(bleu_out, "bleu\n" + std::string(buf) + "\n");
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
