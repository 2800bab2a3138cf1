#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "advseq/objectives.hpp"

namespace advseq::train {

struct OptimizerConfig {
  std::string kind = "adam";  // adam | sgd
  double learning_rate = 0.0; // 0 = architecture default (2e-3 lstm, 1e-4 cnn)
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Full description of one training run. Parsed from versioned `key = value`
/// text; `resolved()` fills the architecture- and level-dependent defaults so
/// the echoed copy in the run directory is self-contained.
struct ExperimentConfig {
  int config_version = 1;

  std::string generator = "lstm";      // lstm | cnn
  std::string discriminator = "lstm";  // lstm | cnn
  std::int64_t hidden = 128;
  std::int64_t noise_dim = 128;
  std::int64_t kernel_width = 5;
  std::int64_t residual_blocks = 5;
  std::optional<bool> batchnorm;       // default: on, except when a gradient penalty is active
  std::string condition = "none";      // none | question | sentiment
  std::string sentiment_labels;        // label file, one 0/1 per corpus line

  objectives::ObjectiveConfig objective;

  std::string corpus;
  std::string level = "word";          // word | char
  std::int64_t top_k = 30000;

  std::int64_t start_length = 0;       // 0 = 5 for word level, 13 for characters
  std::int64_t max_length = 0;         // 0 = longest corpus sentence
  std::int64_t epochs_per_increment = 3;

  std::int64_t batch_size = 64;
  std::int64_t epochs = 10;
  OptimizerConfig g_optimizer;
  OptimizerConfig d_optimizer;
  std::uint64_t seed = 42;

  std::int64_t eval_samples = 1280;
  std::int64_t nll_eval_samples = 64;
  std::string eval_grammar;            // CFG path; enables the accuracy column
  std::string eval_pcfg;               // PCFG path; enables the NLL columns
  double divergence_threshold = 1e6;

  double stop_accuracy = 0.0;          // early stop once both targets are met; 0 disables
  double stop_uniqueness = 0.0;
  std::int64_t time_budget_seconds = 0;  // stop after the epoch that crosses this; 0 disables

  std::string run_dir = "run";
  std::string resume;                  // checkpoint path to continue from

  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load_file(const std::string& path);

  /// Copy with all derived defaults filled in and validated.
  ExperimentConfig resolved() const;
  std::string serialize() const;
};

}  // namespace advseq::train
