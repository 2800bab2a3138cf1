#pragma once

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "advseq/checkpoint.hpp"
#include "advseq/config.hpp"
#include "advseq/data.hpp"
#include "advseq/metrics.hpp"
#include "advseq/models.hpp"
#include "advseq/objectives.hpp"

namespace advseq::train {

/// Adam (bias-corrected, epsilon 1e-8) or plain SGD over a fixed parameter
/// list. Moment accumulators mirror the parameter shapes.
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, const std::vector<models::NamedParam>& params);

  void step(const std::vector<models::NamedParam>& params,
            const std::vector<ad::Tensor>& grads);
  std::int64_t step_count() const { return steps_; }
  const OptimizerConfig& config() const { return config_; }

  void save(Checkpoint& ck, const std::string& prefix) const;
  void restore(const Checkpoint& ck, const std::string& prefix);

 private:
  OptimizerConfig config_;
  std::vector<std::string> names_;
  std::vector<ad::Tensor> first_moment_, second_moment_;
  std::int64_t steps_ = 0;
};

/// (batch, n, d) of i.i.d. standard normal noise.
ad::Tensor sample_noise(std::int64_t batch, std::int64_t n, std::int64_t d,
                        std::mt19937_64& rng);

struct StepInfo {
  std::int64_t epoch = 0;
  std::int64_t step = 0;  // global scheduled-step counter
  objectives::StepKind kind = objectives::StepKind::kDiscriminator;
  double loss = 0.0;
  const std::vector<models::NamedParam>* discriminator_params = nullptr;
};

class TrainObserver {
 public:
  virtual ~TrainObserver() = default;
  virtual void on_step(const StepInfo&) {}
  virtual void on_eval(const metrics::EvalReport&) {}
};

struct TrainResult {
  std::string run_dir;
  std::int64_t epochs_run = 0;
  std::int64_t steps_run = 0;
  std::optional<double> last_accuracy;
  double last_uniqueness = 0.0;
  std::string last_checkpoint;
};

/// Runs the adversarial loop described by the config and fills the run
/// directory: resolved `config`, `metrics.csv`, `checkpoints/epoch-<N>`,
/// `samples/epoch-<N>.txt`. On divergence the run aborts with an error and
/// the last completed checkpoint stays on disk.
TrainResult train(const ExperimentConfig& config, TrainObserver* observer = nullptr);

/// Generator restored from a checkpoint, ready for sampling.
struct GeneratorBundle {
  std::unique_ptr<models::Generator> generator;
  data::Vocabulary vocab;
  std::int64_t sequence_length = 0;
  bool conditional = false;
};

GeneratorBundle load_generator(const std::string& checkpoint_path);

/// Greedy-decoded samples from noise. Conditional generators take a fixed
/// attribute bit, or draw one per sample when none is given.
std::vector<metrics::TokenSeq> generate_samples(models::Generator& generator,
                                                const data::Vocabulary& vocab,
                                                std::int64_t count, std::int64_t length,
                                                std::mt19937_64& rng,
                                                std::optional<bool> condition_present = {});

}  // namespace advseq::train
