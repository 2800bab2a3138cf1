#include "advseq/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "advseq/grammar.hpp"
#include "advseq/rng.hpp"

namespace advseq::train {

using ad::shape_str;

namespace fs = std::filesystem;
using ad::Graph;
using ad::Tensor;
using ad::Var;

// --- optimizer -----------------------------------------------------------------

Optimizer::Optimizer(const OptimizerConfig& config,
                     const std::vector<models::NamedParam>& params)
    : config_(config) {
  for (const models::NamedParam& p : params) {
    names_.push_back(p.name);
    if (config_.kind == "adam") {
      first_moment_.push_back(Tensor::zeros(p.tensor->shape()));
      second_moment_.push_back(Tensor::zeros(p.tensor->shape()));
    }
  }
}

void Optimizer::step(const std::vector<models::NamedParam>& params,
                     const std::vector<ad::Tensor>& grads) {
  if (params.size() != names_.size() || grads.size() != names_.size()) {
    throw Error("optimizer: parameter list does not match construction");
  }
  ++steps_;
  const double lr = config_.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i].tensor;
    const Tensor& g = grads[i];
    if (!p.same_shape(g)) {
      throw Error("optimizer: gradient shape " + shape_str(g.shape()) +
                  " does not match parameter " + names_[i]);
    }
    if (!g.all_finite()) {
      throw Error("optimizer: non-finite gradient for parameter " + names_[i]);
    }
    if (config_.kind == "sgd") {
      for (std::int64_t j = 0; j < p.size(); ++j) p[j] -= lr * g[j];
      continue;
    }
    Tensor& m = first_moment_[i];
    Tensor& v = second_moment_[i];
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (std::int64_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double mh = m[j] / bc1;
      const double vh = v[j] / bc2;
      p[j] -= lr * mh / (std::sqrt(vh) + config_.epsilon);
    }
  }
}

void Optimizer::save(Checkpoint& ck, const std::string& prefix) const {
  ck.metadata[prefix + "kind"] = config_.kind;
  ck.metadata[prefix + "steps"] = std::to_string(steps_);
  if (config_.kind == "adam") {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      ck.add_array(prefix + "m." + names_[i], first_moment_[i]);
      ck.add_array(prefix + "v." + names_[i], second_moment_[i]);
    }
  }
}

void Optimizer::restore(const Checkpoint& ck, const std::string& prefix) {
  if (ck.meta(prefix + "kind") != config_.kind) {
    throw Error("checkpoint: optimizer kind mismatch for " + prefix);
  }
  steps_ = std::stoll(ck.meta(prefix + "steps"));
  if (config_.kind == "adam") {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      first_moment_[i] = ck.array(prefix + "m." + names_[i]);
      second_moment_[i] = ck.array(prefix + "v." + names_[i]);
    }
  }
}

Tensor sample_noise(std::int64_t batch, std::int64_t n, std::int64_t d, std::mt19937_64& rng) {
  if (batch < 1 || n < 1 || d < 1) throw Error("sample_noise: dimensions must be positive");
  return Tensor::normal({batch, n, d}, 0.0, 1.0, rng);
}

// --- shared model plumbing --------------------------------------------------------

namespace {

models::CnnOptions cnn_options(const ExperimentConfig& cfg) {
  models::CnnOptions opts;
  opts.channels = cfg.hidden;
  opts.kernel_width = cfg.kernel_width;
  opts.blocks = cfg.residual_blocks;
  opts.batchnorm = cfg.batchnorm.value_or(true);
  opts.conditioned = cfg.condition != "none";
  return opts;
}

std::unique_ptr<models::Generator> make_generator(const ExperimentConfig& cfg, std::int64_t k,
                                                  std::mt19937_64& rng) {
  if (cfg.generator == "lstm") {
    return std::make_unique<models::LstmGenerator>(cfg.noise_dim, cfg.hidden, k, rng);
  }
  return std::make_unique<models::CnnGenerator>(cfg.noise_dim, k, cnn_options(cfg), rng);
}

std::unique_ptr<models::Discriminator> make_discriminator(const ExperimentConfig& cfg,
                                                          std::int64_t k,
                                                          std::mt19937_64& rng) {
  if (cfg.discriminator == "lstm") {
    return std::make_unique<models::LstmDiscriminator>(k, cfg.hidden, rng);
  }
  return std::make_unique<models::CnnDiscriminator>(k, cnn_options(cfg), rng);
}

void assert_one_hot(const Tensor& batch) {
  const std::int64_t rows = batch.extent(0) * batch.extent(1);
  const std::int64_t k = batch.extent(2);
  for (std::int64_t r = 0; r < rows; ++r) {
    std::int64_t ones = 0;
    for (std::int64_t c = 0; c < k; ++c) {
      const double v = batch[r * k + c];
      if (v == 1.0) ++ones;
      else if (v != 0.0) throw Error("real batch is not strictly one-hot");
    }
    if (ones != 1) throw Error("real batch row does not have exactly one 1.0");
  }
}

void assert_row_stochastic(const Tensor& batch) {
  const std::int64_t rows = batch.extent(0) * batch.extent(1);
  const std::int64_t k = batch.extent(2);
  for (std::int64_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (std::int64_t c = 0; c < k; ++c) {
      const double v = batch[r * k + c];
      if (v < 0.0) throw Error("fake batch has a negative probability");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error("fake batch row does not sum to 1");
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + tmp);
    os << content;
    if (!os) throw Error("write failed for " + tmp);
  }
  fs::rename(tmp, path);
}

std::string join_tokens(const metrics::TokenSeq& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

/// Per-sample condition plane values for a batch of labels.
Tensor bits_from_labels(const std::vector<int>& labels) {
  Tensor bits({static_cast<std::int64_t>(labels.size()), 1});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    bits.at2(static_cast<std::int64_t>(i), 0) = labels[i] != 0 ? 1.0 : 0.0;
  }
  return bits;
}

struct Trainer {
  ExperimentConfig cfg;
  TrainObserver* observer;

  data::TokenLevel level = data::TokenLevel::kWord;
  std::vector<std::vector<int>> sentences;  // encoded token ids
  std::vector<int> labels;                  // per-sentence attribute, or empty
  data::Vocabulary vocab;
  std::int64_t max_len = 0;

  std::unique_ptr<models::Generator> generator;
  std::unique_ptr<models::Discriminator> discriminator;
  std::vector<models::NamedParam> g_params, d_params;
  std::unique_ptr<Optimizer> g_opt, d_opt;
  std::mt19937_64 train_rng;

  std::optional<grammar::Cfg> eval_grammar;
  std::optional<grammar::Pcfg> eval_pcfg;  // binarized

  std::int64_t global_step = 0;
  std::int64_t start_epoch = 0;
  std::int64_t current_length = 0;

  double epoch_d_loss = 0.0, epoch_g_loss = 0.0;
  std::int64_t epoch_d_steps = 0, epoch_g_steps = 0;

  explicit Trainer(const ExperimentConfig& config, TrainObserver* obs)
      : cfg(config.resolved()), observer(obs) {}

  void load_data() {
    level = data::parse_level(cfg.level);
    std::vector<std::vector<std::string>> corpus = data::load_corpus_file(cfg.corpus, level);
    if (cfg.condition == "question") {
      data::LabeledCorpus labeled =
          data::label_attribute(std::move(corpus), data::AttributeRule::kQuestion);
      corpus = std::move(labeled.sentences);
      labels = std::move(labeled.labels);
    } else if (cfg.condition == "sentiment") {
      data::LabeledCorpus labeled = data::label_attribute(
          std::move(corpus), data::AttributeRule::kSentimentFile, cfg.sentiment_labels);
      corpus = std::move(labeled.sentences);
      labels = std::move(labeled.labels);
    }
    vocab = data::Vocabulary::build(corpus, cfg.top_k);
    sentences.reserve(corpus.size());
    max_len = 0;
    for (const auto& s : corpus) {
      sentences.push_back(vocab.encode(s));
      max_len = std::max(max_len, static_cast<std::int64_t>(s.size()));
    }
    if (cfg.max_length > 0) max_len = cfg.max_length;
  }

  void build_models() {
    std::mt19937_64 g_init = seeded_engine(cfg.seed, 1);
    std::mt19937_64 d_init = seeded_engine(cfg.seed, 2);
    generator = make_generator(cfg, vocab.size(), g_init);
    discriminator = make_discriminator(cfg, vocab.size(), d_init);
    g_params = generator->params();
    d_params = discriminator->params();
    g_opt = std::make_unique<Optimizer>(cfg.g_optimizer, g_params);
    d_opt = std::make_unique<Optimizer>(cfg.d_optimizer, d_params);
    train_rng = seeded_engine(cfg.seed, 3);
  }

  void load_eval_targets() {
    if (!cfg.eval_grammar.empty()) eval_grammar = grammar::load_cfg_file(cfg.eval_grammar);
    if (!cfg.eval_pcfg.empty()) {
      eval_pcfg = grammar::binarize_pcfg(grammar::load_pcfg_file(cfg.eval_pcfg));
    }
  }

  data::CurriculumState curriculum() const {
    data::CurriculumState state;
    state.start_length = std::min(cfg.start_length, max_len);
    state.current_length = state.start_length;
    state.epochs_per_increment = cfg.epochs_per_increment;
    state.max_length = max_len;
    return state;
  }

  std::string checkpoint_path(std::int64_t epoch) const {
    return (fs::path(cfg.run_dir) / "checkpoints" / ("epoch-" + std::to_string(epoch)))
        .string();
  }

  void save_checkpoint(std::int64_t epoch) {
    Checkpoint ck;
    ck.metadata["format"] = "advseq-run";
    ck.metadata["generator_arch"] = cfg.generator;
    ck.metadata["discriminator_arch"] = cfg.discriminator;
    ck.metadata["hidden"] = std::to_string(cfg.hidden);
    ck.metadata["noise_dim"] = std::to_string(cfg.noise_dim);
    ck.metadata["kernel_width"] = std::to_string(cfg.kernel_width);
    ck.metadata["residual_blocks"] = std::to_string(cfg.residual_blocks);
    ck.metadata["batchnorm"] = cfg.batchnorm.value_or(true) ? "on" : "off";
    ck.metadata["condition"] = cfg.condition;
    ck.metadata["sequence_length"] = std::to_string(current_length);
    ck.metadata["epoch"] = std::to_string(epoch);
    ck.metadata["global_step"] = std::to_string(global_step);
    std::ostringstream rng_state;
    rng_state << train_rng;
    ck.metadata["rng"] = rng_state.str();
    std::string vocab_blob;
    for (const std::string& t : vocab.tokens()) {
      vocab_blob += t;
      vocab_blob += '\n';
    }
    ck.metadata["vocab"] = vocab_blob;
    for (const auto& p : g_params) ck.add_array("gen." + p.name, *p.tensor);
    for (const auto& p : generator->buffers()) ck.add_array("genbuf." + p.name, *p.tensor);
    for (const auto& p : d_params) ck.add_array("disc." + p.name, *p.tensor);
    for (const auto& p : discriminator->buffers()) ck.add_array("discbuf." + p.name, *p.tensor);
    g_opt->save(ck, "opt.g.");
    d_opt->save(ck, "opt.d.");
    ck.save(checkpoint_path(epoch));
  }

  void resume_from(const std::string& path) {
    const Checkpoint ck = Checkpoint::load(path);
    std::string vocab_blob;
    for (const std::string& t : vocab.tokens()) {
      vocab_blob += t;
      vocab_blob += '\n';
    }
    if (ck.meta("vocab") != vocab_blob) {
      throw Error("resume: checkpoint vocabulary does not match the corpus");
    }
    for (const auto& p : g_params) *p.tensor = ck.array("gen." + p.name);
    for (const auto& p : generator->buffers()) *p.tensor = ck.array("genbuf." + p.name);
    for (const auto& p : d_params) *p.tensor = ck.array("disc." + p.name);
    for (const auto& p : discriminator->buffers()) *p.tensor = ck.array("discbuf." + p.name);
    g_opt->restore(ck, "opt.g.");
    d_opt->restore(ck, "opt.d.");
    std::istringstream rng_state(ck.meta("rng"));
    rng_state >> train_rng;
    global_step = std::stoll(ck.meta("global_step"));
    start_epoch = std::stoll(ck.meta("epoch")) + 1;
  }

  Var build_d_loss(Graph& g, Var logit_real, Var logit_fake) {
    switch (cfg.objective.kind) {
      case objectives::ObjectiveKind::kGan:
      case objectives::ObjectiveKind::kGanGp:
        return objectives::gan_losses_node(g, logit_real, logit_fake).d_loss;
      case objectives::ObjectiveKind::kLsgan:
        return objectives::lsgan_losses_node(g, logit_real, logit_fake).d_loss;
      case objectives::ObjectiveKind::kWgan:
      case objectives::ObjectiveKind::kWganGp:
        return objectives::wgan_losses_node(g, logit_real, logit_fake).d_loss;
    }
    throw Error("unreachable objective kind");
  }

  Var build_g_loss(Graph& g, Var logit_fake) {
    switch (cfg.objective.kind) {
      case objectives::ObjectiveKind::kGan:
      case objectives::ObjectiveKind::kGanGp:
        return objectives::gan_generator_loss_node(g, logit_fake);
      case objectives::ObjectiveKind::kLsgan:
        return objectives::lsgan_generator_loss_node(g, logit_fake);
      case objectives::ObjectiveKind::kWgan:
      case objectives::ObjectiveKind::kWganGp:
        return objectives::wgan_generator_loss_node(g, logit_fake);
    }
    throw Error("unreachable objective kind");
  }

  std::vector<Tensor> grads_for(Graph& g, const ad::GradMap& grads,
                                const std::vector<models::NamedParam>& params) {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const models::NamedParam& p : params) {
      const Var leaf = g.find_leaf(p.tensor);
      if (leaf.valid() && grads.has(leaf)) {
        out.push_back(grads.grad(leaf));
      } else {
        out.push_back(Tensor::zeros(p.tensor->shape()));
      }
    }
    return out;
  }

  void check_divergence(double loss) const {
    if (!std::isfinite(loss) || std::abs(loss) > cfg.divergence_threshold) {
      throw Error("training diverged: loss " + std::to_string(loss));
    }
  }

  double discriminator_step(const std::vector<std::size_t>& batch) {
    const std::int64_t b = static_cast<std::int64_t>(batch.size());
    std::vector<std::vector<int>> rows;
    rows.reserve(batch.size());
    std::vector<int> batch_labels;
    for (std::size_t idx : batch) {
      rows.push_back(sentences[idx]);
      if (!labels.empty()) batch_labels.push_back(labels[idx]);
    }
    const Tensor real = data::encode_one_hot_batch(rows, vocab, current_length);
    assert_one_hot(real);
    std::optional<Tensor> bits;
    if (!batch_labels.empty()) bits = bits_from_labels(batch_labels);
    const Tensor* bits_ptr = bits.has_value() ? &*bits : nullptr;

    // fake batch, detached: the critic update never reaches generator weights
    const Tensor z = sample_noise(b, current_length, cfg.noise_dim, train_rng);
    Tensor fake_value;
    {
      Graph gen_graph;
      fake_value = generator->forward(gen_graph, gen_graph.constant(z), true, bits_ptr).value();
    }
    assert_row_stochastic(fake_value);

    Graph g;
    Var real_var = g.constant(real);
    Var fake_var = g.constant(fake_value);
    Var logit_real = discriminator->logit(g, real_var, true, bits_ptr);
    Var logit_fake = discriminator->logit(g, fake_var, true, bits_ptr);
    Var d_loss = build_d_loss(g, logit_real, logit_fake);
    if (cfg.objective.uses_penalty()) {
      Var penalty = objectives::gradient_penalty(
          g, *discriminator, real_var, fake_var, cfg.objective.penalty_weight,
          cfg.objective.penalty_point, train_rng, true, bits_ptr);
      d_loss = ad::add(d_loss, penalty);
    }
    const double loss = d_loss.value().item();
    const ad::GradMap grads = ad::backward(g, d_loss);
    d_opt->step(d_params, grads_for(g, grads, d_params));
    if (cfg.objective.uses_clip()) {
      objectives::clip_weights(d_params, cfg.objective.clip_bound);
    }
    return loss;
  }

  double generator_step() {
    const std::int64_t b = cfg.batch_size;
    std::optional<Tensor> bits;
    if (!labels.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, labels.size() - 1);
      std::vector<int> drawn;
      drawn.reserve(static_cast<std::size_t>(b));
      for (std::int64_t i = 0; i < b; ++i) drawn.push_back(labels[pick(train_rng)]);
      bits = bits_from_labels(drawn);
    }
    const Tensor* bits_ptr = bits.has_value() ? &*bits : nullptr;

    const Tensor z = sample_noise(b, current_length, cfg.noise_dim, train_rng);
    Graph g;
    Var fake = generator->forward(g, g.constant(z), true, bits_ptr);
    assert_row_stochastic(fake.value());
    Var logit_fake = discriminator->logit(g, fake, true, bits_ptr);
    Var g_loss = build_g_loss(g, logit_fake);
    const double loss = g_loss.value().item();
    const ad::GradMap grads = ad::backward(g, g_loss);
    g_opt->step(g_params, grads_for(g, grads, g_params));
    return loss;
  }

  std::vector<metrics::TokenSeq> eval_samples(std::int64_t count, std::int64_t epoch) {
    std::mt19937_64 eval_rng = seeded_engine(cfg.seed, 0x0E0A0000ULL + static_cast<std::uint64_t>(epoch));
    return generate_samples(*generator, vocab, count, current_length, eval_rng);
  }

  metrics::EvalReport evaluate(std::int64_t epoch) {
    metrics::EvalReport report;
    report.epoch = epoch;
    report.step = global_step;
    report.d_loss = epoch_d_steps > 0 ? epoch_d_loss / static_cast<double>(epoch_d_steps) : 0.0;
    report.g_loss = epoch_g_steps > 0 ? epoch_g_loss / static_cast<double>(epoch_g_steps) : 0.0;
    const std::vector<metrics::TokenSeq> samples = eval_samples(cfg.eval_samples, epoch);
    report.sample_count = static_cast<std::int64_t>(samples.size());
    if (eval_grammar.has_value()) {
      report.accuracy = metrics::grammar_accuracy(samples, *eval_grammar);
    }
    report.uniqueness = metrics::uniqueness(samples);
    if (eval_pcfg.has_value()) {
      const std::size_t n =
          std::min(samples.size(), static_cast<std::size_t>(cfg.nll_eval_samples));
      const std::span<const metrics::TokenSeq> head(samples.data(), n);
      const metrics::NllStats stats = metrics::nll_stats(head, *eval_pcfg);
      report.mean_nll = stats.mean;
      report.no_parse_rate = stats.no_parse_rate;
    }

    std::string sample_text;
    for (const metrics::TokenSeq& s : samples) {
      sample_text += join_tokens(s);
      sample_text += '\n';
    }
    write_text_file(
        (fs::path(cfg.run_dir) / "samples" / ("epoch-" + std::to_string(epoch) + ".txt"))
            .string(),
        sample_text);
    return report;
  }

  TrainResult run() {
    load_data();
    build_models();
    load_eval_targets();

    fs::create_directories(fs::path(cfg.run_dir) / "checkpoints");
    fs::create_directories(fs::path(cfg.run_dir) / "samples");
    write_text_file((fs::path(cfg.run_dir) / "config").string(), cfg.serialize());

    const std::string metrics_path = (fs::path(cfg.run_dir) / "metrics.csv").string();
    const bool resuming = !cfg.resume.empty();
    if (resuming) resume_from(cfg.resume);
    std::ofstream metrics_out(metrics_path,
                              resuming ? std::ios::app : std::ios::trunc);
    if (!metrics_out) throw Error("cannot write " + metrics_path);
    if (!resuming) metrics_out << metrics::kEvalCsvHeader << "\n";

    TrainResult result;
    result.run_dir = cfg.run_dir;
    data::CurriculumState schedule = curriculum();
    const auto started = std::chrono::steady_clock::now();

    for (std::int64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
      schedule = data::curriculum_advance(schedule, epoch);
      current_length = schedule.current_length;

      // epoch set: everything the curriculum has reached; at the final
      // length the whole corpus participates (long sentences truncated)
      std::vector<std::size_t> epoch_set;
      for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (static_cast<std::int64_t>(sentences[i].size()) <= current_length ||
            current_length == max_len) {
          epoch_set.push_back(i);
        }
      }
      if (epoch_set.empty()) {
        for (std::size_t i = 0; i < sentences.size(); ++i) epoch_set.push_back(i);
      }
      std::shuffle(epoch_set.begin(), epoch_set.end(), train_rng);

      epoch_d_loss = epoch_g_loss = 0.0;
      epoch_d_steps = epoch_g_steps = 0;

      std::size_t cursor = 0;
      try {
        while (cursor < epoch_set.size()) {
          const objectives::StepKind kind =
              objectives::critic_schedule(global_step, cfg.objective.critic_steps);
          double loss = 0.0;
          if (kind == objectives::StepKind::kDiscriminator) {
            const std::size_t take =
                std::min(static_cast<std::size_t>(cfg.batch_size), epoch_set.size() - cursor);
            const std::vector<std::size_t> batch(epoch_set.begin() + static_cast<std::ptrdiff_t>(cursor),
                                                 epoch_set.begin() + static_cast<std::ptrdiff_t>(cursor + take));
            cursor += take;
            loss = discriminator_step(batch);
            epoch_d_loss += loss;
            ++epoch_d_steps;
          } else {
            loss = generator_step();
            epoch_g_loss += loss;
            ++epoch_g_steps;
          }
          check_divergence(loss);
          if (observer != nullptr) {
            observer->on_step(StepInfo{epoch, global_step, kind, loss, &d_params});
          }
          ++global_step;
        }
      } catch (const Error& e) {
        throw Error(std::string(e.what()) + " (run aborted at step " +
                    std::to_string(global_step) + "; last checkpoint preserved in " +
                    cfg.run_dir + "/checkpoints)");
      }

      const metrics::EvalReport report = evaluate(epoch);
      metrics_out << metrics::eval_csv_row(report) << "\n";
      metrics_out.flush();
      save_checkpoint(epoch);
      if (observer != nullptr) observer->on_eval(report);

      result.epochs_run = epoch - start_epoch + 1;
      result.steps_run = global_step;
      result.last_accuracy = report.accuracy;
      result.last_uniqueness = report.uniqueness.value_or(0.0);
      result.last_checkpoint = checkpoint_path(epoch);

      const bool accuracy_met =
          cfg.stop_accuracy <= 0.0 ||
          (report.accuracy.has_value() && *report.accuracy >= cfg.stop_accuracy);
      const bool uniqueness_met =
          cfg.stop_uniqueness <= 0.0 ||
          (report.uniqueness.has_value() && *report.uniqueness >= cfg.stop_uniqueness);
      if ((cfg.stop_accuracy > 0.0 || cfg.stop_uniqueness > 0.0) && accuracy_met &&
          uniqueness_met) {
        break;
      }
      if (cfg.time_budget_seconds > 0) {
        const auto elapsed = std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::steady_clock::now() - started);
        if (elapsed.count() >= cfg.time_budget_seconds) break;
      }
    }
    return result;
  }
};

}  // namespace

TrainResult train(const ExperimentConfig& config, TrainObserver* observer) {
  Trainer trainer(config, observer);
  return trainer.run();
}

GeneratorBundle load_generator(const std::string& checkpoint_path) {
  const Checkpoint ck = Checkpoint::load(checkpoint_path);
  GeneratorBundle bundle;

  std::vector<std::string> tokens;
  std::istringstream vocab_blob(ck.meta("vocab"));
  std::string token;
  while (std::getline(vocab_blob, token)) tokens.push_back(token);
  bundle.vocab = data::Vocabulary::from_tokens(std::move(tokens));
  bundle.sequence_length = std::stoll(ck.meta("sequence_length"));
  bundle.conditional = ck.meta("condition") != "none";

  ExperimentConfig cfg;
  cfg.generator = ck.meta("generator_arch");
  cfg.hidden = std::stoll(ck.meta("hidden"));
  cfg.noise_dim = std::stoll(ck.meta("noise_dim"));
  cfg.kernel_width = std::stoll(ck.meta("kernel_width"));
  cfg.residual_blocks = std::stoll(ck.meta("residual_blocks"));
  cfg.batchnorm = ck.meta("batchnorm") == "on";
  cfg.condition = ck.meta("condition");

  std::mt19937_64 rng = seeded_engine(0, 0);  // placeholder weights, overwritten below
  bundle.generator = make_generator(cfg, bundle.vocab.size(), rng);
  for (const auto& p : bundle.generator->params()) *p.tensor = ck.array("gen." + p.name);
  for (const auto& p : bundle.generator->buffers()) *p.tensor = ck.array("genbuf." + p.name);
  return bundle;
}

std::vector<metrics::TokenSeq> generate_samples(models::Generator& generator,
                                                const data::Vocabulary& vocab,
                                                std::int64_t count, std::int64_t length,
                                                std::mt19937_64& rng,
                                                std::optional<bool> condition_present) {
  std::vector<metrics::TokenSeq> out;
  out.reserve(static_cast<std::size_t>(count));
  constexpr std::int64_t kChunk = 128;
  for (std::int64_t done = 0; done < count; done += kChunk) {
    const std::int64_t b = std::min(kChunk, count - done);
    const Tensor z = sample_noise(b, length, generator.noise_dim(), rng);
    std::optional<Tensor> bits;
    if (generator.conditional()) {
      Tensor t({b, 1});
      if (condition_present.has_value()) {
        for (std::int64_t i = 0; i < b; ++i) t.at2(i, 0) = *condition_present ? 1.0 : 0.0;
      } else {
        std::uniform_int_distribution<int> coin(0, 1);
        for (std::int64_t i = 0; i < b; ++i) t.at2(i, 0) = coin(rng);
      }
      bits = std::move(t);
    }
    Graph g;
    Var dist = generator.forward(g, g.constant(z), false, bits.has_value() ? &*bits : nullptr);
    for (const std::vector<int>& ids : models::greedy_decode_batch(dist.value())) {
      out.push_back(vocab.decode(ids));
    }
  }
  return out;
}

}  // namespace advseq::train
