#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "advseq/checkpoint.hpp"
#include "advseq/config.hpp"
#include "advseq/rng.hpp"
#include "advseq/trainer.hpp"

using namespace advseq;
namespace tr = advseq::train;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("advseq_trainer_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& tail = "") const { return (path / tail).string(); }
};

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream os(path);
  for (const std::string& l : lines) os << l << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Tiny fixed-length corpus over a 4-word vocabulary.
std::vector<std::string> tiny_corpus(int sentences) {
  const char* words[4] = {"alpha", "beta", "gamma", "delta"};
  std::vector<std::string> lines;
  for (int i = 0; i < sentences; ++i) {
    std::string line;
    for (int t = 0; t < 3; ++t) {
      if (t) line += ' ';
      line += words[(i + t) % 4];
    }
    lines.push_back(line);
  }
  return lines;
}

tr::ExperimentConfig tiny_config(const TempDir& dir, const std::string& corpus_name = "corpus.txt") {
  tr::ExperimentConfig cfg;
  cfg.corpus = dir.str(corpus_name);
  cfg.run_dir = dir.str("run");
  cfg.generator = "lstm";
  cfg.discriminator = "lstm";
  cfg.hidden = 8;
  cfg.noise_dim = 4;
  cfg.batch_size = 4;
  cfg.epochs = 1;
  cfg.start_length = 3;
  cfg.eval_samples = 8;
  cfg.seed = 7;
  cfg.objective.kind = objectives::ObjectiveKind::kWganGp;
  cfg.objective.critic_steps = 2;
  return cfg;
}

struct Recorder : tr::TrainObserver {
  std::vector<tr::StepInfo> steps;
  double max_abs_d_param_after_critic = 0.0;
  bool check_clip = false;
  double clip_bound = 0.0;
  bool clip_ok = true;

  void on_step(const tr::StepInfo& info) override {
    steps.push_back(info);
    if (check_clip && info.kind == objectives::StepKind::kDiscriminator) {
      for (const models::NamedParam& p : *info.discriminator_params) {
        for (double v : p.tensor->data()) {
          max_abs_d_param_after_critic = std::max(max_abs_d_param_after_critic, std::abs(v));
          if (std::abs(v) > clip_bound) clip_ok = false;
        }
      }
    }
  }
};

}  // namespace

TEST_CASE("adam first step moves by about lr in the gradient direction") {
  ad::Tensor w({1}, {1.0});
  std::vector<models::NamedParam> params{{"w", &w}};
  tr::OptimizerConfig cfg;
  cfg.kind = "adam";
  cfg.learning_rate = 2e-3;
  tr::Optimizer opt(cfg, params);
  opt.step(params, {ad::Tensor({1}, {0.37})});
  CHECK(w[0] == doctest::Approx(1.0 - 2e-3).epsilon(1e-6));

  ad::Tensor w2({1}, {1.0});
  std::vector<models::NamedParam> params2{{"w", &w2}};
  tr::Optimizer opt2(cfg, params2);
  opt2.step(params2, {ad::Tensor({1}, {-5.0})});
  CHECK(w2[0] == doctest::Approx(1.0 + 2e-3).epsilon(1e-6));
}

TEST_CASE("adam leaves parameters unchanged on a zero gradient") {
  ad::Tensor w({2}, {0.5, -0.25});
  std::vector<models::NamedParam> params{{"w", &w}};
  tr::OptimizerConfig cfg;
  cfg.kind = "adam";
  cfg.learning_rate = 2e-3;
  tr::Optimizer opt(cfg, params);
  opt.step(params, {ad::Tensor::zeros({2})});
  CHECK(w[0] == 0.5);
  CHECK(w[1] == -0.25);
}

TEST_CASE("adam reproduces the hand-computed trace on f(w) = w^2") {
  // lr 2e-3, beta1 0.5, beta2 0.999, eps 1e-8, starting from w = 1
  ad::Tensor w({1}, {1.0});
  std::vector<models::NamedParam> params{{"w", &w}};
  tr::OptimizerConfig cfg;
  cfg.kind = "adam";
  cfg.learning_rate = 2e-3;
  cfg.beta1 = 0.5;
  cfg.beta2 = 0.999;
  tr::Optimizer opt(cfg, params);

  const double expected[3] = {0.99800000001, 0.9960006673545051, 0.9940023847704341};
  // independent trace with plain scalars
  double wr = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    opt.step(params, {ad::Tensor({1}, {2.0 * w[0]})});

    const double g = 2.0 * wr;
    m = 0.5 * m + 0.5 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.5, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    wr -= 2e-3 * mh / (std::sqrt(vh) + 1e-8);

    CHECK(std::abs(w[0] - wr) < 1e-12);
    CHECK(std::abs(w[0] - expected[t - 1]) < 1e-12);
  }
}

TEST_CASE("sgd steps and linearity") {
  ad::Tensor w({1}, {1.0});
  std::vector<models::NamedParam> params{{"w", &w}};
  tr::OptimizerConfig cfg;
  cfg.kind = "sgd";
  cfg.learning_rate = 0.1;
  tr::Optimizer opt(cfg, params);
  opt.step(params, {ad::Tensor({1}, {2.0})});
  CHECK(w[0] == doctest::Approx(0.8));

  cfg.learning_rate = 0.0;
  tr::Optimizer frozen(cfg, params);
  frozen.step(params, {ad::Tensor({1}, {123.0})});
  CHECK(w[0] == doctest::Approx(0.8));

  // two half-lr steps with the same gradient equal one full-lr step
  ad::Tensor a({1}, {1.0}), b({1}, {1.0});
  std::vector<models::NamedParam> pa{{"w", &a}}, pb{{"w", &b}};
  tr::OptimizerConfig half = cfg, full = cfg;
  half.learning_rate = 0.05;
  full.learning_rate = 0.1;
  tr::Optimizer oa(half, pa), ob(full, pb);
  oa.step(pa, {ad::Tensor({1}, {3.0})});
  oa.step(pa, {ad::Tensor({1}, {3.0})});
  ob.step(pb, {ad::Tensor({1}, {3.0})});
  CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-15));
}

TEST_CASE("optimizer rejects non-finite gradients with diagnostics") {
  ad::Tensor w({1}, {1.0});
  std::vector<models::NamedParam> params{{"w", &w}};
  tr::OptimizerConfig cfg;
  cfg.kind = "adam";
  cfg.learning_rate = 1e-3;
  tr::Optimizer opt(cfg, params);
  CHECK_THROWS_WITH_AS(opt.step(params, {ad::Tensor({1}, {std::nan("")})}),
                       doctest::Contains("non-finite gradient"), Error);
}

TEST_CASE("sample_noise is deterministic per seed with the right shape") {
  std::mt19937_64 a = seeded_engine(123), b = seeded_engine(123);
  const ad::Tensor za = tr::sample_noise(2, 3, 4, a);
  const ad::Tensor zb = tr::sample_noise(2, 3, 4, b);
  REQUIRE(za.shape() == ad::Shape{2, 3, 4});
  for (std::int64_t i = 0; i < za.size(); ++i) CHECK(za[i] == zb[i]);
  CHECK_THROWS_AS((void)tr::sample_noise(0, 3, 4, a), Error);
}

TEST_CASE("sample_noise draws standard normal entries") {
  std::mt19937_64 rng = seeded_engine(124);
  // one million draws
  const ad::Tensor z = tr::sample_noise(100, 100, 100, rng);
  double sum = 0.0, sumsq = 0.0;
  for (std::int64_t i = 0; i < z.size(); ++i) {
    sum += z[i];
    sumsq += z[i] * z[i];
  }
  const double mean = sum / static_cast<double>(z.size());
  const double var = sumsq / static_cast<double>(z.size()) - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("checkpoint round-trips bit-exactly and validates headers") {
  TempDir dir("checkpoint");
  std::mt19937_64 rng = seeded_engine(125);
  tr::Checkpoint ck;
  ck.metadata["note"] = "fixture";
  ck.add_array("w", ad::Tensor::uniform({3, 4}, -1, 1, rng));
  ck.add_array("b", ad::Tensor::uniform({1, 4}, -1, 1, rng));
  const std::string path = dir.str("model.ck");
  ck.save(path);

  const tr::Checkpoint loaded = tr::Checkpoint::load(path);
  CHECK(loaded.meta("note") == "fixture");
  REQUIRE(loaded.arrays().size() == 2);
  for (const auto& [name, tensor] : ck.arrays()) {
    const ad::Tensor& other = loaded.array(name);
    REQUIRE(tensor.shape() == other.shape());
    for (std::int64_t i = 0; i < tensor.size(); ++i) CHECK(tensor[i] == other[i]);
  }

  SUBCASE("corrupted magic is rejected") {
    std::string bytes = read_file(path);
    bytes[0] = 'X';
    std::ofstream os(dir.str("bad.ck"), std::ios::binary);
    os << bytes;
    os.close();
    CHECK_THROWS_WITH_AS((void)tr::Checkpoint::load(dir.str("bad.ck")),
                         doctest::Contains("corrupted"), Error);
  }
  SUBCASE("truncated file is rejected") {
    std::string bytes = read_file(path);
    bytes.resize(bytes.size() / 2);
    std::ofstream os(dir.str("trunc.ck"), std::ios::binary);
    os << bytes;
    os.close();
    CHECK_THROWS_WITH_AS((void)tr::Checkpoint::load(dir.str("trunc.ck")),
                         doctest::Contains("truncated"), Error);
  }
  SUBCASE("unsupported version is rejected") {
    std::string bytes = read_file(path);
    bytes[8] = 99;  // version field follows the 8-byte magic
    std::ofstream os(dir.str("ver.ck"), std::ios::binary);
    os << bytes;
    os.close();
    CHECK_THROWS_WITH_AS((void)tr::Checkpoint::load(dir.str("ver.ck")),
                         doctest::Contains("version"), Error);
  }
}

TEST_CASE("training smoke run writes checkpoints, samples and metric rows") {
  TempDir dir("smoke");
  write_lines(dir.str("corpus.txt"), tiny_corpus(5));
  tr::ExperimentConfig cfg = tiny_config(dir);
  Recorder recorder;
  const tr::TrainResult result = tr::train(cfg, &recorder);

  CHECK(result.epochs_run == 1);
  CHECK(recorder.steps.size() >= 2);
  CHECK(fs::exists(dir.str("run/config")));
  CHECK(fs::exists(dir.str("run/metrics.csv")));
  CHECK(fs::exists(dir.str("run/checkpoints/epoch-0")));
  CHECK(fs::exists(dir.str("run/samples/epoch-0.txt")));

  const std::string metrics = read_file(dir.str("run/metrics.csv"));
  CHECK(metrics.rfind("epoch,step,d_loss,g_loss,accuracy,uniqueness,mean_nll,no_parse_rate\n",
                      0) == 0);
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') >= 2);

  // greedy samples decode through the vocabulary: 8 lines of 3 tokens
  const std::string samples = read_file(dir.str("run/samples/epoch-0.txt"));
  CHECK(std::count(samples.begin(), samples.end(), '\n') == 8);
}

TEST_CASE("wgan training keeps every critic weight inside the clip interval") {
  TempDir dir("wgan");
  write_lines(dir.str("corpus.txt"), tiny_corpus(24));
  tr::ExperimentConfig cfg = tiny_config(dir);
  cfg.objective.kind = objectives::ObjectiveKind::kWgan;
  cfg.objective.clip_bound = 0.01;
  cfg.objective.critic_steps = 3;
  cfg.epochs = 3;
  Recorder recorder;
  recorder.check_clip = true;
  recorder.clip_bound = 0.01;
  tr::train(cfg, &recorder);
  CHECK(recorder.clip_ok);
  CHECK(recorder.max_abs_d_param_after_critic <= 0.01);
  CHECK(recorder.max_abs_d_param_after_critic > 0.0);
}

TEST_CASE("generator updates times n_critic track discriminator updates") {
  TempDir dir("ratio");
  write_lines(dir.str("corpus.txt"), tiny_corpus(40));
  tr::ExperimentConfig cfg = tiny_config(dir);
  cfg.objective.kind = objectives::ObjectiveKind::kWganGp;
  cfg.objective.critic_steps = 3;
  cfg.epochs = 2;
  Recorder recorder;
  tr::train(cfg, &recorder);
  std::int64_t d_steps = 0, g_steps = 0;
  for (const tr::StepInfo& s : recorder.steps) {
    if (s.kind == objectives::StepKind::kDiscriminator) ++d_steps;
    else ++g_steps;
  }
  CHECK(d_steps >= g_steps * 3);
  CHECK(d_steps - g_steps * 3 < 3);
}

TEST_CASE("identical configs and seeds give identical metrics and losses") {
  TempDir dir("determinism");
  write_lines(dir.str("corpus.txt"), tiny_corpus(16));
  tr::ExperimentConfig cfg = tiny_config(dir);
  cfg.epochs = 2;

  cfg.run_dir = dir.str("run_a");
  Recorder rec_a;
  tr::train(cfg, &rec_a);
  cfg.run_dir = dir.str("run_b");
  Recorder rec_b;
  tr::train(cfg, &rec_b);

  CHECK(read_file(dir.str("run_a/metrics.csv")) == read_file(dir.str("run_b/metrics.csv")));
  REQUIRE(rec_a.steps.size() == rec_b.steps.size());
  for (std::size_t i = 0; i < rec_a.steps.size(); ++i) {
    CHECK(rec_a.steps[i].loss == rec_b.steps[i].loss);
  }
}

TEST_CASE("resume from a checkpoint reproduces the continued loss stream") {
  TempDir dir("resume");
  write_lines(dir.str("corpus.txt"), tiny_corpus(16));

  // full run: two epochs
  tr::ExperimentConfig cfg = tiny_config(dir);
  cfg.epochs = 2;
  cfg.run_dir = dir.str("run_full");
  Recorder rec_full;
  tr::train(cfg, &rec_full);

  // split run: one epoch, then resume from its checkpoint
  cfg.epochs = 1;
  cfg.run_dir = dir.str("run_part");
  Recorder rec_part;
  tr::train(cfg, &rec_part);
  cfg.epochs = 2;
  cfg.resume = dir.str("run_part/checkpoints/epoch-0");
  Recorder rec_cont;
  tr::train(cfg, &rec_cont);

  REQUIRE(rec_full.steps.size() == rec_part.steps.size() + rec_cont.steps.size());
  for (std::size_t i = 0; i < rec_cont.steps.size(); ++i) {
    CHECK(rec_cont.steps[i].loss == rec_full.steps[rec_part.steps.size() + i].loss);
  }
}

TEST_CASE("model parameters and optimizer state round-trip through run checkpoints") {
  TempDir dir("roundtrip");
  write_lines(dir.str("corpus.txt"), tiny_corpus(8));
  tr::ExperimentConfig cfg = tiny_config(dir);
  tr::train(cfg);

  const tr::Checkpoint ck = tr::Checkpoint::load(dir.str("run/checkpoints/epoch-0"));
  const std::string copy = dir.str("copy.ck");
  ck.save(copy);
  CHECK(read_file(dir.str("run/checkpoints/epoch-0")) == read_file(copy));
  CHECK(ck.meta("opt.g.kind") == "adam");
  CHECK(ck.find_array("opt.g.m.Wxi") != nullptr);
  CHECK(ck.find_array("gen.Wout") != nullptr);
  CHECK(ck.find_array("disc.Wpred") != nullptr);
}

TEST_CASE("divergence aborts the run and preserves earlier checkpoints") {
  TempDir dir("diverge");
  write_lines(dir.str("corpus.txt"), tiny_corpus(8));
  tr::ExperimentConfig cfg = tiny_config(dir);
  cfg.epochs = 1;
  tr::train(cfg);
  REQUIRE(fs::exists(dir.str("run/checkpoints/epoch-0")));

  cfg.epochs = 2;
  cfg.resume = dir.str("run/checkpoints/epoch-0");
  cfg.divergence_threshold = 1e-9;  // every loss trips the detector
  CHECK_THROWS_WITH_AS(tr::train(cfg), doctest::Contains("diverged"), Error);
  CHECK(fs::exists(dir.str("run/checkpoints/epoch-0")));
}

TEST_CASE("load_generator rebuilds a sampling generator from a checkpoint") {
  TempDir dir("loadgen");
  write_lines(dir.str("corpus.txt"), tiny_corpus(8));
  tr::ExperimentConfig cfg = tiny_config(dir);
  tr::train(cfg);

  tr::GeneratorBundle bundle = tr::load_generator(dir.str("run/checkpoints/epoch-0"));
  CHECK(bundle.sequence_length == 3);
  CHECK(bundle.vocab.size() == 4 + 4);  // reserved + four corpus words
  std::mt19937_64 rng = seeded_engine(321);
  const auto samples =
      tr::generate_samples(*bundle.generator, bundle.vocab, 6, bundle.sequence_length, rng);
  REQUIRE(samples.size() == 6);
  for (const auto& s : samples) CHECK(s.size() == 3);

  // same seed, same samples
  std::mt19937_64 rng2 = seeded_engine(321);
  const auto again =
      tr::generate_samples(*bundle.generator, bundle.vocab, 6, bundle.sequence_length, rng2);
  CHECK(samples == again);
}

TEST_CASE("config files parse, resolve defaults, and serialize round-trip") {
  TempDir dir("config");
  write_lines(dir.str("corpus.txt"), tiny_corpus(4));
  const std::string text =
      "config_version = 1\n"
      "generator = lstm\n"
      "discriminator = lstm\n"
      "hidden = 16\n"
      "noise_dim = 8\n"
      "objective = wgan-gp\n"
      "n_critic = 5\n"
      "corpus = " + dir.str("corpus.txt") + "\n"
      "level = word\n"
      "# a comment\n"
      "batch_size = 4\n"
      "epochs = 2\n"
      "seed = 11\n"
      "run_dir = " + dir.str("run") + "\n";
  const tr::ExperimentConfig cfg = tr::ExperimentConfig::parse(text);
  const tr::ExperimentConfig resolved = cfg.resolved();
  CHECK(resolved.start_length == 5);              // word-level default
  CHECK(resolved.g_optimizer.learning_rate == 2e-3);  // lstm default
  CHECK(resolved.batchnorm.has_value());
  CHECK_FALSE(*resolved.batchnorm);               // gradient penalty disables it

  const tr::ExperimentConfig reparsed = tr::ExperimentConfig::parse(resolved.serialize());
  CHECK(reparsed.hidden == 16);
  CHECK(reparsed.objective.critic_steps == 5);
  CHECK(reparsed.seed == 11);

  CHECK_THROWS_WITH_AS(tr::ExperimentConfig::parse("bogus_key = 1\n"),
                       doctest::Contains("unknown key"), Error);
  CHECK_THROWS_AS(tr::ExperimentConfig::parse("config_version = 9\n"), Error);

  tr::ExperimentConfig bad = cfg;
  bad.condition = "question";
  CHECK_THROWS_WITH_AS((void)bad.resolved(), doctest::Contains("convolutional"), Error);
}

TEST_CASE("cnn training step runs end to end") {
  TempDir dir("cnn");
  write_lines(dir.str("corpus.txt"), tiny_corpus(8));
  tr::ExperimentConfig cfg = tiny_config(dir);
  cfg.generator = "cnn";
  cfg.discriminator = "cnn";
  cfg.hidden = 6;
  cfg.kernel_width = 3;
  cfg.residual_blocks = 1;
  cfg.epochs = 1;
  cfg.eval_samples = 4;
  const tr::TrainResult result = tr::train(cfg);
  CHECK(result.epochs_run == 1);
  CHECK(fs::exists(dir.str("run/checkpoints/epoch-0")));
}

TEST_CASE("conditional cnn training consumes question labels") {
  TempDir dir("cond");
  std::vector<std::string> lines;
  for (int i = 0; i < 8; ++i) {
    lines.push_back(i % 2 == 0 ? "how are you ?" : "i am fine .");
  }
  write_lines(dir.str("corpus.txt"), lines);
  tr::ExperimentConfig cfg = tiny_config(dir);
  cfg.generator = "cnn";
  cfg.discriminator = "cnn";
  cfg.condition = "question";
  cfg.hidden = 6;
  cfg.kernel_width = 3;
  cfg.residual_blocks = 1;
  cfg.start_length = 4;
  cfg.epochs = 1;
  cfg.eval_samples = 4;
  const tr::TrainResult result = tr::train(cfg);
  CHECK(result.epochs_run == 1);
}
