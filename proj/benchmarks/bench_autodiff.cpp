#include <benchmark/benchmark.h>

#include "advseq/models.hpp"
#include "advseq/objectives.hpp"
#include "advseq/rng.hpp"
#include "advseq/trainer.hpp"

namespace {

using namespace advseq;

constexpr std::int64_t kBatch = 64;
constexpr std::int64_t kLength = 5;
constexpr std::int64_t kNoise = 64;
constexpr std::int64_t kHidden = 64;
constexpr std::int64_t kVocab = 239;

struct Fixture {
  models::LstmGenerator generator;
  models::LstmDiscriminator discriminator;
  ad::Tensor noise, real, fake;
  std::mt19937_64 rng;

  Fixture()
      : generator(kNoise, kHidden, kVocab, (rng = seeded_engine(1), rng)),
        discriminator(kVocab, kHidden, rng),
        noise(train::sample_noise(kBatch, kLength, kNoise, rng)),
        real(ad::Tensor::zeros({kBatch, kLength, kVocab})) {
    for (std::int64_t b = 0; b < kBatch; ++b)
      for (std::int64_t t = 0; t < kLength; ++t) real.at3(b, t, (b * 7 + t) % kVocab) = 1.0;
    ad::Graph g;
    fake = generator.forward(g, g.constant(noise)).value();
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_GeneratorForward(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state) {
    ad::Graph g;
    benchmark::DoNotOptimize(f.generator.forward(g, g.constant(f.noise), true).value()[0]);
  }
}
BENCHMARK(BM_GeneratorForward)->Unit(benchmark::kMillisecond);

void BM_DiscriminatorForward(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state) {
    ad::Graph g;
    benchmark::DoNotOptimize(f.discriminator.logit(g, g.constant(f.real), true).value()[0]);
  }
}
BENCHMARK(BM_DiscriminatorForward)->Unit(benchmark::kMillisecond);

void BM_GeneratorStep(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state) {
    ad::Graph g;
    ad::Var fake = f.generator.forward(g, g.constant(f.noise), true);
    ad::Var loss = objectives::wgan_generator_loss_node(g, f.discriminator.logit(g, fake, true));
    ad::GradMap grads = ad::backward(g, loss);
    benchmark::DoNotOptimize(grads);
  }
}
BENCHMARK(BM_GeneratorStep)->Unit(benchmark::kMillisecond);

void BM_CriticStepWithPenalty(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state) {
    ad::Graph g;
    ad::Var real = g.constant(f.real);
    ad::Var fake = g.constant(f.fake);
    ad::Var d_loss = objectives::wgan_losses_node(g, f.discriminator.logit(g, real, true),
                                                  f.discriminator.logit(g, fake, true))
                         .d_loss;
    ad::Var penalty = objectives::gradient_penalty(
        g, f.discriminator, real, fake, 10.0, objectives::PenaltyPoint::kInterpolate, f.rng,
        true);
    ad::GradMap grads = ad::backward(g, ad::add(d_loss, penalty));
    benchmark::DoNotOptimize(grads);
  }
}
BENCHMARK(BM_CriticStepWithPenalty)->Unit(benchmark::kMillisecond);

}  // namespace
