#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "advseq/models.hpp"
#include "advseq/objectives.hpp"
#include "test_support.hpp"

namespace advseq::testing {

struct SuiteReport {
  double worst = 0.0;
  std::string where;

  void fold(const GradCheckResult& r, const std::string& label) {
    if (r.worst > worst) {
      worst = r.worst;
      where = label + ": " + r.where;
    }
  }
  bool ok(double tol) const { return worst < tol; }
};

/// Random tensor kept away from kinks and singularities so central
/// differences are meaningful.
inline Tensor safe_random(Shape shape, std::mt19937_64& rng, double lo, double hi,
                          double margin = 0.0) {
  Tensor t = Tensor::uniform(std::move(shape), lo, hi, rng);
  if (margin > 0.0) {
    for (double& v : t.data()) {
      if (std::abs(v) < margin) v = v < 0.0 ? -margin : margin;
    }
  }
  return t;
}

/// Finite-difference checks for every autodiff primitive, `trials` random
/// instances each.
inline SuiteReport run_primitive_gradchecks(int trials, std::uint64_t seed) {
  SuiteReport report;
  std::mt19937_64 rng = seeded_engine(seed, 11);

  auto weighted = [](Graph& g, Var out) {
    // deterministic weighting exposes the full Jacobian
    Tensor w(out.value().shape());
    for (std::int64_t i = 0; i < w.size(); ++i) {
      w[i] = 0.25 + 0.5 * static_cast<double>(i % 7);
    }
    return ad::sum_all(ad::mul(out, g.constant(w)));
  };

  for (int trial = 0; trial < trials; ++trial) {
    // elementwise pair ops
    {
      Tensor a = safe_random({3, 4}, rng, -2, 2), b = safe_random({3, 4}, rng, -2, 2);
      auto with = [&](const char* label, auto op) {
        LossBuilder build = [&op, &weighted](Graph& g, const std::vector<Tensor*>& p) {
          return weighted(g, op(g.param_leaf(*p[0]), g.param_leaf(*p[1])));
        };
        report.fold(check_gradients(build, {&a, &b}), label);
      };
      with("add", [](Var x, Var y) { return ad::add(x, y); });
      with("sub", [](Var x, Var y) { return ad::sub(x, y); });
      with("mul", [](Var x, Var y) { return ad::mul(x, y); });
    }
    // elementwise unary ops over their safe domains
    {
      struct UnaryCase {
        const char* label;
        Var (*op)(Var);
        double lo, hi, margin;
      };
      const std::array<UnaryCase, 8> cases{{
          {"sigmoid", &ad::sigmoid, -2, 2, 0},
          {"tanh", &ad::tanh, -2, 2, 0},
          {"relu", &ad::relu, -2, 2, 1e-3},
          {"exp", &ad::exp, -2, 2, 0},
          {"log", &ad::log, 0.5, 2.5, 0},
          {"sqrt", &ad::sqrt, 0.5, 2.5, 0},
          {"recip", &ad::recip, 0.5, 2.5, 0},
          {"softplus", &ad::softplus, -2, 2, 0},
      }};
      for (const UnaryCase& c : cases) {
        Tensor x = safe_random({2, 5}, rng, c.lo, c.hi, c.margin);
        LossBuilder build = [&c, &weighted](Graph& g, const std::vector<Tensor*>& p) {
          return weighted(g, c.op(g.param_leaf(*p[0])));
        };
        report.fold(check_gradients(build, {&x}), c.label);
      }
    }
    {
      Tensor x = safe_random({2, 5}, rng, -2, 2);
      LossBuilder build = [&weighted](Graph& g, const std::vector<Tensor*>& p) {
        return weighted(g, ad::affine(g.param_leaf(*p[0]), -1.7, 0.3));
      };
      report.fold(check_gradients(build, {&x}), "affine");
    }
    {
      Tensor a = safe_random({3, 4}, rng, -2, 2), b = safe_random({4, 2}, rng, -2, 2);
      LossBuilder build = [&weighted](Graph& g, const std::vector<Tensor*>& p) {
        return weighted(g, ad::matmul(g.param_leaf(*p[0]), g.param_leaf(*p[1])));
      };
      report.fold(check_gradients(build, {&a, &b}), "matmul");
    }
    {
      Tensor x = safe_random({3, 4}, rng, -2, 2);
      LossBuilder build = [&weighted](Graph& g, const std::vector<Tensor*>& p) {
        return weighted(g, ad::transpose2d(g.param_leaf(*p[0])));
      };
      report.fold(check_gradients(build, {&x}), "transpose2d");
    }
    {
      Tensor x = safe_random({3, 5}, rng, -2, 2);
      LossBuilder build = [&weighted](Graph& g, const std::vector<Tensor*>& p) {
        return weighted(g, ad::row_softmax(g.param_leaf(*p[0])));
      };
      report.fold(check_gradients(build, {&x}), "row_softmax");
    }
    {
      Tensor x = safe_random({3, 2, 2}, rng, -2, 2);
      LossBuilder sum_build = [&weighted](Graph& g, const std::vector<Tensor*>& p) {
        return weighted(g, ad::rowsum_tail(g.param_leaf(*p[0])));
      };
      report.fold(check_gradients(sum_build, {&x}), "rowsum_tail");
      LossBuilder all_build = [](Graph& g, const std::vector<Tensor*>& p) {
        return ad::sum_all(g.param_leaf(*p[0]));
      };
      report.fold(check_gradients(all_build, {&x}), "sum_all");
      LossBuilder mean_build = [](Graph& g, const std::vector<Tensor*>& p) {
        return ad::mean_all(g.param_leaf(*p[0]));
      };
      report.fold(check_gradients(mean_build, {&x}), "mean_all");
      LossBuilder norm_build = [](Graph& g, const std::vector<Tensor*>& p) {
        return ad::l2_norm(g.param_leaf(*p[0]));
      };
      report.fold(check_gradients(norm_build, {&x}), "l2_norm");
    }
    {
      Tensor x = safe_random({4, 1}, rng, -2, 2);
      LossBuilder build = [&weighted](Graph& g, const std::vector<Tensor*>& p) {
        return weighted(g, ad::broadcast_tail(g.param_leaf(*p[0]), {4, 3, 2}));
      };
      report.fold(check_gradients(build, {&x}), "broadcast_tail");
    }
    {
      Tensor x = safe_random({1}, rng, -2, 2);
      LossBuilder build = [&weighted](Graph& g, const std::vector<Tensor*>& p) {
        return weighted(g, ad::broadcast_full(g.param_leaf(*p[0]), {2, 3}));
      };
      report.fold(check_gradients(build, {&x}), "broadcast_full");
    }
    {
      Tensor x = safe_random({2, 6}, rng, -2, 2);
      LossBuilder build = [&weighted](Graph& g, const std::vector<Tensor*>& p) {
        return weighted(g, ad::reshape(g.param_leaf(*p[0]), {3, 4}));
      };
      report.fold(check_gradients(build, {&x}), "reshape");
    }
    {
      Tensor x = safe_random({2, 3, 4}, rng, -2, 2);
      LossBuilder slice_build = [&weighted](Graph& g, const std::vector<Tensor*>& p) {
        return weighted(g, ad::slice_time(g.param_leaf(*p[0]), 1));
      };
      report.fold(check_gradients(slice_build, {&x}), "slice_time");
      LossBuilder last_build = [&weighted](Graph& g, const std::vector<Tensor*>& p) {
        return weighted(g, ad::slice_last(g.param_leaf(*p[0]), 1, 3));
      };
      report.fold(check_gradients(last_build, {&x}), "slice_last");
    }
    {
      Tensor x = safe_random({2, 4}, rng, -2, 2);
      LossBuilder build = [&weighted](Graph& g, const std::vector<Tensor*>& p) {
        return weighted(g, ad::scatter_time(g.param_leaf(*p[0]), 2, 5));
      };
      report.fold(check_gradients(build, {&x}), "scatter_time");
    }
    {
      Tensor a = safe_random({2, 4}, rng, -2, 2), b = safe_random({2, 4}, rng, -2, 2);
      LossBuilder build = [&weighted](Graph& g, const std::vector<Tensor*>& p) {
        const std::array<Var, 3> steps{g.param_leaf(*p[0]), g.param_leaf(*p[1]),
                                       g.param_leaf(*p[0])};
        return weighted(g, ad::stack_time(steps));
      };
      report.fold(check_gradients(build, {&a, &b}), "stack_time");
    }
    {
      Tensor a = safe_random({2, 3, 2}, rng, -2, 2), b = safe_random({2, 3, 3}, rng, -2, 2);
      LossBuilder build = [&weighted](Graph& g, const std::vector<Tensor*>& p) {
        return weighted(g, ad::concat_last(g.param_leaf(*p[0]), g.param_leaf(*p[1])));
      };
      report.fold(check_gradients(build, {&a, &b}), "concat_last");
    }
    {
      Tensor x = safe_random({3, 4}, rng, -2, 2), row = safe_random({1, 4}, rng, -2, 2);
      LossBuilder build = [&weighted](Graph& g, const std::vector<Tensor*>& p) {
        return weighted(g, ad::add_rowvec(g.param_leaf(*p[0]), g.param_leaf(*p[1])));
      };
      report.fold(check_gradients(build, {&x, &row}), "add_rowvec");
    }
    {
      Tensor x = safe_random({2, 6, 3}, rng, -2, 2), k = safe_random({3, 3, 2}, rng, -2, 2);
      LossBuilder conv_build = [&weighted](Graph& g, const std::vector<Tensor*>& p) {
        return weighted(g, ad::conv1d_same(g.param_leaf(*p[0]), g.param_leaf(*p[1])));
      };
      report.fold(check_gradients(conv_build, {&x, &k}), "conv1d_same");
      LossBuilder flip_build = [&weighted](Graph& g, const std::vector<Tensor*>& p) {
        return weighted(g, ad::kernel_flip(g.param_leaf(*p[1])));
      };
      report.fold(check_gradients(flip_build, {&x, &k}), "kernel_flip");
      Tensor dy = safe_random({2, 6, 2}, rng, -2, 2);
      LossBuilder kgrad_build = [&weighted](Graph& g, const std::vector<Tensor*>& p) {
        return weighted(g, ad::conv1d_kgrad(g.param_leaf(*p[0]), g.param_leaf(*p[1]), 3));
      };
      report.fold(check_gradients(kgrad_build, {&x, &dy}), "conv1d_kgrad");
    }
    {
      // batch normalization, training mode: adjoints flow through the stats
      Tensor x = safe_random({3, 2, 4}, rng, -2, 2);
      models::BatchNormLayer layer;
      layer.gamma = safe_random({1, 4}, rng, 0.5, 1.5);
      layer.beta = safe_random({1, 4}, rng, -0.5, 0.5);
      layer.running_mean = Tensor::zeros({1, 4});
      layer.running_var = Tensor::ones({1, 4});
      LossBuilder build = [&weighted, &layer](Graph& g, const std::vector<Tensor*>& p) {
        g.param_leaf(layer.gamma);
        g.param_leaf(layer.beta);
        return weighted(g, models::batch_norm(g, g.param_leaf(*p[0]), layer, true));
      };
      report.fold(check_gradients(build, {&x, &layer.gamma, &layer.beta}), "batch_norm");
    }
  }
  return report;
}

/// One peephole-LSTM step: gradients with respect to every weight, bias and
/// input against central differences.
inline SuiteReport run_lstm_step_gradcheck(int trials, std::uint64_t seed) {
  SuiteReport report;
  std::mt19937_64 rng = seeded_engine(seed, 12);
  const std::int64_t d = 3, hidden = 4, k = 3, batch = 2;
  for (int trial = 0; trial < trials; ++trial) {
    std::mt19937_64 init = seeded_engine(seed, 100 + static_cast<std::uint64_t>(trial));
    models::LstmGenerator gen(d, hidden, k, init);
    Tensor x = safe_random({batch, d}, rng, -2, 2);
    Tensor h = safe_random({batch, hidden}, rng, -1, 1);
    Tensor c = safe_random({batch, hidden}, rng, -1, 1);
    Tensor y = safe_random({batch, k}, rng, 0.0, 1.0);

    std::vector<Tensor*> params{&x, &h, &c, &y};
    for (const models::NamedParam& p : gen.params()) params.push_back(p.tensor);

    LossBuilder build = [&gen](Graph& g, const std::vector<Tensor*>& p) {
      models::LstmCell cell = gen.bind(g);
      models::LstmCell::State state{g.param_leaf(*p[1]), g.param_leaf(*p[2])};
      models::LstmCell::State next = cell.step(g.param_leaf(*p[0]), state, g.param_leaf(*p[3]));
      Tensor w1(next.h.value().shape()), w2(next.c.value().shape());
      for (std::int64_t i = 0; i < w1.size(); ++i) w1[i] = 0.3 + 0.2 * static_cast<double>(i % 5);
      for (std::int64_t i = 0; i < w2.size(); ++i) w2[i] = 0.7 - 0.1 * static_cast<double>(i % 3);
      return ad::add(ad::sum_all(ad::mul(next.h, g.constant(w1))),
                     ad::sum_all(ad::mul(next.c, g.constant(w2))));
    };
    report.fold(check_gradients(build, params), "lstm_step trial " + std::to_string(trial));
  }
  return report;
}

/// One residual CNN block (two same-convolutions with batch norm and ReLU),
/// gradients for kernels, biases, batch-norm parameters and the input.
inline SuiteReport run_cnn_block_gradcheck(int trials, std::uint64_t seed) {
  SuiteReport report;
  std::mt19937_64 rng = seeded_engine(seed, 13);
  for (int trial = 0; trial < trials; ++trial) {
    std::mt19937_64 init = seeded_engine(seed, 200 + static_cast<std::uint64_t>(trial));
    models::CnnOptions opts;
    opts.channels = 3;
    opts.kernel_width = 3;
    opts.blocks = 1;
    opts.batchnorm = true;
    models::CnnTrunk trunk(3, opts, init);
    Tensor x = safe_random({2, 5, 3}, rng, -2, 2, 1e-3);

    std::vector<Tensor*> params{&x};
    std::vector<models::NamedParam> named, buffers;
    trunk.collect(named, buffers, "");
    for (const models::NamedParam& p : named) params.push_back(p.tensor);

    LossBuilder build = [&trunk](Graph& g, const std::vector<Tensor*>& p) {
      Var out = trunk.forward(g, g.param_leaf(*p[0]), true, nullptr);
      Tensor w(out.value().shape());
      for (std::int64_t i = 0; i < w.size(); ++i) w[i] = 0.2 + 0.3 * static_cast<double>(i % 4);
      return ad::sum_all(ad::mul(out, g.constant(w)));
    };
    report.fold(check_gradients(build, params), "cnn_block trial " + std::to_string(trial));
  }
  return report;
}

/// Second-order: d(gradient penalty)/d(critic weights) against central
/// differences on a two-layer tanh critic. Interpolation noise is re-seeded
/// per evaluation so the loss is deterministic.
class TwoLayerCritic : public models::Discriminator {
 public:
  TwoLayerCritic(std::int64_t input_size, std::int64_t hidden, std::mt19937_64& rng)
      : W1(Tensor::uniform({input_size, hidden}, -0.7, 0.7, rng)),
        b1(Tensor::uniform({1, hidden}, -0.2, 0.2, rng)),
        W2(Tensor::uniform({hidden, 1}, -0.7, 0.7, rng)),
        b2(Tensor::uniform({1, 1}, -0.2, 0.2, rng)) {}

  std::vector<models::NamedParam> params() override {
    return {{"W1", &W1}, {"b1", &b1}, {"W2", &W2}, {"b2", &b2}};
  }

  Var logit(Graph& g, Var x, bool, const Tensor*) override {
    const Tensor& tx = x.value();
    Var flat = ad::reshape(x, {tx.extent(0), tx.extent(1) * tx.extent(2)});
    Var hidden = ad::tanh(ad::add_rowvec(ad::matmul(flat, g.param_leaf(W1)), g.param_leaf(b1)));
    return ad::add_rowvec(ad::matmul(hidden, g.param_leaf(W2)), g.param_leaf(b2));
  }

  Tensor W1, b1, W2, b2;
};

inline SuiteReport run_penalty_gradcheck(int trials, std::uint64_t seed,
                                         objectives::PenaltyPoint point) {
  SuiteReport report;
  const std::int64_t batch = 3, n = 2, k = 3;
  for (int trial = 0; trial < trials; ++trial) {
    std::mt19937_64 init = seeded_engine(seed, 300 + static_cast<std::uint64_t>(trial));
    TwoLayerCritic critic(n * k, 4, init);
    Tensor real({batch, n, k});
    for (std::int64_t b = 0; b < batch; ++b)
      for (std::int64_t t = 0; t < n; ++t) real.at3(b, t, (b + t) % k) = 1.0;
    Tensor fake = Tensor::full({batch, n, k}, 1.0 / static_cast<double>(k));

    std::vector<Tensor*> params;
    for (const models::NamedParam& p : critic.params()) params.push_back(p.tensor);

    const std::uint64_t eps_seed = seed ^ (7777 + static_cast<std::uint64_t>(trial));
    LossBuilder build = [&critic, &real, &fake, point, eps_seed](
                            Graph& g, const std::vector<Tensor*>&) {
      std::mt19937_64 eps_rng = seeded_engine(eps_seed, 0);
      return objectives::gradient_penalty(g, critic, g.constant(real), g.constant(fake), 10.0,
                                          point, eps_rng, false);
    };
    report.fold(check_gradients(build, params), "penalty trial " + std::to_string(trial));
  }
  return report;
}

}  // namespace advseq::testing
