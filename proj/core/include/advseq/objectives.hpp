#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "advseq/graph.hpp"
#include "advseq/models.hpp"

namespace advseq::objectives {

using ad::Graph;
using ad::Tensor;
using ad::Var;

enum class ObjectiveKind { kGan, kLsgan, kWgan, kWganGp, kGanGp };
enum class PenaltyPoint { kInterpolate, kAtFake };

ObjectiveKind parse_objective(const std::string& name);
const char* objective_name(ObjectiveKind kind);

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::kWganGp;
  double clip_bound = 0.01;      // wgan weight clamp interval [-c, c]
  double penalty_weight = 10.0;  // gradient penalty coefficient
  int critic_steps = 5;          // discriminator updates per generator update
  PenaltyPoint penalty_point = PenaltyPoint::kInterpolate;

  bool uses_clip() const { return kind == ObjectiveKind::kWgan; }
  bool uses_penalty() const {
    return kind == ObjectiveKind::kWganGp || kind == ObjectiveKind::kGanGp;
  }
  /// Saturating objectives read the sigmoid head; Wasserstein and least
  /// squares read the raw score.
  bool sigmoid_head() const {
    return kind == ObjectiveKind::kGan || kind == ObjectiveKind::kGanGp;
  }
  void validate() const;
};

struct LossPair {
  double d_loss;
  double g_loss;
};

/// d_loss = -mean log D(x) - mean log(1 - D(G(z))); the generator maximizes
/// log D(G(z)), i.e. g_loss = -mean log D(G(z)). Scores must lie in (0, 1).
LossPair gan_losses(std::span<const double> d_real, std::span<const double> d_fake);

/// L2 objective: d_loss = mean (D(x)-1)^2 / 2 + mean D(G(z))^2 / 2,
/// g_loss = mean (D(G(z))-1)^2 / 2, over raw scores.
LossPair lsgan_losses(std::span<const double> d_real, std::span<const double> d_fake);

/// Earth mover surrogate: d_loss = mean D(G(z)) - mean D(x),
/// g_loss = -mean D(G(z)), over raw critic scores.
LossPair wgan_losses(std::span<const double> d_real, std::span<const double> d_fake);

struct LossNodes {
  Var d_loss;
  Var g_loss;
};

/// Graph-level builders used by the training loop. The saturating losses are
/// built from raw logits via softplus (algebraically identical to the
/// score-level formulas, stable when the head saturates).
LossNodes gan_losses_node(Graph& g, Var logit_real, Var logit_fake);
LossNodes lsgan_losses_node(Graph& g, Var score_real, Var score_fake);
LossNodes wgan_losses_node(Graph& g, Var score_real, Var score_fake);

/// Generator-side losses alone, for steps that never score a real batch.
Var gan_generator_loss_node(Graph& g, Var logit_fake);
Var lsgan_generator_loss_node(Graph& g, Var score_fake);
Var wgan_generator_loss_node(Graph& g, Var score_fake);

/// Clamps every entry of every parameter to [-c, c], in place.
void clip_weights(const std::vector<models::NamedParam>& params, double clip_bound);

/// lambda * mean over the batch of (||grad_x D(x_hat)||_2 - 1)^2, evaluated
/// at x_hat = eps*real + (1-eps)*fake with per-sample eps ~ U[0,1], or at
/// x_hat = fake. Differentiable with respect to the discriminator parameters.
Var gradient_penalty(Graph& g, models::Discriminator& discriminator, Var real, Var fake,
                     double lambda, PenaltyPoint point, std::mt19937_64& rng,
                     bool training = true, const Tensor* condition_bits = nullptr);

enum class StepKind { kDiscriminator, kGenerator };

/// n_critic discriminator updates, then one generator update, repeating.
/// Steps are counted from 0.
StepKind critic_schedule(std::int64_t step, int n_critic);

}  // namespace advseq::objectives
