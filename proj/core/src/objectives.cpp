#include "advseq/objectives.hpp"

#include <algorithm>
#include <cmath>

namespace advseq::objectives {

using ad::shape_str;

ObjectiveKind parse_objective(const std::string& name) {
  if (name == "gan") return ObjectiveKind::kGan;
  if (name == "lsgan") return ObjectiveKind::kLsgan;
  if (name == "wgan") return ObjectiveKind::kWgan;
  if (name == "wgan-gp") return ObjectiveKind::kWganGp;
  if (name == "gan-gp") return ObjectiveKind::kGanGp;
  throw Error("unknown objective '" + name + "' (expected gan|lsgan|wgan|wgan-gp|gan-gp)");
}

const char* objective_name(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::kGan: return "gan";
    case ObjectiveKind::kLsgan: return "lsgan";
    case ObjectiveKind::kWgan: return "wgan";
    case ObjectiveKind::kWganGp: return "wgan-gp";
    case ObjectiveKind::kGanGp: return "gan-gp";
  }
  return "?";
}

void ObjectiveConfig::validate() const {
  if (critic_steps < 1) throw Error("objective: critic_steps must be >= 1");
  if (uses_clip() && clip_bound <= 0.0) throw Error("wgan requires a positive clip bound");
  if (uses_penalty() && penalty_weight <= 0.0) {
    throw Error(std::string(objective_name(kind)) + " requires a positive penalty weight");
  }
}

namespace {

double mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

void require_scores_in_unit_interval(std::span<const double> scores, const char* which) {
  for (double s : scores) {
    if (!(s > 0.0 && s < 1.0)) {
      throw Error(std::string("gan_losses: ") + which + " score " + std::to_string(s) +
                  " outside (0, 1); discriminator head misconfigured");
    }
  }
}

}  // namespace

LossPair gan_losses(std::span<const double> d_real, std::span<const double> d_fake) {
  require_scores_in_unit_interval(d_real, "real");
  require_scores_in_unit_interval(d_fake, "fake");
  double d = 0.0;
  for (double s : d_real) d -= std::log(s);
  double df = 0.0, gl = 0.0;
  for (double s : d_fake) {
    df -= std::log1p(-s);
    gl -= std::log(s);
  }
  return LossPair{d / static_cast<double>(d_real.size()) + df / static_cast<double>(d_fake.size()),
                  gl / static_cast<double>(d_fake.size())};
}

LossPair lsgan_losses(std::span<const double> d_real, std::span<const double> d_fake) {
  double dr = 0.0;
  for (double s : d_real) dr += (s - 1.0) * (s - 1.0);
  double df = 0.0, gl = 0.0;
  for (double s : d_fake) {
    df += s * s;
    gl += (s - 1.0) * (s - 1.0);
  }
  return LossPair{0.5 * dr / static_cast<double>(d_real.size()) +
                      0.5 * df / static_cast<double>(d_fake.size()),
                  0.5 * gl / static_cast<double>(d_fake.size())};
}

LossPair wgan_losses(std::span<const double> d_real, std::span<const double> d_fake) {
  return LossPair{mean(d_fake) - mean(d_real), -mean(d_fake)};
}

LossNodes gan_losses_node(Graph&, Var logit_real, Var logit_fake) {
  // -log sigmoid(l) = softplus(-l), -log(1 - sigmoid(l)) = softplus(l)
  Var d = ad::add(ad::mean_all(ad::softplus(ad::neg(logit_real))),
                  ad::mean_all(ad::softplus(logit_fake)));
  Var g = ad::mean_all(ad::softplus(ad::neg(logit_fake)));
  return LossNodes{d, g};
}

LossNodes lsgan_losses_node(Graph&, Var score_real, Var score_fake) {
  Var r1 = ad::affine(score_real, 1.0, -1.0);
  Var f1 = ad::affine(score_fake, 1.0, -1.0);
  Var d = ad::add(ad::affine(ad::mean_all(ad::mul(r1, r1)), 0.5, 0.0),
                  ad::affine(ad::mean_all(ad::mul(score_fake, score_fake)), 0.5, 0.0));
  Var g = ad::affine(ad::mean_all(ad::mul(f1, f1)), 0.5, 0.0);
  return LossNodes{d, g};
}

LossNodes wgan_losses_node(Graph&, Var score_real, Var score_fake) {
  Var d = ad::sub(ad::mean_all(score_fake), ad::mean_all(score_real));
  Var g = ad::neg(ad::mean_all(score_fake));
  return LossNodes{d, g};
}

Var gan_generator_loss_node(Graph&, Var logit_fake) {
  return ad::mean_all(ad::softplus(ad::neg(logit_fake)));
}

Var lsgan_generator_loss_node(Graph&, Var score_fake) {
  Var f1 = ad::affine(score_fake, 1.0, -1.0);
  return ad::affine(ad::mean_all(ad::mul(f1, f1)), 0.5, 0.0);
}

Var wgan_generator_loss_node(Graph&, Var score_fake) { return ad::neg(ad::mean_all(score_fake)); }

void clip_weights(const std::vector<models::NamedParam>& params, double clip_bound) {
  for (const models::NamedParam& p : params) {
    for (double& v : p.tensor->data()) v = std::clamp(v, -clip_bound, clip_bound);
  }
}

Var gradient_penalty(Graph& g, models::Discriminator& discriminator, Var real, Var fake,
                     double lambda, PenaltyPoint point, std::mt19937_64& rng, bool training,
                     const Tensor* condition_bits) {
  const Tensor& tr = real.value();
  const Tensor& tf = fake.value();
  if (!tr.same_shape(tf)) {
    throw Error("gradient_penalty: real " + shape_str(tr.shape()) + " vs fake " +
                shape_str(tf.shape()));
  }

  Var point_var;
  if (point == PenaltyPoint::kAtFake) {
    point_var = fake;
  } else {
    // x_hat = eps*real + (1-eps)*fake, eps resampled per sample
    const std::int64_t batch = tr.extent(0), tail = tr.size() / tr.extent(0);
    Tensor eps(tr.shape());
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (std::int64_t b = 0; b < batch; ++b) {
      const double e = dist(rng);
      for (std::int64_t i = 0; i < tail; ++i) eps[b * tail + i] = e;
    }
    Var eps_var = g.constant(eps);
    Var one_minus = ad::affine(eps_var, -1.0, 1.0);
    point_var = ad::add(ad::mul(eps_var, real), ad::mul(one_minus, fake));
  }

  Var scores = discriminator.logit(g, point_var, training, condition_bits);
  Var grad = ad::grad_as_node(g, ad::sum_all(scores), point_var);
  Var norms = ad::rowwise_l2_norm(grad);            // (batch, 1)
  Var excess = ad::affine(norms, 1.0, -1.0);        // ||grad|| - 1
  return ad::affine(ad::mean_all(ad::mul(excess, excess)), lambda, 0.0);
}

StepKind critic_schedule(std::int64_t step, int n_critic) {
  if (n_critic < 1) throw Error("critic_schedule: n_critic must be >= 1");
  return (step % (n_critic + 1)) < n_critic ? StepKind::kDiscriminator : StepKind::kGenerator;
}

}  // namespace advseq::objectives
