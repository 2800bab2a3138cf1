#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "advseq/graph.hpp"
#include "advseq/tensor.hpp"

namespace advseq::models {

using ad::Graph;
using ad::Shape;
using ad::Tensor;
using ad::Var;

struct NamedParam {
  std::string name;
  Tensor* tensor;
};

/// Sentence attribute for conditional generation. The encoded feature map is
/// entirely ones when the attribute is present, entirely zeros otherwise.
struct ConditionSpec {
  int attribute_id = 0;
  bool present = false;
};

/// Appends one constant feature plane to (batch, n, C) activations.
/// `bits` carries the per-sample plane value (0 or 1), shape (batch, 1).
Var apply_condition(Var activations, const Tensor& bits);
Var apply_condition(Var activations, const ConditionSpec& spec);

/// One LSTM's gate weights bound onto a graph. When the peephole weights are
/// present, the previous output distribution enters every gate.
struct LstmCell {
  Var Wxi, Wxf, Wxo, Wxc;
  Var Whi, Whf, Who, Whc;
  std::optional<Var> Wpi, Wpf, Wpo, Wpc;
  Var bi, bf, bo, bc;

  struct State {
    Var h;
    Var c;
  };

  /// One update: gates from x_t, h_{t-1} and (optionally) y_{t-1}; candidate
  /// cell via tanh; then c_t = f*c_{t-1} + i*c_candidate, h_t = o*tanh(c_t).
  State step(Var x, const State& prev, const std::optional<Var>& y_prev) const;

  /// All four gates as one matmul against [Wx|Wh|Wp] stacked row-wise and
  /// the gate blocks side by side. Same arithmetic as step(), one large GEMM
  /// per timestep instead of twelve small ones.
  struct Fused {
    Var weights;  // (d+H[+k], 4H)
    Var bias;     // (1, 4H)
    std::int64_t hidden;
    bool peephole;
  };
  Fused fuse() const;
  static State fused_step(const Fused& cell, Var x, const State& prev,
                          const std::optional<Var>& y_prev);
};

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::vector<NamedParam> params() = 0;
  virtual std::vector<NamedParam> buffers() { return {}; }
  virtual std::int64_t noise_dim() const = 0;
  virtual std::int64_t vocab_size() const = 0;
  virtual bool conditional() const { return false; }

  /// z: (batch, n, noise_dim) -> per-position vocabulary distributions
  /// (batch, n, k); every row sums to 1.
  virtual Var forward(Graph& g, Var z, bool training = false,
                      const Tensor* condition_bits = nullptr) = 0;
};

class Discriminator {
 public:
  virtual ~Discriminator() = default;
  virtual std::vector<NamedParam> params() = 0;
  virtual std::vector<NamedParam> buffers() { return {}; }
  virtual bool conditional() const { return false; }

  /// x: (batch, n, k) of one-hot or probability rows -> raw scores (batch, 1).
  virtual Var logit(Graph& g, Var x, bool training = false,
                    const Tensor* condition_bits = nullptr) = 0;

  /// P(real) = sigmoid(logit); the head used by the saturating objectives.
  Var prob(Graph& g, Var x, bool training = false, const Tensor* condition_bits = nullptr) {
    return ad::sigmoid(logit(g, x, training, condition_bits));
  }
};

/// Peephole-LSTM generator: y_t = softmax(W_out h_t + b_out), with y_{t-1}
/// wired into the gates of step t. y_0 is all-zeros.
class LstmGenerator : public Generator {
 public:
  LstmGenerator(std::int64_t noise_dim, std::int64_t hidden, std::int64_t vocab,
                std::mt19937_64& rng);

  std::vector<NamedParam> params() override;
  std::int64_t noise_dim() const override { return noise_dim_; }
  std::int64_t vocab_size() const override { return vocab_; }
  std::int64_t hidden_size() const { return hidden_; }

  Var forward(Graph& g, Var z, bool training = false,
              const Tensor* condition_bits = nullptr) override;

  LstmCell bind(Graph& g) const;

  Tensor Wxi, Wxf, Wxo, Wxc;  // (d, H)
  Tensor Whi, Whf, Who, Whc;  // (H, H)
  Tensor Wpi, Wpf, Wpo, Wpc;  // (k, H) peephole on the previous output
  Tensor bi, bf, bo, bc;      // (1, H)
  Tensor Wout, bout;          // (H, k), (1, k)

 private:
  std::int64_t noise_dim_, hidden_, vocab_;
};

/// Plain LSTM over the input rows with a binary logistic-regression head on
/// the last hidden state. The head squashing is left to the caller: `logit`
/// is the raw score, `prob` is sigmoid(logit).
class LstmDiscriminator : public Discriminator {
 public:
  LstmDiscriminator(std::int64_t input_dim, std::int64_t hidden, std::mt19937_64& rng);

  std::vector<NamedParam> params() override;
  std::int64_t hidden_size() const { return hidden_; }

  Var logit(Graph& g, Var x, bool training = false,
            const Tensor* condition_bits = nullptr) override;

  LstmCell bind(Graph& g) const;

  Tensor Wxi, Wxf, Wxo, Wxc;  // (k, H)
  Tensor Whi, Whf, Who, Whc;  // (H, H)
  Tensor bi, bf, bo, bc;      // (1, H)
  Tensor Wpred, bpred;        // (H, 1), (1, 1)

 private:
  std::int64_t input_dim_, hidden_;
};

struct BatchNormLayer {
  Tensor gamma, beta;               // (1, C), trainable
  Tensor running_mean, running_var; // (1, C), buffers
  double momentum = 0.9;
  double eps = 1e-5;
};

/// Batch normalization over (batch, n, C), statistics per channel. The
/// training-mode adjoint flows through the batch statistics; eval mode uses
/// the running averages.
Var batch_norm(Graph& g, Var x, BatchNormLayer& layer, bool training);

struct Conv1dLayer {
  Tensor kernel;  // (w, ci, co)
  Tensor bias;    // (1, co)
};

struct ResidualBlock {
  Conv1dLayer conv1, conv2;
  BatchNormLayer bn1, bn2;
};

struct CnnOptions {
  std::int64_t channels = 128;
  std::int64_t kernel_width = 5;
  std::int64_t blocks = 5;
  bool batchnorm = true;
  bool conditioned = false;
};

/// Residual 1-D CNN trunk shared by the convolutional generator and
/// discriminator: width-1 input projection, then `blocks` residual blocks of
/// two same-convolutions each (stride 1), each followed by batch
/// normalization (optional) and ReLU.
class CnnTrunk {
 public:
  CnnTrunk(std::int64_t input_dim, const CnnOptions& opts, std::mt19937_64& rng);

  Var forward(Graph& g, Var x, bool training, const Tensor* condition_bits);
  void collect(std::vector<NamedParam>& params, std::vector<NamedParam>& buffers,
               const std::string& prefix);

  const CnnOptions& options() const { return opts_; }

  Conv1dLayer proj;
  std::vector<ResidualBlock> blocks;

 private:
  CnnOptions opts_;
};

class CnnGenerator : public Generator {
 public:
  CnnGenerator(std::int64_t noise_dim, std::int64_t vocab, const CnnOptions& opts,
               std::mt19937_64& rng);

  std::vector<NamedParam> params() override;
  std::vector<NamedParam> buffers() override;
  std::int64_t noise_dim() const override { return noise_dim_; }
  std::int64_t vocab_size() const override { return vocab_; }
  bool conditional() const override { return trunk_.options().conditioned; }

  Var forward(Graph& g, Var z, bool training = false,
              const Tensor* condition_bits = nullptr) override;

  CnnTrunk& trunk() { return trunk_; }
  Conv1dLayer head;  // width-1 convolution to k channels

 private:
  std::int64_t noise_dim_, vocab_;
  CnnTrunk trunk_;
};

class CnnDiscriminator : public Discriminator {
 public:
  CnnDiscriminator(std::int64_t input_dim, const CnnOptions& opts, std::mt19937_64& rng);

  std::vector<NamedParam> params() override;
  std::vector<NamedParam> buffers() override;
  bool conditional() const override { return trunk_.options().conditioned; }

  /// Single output channel, averaged over positions.
  Var logit(Graph& g, Var x, bool training = false,
            const Tensor* condition_bits = nullptr) override;

  CnnTrunk& trunk() { return trunk_; }
  Conv1dLayer head;  // width-1 convolution to 1 channel

 private:
  std::int64_t input_dim_;
  CnnTrunk trunk_;
};

/// Argmax per distribution row; ties resolved to the lowest index.
std::vector<int> greedy_decode(const Tensor& distributions);                 // (n, k)
std::vector<std::vector<int>> greedy_decode_batch(const Tensor& distributions);  // (B, n, k)

}  // namespace advseq::models
