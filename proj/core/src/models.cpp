#include "advseq/models.hpp"

#include <cmath>

namespace advseq::models {

using ad::shape_str;

namespace {

Tensor lstm_init(Shape shape, std::mt19937_64& rng) {
  return Tensor::uniform(std::move(shape), -0.08, 0.08, rng);
}

Tensor conv_init(std::int64_t width, std::int64_t ci, std::int64_t co, std::mt19937_64& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(width * ci));
  return Tensor::normal({width, ci, co}, 0.0, stddev, rng);
}

Conv1dLayer make_conv(std::int64_t width, std::int64_t ci, std::int64_t co,
                      std::mt19937_64& rng) {
  return Conv1dLayer{conv_init(width, ci, co, rng), Tensor::zeros({1, co})};
}

BatchNormLayer make_bn(std::int64_t channels) {
  BatchNormLayer bn;
  bn.gamma = Tensor::ones({1, channels});
  bn.beta = Tensor::zeros({1, channels});
  bn.running_mean = Tensor::zeros({1, channels});
  bn.running_var = Tensor::ones({1, channels});
  return bn;
}

Var conv_apply(Graph& g, const Conv1dLayer& layer, Var x) {
  Var kernel = g.param_leaf(layer.kernel);
  Var bias = g.param_leaf(layer.bias);
  return ad::add_rowvec(ad::conv1d_same(x, kernel), bias);
}

}  // namespace

Var apply_condition(Var activations, const Tensor& bits) {
  Graph& g = *activations.graph;
  const Tensor& tx = activations.value();
  if (tx.rank() != 3) {
    throw Error("apply_condition: expected (batch, n, C) activations, got " +
                shape_str(tx.shape()));
  }
  if (bits.rank() != 2 || bits.extent(0) != tx.extent(0) || bits.extent(1) != 1) {
    throw Error("apply_condition: bits must be (batch, 1), got " + shape_str(bits.shape()));
  }
  Tensor plane({tx.extent(0), tx.extent(1), 1});
  for (std::int64_t b = 0; b < tx.extent(0); ++b)
    for (std::int64_t t = 0; t < tx.extent(1); ++t) plane.at3(b, t, 0) = bits.at2(b, 0);
  return ad::concat_last(activations, g.constant(std::move(plane)));
}

Var apply_condition(Var activations, const ConditionSpec& spec) {
  const Tensor& tx = activations.value();
  Tensor bits = Tensor::full({tx.extent(0), 1}, spec.present ? 1.0 : 0.0);
  return apply_condition(activations, bits);
}

LstmCell::Fused LstmCell::fuse() const {
  auto four = [](Var i, Var f, Var o, Var c) {
    return ad::concat_last(ad::concat_last(i, f), ad::concat_last(o, c));
  };
  Var weights = ad::concat_rows(four(Wxi, Wxf, Wxo, Wxc), four(Whi, Whf, Who, Whc));
  if (Wpi) weights = ad::concat_rows(weights, four(*Wpi, *Wpf, *Wpo, *Wpc));
  return Fused{weights, four(bi, bf, bo, bc), bi.value().extent(1), Wpi.has_value()};
}

LstmCell::State LstmCell::fused_step(const Fused& cell, Var x, const State& prev,
                                     const std::optional<Var>& y_prev) {
  Var in = ad::concat_last(x, prev.h);
  if (cell.peephole) {
    if (!y_prev) throw Error("fused lstm step: peephole cell needs the previous output");
    in = ad::concat_last(in, *y_prev);
  }
  const std::int64_t H = cell.hidden;
  Var pre = ad::add_rowvec(ad::matmul(in, cell.weights), cell.bias);
  Var i = ad::sigmoid(ad::slice_last(pre, 0, H));
  Var f = ad::sigmoid(ad::slice_last(pre, H, 2 * H));
  Var o = ad::sigmoid(ad::slice_last(pre, 2 * H, 3 * H));
  Var candidate = ad::tanh(ad::slice_last(pre, 3 * H, 4 * H));
  Var c = ad::add(ad::mul(f, prev.c), ad::mul(i, candidate));
  Var h = ad::mul(o, ad::tanh(c));
  return State{h, c};
}

LstmCell::State LstmCell::step(Var x, const State& prev, const std::optional<Var>& y_prev) const {
  auto gate_pre = [&](Var wx, Var wh, const std::optional<Var>& wp, Var bias) {
    Var pre = ad::add(ad::matmul(x, wx), ad::matmul(prev.h, wh));
    if (wp && y_prev) pre = ad::add(pre, ad::matmul(*y_prev, *wp));
    return ad::add_rowvec(pre, bias);
  };
  Var i = ad::sigmoid(gate_pre(Wxi, Whi, Wpi, bi));
  Var f = ad::sigmoid(gate_pre(Wxf, Whf, Wpf, bf));
  Var o = ad::sigmoid(gate_pre(Wxo, Who, Wpo, bo));
  Var candidate = ad::tanh(gate_pre(Wxc, Whc, Wpc, bc));
  Var c = ad::add(ad::mul(f, prev.c), ad::mul(i, candidate));
  Var h = ad::mul(o, ad::tanh(c));
  return State{h, c};
}

// --- LstmGenerator -----------------------------------------------------------

LstmGenerator::LstmGenerator(std::int64_t noise_dim, std::int64_t hidden, std::int64_t vocab,
                             std::mt19937_64& rng)
    : noise_dim_(noise_dim), hidden_(hidden), vocab_(vocab) {
  Wxi = lstm_init({noise_dim, hidden}, rng);
  Wxf = lstm_init({noise_dim, hidden}, rng);
  Wxo = lstm_init({noise_dim, hidden}, rng);
  Wxc = lstm_init({noise_dim, hidden}, rng);
  Whi = lstm_init({hidden, hidden}, rng);
  Whf = lstm_init({hidden, hidden}, rng);
  Who = lstm_init({hidden, hidden}, rng);
  Whc = lstm_init({hidden, hidden}, rng);
  Wpi = lstm_init({vocab, hidden}, rng);
  Wpf = lstm_init({vocab, hidden}, rng);
  Wpo = lstm_init({vocab, hidden}, rng);
  Wpc = lstm_init({vocab, hidden}, rng);
  bi = lstm_init({1, hidden}, rng);
  bf = lstm_init({1, hidden}, rng);
  bo = lstm_init({1, hidden}, rng);
  bc = lstm_init({1, hidden}, rng);
  Wout = lstm_init({hidden, vocab}, rng);
  bout = lstm_init({1, vocab}, rng);
}

std::vector<NamedParam> LstmGenerator::params() {
  return {
      {"Wxi", &Wxi}, {"Wxf", &Wxf}, {"Wxo", &Wxo}, {"Wxc", &Wxc},
      {"Whi", &Whi}, {"Whf", &Whf}, {"Who", &Who}, {"Whc", &Whc},
      {"Wpi", &Wpi}, {"Wpf", &Wpf}, {"Wpo", &Wpo}, {"Wpc", &Wpc},
      {"bi", &bi},   {"bf", &bf},   {"bo", &bo},   {"bc", &bc},
      {"Wout", &Wout}, {"bout", &bout},
  };
}

LstmCell LstmGenerator::bind(Graph& g) const {
  LstmCell cell;
  cell.Wxi = g.param_leaf(Wxi);
  cell.Wxf = g.param_leaf(Wxf);
  cell.Wxo = g.param_leaf(Wxo);
  cell.Wxc = g.param_leaf(Wxc);
  cell.Whi = g.param_leaf(Whi);
  cell.Whf = g.param_leaf(Whf);
  cell.Who = g.param_leaf(Who);
  cell.Whc = g.param_leaf(Whc);
  cell.Wpi = g.param_leaf(Wpi);
  cell.Wpf = g.param_leaf(Wpf);
  cell.Wpo = g.param_leaf(Wpo);
  cell.Wpc = g.param_leaf(Wpc);
  cell.bi = g.param_leaf(bi);
  cell.bf = g.param_leaf(bf);
  cell.bo = g.param_leaf(bo);
  cell.bc = g.param_leaf(bc);
  return cell;
}

Var LstmGenerator::forward(Graph& g, Var z, bool, const Tensor* condition_bits) {
  if (condition_bits != nullptr) {
    throw Error("unsupported configuration: conditioning requires a convolutional architecture");
  }
  const Tensor& tz = z.value();
  if (tz.rank() != 3 || tz.extent(2) != noise_dim_) {
    throw Error("generator noise must be (batch, n, " + std::to_string(noise_dim_) +
                "), got " + shape_str(tz.shape()));
  }
  const std::int64_t batch = tz.extent(0), n = tz.extent(1);

  const LstmCell::Fused cell = bind(g).fuse();
  Var w_out = g.param_leaf(Wout);
  Var b_out = g.param_leaf(bout);

  LstmCell::State state{g.constant(Tensor::zeros({batch, hidden_})),
                        g.constant(Tensor::zeros({batch, hidden_}))};
  // y_0 is all-zeros: no previous output, peephole term inactive at t = 1.
  Var y = g.constant(Tensor::zeros({batch, vocab_}));

  std::vector<Var> outputs;
  outputs.reserve(static_cast<std::size_t>(n));
  for (std::int64_t t = 0; t < n; ++t) {
    Var x = ad::slice_time(z, t);
    state = LstmCell::fused_step(cell, x, state, y);
    y = ad::row_softmax(ad::add_rowvec(ad::matmul(state.h, w_out), b_out));
    outputs.push_back(y);
  }
  return ad::stack_time(outputs);
}

// --- LstmDiscriminator -------------------------------------------------------

LstmDiscriminator::LstmDiscriminator(std::int64_t input_dim, std::int64_t hidden,
                                     std::mt19937_64& rng)
    : input_dim_(input_dim), hidden_(hidden) {
  Wxi = lstm_init({input_dim, hidden}, rng);
  Wxf = lstm_init({input_dim, hidden}, rng);
  Wxo = lstm_init({input_dim, hidden}, rng);
  Wxc = lstm_init({input_dim, hidden}, rng);
  Whi = lstm_init({hidden, hidden}, rng);
  Whf = lstm_init({hidden, hidden}, rng);
  Who = lstm_init({hidden, hidden}, rng);
  Whc = lstm_init({hidden, hidden}, rng);
  bi = lstm_init({1, hidden}, rng);
  bf = lstm_init({1, hidden}, rng);
  bo = lstm_init({1, hidden}, rng);
  bc = lstm_init({1, hidden}, rng);
  Wpred = lstm_init({hidden, 1}, rng);
  bpred = lstm_init({1, 1}, rng);
}

std::vector<NamedParam> LstmDiscriminator::params() {
  return {
      {"Wxi", &Wxi}, {"Wxf", &Wxf}, {"Wxo", &Wxo}, {"Wxc", &Wxc},
      {"Whi", &Whi}, {"Whf", &Whf}, {"Who", &Who}, {"Whc", &Whc},
      {"bi", &bi},   {"bf", &bf},   {"bo", &bo},   {"bc", &bc},
      {"Wpred", &Wpred}, {"bpred", &bpred},
  };
}

LstmCell LstmDiscriminator::bind(Graph& g) const {
  LstmCell cell;
  cell.Wxi = g.param_leaf(Wxi);
  cell.Wxf = g.param_leaf(Wxf);
  cell.Wxo = g.param_leaf(Wxo);
  cell.Wxc = g.param_leaf(Wxc);
  cell.Whi = g.param_leaf(Whi);
  cell.Whf = g.param_leaf(Whf);
  cell.Who = g.param_leaf(Who);
  cell.Whc = g.param_leaf(Whc);
  cell.bi = g.param_leaf(bi);
  cell.bf = g.param_leaf(bf);
  cell.bo = g.param_leaf(bo);
  cell.bc = g.param_leaf(bc);
  return cell;
}

Var LstmDiscriminator::logit(Graph& g, Var x, bool, const Tensor* condition_bits) {
  if (condition_bits != nullptr) {
    throw Error("unsupported configuration: conditioning requires a convolutional architecture");
  }
  const Tensor& tx = x.value();
  if (tx.rank() != 3 || tx.extent(2) != input_dim_) {
    throw Error("discriminator input must be (batch, n, " + std::to_string(input_dim_) +
                "), got " + shape_str(tx.shape()));
  }
  const std::int64_t batch = tx.extent(0), n = tx.extent(1);

  const LstmCell::Fused cell = bind(g).fuse();
  LstmCell::State state{g.constant(Tensor::zeros({batch, hidden_})),
                        g.constant(Tensor::zeros({batch, hidden_}))};
  for (std::int64_t t = 0; t < n; ++t) {
    state = LstmCell::fused_step(cell, ad::slice_time(x, t), state, std::nullopt);
  }
  return ad::add_rowvec(ad::matmul(state.h, g.param_leaf(Wpred)), g.param_leaf(bpred));
}

// --- batch normalization -----------------------------------------------------

Var batch_norm(Graph& g, Var x, BatchNormLayer& layer, bool training) {
  const Tensor& tx = x.value();
  if (tx.rank() != 3) {
    throw Error("batch_norm: expected (batch, n, C) input, got " + shape_str(tx.shape()));
  }
  const std::int64_t channels = tx.extent(2);
  const std::int64_t m = tx.extent(0) * tx.extent(1);
  Var flat = ad::reshape(x, {m, channels});
  Var gamma = g.param_leaf(layer.gamma);
  Var beta = g.param_leaf(layer.beta);

  Var mean, variance;
  if (training) {
    Var avg_row = g.constant(Tensor::full({1, m}, 1.0 / static_cast<double>(m)));
    mean = ad::matmul(avg_row, flat);  // (1, C)
    Var centered = ad::sub(flat, ad::matmul(g.constant(Tensor::ones({m, 1})), mean));
    variance = ad::matmul(avg_row, ad::mul(centered, centered));
    // running statistics for eval mode
    const Tensor& mv = mean.value();
    const Tensor& vv = variance.value();
    for (std::int64_t c = 0; c < channels; ++c) {
      layer.running_mean.at2(0, c) =
          layer.momentum * layer.running_mean.at2(0, c) + (1.0 - layer.momentum) * mv.at2(0, c);
      layer.running_var.at2(0, c) =
          layer.momentum * layer.running_var.at2(0, c) + (1.0 - layer.momentum) * vv.at2(0, c);
    }
  } else {
    mean = g.constant(layer.running_mean);
    variance = g.constant(layer.running_var);
  }

  Var inv = ad::recip(ad::sqrt(ad::affine(variance, 1.0, layer.eps)));  // (1, C)
  Var ones_col = g.constant(Tensor::ones({m, 1}));
  Var centered = ad::sub(flat, ad::matmul(ones_col, mean));
  Var normalized = ad::mul(centered, ad::matmul(ones_col, inv));
  Var scaled = ad::add_rowvec(ad::mul(normalized, ad::matmul(ones_col, gamma)), beta);
  return ad::reshape(scaled, tx.shape());
}

// --- CNN trunk ---------------------------------------------------------------

CnnTrunk::CnnTrunk(std::int64_t input_dim, const CnnOptions& opts, std::mt19937_64& rng)
    : opts_(opts) {
  const std::int64_t extra = opts.conditioned ? 1 : 0;
  proj = make_conv(1, input_dim + extra, opts.channels, rng);
  for (std::int64_t b = 0; b < opts.blocks; ++b) {
    ResidualBlock block;
    block.conv1 = make_conv(opts.kernel_width, opts.channels + extra, opts.channels, rng);
    block.conv2 = make_conv(opts.kernel_width, opts.channels + extra, opts.channels, rng);
    block.bn1 = make_bn(opts.channels);
    block.bn2 = make_bn(opts.channels);
    blocks.push_back(std::move(block));
  }
}

Var CnnTrunk::forward(Graph& g, Var x, bool training, const Tensor* condition_bits) {
  if (opts_.conditioned != (condition_bits != nullptr)) {
    throw Error(opts_.conditioned ? "conditioned model requires condition bits"
                                  : "condition bits passed to an unconditioned model");
  }
  auto conditioned = [&](Var v) {
    return condition_bits != nullptr ? apply_condition(v, *condition_bits) : v;
  };
  Var h = conv_apply(g, proj, conditioned(x));
  for (ResidualBlock& block : blocks) {
    Var t = conv_apply(g, block.conv1, conditioned(h));
    if (opts_.batchnorm) t = batch_norm(g, t, block.bn1, training);
    t = ad::relu(t);
    t = conv_apply(g, block.conv2, conditioned(t));
    if (opts_.batchnorm) t = batch_norm(g, t, block.bn2, training);
    t = ad::relu(t);
    h = ad::add(h, t);
  }
  return h;
}

void CnnTrunk::collect(std::vector<NamedParam>& params, std::vector<NamedParam>& buffers,
                       const std::string& prefix) {
  params.push_back({prefix + "proj.kernel", &proj.kernel});
  params.push_back({prefix + "proj.bias", &proj.bias});
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string base = prefix + "block" + std::to_string(b) + ".";
    ResidualBlock& block = blocks[b];
    params.push_back({base + "conv1.kernel", &block.conv1.kernel});
    params.push_back({base + "conv1.bias", &block.conv1.bias});
    params.push_back({base + "conv2.kernel", &block.conv2.kernel});
    params.push_back({base + "conv2.bias", &block.conv2.bias});
    if (opts_.batchnorm) {
      params.push_back({base + "bn1.gamma", &block.bn1.gamma});
      params.push_back({base + "bn1.beta", &block.bn1.beta});
      params.push_back({base + "bn2.gamma", &block.bn2.gamma});
      params.push_back({base + "bn2.beta", &block.bn2.beta});
      buffers.push_back({base + "bn1.running_mean", &block.bn1.running_mean});
      buffers.push_back({base + "bn1.running_var", &block.bn1.running_var});
      buffers.push_back({base + "bn2.running_mean", &block.bn2.running_mean});
      buffers.push_back({base + "bn2.running_var", &block.bn2.running_var});
    }
  }
}

// --- CnnGenerator ------------------------------------------------------------

CnnGenerator::CnnGenerator(std::int64_t noise_dim, std::int64_t vocab, const CnnOptions& opts,
                           std::mt19937_64& rng)
    : noise_dim_(noise_dim), vocab_(vocab), trunk_(noise_dim, opts, rng) {
  const std::int64_t extra = opts.conditioned ? 1 : 0;
  head = make_conv(1, opts.channels + extra, vocab, rng);
}

std::vector<NamedParam> CnnGenerator::params() {
  std::vector<NamedParam> params, buffers;
  trunk_.collect(params, buffers, "");
  params.push_back({"head.kernel", &head.kernel});
  params.push_back({"head.bias", &head.bias});
  return params;
}

std::vector<NamedParam> CnnGenerator::buffers() {
  std::vector<NamedParam> params, buffers;
  trunk_.collect(params, buffers, "");
  return buffers;
}

Var CnnGenerator::forward(Graph& g, Var z, bool training, const Tensor* condition_bits) {
  const Tensor& tz = z.value();
  if (tz.rank() != 3 || tz.extent(2) != noise_dim_) {
    throw Error("generator noise must be (batch, n, " + std::to_string(noise_dim_) +
                "), got " + shape_str(tz.shape()));
  }
  Var h = trunk_.forward(g, z, training, condition_bits);
  if (condition_bits != nullptr) h = apply_condition(h, *condition_bits);
  Var logits = conv_apply(g, head, h);  // (B, n, k)
  const std::int64_t rows = tz.extent(0) * tz.extent(1);
  Var flat = ad::reshape(logits, {rows, vocab_});
  return ad::reshape(ad::row_softmax(flat), {tz.extent(0), tz.extent(1), vocab_});
}

// --- CnnDiscriminator ----------------------------------------------------------

CnnDiscriminator::CnnDiscriminator(std::int64_t input_dim, const CnnOptions& opts,
                                   std::mt19937_64& rng)
    : input_dim_(input_dim), trunk_(input_dim, opts, rng) {
  const std::int64_t extra = opts.conditioned ? 1 : 0;
  head = make_conv(1, opts.channels + extra, 1, rng);
}

std::vector<NamedParam> CnnDiscriminator::params() {
  std::vector<NamedParam> params, buffers;
  trunk_.collect(params, buffers, "");
  params.push_back({"head.kernel", &head.kernel});
  params.push_back({"head.bias", &head.bias});
  return params;
}

std::vector<NamedParam> CnnDiscriminator::buffers() {
  std::vector<NamedParam> params, buffers;
  trunk_.collect(params, buffers, "");
  return buffers;
}

Var CnnDiscriminator::logit(Graph& g, Var x, bool training, const Tensor* condition_bits) {
  const Tensor& tx = x.value();
  if (tx.rank() != 3 || tx.extent(2) != input_dim_) {
    throw Error("discriminator input must be (batch, n, " + std::to_string(input_dim_) +
                "), got " + shape_str(tx.shape()));
  }
  Var h = trunk_.forward(g, x, training, condition_bits);
  if (condition_bits != nullptr) h = apply_condition(h, *condition_bits);
  Var channel = conv_apply(g, head, h);  // (B, n, 1)
  // single output channel, averaged over sequence positions
  return ad::affine(ad::rowsum_tail(channel), 1.0 / static_cast<double>(tx.extent(1)), 0.0);
}

// --- decoding ------------------------------------------------------------------

std::vector<int> greedy_decode(const Tensor& distributions) {
  if (distributions.rank() != 2) {
    throw Error("greedy_decode: expected (n, k) distributions, got " +
                shape_str(distributions.shape()));
  }
  const std::int64_t n = distributions.extent(0), k = distributions.extent(1);
  std::vector<int> tokens(static_cast<std::size_t>(n));
  for (std::int64_t t = 0; t < n; ++t) {
    std::int64_t best = 0;
    for (std::int64_t c = 1; c < k; ++c) {
      if (distributions.at2(t, c) > distributions.at2(t, best)) best = c;
    }
    tokens[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  return tokens;
}

std::vector<std::vector<int>> greedy_decode_batch(const Tensor& distributions) {
  if (distributions.rank() != 3) {
    throw Error("greedy_decode_batch: expected (B, n, k), got " +
                shape_str(distributions.shape()));
  }
  const std::int64_t batch = distributions.extent(0), n = distributions.extent(1),
                     k = distributions.extent(2);
  std::vector<std::vector<int>> out(static_cast<std::size_t>(batch));
  for (std::int64_t b = 0; b < batch; ++b) {
    std::vector<int>& row = out[static_cast<std::size_t>(b)];
    row.resize(static_cast<std::size_t>(n));
    for (std::int64_t t = 0; t < n; ++t) {
      std::int64_t best = 0;
      for (std::int64_t c = 1; c < k; ++c) {
        if (distributions.at3(b, t, c) > distributions.at3(b, t, best)) best = c;
      }
      row[static_cast<std::size_t>(t)] = static_cast<int>(best);
    }
  }
  return out;
}

}  // namespace advseq::models
