#include "csireid/encoders.hpp"

#include <cmath>
#include <stdexcept>

#include "csireid/autodiff/ops.hpp"
#include "csireid/error.hpp"

namespace csireid {

namespace {

using ad::Tensor;

// Parameters live on the f32 grid so checkpoints round-trip exactly.
Tensor uniform_param(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = static_cast<double>(static_cast<float>(rng.uniform(-bound, bound)));
  return Tensor::from(rows, cols, std::move(v), true);
}

Tensor const_param(std::size_t rows, std::size_t cols, double value) {
  return Tensor::from(rows, cols, std::vector<double>(rows * cols, value), true);
}

LinearParams make_linear(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  LinearParams p;
  p.weight = uniform_param(in, out, bound, rng);
  p.bias = uniform_param(1, out, bound, rng);
  return p;
}

LstmLayerParams make_lstm_layer(std::size_t in, std::size_t hidden, Rng& rng) {
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(in));
  const double hidden_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  LstmLayerParams p;
  p.w_ih = uniform_param(in, 4 * hidden, in_bound, rng);
  p.w_hh = uniform_param(hidden, 4 * hidden, hidden_bound, rng);
  p.bias = uniform_param(1, 4 * hidden, hidden_bound, rng);
  auto b = p.bias.values();
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;  // forget gate
  return p;
}

Rng& require_rng(Rng* rng, Mode mode, double dropout) {
  static thread_local Rng unused(0);
  if (mode == Mode::train && dropout > 0.0) {
    if (rng == nullptr) throw std::invalid_argument("train-mode dropout needs a generator");
    return *rng;
  }
  return rng != nullptr ? *rng : unused;
}

// One direction of one LSTM layer over a time-major (P*B x in) input.
// Returns the hidden state for every step in processing order.
std::vector<Tensor> lstm_layer(const Tensor& x_time_major, std::size_t batch, std::size_t steps,
                               const LstmLayerParams& p, bool reverse) {
  const std::size_t hidden = p.w_hh.rows();
  const Tensor pre = ad::add(ad::matmul(x_time_major, p.w_ih), p.bias);
  std::vector<Tensor> hs(steps);
  Tensor h;
  Tensor c;
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    Tensor gates = ad::slice(pre, 0, t * batch, batch);
    if (s > 0) gates = ad::add(gates, ad::matmul(h, p.w_hh));
    const Tensor i = ad::sigmoid(ad::slice(gates, 1, 0, hidden));
    const Tensor g = ad::tanh(ad::slice(gates, 1, 2 * hidden, hidden));
    const Tensor o = ad::sigmoid(ad::slice(gates, 1, 3 * hidden, hidden));
    if (s == 0) {
      c = ad::mul(i, g);
    } else {
      const Tensor f = ad::sigmoid(ad::slice(gates, 1, hidden, hidden));
      c = ad::add(ad::mul(f, c), ad::mul(i, g));
    }
    h = ad::mul(o, ad::tanh(c));
    hs[t] = h;
  }
  return hs;
}

Tensor to_time_major(const Tensor& x, std::size_t batch, std::size_t steps) {
  if (batch == 1) return x;
  std::vector<std::size_t> rows(batch * steps);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch; ++b) rows[t * batch + b] = b * steps + t;
  }
  return ad::gather_rows(x, rows);
}

std::size_t steps_of(const Tensor& x, std::size_t batch) {
  if (batch == 0 || x.rows() == 0 || x.rows() % batch != 0) {
    throw DataError("encoder input rows are not a whole number of sequences");
  }
  return x.rows() / batch;
}

}  // namespace

std::string_view to_string(Arch a) {
  switch (a) {
    case Arch::lstm: return "lstm";
    case Arch::bilstm: return "bilstm";
    case Arch::transformer: return "transformer";
  }
  return "?";
}

Arch parse_arch(std::string_view text) {
  if (text == "lstm") return Arch::lstm;
  if (text == "bilstm") return Arch::bilstm;
  if (text == "transformer") return Arch::transformer;
  throw ConfigError("unknown architecture '" + std::string(text) + "'");
}

std::string_view to_string(Pooling p) { return p == Pooling::mean_time ? "mean_time" : "last_step"; }

Pooling parse_pooling(std::string_view text) {
  if (text == "mean_time") return Pooling::mean_time;
  if (text == "last_step") return Pooling::last_step;
  throw ConfigError("unknown pooling '" + std::string(text) + "'");
}

void EncoderConfig::validate() const {
  if (layers < 1) throw ConfigError("encoder needs at least one layer");
  if (hidden < 1) throw ConfigError("hidden size must be >= 1");
  if (signature_dim < 1) throw ConfigError("signature dimension must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (arch == Arch::transformer) {
    if (heads < 1 || hidden % heads != 0) throw ConfigError("hidden must be divisible by heads");
    if (hidden % 2 != 0) throw ConfigError("transformer hidden size must be even");
  }
}

Tensor linear(const Tensor& x, const LinearParams& p) {
  return ad::add(ad::matmul(x, p.weight), p.bias);
}

std::vector<double> positional_encoding(std::size_t positions, std::size_t d) {
  if (d % 2 != 0) throw ConfigError("positional encoding width must be even");
  std::vector<double> pe(positions * d);
  for (std::size_t pos = 0; pos < positions; ++pos) {
    for (std::size_t i = 0; i < d / 2; ++i) {
      const double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d));
      pe[pos * d + 2 * i] = std::sin(angle);
      pe[pos * d + 2 * i + 1] = std::cos(angle);
    }
  }
  return pe;
}

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                    Tensor* weights_out) {
  if (q.cols() != k.cols() || k.rows() != v.rows()) {
    throw std::invalid_argument("attention: q/k/v shapes disagree");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  const Tensor weights = ad::softmax(ad::scale(ad::matmul(q, ad::transpose(k)), scale), 1);
  if (weights_out != nullptr) *weights_out = weights;
  return ad::matmul(weights, v);
}

Tensor multi_head_attention(const Tensor& x, std::size_t batch, const AttentionParams& p,
                            std::size_t heads) {
  const std::size_t d = x.cols();
  if (heads == 0 || d % heads != 0) throw ConfigError("model width not divisible by heads");
  const std::size_t steps = steps_of(x, batch);
  const std::size_t dh = d / heads;
  const Tensor q = linear(x, p.query);
  const Tensor k = linear(x, p.key);
  const Tensor v = linear(x, p.value);
  std::vector<Tensor> samples;
  samples.reserve(batch);
  std::vector<Tensor> head_out(heads);
  for (std::size_t b = 0; b < batch; ++b) {
    const Tensor qb = batch == 1 ? q : ad::slice(q, 0, b * steps, steps);
    const Tensor kb = batch == 1 ? k : ad::slice(k, 0, b * steps, steps);
    const Tensor vb = batch == 1 ? v : ad::slice(v, 0, b * steps, steps);
    for (std::size_t h = 0; h < heads; ++h) {
      head_out[h] = heads == 1 ? scaled_dot_product_attention(qb, kb, vb)
                               : scaled_dot_product_attention(ad::slice(qb, 1, h * dh, dh),
                                                              ad::slice(kb, 1, h * dh, dh),
                                                              ad::slice(vb, 1, h * dh, dh));
    }
    samples.push_back(heads == 1 ? head_out[0] : ad::concat(head_out, 1));
  }
  const Tensor merged = batch == 1 ? samples[0] : ad::concat(samples, 0);
  return linear(merged, p.output);
}

Tensor pack_batch(std::span<const FeatureSequence> seqs) {
  if (seqs.empty()) throw DataError("empty batch");
  const std::size_t steps = seqs[0].n_pkt();
  const std::size_t feats = seqs[0].n_feat();
  if (steps == 0) throw DataError("empty sequence");
  std::vector<double> values;
  values.reserve(seqs.size() * steps * feats);
  for (const auto& s : seqs) {
    if (s.n_pkt() != steps || s.n_feat() != feats) throw DataError("batch sequences differ in shape");
    values.insert(values.end(), s.data().begin(), s.data().end());
  }
  return Tensor::from(seqs.size() * steps, feats, std::move(values));
}

Tensor lstm_encode(const Tensor& x, std::size_t batch, std::span<const LstmLayerParams> layers,
                   double dropout, Mode mode, Rng* rng) {
  const std::size_t steps = steps_of(x, batch);
  if (layers.empty()) throw ConfigError("LSTM needs at least one layer");
  Rng& gen = require_rng(rng, mode, dropout);
  Tensor seq = to_time_major(x, batch, steps);
  std::vector<Tensor> hs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (l > 0) seq = ad::dropout(ad::concat(hs, 0), 1.0 - dropout, gen, mode == Mode::train);
    hs = lstm_layer(seq, batch, steps, layers[l], false);
  }
  return hs.back();
}

Tensor bilstm_encode(const Tensor& x, std::size_t batch, std::span<const LstmLayerParams> forward,
                     std::span<const LstmLayerParams> backward, double dropout, Mode mode,
                     Rng* rng) {
  const std::size_t steps = steps_of(x, batch);
  if (forward.empty() || forward.size() != backward.size()) {
    throw ConfigError("Bi-LSTM needs matching forward/backward layers");
  }
  Rng& gen = require_rng(rng, mode, dropout);
  Tensor seq = to_time_major(x, batch, steps);
  std::vector<Tensor> fwd;
  std::vector<Tensor> bwd;
  for (std::size_t l = 0; l < forward.size(); ++l) {
    if (l > 0) {
      std::vector<Tensor> rows(steps);
      for (std::size_t t = 0; t < steps; ++t) {
        const Tensor pair[2] = {fwd[t], bwd[t]};
        rows[t] = ad::concat(pair, 1);
      }
      seq = ad::dropout(ad::concat(rows, 0), 1.0 - dropout, gen, mode == Mode::train);
    }
    fwd = lstm_layer(seq, batch, steps, forward[l], false);
    bwd = lstm_layer(seq, batch, steps, backward[l], true);
  }
  const Tensor last[2] = {fwd.back(), bwd.front()};
  return ad::concat(last, 1);
}

Tensor transformer_encode(const Tensor& x, std::size_t batch, const LinearParams& input,
                          std::span<const TransformerLayerParams> layers, std::size_t heads,
                          double dropout, Pooling pooling, Mode mode, Rng* rng) {
  const std::size_t steps = steps_of(x, batch);
  const std::size_t d = input.weight.cols();
  Rng& gen = require_rng(rng, mode, dropout);

  const auto pe = positional_encoding(steps, d);
  std::vector<double> tiled;
  tiled.reserve(batch * pe.size());
  for (std::size_t b = 0; b < batch; ++b) tiled.insert(tiled.end(), pe.begin(), pe.end());
  Tensor z = ad::add(linear(x, input), Tensor::from(batch * steps, d, std::move(tiled)));

  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& p = layers[l];
    z = ad::layer_norm(ad::add(z, multi_head_attention(z, batch, p.attention, heads)),
                       p.norm1_gain, p.norm1_bias);
    const Tensor ff = linear(ad::relu(linear(z, p.ff1)), p.ff2);
    z = ad::layer_norm(ad::add(z, ff), p.norm2_gain, p.norm2_bias);
    if (l + 1 < layers.size()) z = ad::dropout(z, 1.0 - dropout, gen, mode == Mode::train);
  }

  if (pooling == Pooling::last_step) {
    std::vector<std::size_t> rows(batch);
    for (std::size_t b = 0; b < batch; ++b) rows[b] = b * steps + steps - 1;
    return ad::gather_rows(z, rows);
  }
  if (batch == 1) return ad::mean_axis(z, 0);
  std::vector<double> pool(batch * batch * steps, 0.0);
  const double w = 1.0 / static_cast<double>(steps);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < steps; ++t) pool[b * batch * steps + b * steps + t] = w;
  }
  return ad::matmul(Tensor::from(batch, batch * steps, std::move(pool)), z);
}

Tensor signature_head(const Tensor& h, const LinearParams& p) {
  return ad::l2_normalize(linear(h, p), 1);
}

SignatureModel::SignatureModel(EncoderConfig cfg, std::size_t n_feat, std::uint64_t seed)
    : cfg_(cfg), n_feat_(n_feat) {
  cfg_.validate();
  if (n_feat_ == 0) throw ConfigError("model needs at least one input feature");
  Rng rng(seed);
  const std::size_t hidden = cfg_.hidden;
  switch (cfg_.arch) {
    case Arch::lstm:
    case Arch::bilstm: {
      const bool bi = cfg_.arch == Arch::bilstm;
      std::size_t in = n_feat_;
      for (std::size_t l = 0; l < cfg_.layers; ++l) {
        lstm_fwd_.push_back(make_lstm_layer(in, hidden, rng));
        const std::string f = "lstm.fwd" + std::to_string(l);
        add(f + ".w_ih", lstm_fwd_.back().w_ih);
        add(f + ".w_hh", lstm_fwd_.back().w_hh);
        add(f + ".bias", lstm_fwd_.back().bias);
        if (bi) {
          lstm_bwd_.push_back(make_lstm_layer(in, hidden, rng));
          const std::string b = "lstm.bwd" + std::to_string(l);
          add(b + ".w_ih", lstm_bwd_.back().w_ih);
          add(b + ".w_hh", lstm_bwd_.back().w_hh);
          add(b + ".bias", lstm_bwd_.back().bias);
        }
        in = bi ? 2 * hidden : hidden;
      }
      break;
    }
    case Arch::transformer: {
      input_ = make_linear(n_feat_, hidden, rng);
      add("input.weight", input_.weight);
      add("input.bias", input_.bias);
      for (std::size_t l = 0; l < cfg_.layers; ++l) {
        TransformerLayerParams p;
        const std::string n = "layer" + std::to_string(l);
        p.attention.query = make_linear(hidden, hidden, rng);
        p.attention.key = make_linear(hidden, hidden, rng);
        p.attention.value = make_linear(hidden, hidden, rng);
        p.attention.output = make_linear(hidden, hidden, rng);
        p.norm1_gain = const_param(1, hidden, 1.0);
        p.norm1_bias = const_param(1, hidden, 0.0);
        p.ff1 = make_linear(hidden, cfg_.feed_forward_dim(), rng);
        p.ff2 = make_linear(cfg_.feed_forward_dim(), hidden, rng);
        p.norm2_gain = const_param(1, hidden, 1.0);
        p.norm2_bias = const_param(1, hidden, 0.0);
        const std::pair<const char*, const LinearParams*> linears[] = {
            {".attn.query", &p.attention.query}, {".attn.key", &p.attention.key},
            {".attn.value", &p.attention.value}, {".attn.output", &p.attention.output},
            {".ff1", &p.ff1},                    {".ff2", &p.ff2}};
        for (const auto& [suffix, lin] : linears) {
          add(n + suffix + ".weight", lin->weight);
          add(n + suffix + ".bias", lin->bias);
        }
        add(n + ".norm1.gain", p.norm1_gain);
        add(n + ".norm1.bias", p.norm1_bias);
        add(n + ".norm2.gain", p.norm2_gain);
        add(n + ".norm2.bias", p.norm2_bias);
        transformer_.push_back(std::move(p));
      }
      break;
    }
  }
  head_ = make_linear(cfg_.encoding_dim(), cfg_.signature_dim, rng);
  add("head.weight", head_.weight);
  add("head.bias", head_.bias);
}

void SignatureModel::add(const std::string& name, const Tensor& t) { named_.push_back({name, t}); }

std::vector<Tensor> SignatureModel::parameter_tensors() const {
  std::vector<Tensor> out;
  out.reserve(named_.size());
  for (const auto& n : named_) out.push_back(n.tensor);
  return out;
}

std::size_t SignatureModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : named_) n += p.tensor.size();
  return n;
}

Tensor SignatureModel::encode(const Tensor& x, std::size_t batch, Mode mode, Rng* rng) const {
  if (x.cols() != n_feat_) {
    throw DataError("model expects " + std::to_string(n_feat_) + " features, got " +
                    std::to_string(x.cols()));
  }
  switch (cfg_.arch) {
    case Arch::lstm: return lstm_encode(x, batch, lstm_fwd_, cfg_.dropout, mode, rng);
    case Arch::bilstm:
      return bilstm_encode(x, batch, lstm_fwd_, lstm_bwd_, cfg_.dropout, mode, rng);
    case Arch::transformer:
      return transformer_encode(x, batch, input_, transformer_, cfg_.heads, cfg_.dropout,
                                cfg_.pooling, mode, rng);
  }
  throw std::logic_error("unreachable");
}

Tensor SignatureModel::forward(const Tensor& x, std::size_t batch, Mode mode, Rng* rng) const {
  return signature_head(encode(x, batch, mode, rng), head_);
}

std::vector<std::vector<double>> SignatureModel::signatures(std::span<const FeatureSequence> seqs,
                                                            std::size_t chunk) const {
  ad::NoGradGuard no_grad;
  std::vector<std::vector<double>> out;
  out.reserve(seqs.size());
  chunk = std::max<std::size_t>(chunk, 1);
  for (std::size_t start = 0; start < seqs.size(); start += chunk) {
    const auto part = seqs.subspan(start, std::min(chunk, seqs.size() - start));
    const Tensor sig = forward(pack_batch(part), part.size(), Mode::eval);
    const auto v = sig.values();
    for (std::size_t r = 0; r < part.size(); ++r) {
      out.emplace_back(v.begin() + static_cast<std::ptrdiff_t>(r * sig.cols()),
                       v.begin() + static_cast<std::ptrdiff_t>((r + 1) * sig.cols()));
    }
  }
  return out;
}

void SignatureModel::load_parameters(const std::vector<ad::NamedTensor>& tensors) {
  if (tensors.size() != named_.size()) {
    throw DataError("architecture mismatch: checkpoint has " + std::to_string(tensors.size()) +
                    " tensors, model has " + std::to_string(named_.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& src = tensors[i];
    auto& dst = named_[i];
    if (src.name != dst.name || src.tensor.shape() != dst.tensor.shape()) {
      throw DataError("architecture mismatch at tensor '" + dst.name + "' (checkpoint has '" +
                      src.name + "' " + std::to_string(src.tensor.rows()) + "x" +
                      std::to_string(src.tensor.cols()) + ")");
    }
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto v = tensors[i].tensor.values();
    std::copy(v.begin(), v.end(), named_[i].tensor.values().begin());
  }
}

}  // namespace csireid
