#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csireid/autodiff/checkpoint.hpp"
#include "csireid/autodiff/tensor.hpp"
#include "csireid/csi_core.hpp"
#include "csireid/rng.hpp"

namespace csireid {

enum class Arch { lstm, bilstm, transformer };
enum class Pooling { mean_time, last_step };
enum class Mode { train, eval };

std::string_view to_string(Arch a);
Arch parse_arch(std::string_view text);
std::string_view to_string(Pooling p);
Pooling parse_pooling(std::string_view text);

struct EncoderConfig {
  Arch arch = Arch::transformer;
  std::size_t layers = 1;
  std::size_t hidden = 128;
  std::size_t heads = 4;
  std::size_t ff_dim = 0;  // 0 means 4 * hidden
  double dropout = 0.1;
  std::size_t signature_dim = 128;
  Pooling pooling = Pooling::mean_time;

  void validate() const;
  [[nodiscard]] std::size_t feed_forward_dim() const { return ff_dim == 0 ? 4 * hidden : ff_dim; }
  /// Width of the encoder output fed to the signature head.
  [[nodiscard]] std::size_t encoding_dim() const {
    return arch == Arch::bilstm ? 2 * hidden : hidden;
  }
};

struct LinearParams {
  ad::Tensor weight;  // in x out
  ad::Tensor bias;    // 1 x out
};

/// x W + b
ad::Tensor linear(const ad::Tensor& x, const LinearParams& p);

/// Gate columns are ordered [input, forget, cell, output].
struct LstmLayerParams {
  ad::Tensor w_ih;  // in x 4H
  ad::Tensor w_hh;  // H x 4H
  ad::Tensor bias;  // 1 x 4H
};

struct AttentionParams {
  LinearParams query, key, value, output;
};

struct TransformerLayerParams {
  AttentionParams attention;
  ad::Tensor norm1_gain, norm1_bias;
  LinearParams ff1, ff2;
  ad::Tensor norm2_gain, norm2_bias;
};

/// Sinusoidal table: PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(...).
std::vector<double> positional_encoding(std::size_t positions, std::size_t d);

/// Single-head attention softmax(q k^T / sqrt(d_k)) v on one sequence.
/// If weights_out is non-null it receives the attention matrix.
ad::Tensor scaled_dot_product_attention(const ad::Tensor& q, const ad::Tensor& k,
                                        const ad::Tensor& v, ad::Tensor* weights_out = nullptr);

/// Multi-head self-attention over `batch` stacked sequences of equal length
/// (rows sample-major). Residual and normalization are the caller's job.
ad::Tensor multi_head_attention(const ad::Tensor& x, std::size_t batch, const AttentionParams& p,
                                std::size_t heads);

/// Inputs to the encoders are `batch` sequences stacked sample-major into a
/// (batch * packets) x features tensor.
ad::Tensor pack_batch(std::span<const FeatureSequence> seqs);

/// Stacked unidirectional LSTM; returns the top layer's last hidden state
/// (batch x H).
ad::Tensor lstm_encode(const ad::Tensor& x, std::size_t batch,
                       std::span<const LstmLayerParams> layers, double dropout, Mode mode,
                       Rng* rng);

/// Stacked bidirectional LSTM; returns [forward h at t=P, backward h at t=1]
/// (batch x 2H).
ad::Tensor bilstm_encode(const ad::Tensor& x, std::size_t batch,
                         std::span<const LstmLayerParams> forward,
                         std::span<const LstmLayerParams> backward, double dropout, Mode mode,
                         Rng* rng);

/// Input projection, positional encodings, post-norm encoder layers, pooling.
ad::Tensor transformer_encode(const ad::Tensor& x, std::size_t batch, const LinearParams& input,
                              std::span<const TransformerLayerParams> layers, std::size_t heads,
                              double dropout, Pooling pooling, Mode mode, Rng* rng);

/// Affine map then row-wise l2 normalization. NumericError on a zero row.
ad::Tensor signature_head(const ad::Tensor& h, const LinearParams& p);

/// Encoder plus signature head with named, ordered parameters.
class SignatureModel {
 public:
  SignatureModel(EncoderConfig cfg, std::size_t n_feat, std::uint64_t seed);

  [[nodiscard]] const EncoderConfig& config() const { return cfg_; }
  [[nodiscard]] std::size_t n_feat() const { return n_feat_; }

  [[nodiscard]] const std::vector<ad::NamedTensor>& parameters() const { return named_; }
  [[nodiscard]] std::vector<ad::Tensor> parameter_tensors() const;
  [[nodiscard]] std::size_t parameter_count() const;

  /// Encoder output (batch x encoding_dim). `rng` drives dropout in train mode.
  ad::Tensor encode(const ad::Tensor& x, std::size_t batch, Mode mode, Rng* rng = nullptr) const;
  /// Unit-norm signatures (batch x signature_dim).
  ad::Tensor forward(const ad::Tensor& x, std::size_t batch, Mode mode, Rng* rng = nullptr) const;

  /// Evaluation-mode signatures, one row per sequence, computed without a graph.
  std::vector<std::vector<double>> signatures(std::span<const FeatureSequence> seqs,
                                              std::size_t chunk = 16) const;

  /// Copies values from a checkpoint; DataError on a name or shape mismatch.
  void load_parameters(const std::vector<ad::NamedTensor>& tensors);

 private:
  void add(const std::string& name, const ad::Tensor& t);

  EncoderConfig cfg_;
  std::size_t n_feat_;
  std::vector<ad::NamedTensor> named_;
  std::vector<LstmLayerParams> lstm_fwd_;
  std::vector<LstmLayerParams> lstm_bwd_;
  LinearParams input_;
  std::vector<TransformerLayerParams> transformer_;
  LinearParams head_;
};

}  // namespace csireid
