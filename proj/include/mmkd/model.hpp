#pragma once

#include "mmkd/autograd.hpp"
#include "mmkd/tokenization.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace mmkd {

struct EncoderConfig {
  std::size_t layers = 4;
  std::size_t hidden_dim = 64;
  std::size_t heads = 4;
  std::size_t ffn_dim = 256;
  std::size_t max_len = kMaxSequenceLength;
  std::size_t vocab_size = 1000;
  std::uint64_t seed = 1;
  double dropout = 0.1;

  std::size_t head_dim() const { return hidden_dim / heads; }
  /// Throws ConfigError when a shape constraint is violated.
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

struct HeadConfig {
  std::size_t in_dim = 64;
  std::size_t mid_dim = 64;
  std::size_t out_dim = 32;

  void validate() const;
  bool operator==(const HeadConfig&) const = default;
};

enum class Mode { eval, train };

template <typename S>
using Params = std::vector<ag::NamedParameter<S>>;

/// Post-norm transformer encoder: token + learned position embeddings, then
/// `layers` blocks of multi-head self-attention and a GELU feed-forward
/// network, each wrapped as LayerNorm(x + f(x)). The masked-LM output layer
/// is tied to the token embedding with its own bias.
template <typename S>
class Encoder {
 public:
  explicit Encoder(const EncoderConfig& cfg, bool trainable = true);

  /// Last-layer hidden states, [len(ids) x hidden_dim]. [PAD] positions are
  /// excluded as attention keys. `rng` drives dropout in train mode.
  ag::Tensor<S> encode(std::span<const TokenId> ids, Mode mode = Mode::eval,
                       std::mt19937_64* rng = nullptr) const;

  /// Vocabulary logits for the given hidden rows.
  ag::Tensor<S> mlm_logits(const ag::Tensor<S>& hidden_rows) const;

  const EncoderConfig& config() const { return cfg_; }
  Params<S> parameters(const std::string& prefix = "") const;
  void set_trainable(bool on);
  bool trainable() const { return trainable_; }

 private:
  struct Layer {
    ag::Tensor<S> w_qkv, b_qkv, w_out, b_out;
    ag::Tensor<S> ln1_gamma, ln1_beta;
    ag::Tensor<S> w_ffn1, b_ffn1, w_ffn2, b_ffn2;
    ag::Tensor<S> ln2_gamma, ln2_beta;
  };

  EncoderConfig cfg_;
  bool trainable_;
  ag::Tensor<S> token_embedding_, position_embedding_, emb_gamma_, emb_beta_, mlm_bias_;
  std::vector<Layer> layers_;
};

/// Two affine layers with a GELU between; used for projectors and
/// predictors alike. No normalization inside.
template <typename S>
class Head {
 public:
  Head(const HeadConfig& cfg, std::uint64_t seed, bool trainable = true);

  /// rows [B x in_dim] -> [B x out_dim]
  ag::Tensor<S> forward(const ag::Tensor<S>& rows) const;

  const HeadConfig& config() const { return cfg_; }
  Params<S> parameters(const std::string& prefix = "") const;
  void set_trainable(bool on);

 private:
  HeadConfig cfg_;
  ag::Tensor<S> w1_, b1_, w2_, b2_;
};

template <typename S>
ag::Tensor<S> project(const Head<S>& head, const ag::Tensor<S>& rows) {
  return head.forward(rows);
}
template <typename S>
ag::Tensor<S> predict(const Head<S>& head, const ag::Tensor<S>& rows) {
  return head.forward(rows);
}

struct BundleConfig {
  EncoderConfig teacher;
  EncoderConfig student;
  HeadConfig head;
  std::uint64_t head_seed = 11;
  bool teacher_heads_trainable = false;

  void validate() const;
  bool operator==(const BundleConfig&) const = default;
};

/// Frozen teacher (encoder + two projectors) and trainable student (encoder,
/// two projectors, two predictors).
template <typename S>
struct ModelBundle {
  explicit ModelBundle(const BundleConfig& cfg);
  /// Wraps an existing (typically pretrained) teacher encoder.
  ModelBundle(const BundleConfig& cfg, Encoder<S> teacher);

  BundleConfig config;
  Encoder<S> teacher_encoder;
  Head<S> teacher_head_senta;
  Head<S> teacher_head_struca;
  Encoder<S> student_encoder;
  Head<S> student_head_senta;
  Head<S> student_pred_senta;
  Head<S> student_head_struca;
  Head<S> student_pred_struca;
};

/// Student encoder and heads, in a fixed order. Teacher projectors are
/// included only when `teacher_heads_trainable` is set.
template <typename S>
Params<S> trainable_parameters(const ModelBundle<S>& bundle);

template <typename S>
Params<S> teacher_parameters(const ModelBundle<S>& bundle);

/// Every parameter: teacher first, then student.
template <typename S>
Params<S> all_parameters(const ModelBundle<S>& bundle);

/// FNV-1a over names, shapes and raw value bytes.
template <typename S>
std::uint64_t parameter_hash(const Params<S>& params);

template <typename S>
std::size_t parameter_count(const Params<S>& params);

/// Copies values between same-shaped parameter lists, converting scalars.
template <typename To, typename From>
void copy_parameters(const Params<From>& from, const Params<To>& to);

}  // namespace mmkd
