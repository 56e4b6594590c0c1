#include "mmkd/model.hpp"

#include "mmkd/errors.hpp"
#include "mmkd/random.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

namespace mmkd {

namespace {

constexpr double kInitStd = 0.02;
constexpr double kLayerNormEps = 1e-12;
constexpr double kMaskedScore = -1e9;

template <typename S>
ag::Matrix<S> truncated_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, kInitStd);
  ag::Matrix<S> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double v = normal(rng);
    while (std::abs(v) > 2.0 * kInitStd) v = normal(rng);
    m.data()[i] = static_cast<S>(v);
  }
  return m;
}

template <typename S>
ag::Tensor<S> weight(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, bool trainable) {
  return ag::Tensor<S>::leaf(truncated_normal<S>(rows, cols, rng), trainable);
}

template <typename S>
ag::Tensor<S> zeros(Eigen::Index cols, bool trainable) {
  return ag::Tensor<S>::leaf(ag::Matrix<S>::Zero(1, cols), trainable);
}

template <typename S>
ag::Tensor<S> ones(Eigen::Index cols, bool trainable) {
  return ag::Tensor<S>::leaf(ag::Matrix<S>::Ones(1, cols), trainable);
}

template <typename S>
ag::Tensor<S> maybe_dropout(const ag::Tensor<S>& x, Mode mode, double p, std::mt19937_64* rng) {
  if (mode != Mode::train || p <= 0.0) return x;
  if (rng == nullptr) throw ConfigError("train-mode forward pass needs a dropout stream");
  return ag::dropout(x, static_cast<S>(p), *rng);
}

}  // namespace

void EncoderConfig::validate() const {
  if (layers == 0 || hidden_dim == 0 || heads == 0 || ffn_dim == 0 || max_len == 0) {
    throw ConfigError("encoder dimensions must be positive");
  }
  if (hidden_dim % heads != 0) {
    throw ConfigError("hidden_dim " + std::to_string(hidden_dim) + " is not divisible by heads " +
                      std::to_string(heads));
  }
  if (vocab_size <= static_cast<std::size_t>(Specials::count)) {
    throw ConfigError("encoder vocabulary must extend past the special tokens");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
}

void HeadConfig::validate() const {
  if (in_dim == 0 || mid_dim == 0 || out_dim == 0) throw ConfigError("head dimensions must be positive");
}

void BundleConfig::validate() const {
  teacher.validate();
  student.validate();
  head.validate();
  if (head.in_dim != student.hidden_dim || head.in_dim != teacher.hidden_dim) {
    throw ConfigError("head input width must match both encoders' hidden_dim");
  }
}

template <typename S>
Encoder<S>::Encoder(const EncoderConfig& cfg, bool trainable) : cfg_(cfg), trainable_(trainable) {
  cfg_.validate();
  std::mt19937_64 rng(derive_seed(cfg_.seed, {kTagInit}));
  const auto H = static_cast<Eigen::Index>(cfg_.hidden_dim);
  const auto F = static_cast<Eigen::Index>(cfg_.ffn_dim);
  const auto t = trainable;
  token_embedding_ = weight<S>(static_cast<Eigen::Index>(cfg_.vocab_size), H, rng, t);
  position_embedding_ = weight<S>(static_cast<Eigen::Index>(cfg_.max_len), H, rng, t);
  emb_gamma_ = ones<S>(H, t);
  emb_beta_ = zeros<S>(H, t);
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    Layer layer;
    layer.w_qkv = weight<S>(H, 3 * H, rng, t);
    layer.b_qkv = zeros<S>(3 * H, t);
    layer.w_out = weight<S>(H, H, rng, t);
    layer.b_out = zeros<S>(H, t);
    layer.ln1_gamma = ones<S>(H, t);
    layer.ln1_beta = zeros<S>(H, t);
    layer.w_ffn1 = weight<S>(H, F, rng, t);
    layer.b_ffn1 = zeros<S>(F, t);
    layer.w_ffn2 = weight<S>(F, H, rng, t);
    layer.b_ffn2 = zeros<S>(H, t);
    layer.ln2_gamma = ones<S>(H, t);
    layer.ln2_beta = zeros<S>(H, t);
    layers_.push_back(std::move(layer));
  }
  mlm_bias_ = zeros<S>(static_cast<Eigen::Index>(cfg_.vocab_size), t);
}

template <typename S>
ag::Tensor<S> Encoder<S>::encode(std::span<const TokenId> ids, Mode mode, std::mt19937_64* rng) const {
  if (ids.empty()) throw DataError("cannot encode an empty sequence");
  if (ids.size() > cfg_.max_len) {
    throw DataError("sequence of " + std::to_string(ids.size()) + " tokens exceeds encoder max_len " +
                    std::to_string(cfg_.max_len));
  }
  std::vector<std::int64_t> tok(ids.size());
  std::vector<std::int64_t> pos(ids.size());
  bool has_pad = false;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= cfg_.vocab_size) {
      throw DataError("token id " + std::to_string(ids[i]) + " outside encoder vocabulary of " +
                      std::to_string(cfg_.vocab_size));
    }
    tok[i] = ids[i];
    pos[i] = static_cast<std::int64_t>(i);
    has_pad = has_pad || ids[i] == Specials::pad;
  }

  const auto L = static_cast<Eigen::Index>(ids.size());
  const auto H = static_cast<Eigen::Index>(cfg_.hidden_dim);
  const auto d = static_cast<Eigen::Index>(cfg_.head_dim());
  const S eps = static_cast<S>(kLayerNormEps);
  const S inv_sqrt_d = S(1) / std::sqrt(static_cast<S>(d));

  ag::Tensor<S> key_mask;
  if (has_pad) {
    ag::Matrix<S> m = ag::Matrix<S>::Zero(L, L);
    for (Eigen::Index j = 0; j < L; ++j) {
      if (ids[static_cast<std::size_t>(j)] == Specials::pad) m.col(j).setConstant(static_cast<S>(kMaskedScore));
    }
    key_mask = ag::Tensor<S>::constant(std::move(m));
  }

  auto x = ag::add(ag::gather_rows(token_embedding_, std::span<const std::int64_t>(tok)),
                   ag::gather_rows(position_embedding_, std::span<const std::int64_t>(pos)));
  x = ag::layer_norm(x, emb_gamma_, emb_beta_, eps);
  x = maybe_dropout(x, mode, cfg_.dropout, rng);

  std::vector<ag::Tensor<S>> contexts(cfg_.heads);
  for (const auto& layer : layers_) {
    auto qkv = ag::add_row(ag::matmul(x, layer.w_qkv), layer.b_qkv);
    for (std::size_t h = 0; h < cfg_.heads; ++h) {
      const auto off = static_cast<Eigen::Index>(h) * d;
      auto q = ag::slice_cols(qkv, off, d);
      auto k = ag::slice_cols(qkv, H + off, d);
      auto v = ag::slice_cols(qkv, 2 * H + off, d);
      auto scores = ag::scale(ag::matmul_bt(q, k), inv_sqrt_d);
      if (has_pad) scores = ag::add(scores, key_mask);
      contexts[h] = ag::matmul(ag::softmax_rows(scores), v);
    }
    auto attn = ag::add_row(ag::matmul(ag::concat_cols<S>(contexts), layer.w_out), layer.b_out);
    attn = maybe_dropout(attn, mode, cfg_.dropout, rng);
    x = ag::layer_norm(ag::add(x, attn), layer.ln1_gamma, layer.ln1_beta, eps);

    auto ffn = ag::gelu(ag::add_row(ag::matmul(x, layer.w_ffn1), layer.b_ffn1));
    ffn = ag::add_row(ag::matmul(ffn, layer.w_ffn2), layer.b_ffn2);
    ffn = maybe_dropout(ffn, mode, cfg_.dropout, rng);
    x = ag::layer_norm(ag::add(x, ffn), layer.ln2_gamma, layer.ln2_beta, eps);
  }
  return x;
}

template <typename S>
ag::Tensor<S> Encoder<S>::mlm_logits(const ag::Tensor<S>& hidden_rows) const {
  return ag::add_row(ag::matmul_bt(hidden_rows, token_embedding_), mlm_bias_);
}

template <typename S>
Params<S> Encoder<S>::parameters(const std::string& prefix) const {
  Params<S> out;
  out.push_back({prefix + "token_embedding", token_embedding_});
  out.push_back({prefix + "position_embedding", position_embedding_});
  out.push_back({prefix + "embedding_norm.gamma", emb_gamma_});
  out.push_back({prefix + "embedding_norm.beta", emb_beta_});
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    const auto p = prefix + "layer" + std::to_string(l) + ".";
    out.push_back({p + "attention.w_qkv", L.w_qkv});
    out.push_back({p + "attention.b_qkv", L.b_qkv});
    out.push_back({p + "attention.w_out", L.w_out});
    out.push_back({p + "attention.b_out", L.b_out});
    out.push_back({p + "attention_norm.gamma", L.ln1_gamma});
    out.push_back({p + "attention_norm.beta", L.ln1_beta});
    out.push_back({p + "ffn.w1", L.w_ffn1});
    out.push_back({p + "ffn.b1", L.b_ffn1});
    out.push_back({p + "ffn.w2", L.w_ffn2});
    out.push_back({p + "ffn.b2", L.b_ffn2});
    out.push_back({p + "ffn_norm.gamma", L.ln2_gamma});
    out.push_back({p + "ffn_norm.beta", L.ln2_beta});
  }
  out.push_back({prefix + "mlm_bias", mlm_bias_});
  return out;
}

template <typename S>
void Encoder<S>::set_trainable(bool on) {
  trainable_ = on;
  for (auto& p : parameters()) {
    p.tensor.set_requires_grad(on);
    p.tensor.zero_grad();
  }
}

template <typename S>
Head<S>::Head(const HeadConfig& cfg, std::uint64_t seed, bool trainable) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(derive_seed(seed, {kTagInit}));
  w1_ = weight<S>(static_cast<Eigen::Index>(cfg_.in_dim), static_cast<Eigen::Index>(cfg_.mid_dim), rng,
                  trainable);
  b1_ = zeros<S>(static_cast<Eigen::Index>(cfg_.mid_dim), trainable);
  w2_ = weight<S>(static_cast<Eigen::Index>(cfg_.mid_dim), static_cast<Eigen::Index>(cfg_.out_dim), rng,
                  trainable);
  b2_ = zeros<S>(static_cast<Eigen::Index>(cfg_.out_dim), trainable);
}

template <typename S>
ag::Tensor<S> Head<S>::forward(const ag::Tensor<S>& rows) const {
  if (rows.cols() != static_cast<Eigen::Index>(cfg_.in_dim)) {
    throw ConfigError("head expects width " + std::to_string(cfg_.in_dim) + ", got " +
                      std::to_string(rows.cols()));
  }
  auto mid = ag::gelu(ag::add_row(ag::matmul(rows, w1_), b1_));
  return ag::add_row(ag::matmul(mid, w2_), b2_);
}

template <typename S>
Params<S> Head<S>::parameters(const std::string& prefix) const {
  return {{prefix + "w1", w1_}, {prefix + "b1", b1_}, {prefix + "w2", w2_}, {prefix + "b2", b2_}};
}

template <typename S>
void Head<S>::set_trainable(bool on) {
  for (auto& p : parameters()) {
    p.tensor.set_requires_grad(on);
    p.tensor.zero_grad();
  }
}

template <typename S>
ModelBundle<S>::ModelBundle(const BundleConfig& cfg) : ModelBundle(cfg, Encoder<S>(cfg.teacher, false)) {}

template <typename S>
ModelBundle<S>::ModelBundle(const BundleConfig& cfg, Encoder<S> teacher)
    : config(cfg),
      teacher_encoder(std::move(teacher)),
      teacher_head_senta(cfg.head, derive_seed(cfg.head_seed, {1}), cfg.teacher_heads_trainable),
      teacher_head_struca(cfg.head, derive_seed(cfg.head_seed, {2}), cfg.teacher_heads_trainable),
      student_encoder(cfg.student, true),
      student_head_senta(cfg.head, derive_seed(cfg.head_seed, {3})),
      student_pred_senta(HeadConfig{cfg.head.out_dim, cfg.head.mid_dim, cfg.head.out_dim},
                         derive_seed(cfg.head_seed, {4})),
      student_head_struca(cfg.head, derive_seed(cfg.head_seed, {5})),
      student_pred_struca(HeadConfig{cfg.head.out_dim, cfg.head.mid_dim, cfg.head.out_dim},
                          derive_seed(cfg.head_seed, {6})) {
  config.validate();
  if (!(teacher_encoder.config() == cfg.teacher)) {
    throw ConfigError("teacher encoder does not match the bundle's teacher config");
  }
  teacher_encoder.set_trainable(false);
}

template <typename S>
Params<S> trainable_parameters(const ModelBundle<S>& b) {
  Params<S> out = b.student_encoder.parameters("student.encoder.");
  auto append = [&out](Params<S> more) { out.insert(out.end(), more.begin(), more.end()); };
  append(b.student_head_senta.parameters("student.senta_projector."));
  append(b.student_pred_senta.parameters("student.senta_predictor."));
  append(b.student_head_struca.parameters("student.struca_projector."));
  append(b.student_pred_struca.parameters("student.struca_predictor."));
  if (b.config.teacher_heads_trainable) {
    append(b.teacher_head_senta.parameters("teacher.senta_projector."));
    append(b.teacher_head_struca.parameters("teacher.struca_projector."));
  }
  return out;
}

template <typename S>
Params<S> teacher_parameters(const ModelBundle<S>& b) {
  Params<S> out = b.teacher_encoder.parameters("teacher.encoder.");
  if (!b.config.teacher_heads_trainable) {
    auto senta = b.teacher_head_senta.parameters("teacher.senta_projector.");
    auto struca = b.teacher_head_struca.parameters("teacher.struca_projector.");
    out.insert(out.end(), senta.begin(), senta.end());
    out.insert(out.end(), struca.begin(), struca.end());
  }
  return out;
}

template <typename S>
Params<S> all_parameters(const ModelBundle<S>& b) {
  Params<S> out = b.teacher_encoder.parameters("teacher.encoder.");
  auto append = [&out](Params<S> more) { out.insert(out.end(), more.begin(), more.end()); };
  append(b.teacher_head_senta.parameters("teacher.senta_projector."));
  append(b.teacher_head_struca.parameters("teacher.struca_projector."));
  append(b.student_encoder.parameters("student.encoder."));
  append(b.student_head_senta.parameters("student.senta_projector."));
  append(b.student_pred_senta.parameters("student.senta_predictor."));
  append(b.student_head_struca.parameters("student.struca_projector."));
  append(b.student_pred_struca.parameters("student.struca_predictor."));
  return out;
}

template <typename S>
std::uint64_t parameter_hash(const Params<S>& params) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto feed = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001B3ULL;
    }
  };
  for (const auto& p : params) {
    feed(p.name.data(), p.name.size());
    const std::int64_t shape[2] = {p.tensor.rows(), p.tensor.cols()};
    feed(shape, sizeof shape);
    feed(p.tensor.value().data(), sizeof(S) * static_cast<std::size_t>(p.tensor.value().size()));
  }
  return h;
}

template <typename S>
std::size_t parameter_count(const Params<S>& params) {
  return std::accumulate(params.begin(), params.end(), std::size_t{0}, [](std::size_t acc, const auto& p) {
    return acc + static_cast<std::size_t>(p.tensor.value().size());
  });
}

template <typename To, typename From>
void copy_parameters(const Params<From>& from, const Params<To>& to) {
  if (from.size() != to.size()) throw ConfigError("parameter lists differ in length");
  for (std::size_t i = 0; i < from.size(); ++i) {
    auto dst = to[i].tensor;
    if (from[i].tensor.rows() != dst.rows() || from[i].tensor.cols() != dst.cols()) {
      throw ConfigError("shape mismatch copying " + from[i].name);
    }
    dst.mutable_value() = from[i].tensor.value().template cast<To>();
  }
}

template class Encoder<float>;
template class Encoder<double>;
template class Head<float>;
template class Head<double>;
template struct ModelBundle<float>;
template struct ModelBundle<double>;
template Params<float> trainable_parameters(const ModelBundle<float>&);
template Params<double> trainable_parameters(const ModelBundle<double>&);
template Params<float> teacher_parameters(const ModelBundle<float>&);
template Params<double> teacher_parameters(const ModelBundle<double>&);
template Params<float> all_parameters(const ModelBundle<float>&);
template Params<double> all_parameters(const ModelBundle<double>&);
template std::uint64_t parameter_hash(const Params<float>&);
template std::uint64_t parameter_hash(const Params<double>&);
template std::size_t parameter_count(const Params<float>&);
template std::size_t parameter_count(const Params<double>&);
template void copy_parameters<float, float>(const Params<float>&, const Params<float>&);
template void copy_parameters<double, float>(const Params<float>&, const Params<double>&);
template void copy_parameters<float, double>(const Params<double>&, const Params<float>&);
template void copy_parameters<double, double>(const Params<double>&, const Params<double>&);

}  // namespace mmkd
