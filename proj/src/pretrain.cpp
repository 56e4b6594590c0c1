#include "mmkd/pretrain.hpp"

#include "mmkd/errors.hpp"
#include "mmkd/optim.hpp"
#include "mmkd/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace mmkd {

void PretrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("pretraining batch_size must be positive");
  if (!(warmup_frac > 0.0 && warmup_frac < 1.0)) throw ConfigError("warmup_frac must be in (0, 1)");
  if (!(peak_lr >= 0.0) || !(weight_decay >= 0.0)) throw ConfigError("learning rate and weight decay must be >= 0");
}

namespace {

std::vector<std::vector<TokenId>> encode_texts(std::span<const std::string> texts, const Vocabulary& vocab,
                                               std::size_t max_len) {
  std::vector<std::vector<TokenId>> out;
  for (const auto& t : texts) {
    auto seq = tokenize(vocab, t);
    if (seq.size() + 2 > max_len) continue;
    out.push_back(encode_single(seq, max_len).ids);
  }
  return out;
}

// Masked-LM loss over a batch: mean over every masked position.
ag::Tensor<float> batch_mlm_loss(const Encoder<float>& enc, const std::vector<const std::vector<TokenId>*>& batch,
                                 const MaskOptions& mask, std::uint64_t seed, Mode mode) {
  std::vector<ag::Tensor<float>> rows;
  std::vector<std::int64_t> targets;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto masked = apply_token_mask(*batch[i], enc.config().vocab_size, mask, derive_seed(seed, {kTagMlm, i}));
    if (masked.plan.empty()) continue;
    std::mt19937_64 rng(derive_seed(seed, {kTagDropout, i}));
    auto hidden = enc.encode(masked.ids, mode, &rng);
    std::vector<std::int64_t> pos(masked.plan.positions.begin(), masked.plan.positions.end());
    rows.push_back(ag::gather_rows(hidden, std::span<const std::int64_t>(pos)));
    targets.insert(targets.end(), masked.plan.original_ids.begin(), masked.plan.original_ids.end());
  }
  if (rows.empty()) throw DataError("masked-LM batch has no maskable tokens");
  auto logits = enc.mlm_logits(ag::concat_rows<float>(rows));
  return ag::cross_entropy(logits, std::span<const std::int64_t>(targets));
}

}  // namespace

PretrainResult pretrain_teacher(const EncoderConfig& cfg, std::span<const std::string> texts,
                                const Vocabulary& vocab, const PretrainConfig& pcfg,
                                const std::function<void(std::size_t, double, double)>& on_step) {
  pcfg.validate();
  if (vocab.size() != cfg.vocab_size) throw ConfigError("teacher vocabulary size does not match its config");
  if (texts.empty()) throw DataError("teacher pretraining corpus is empty");
  const auto data = encode_texts(texts, vocab, cfg.max_len);
  if (data.empty()) throw DataError("no teacher pretraining sentence fits the maximum length");

  PretrainResult result{Encoder<float>(cfg, true), {}};
  auto params = result.teacher.parameters();
  AdamState<float> adam;
  const AdamOptions opts{0.9, 0.999, 1e-8, pcfg.weight_decay};

  std::vector<std::size_t> order(data.size());
  std::size_t cursor = order.size();
  std::size_t cycle = 0;
  for (std::size_t step = 0; step < pcfg.steps; ++step) {
    std::vector<const std::vector<TokenId>*> batch;
    while (batch.size() < std::min(pcfg.batch_size, data.size())) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(derive_seed(pcfg.seed, {kTagShuffle, cycle++}));
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(&data[order[cursor++]]);
    }
    zero_grads(params);
    auto loss = batch_mlm_loss(result.teacher, batch, pcfg.mask, derive_seed(pcfg.seed, {step}), Mode::train);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw NumericError("non-finite masked-LM loss at pretraining step " + std::to_string(step + 1));
    }
    const double lr = lr_at_step(step + 1, pcfg.steps, pcfg.peak_lr, pcfg.warmup_frac);
    ag::backward(loss);
    clip_grad_norm(params, pcfg.grad_clip);
    adamw_step(params, adam, lr, opts);
    result.losses.push_back(value);
    if (on_step) on_step(step + 1, value, lr);
  }
  result.teacher.set_trainable(false);
  return result;
}

double mlm_loss(const Encoder<float>& encoder, std::span<const std::string> texts, const Vocabulary& vocab,
                const MaskOptions& mask, std::uint64_t seed) {
  const auto data = encode_texts(texts, vocab, encoder.config().max_len);
  if (data.empty()) throw DataError("no sentence to evaluate");
  std::vector<const std::vector<TokenId>*> batch;
  for (const auto& d : data) batch.push_back(&d);
  return batch_mlm_loss(encoder, batch, mask, seed, Mode::eval).item();
}

}  // namespace mmkd
