#pragma once

#include "mmkd/masking.hpp"
#include "mmkd/model.hpp"
#include "mmkd/tokenization.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mmkd {

struct PretrainConfig {
  std::size_t steps = 500;
  std::size_t batch_size = 16;
  double peak_lr = 1e-3;
  double warmup_frac = 0.1;
  double weight_decay = 1e-2;
  double grad_clip = 1.0;
  std::uint64_t seed = 1;
  MaskOptions mask;

  void validate() const;
  bool operator==(const PretrainConfig&) const = default;
};

struct PretrainResult {
  Encoder<float> teacher;
  std::vector<double> losses;  // masked-LM loss per step
};

/// Masked-LM pretraining of a source-language encoder, standing in for a
/// well-trained monolingual teacher. Sentences are visited in seeded
/// shuffled order; over-length sentences are skipped. The returned encoder
/// is frozen. With zero steps it is the random initialization.
PretrainResult pretrain_teacher(const EncoderConfig& cfg, std::span<const std::string> texts,
                                const Vocabulary& vocab, const PretrainConfig& pcfg,
                                const std::function<void(std::size_t step, double loss, double lr)>& on_step = {});

/// Mean masked-LM loss of `encoder` over `texts` with a fixed mask seed.
double mlm_loss(const Encoder<float>& encoder, std::span<const std::string> texts, const Vocabulary& vocab,
                const MaskOptions& mask, std::uint64_t seed);

}  // namespace mmkd
