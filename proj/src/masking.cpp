#include "mmkd/masking.hpp"

#include "mmkd/errors.hpp"

#include <random>

namespace mmkd {

namespace {

class KindSampler {
 public:
  KindSampler(const MaskOptions& opts, std::size_t vocab_size)
      : opts_(opts), vocab_size_(vocab_size) {
    if (vocab_size <= static_cast<std::size_t>(Specials::count)) {
      throw ConfigError("vocabulary has no non-special tokens to sample");
    }
  }

  MaskKind kind(std::mt19937_64& rng) {
    const double u = unit_(rng);
    if (u < opts_.mask_token_share) return MaskKind::mask_token;
    if (u < opts_.mask_token_share + opts_.random_token_share) return MaskKind::random_token;
    return MaskKind::keep;
  }

  TokenId replacement(MaskKind k, TokenId original, std::mt19937_64& rng) {
    switch (k) {
      case MaskKind::mask_token: return Specials::mask;
      case MaskKind::random_token: {
        std::uniform_int_distribution<TokenId> pick(Specials::count,
                                                    static_cast<TokenId>(vocab_size_ - 1));
        return pick(rng);
      }
      case MaskKind::keep: return original;
    }
    return original;
  }

  bool select(std::mt19937_64& rng) { return unit_(rng) < opts_.rate; }

 private:
  MaskOptions opts_;
  std::size_t vocab_size_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

void validate(const MaskOptions& opts) {
  if (opts.rate < 0.0 || opts.rate > 1.0) throw ConfigError("mask rate must be in [0, 1]");
  if (opts.mask_token_share < 0 || opts.random_token_share < 0 ||
      opts.mask_token_share + opts.random_token_share > 1.0) {
    throw ConfigError("mask kind shares must be non-negative and sum to at most 1");
  }
}

// Shared token-level routine; `allowed` marks candidate positions.
MaskedInput mask_tokens(std::span<const TokenId> ids, const std::vector<bool>& allowed,
                        std::size_t vocab_size, const MaskOptions& opts, std::uint64_t seed) {
  validate(opts);
  KindSampler sampler(opts, vocab_size);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (allowed[i]) candidates.push_back(i);
  }
  std::vector<std::size_t> chosen;
  for (auto pos : candidates) {
    if (sampler.select(rng)) chosen.push_back(pos);
  }
  if (chosen.empty() && opts.ensure_one && !candidates.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    chosen.push_back(candidates[pick(rng)]);
  }

  MaskedInput out{std::vector<TokenId>(ids.begin(), ids.end()), {}};
  for (auto pos : chosen) {
    const auto k = sampler.kind(rng);
    out.plan.positions.push_back(pos);
    out.plan.kinds.push_back(k);
    out.plan.original_ids.push_back(ids[pos]);
    out.ids[pos] = sampler.replacement(k, ids[pos], rng);
  }
  return out;
}

}  // namespace

MaskedInput apply_token_mask(std::span<const TokenId> ids, std::size_t vocab_size,
                             const MaskOptions& opts, std::uint64_t seed) {
  std::vector<bool> allowed(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) allowed[i] = !Specials::is_special(ids[i]);
  return mask_tokens(ids, allowed, vocab_size, opts, seed);
}

MaskedInput apply_tlm_mask(const ConcatenatedPair& pair, std::size_t vocab_size,
                           const MaskOptions& opts, std::uint64_t seed) {
  std::vector<bool> allowed(pair.ids.size());
  for (std::size_t i = 0; i < pair.ids.size(); ++i) {
    allowed[i] = (pair.source_span.contains(i) || pair.target_span.contains(i)) &&
                 !Specials::is_special(pair.ids[i]);
  }
  return mask_tokens(pair.ids, allowed, vocab_size, opts, seed);
}

MaskedInput apply_xwcl_mask(const ConcatenatedPair& pair, std::size_t vocab_size,
                            const MaskOptions& opts, std::uint64_t seed) {
  validate(opts);
  KindSampler sampler(opts, vocab_size);
  std::mt19937_64 rng(seed);

  // Contiguous position ranges of each source word.
  std::vector<Span> words;
  for (auto i = pair.source_span.begin; i < pair.source_span.end; ++i) {
    const auto w = pair.word_index[i];
    if (w < 0) continue;
    if (words.empty() || pair.word_index[words.back().begin] != w) {
      words.push_back({i, i + 1});
    } else {
      words.back().end = i + 1;
    }
  }
  if (words.empty()) throw DataError("source span has no words to mask");

  std::vector<std::size_t> chosen;
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (sampler.select(rng)) chosen.push_back(w);
  }
  if (chosen.empty() && opts.ensure_one) {
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    chosen.push_back(pick(rng));
  }

  MaskedInput out{pair.ids, {}};
  for (auto w : chosen) {
    const auto k = sampler.kind(rng);
    out.plan.word_heads.push_back(words[w].begin);
    for (auto pos = words[w].begin; pos < words[w].end; ++pos) {
      out.plan.positions.push_back(pos);
      out.plan.kinds.push_back(k);
      out.plan.original_ids.push_back(pair.ids[pos]);
      out.ids[pos] = sampler.replacement(k, pair.ids[pos], rng);
    }
  }
  return out;
}

}  // namespace mmkd
