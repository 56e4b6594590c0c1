#pragma once

#include "mmkd/tokenization.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mmkd {

enum class MaskKind : std::uint8_t { mask_token, random_token, keep };

/// Which positions were corrupted and how. Positions are strictly
/// increasing and never fall on a special token.
struct MaskPlan {
  std::vector<std::size_t> positions;
  std::vector<MaskKind> kinds;
  std::vector<TokenId> original_ids;
  std::vector<std::size_t> word_heads;  // whole-word plans only

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  bool operator==(const MaskPlan&) const = default;
};

struct MaskOptions {
  double rate = 0.15;
  double mask_token_share = 0.8;
  double random_token_share = 0.1;  // remainder keeps the original token
  bool ensure_one = true;

  bool operator==(const MaskOptions&) const = default;
};

struct MaskedInput {
  std::vector<TokenId> ids;
  MaskPlan plan;
};

/// Token-level masking over every non-special position of `ids`. Random
/// replacements are drawn uniformly from non-special ids below vocab_size.
MaskedInput apply_token_mask(std::span<const TokenId> ids, std::size_t vocab_size,
                             const MaskOptions& opts, std::uint64_t seed);

/// Translation-LM masking: token level, both spans.
MaskedInput apply_tlm_mask(const ConcatenatedPair& pair, std::size_t vocab_size,
                           const MaskOptions& opts, std::uint64_t seed);

/// Whole-word masking restricted to the source span. Every subtoken of a
/// selected word shares one kind; `word_heads` lists each selected word's
/// first position.
MaskedInput apply_xwcl_mask(const ConcatenatedPair& pair, std::size_t vocab_size,
                            const MaskOptions& opts, std::uint64_t seed);

}  // namespace mmkd
