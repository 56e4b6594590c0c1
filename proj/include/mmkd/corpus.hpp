#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mmkd {

/// Short language code, e.g. "syn1". Never empty.
class LanguageId {
 public:
  LanguageId() = default;
  explicit LanguageId(std::string code);

  const std::string& code() const { return code_; }
  auto operator<=>(const LanguageId&) const = default;

 private:
  std::string code_;
};

/// One source/target sentence pair. The source side is always in the
/// teacher's language; `lang` names the target side.
struct ParallelPair {
  std::string source;
  std::string target;
  LanguageId lang;

  bool operator==(const ParallelPair&) const = default;
};

using Corpus = std::vector<ParallelPair>;
using CorpusSet = std::map<LanguageId, Corpus>;

/// Reads `source<TAB>target` lines. Throws DataError naming the offending
/// line on a missing tab, an empty side, or invalid UTF-8.
Corpus load_parallel_tsv(const std::filesystem::path& path, const LanguageId& lang);

/// Writes pairs in the same TSV format (LF line endings).
void save_parallel_tsv(const std::filesystem::path& path, const Corpus& pairs);

/// Number of tokens a text would produce; supplied by the tokenization layer.
using TokenCounter = std::function<std::size_t(std::string_view)>;

struct LengthFilter {
  std::size_t min_tokens = 10;
  std::size_t max_tokens = 128;

  bool operator==(const LengthFilter&) const = default;
};

/// Keeps a pair iff both sides have a token count in [min, max].
Corpus filter_by_length(const Corpus& pairs, const TokenCounter& count, LengthFilter limits = {});

/// Uniform random subset of size `cap` (kept in original order), or the input
/// unchanged when it already fits.
Corpus prune(const Corpus& pairs, std::size_t cap, std::uint64_t seed);

enum class Reorder { none, swap_adjacent, reverse };

Reorder parse_reorder(std::string_view name);
std::string_view to_string(Reorder r);

/// Desk-scale stand-in for a real bitext. Source sentences are drawn from a
/// seeded Markov chain over `vocab_size` words named `w0..w{V-1}`; the target
/// side maps every word through a seeded bijection onto words named
/// `<target_prefix><j>` and optionally reorders them.
struct SyntheticConfig {
  LanguageId lang{"syn1"};
  std::size_t vocab_size = 300;
  std::size_t min_len = 10;
  std::size_t max_len = 20;
  std::size_t pair_count = 1000;
  std::uint64_t source_seed = 1;     // shared by languages of one multi-way corpus
  std::uint64_t bijection_seed = 7;  // per language
  bool identity_bijection = false;
  std::string target_prefix;  // defaults to "<lang>_" when empty
  Reorder reorder = Reorder::none;
  std::size_t successors = 8;  // Markov out-degree of each source word
  double coherence = 0.6;      // probability of following the Markov chain
  LengthFilter limits{};
};

Corpus generate_synthetic_parallel(const SyntheticConfig& cfg);

/// Permutation used for the target side: word `i` maps to target word
/// `bijection[i]`.
std::vector<std::size_t> synthetic_bijection(const SyntheticConfig& cfg);

/// Reference to a pair inside a CorpusSet: language ordinal (position in the
/// map's key order) and index into that language's pair list.
struct PairRef {
  std::size_t language = 0;
  std::size_t index = 0;

  bool operator==(const PairRef&) const = default;
};

struct BatchPlan {
  std::vector<std::vector<PairRef>> batches;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;

  bool operator==(const BatchPlan&) const = default;
};

/// Language-balanced, seeded batching. Every batch takes
/// batch_size / #languages pairs per language; the remainder slots rotate
/// round-robin starting at a seed-derived language. Languages that run out
/// before the largest one reshuffle and wrap around, so the plan length is
/// set by the largest dataset.
BatchPlan plan_balanced_batches(const CorpusSet& datasets, std::size_t batch_size,
                                std::uint64_t seed);

}  // namespace mmkd
