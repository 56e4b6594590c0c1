#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mmkd {

using TokenId = std::int32_t;

/// Fixed ids of the special tokens; every vocabulary starts with them.
struct Specials {
  static constexpr TokenId pad = 0;
  static constexpr TokenId cls = 1;
  static constexpr TokenId sep = 2;
  static constexpr TokenId mask = 3;
  static constexpr TokenId unk = 4;
  static constexpr TokenId count = 5;

  static constexpr bool is_special(TokenId id) { return id >= 0 && id < count; }
};

/// Word-level vocabulary with an optional character-chunk subword mode.
/// `chunk == 0` keeps whole words; otherwise each word is split into pieces
/// of `chunk` UTF-8 code points.
class Vocabulary {
 public:
  Vocabulary();
  Vocabulary(std::vector<std::string> tokens, std::size_t chunk);

  TokenId id_of(std::string_view token) const;  // [UNK] when absent
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }
  std::size_t chunk() const { return chunk_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// One token per line, line number = id. The chunk setting is not part of
  /// the file and is supplied on load.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path, std::size_t chunk = 0);

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && chunk_ == other.chunk_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
  std::size_t chunk_ = 0;
};

/// Splits text on whitespace, then (when chunk > 0) each word into
/// fixed-size code-point chunks. Returns (piece, word ordinal) pairs.
std::vector<std::pair<std::string, std::int32_t>> split_pieces(std::string_view text,
                                                               std::size_t chunk);

/// Number of tokens `text` produces under the given chunk setting.
std::size_t count_tokens(std::string_view text, std::size_t chunk);

/// Most frequent pieces up to `max_size` entries (specials included); ties
/// broken lexicographically.
Vocabulary build_vocab(std::span<const std::string> texts, std::size_t max_size,
                       std::size_t chunk = 0);

struct TokenSequence {
  std::vector<TokenId> ids;
  std::vector<std::int32_t> word_index;  // -1 at special tokens

  std::size_t size() const { return ids.size(); }
  bool operator==(const TokenSequence&) const = default;
};

/// Throws DataError on empty (or whitespace-only) text.
TokenSequence tokenize(const Vocabulary& vocab, std::string_view text);

/// Joins pieces of the same word and words with single spaces.
std::string detokenize(const Vocabulary& vocab, const TokenSequence& seq);

inline constexpr std::size_t kMaxSequenceLength = 128;

/// Half-open index range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  bool operator==(const Span&) const = default;
};

/// `[CLS] src [SEP] tgt [SEP]` plus the location of each side.
struct ConcatenatedPair {
  std::vector<TokenId> ids;
  std::vector<std::int32_t> word_index;  // word ordinal within its side, -1 at specials
  Span source_span;
  Span target_span;
};

ConcatenatedPair encode_pair(const TokenSequence& source, const TokenSequence& target,
                             std::size_t max_len = kMaxSequenceLength);

/// `[CLS] seq [SEP]`, the single-sentence input used for the teacher and for
/// sentence embeddings.
TokenSequence encode_single(const TokenSequence& seq, std::size_t max_len = kMaxSequenceLength);

struct AlignedWord {
  std::int32_t word = 0;
  std::size_t student_position = 0;
  std::size_t teacher_position = 0;

  bool operator==(const AlignedWord&) const = default;
};

/// First-token positions of every word, in encoded coordinates: position 0
/// is the leading [CLS], so the first source token sits at position 1 on
/// both sides.
struct WordAlignment {
  std::vector<AlignedWord> pairs;

  std::size_t word_count() const { return pairs.size(); }
};

/// Both sequences must tokenize the same source text; throws DataError when
/// their word counts differ.
WordAlignment align_words(const TokenSequence& student_seq, const TokenSequence& teacher_seq);

}  // namespace mmkd
