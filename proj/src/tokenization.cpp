#include "mmkd/tokenization.hpp"

#include "mmkd/errors.hpp"

#include <algorithm>
#include <fstream>
#include <map>

namespace mmkd {

namespace {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> tokens{"[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]"};
  return tokens;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 1;
}

}  // namespace

Vocabulary::Vocabulary() : Vocabulary(special_tokens(), 0) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::size_t chunk)
    : tokens_(std::move(tokens)), chunk_(chunk) {
  const auto& specials = special_tokens();
  if (tokens_.size() < specials.size() ||
      !std::equal(specials.begin(), specials.end(), tokens_.begin())) {
    throw DataError("vocabulary must start with [PAD] [CLS] [SEP] [MASK] [UNK]");
  }
  ids_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw DataError("empty token at id " + std::to_string(i));
    if (!ids_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw DataError("duplicate token '" + tokens_[i] + "'");
    }
  }
}

TokenId Vocabulary::id_of(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? Specials::unk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return ids_.count(std::string(token)) != 0; }

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path, std::size_t chunk) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return Vocabulary(std::move(tokens), chunk);
}

std::vector<std::pair<std::string, std::int32_t>> split_pieces(std::string_view text,
                                                               std::size_t chunk) {
  std::vector<std::pair<std::string, std::int32_t>> out;
  std::int32_t word = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i == text.size()) break;
    auto j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    const auto w = text.substr(i, j - i);
    if (chunk == 0) {
      out.emplace_back(std::string(w), word);
    } else {
      std::size_t k = 0;
      while (k < w.size()) {
        std::size_t end = k;
        for (std::size_t cp = 0; cp < chunk && end < w.size(); ++cp) {
          end += utf8_length(static_cast<unsigned char>(w[end]));
        }
        end = std::min(end, w.size());
        out.emplace_back(std::string(w.substr(k, end - k)), word);
        k = end;
      }
    }
    ++word;
    i = j;
  }
  return out;
}

std::size_t count_tokens(std::string_view text, std::size_t chunk) {
  return split_pieces(text, chunk).size();
}

Vocabulary build_vocab(std::span<const std::string> texts, std::size_t max_size, std::size_t chunk) {
  const auto& specials = special_tokens();
  if (max_size <= specials.size()) {
    throw ConfigError("vocabulary size must exceed the " + std::to_string(specials.size()) +
                      " special tokens");
  }
  std::map<std::string, std::size_t> freq;
  for (const auto& t : texts) {
    for (auto& [piece, word] : split_pieces(t, chunk)) ++freq[piece];
  }
  if (freq.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  for (const auto& s : specials) freq.erase(s);

  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  // std::map iteration is already lexicographic, so a stable sort on count
  // keeps the tie-break.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens(specials);
  for (const auto& [piece, count] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(piece);
  }
  return Vocabulary(std::move(tokens), chunk);
}

TokenSequence tokenize(const Vocabulary& vocab, std::string_view text) {
  auto pieces = split_pieces(text, vocab.chunk());
  if (pieces.empty()) throw DataError("cannot tokenize empty text");
  TokenSequence seq;
  seq.ids.reserve(pieces.size());
  seq.word_index.reserve(pieces.size());
  for (auto& [piece, word] : pieces) {
    seq.ids.push_back(vocab.id_of(piece));
    seq.word_index.push_back(word);
  }
  return seq;
}

std::string detokenize(const Vocabulary& vocab, const TokenSequence& seq) {
  std::string out;
  std::int32_t last_word = -1;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (seq.word_index[i] < 0) continue;
    if (seq.word_index[i] != last_word && !out.empty()) out += ' ';
    out += vocab.token(seq.ids[i]);
    last_word = seq.word_index[i];
  }
  return out;
}

ConcatenatedPair encode_pair(const TokenSequence& source, const TokenSequence& target,
                             std::size_t max_len) {
  if (source.ids.empty() || target.ids.empty()) {
    throw DataError("both sides of a pair need at least one token");
  }
  const auto total = source.size() + target.size() + 3;
  if (total > max_len) {
    throw DataError("pair of " + std::to_string(total) + " tokens exceeds maximum length " +
                    std::to_string(max_len));
  }
  ConcatenatedPair out;
  out.ids.reserve(total);
  out.word_index.reserve(total);
  out.ids.push_back(Specials::cls);
  out.word_index.push_back(-1);
  out.source_span = {1, 1 + source.size()};
  out.ids.insert(out.ids.end(), source.ids.begin(), source.ids.end());
  out.word_index.insert(out.word_index.end(), source.word_index.begin(), source.word_index.end());
  out.ids.push_back(Specials::sep);
  out.word_index.push_back(-1);
  out.target_span = {out.ids.size(), out.ids.size() + target.size()};
  out.ids.insert(out.ids.end(), target.ids.begin(), target.ids.end());
  out.word_index.insert(out.word_index.end(), target.word_index.begin(), target.word_index.end());
  out.ids.push_back(Specials::sep);
  out.word_index.push_back(-1);
  return out;
}

TokenSequence encode_single(const TokenSequence& seq, std::size_t max_len) {
  if (seq.ids.empty()) throw DataError("cannot encode an empty sequence");
  if (seq.size() + 2 > max_len) {
    throw DataError("sequence of " + std::to_string(seq.size() + 2) +
                    " tokens exceeds maximum length " + std::to_string(max_len));
  }
  TokenSequence out;
  out.ids.reserve(seq.size() + 2);
  out.word_index.reserve(seq.size() + 2);
  out.ids.push_back(Specials::cls);
  out.word_index.push_back(-1);
  out.ids.insert(out.ids.end(), seq.ids.begin(), seq.ids.end());
  out.word_index.insert(out.word_index.end(), seq.word_index.begin(), seq.word_index.end());
  out.ids.push_back(Specials::sep);
  out.word_index.push_back(-1);
  return out;
}

namespace {
std::vector<std::size_t> first_positions(const TokenSequence& seq) {
  std::vector<std::size_t> firsts;
  std::int32_t last = -1;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto w = seq.word_index[i];
    if (w < 0) continue;
    if (w != last) {
      firsts.push_back(i + 1);  // +1 for the leading [CLS]
      last = w;
    }
  }
  return firsts;
}
}  // namespace

WordAlignment align_words(const TokenSequence& student_seq, const TokenSequence& teacher_seq) {
  const auto s = first_positions(student_seq);
  const auto t = first_positions(teacher_seq);
  if (s.size() != t.size()) {
    throw DataError("inconsistent tokenizations: student has " + std::to_string(s.size()) +
                    " words, teacher has " + std::to_string(t.size()));
  }
  WordAlignment out;
  out.pairs.reserve(s.size());
  for (std::size_t w = 0; w < s.size(); ++w) {
    out.pairs.push_back({static_cast<std::int32_t>(w), s[w], t[w]});
  }
  return out;
}

}  // namespace mmkd
