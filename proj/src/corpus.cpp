#include "mmkd/corpus.hpp"

#include "mmkd/errors.hpp"
#include "mmkd/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace mmkd {

namespace {

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong encodings and surrogates.
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += extra + 1;
  }
  return true;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<double> zipf_weights(std::size_t n, double exponent) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::pow(static_cast<double>(i + 1), exponent);
  return w;
}

constexpr double kZipfExponent = 0.8;

}  // namespace

LanguageId::LanguageId(std::string code) : code_(std::move(code)) {
  if (code_.empty()) throw ConfigError("language id must be non-empty");
}

Corpus load_parallel_tsv(const std::filesystem::path& path, const LanguageId& lang) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read corpus file " + path.string());
  Corpus out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto where = path.string() + ":" + std::to_string(line_no);
    if (!valid_utf8(line)) throw DataError(where + ": invalid UTF-8");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(where + ": malformed line (no tab)");
    if (line.find('\t', tab + 1) != std::string::npos) {
      throw DataError(where + ": malformed line (more than one tab)");
    }
    const auto src = trim(std::string_view(line).substr(0, tab));
    const auto tgt = trim(std::string_view(line).substr(tab + 1));
    if (src.empty() || tgt.empty()) throw DataError(where + ": malformed line (empty side)");
    out.push_back({std::string(src), std::string(tgt), lang});
  }
  if (in.bad()) throw DataError("read failure on " + path.string());
  return out;
}

void save_parallel_tsv(const std::filesystem::path& path, const Corpus& pairs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write corpus file " + path.string());
  for (const auto& p : pairs) out << p.source << '\t' << p.target << '\n';
  if (!out) throw DataError("write failure on " + path.string());
}

Corpus filter_by_length(const Corpus& pairs, const TokenCounter& count, LengthFilter limits) {
  Corpus kept;
  kept.reserve(pairs.size());
  auto ok = [&](std::string_view text) {
    const auto n = count(text);
    return n >= limits.min_tokens && n <= limits.max_tokens;
  };
  for (const auto& p : pairs) {
    if (ok(p.source) && ok(p.target)) kept.push_back(p);
  }
  return kept;
}

Corpus prune(const Corpus& pairs, std::size_t cap, std::uint64_t seed) {
  if (pairs.size() <= cap) return pairs;
  std::vector<std::size_t> idx(pairs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, {kTagPrune}));
  // Partial Fisher-Yates: the first `cap` slots form a uniform subset.
  for (std::size_t i = 0; i < cap; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  Corpus out;
  out.reserve(cap);
  for (auto i : idx) out.push_back(pairs[i]);
  return out;
}

Reorder parse_reorder(std::string_view name) {
  if (name == "none") return Reorder::none;
  if (name == "swap_adjacent") return Reorder::swap_adjacent;
  if (name == "reverse") return Reorder::reverse;
  throw ConfigError("unknown reorder rule '" + std::string(name) + "'");
}

std::string_view to_string(Reorder r) {
  switch (r) {
    case Reorder::none: return "none";
    case Reorder::swap_adjacent: return "swap_adjacent";
    case Reorder::reverse: return "reverse";
  }
  return "none";
}

std::vector<std::size_t> synthetic_bijection(const SyntheticConfig& cfg) {
  std::vector<std::size_t> perm(cfg.vocab_size);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (!cfg.identity_bijection) {
    std::mt19937_64 rng(derive_seed(cfg.bijection_seed, {kTagShuffle}));
    std::shuffle(perm.begin(), perm.end(), rng);
  }
  return perm;
}

Corpus generate_synthetic_parallel(const SyntheticConfig& cfg) {
  if (cfg.vocab_size < 2) throw ConfigError("synthetic vocabulary needs at least 2 words");
  if (cfg.min_len > cfg.max_len || cfg.min_len < cfg.limits.min_tokens ||
      cfg.max_len > cfg.limits.max_tokens) {
    throw ConfigError("synthetic length range [" + std::to_string(cfg.min_len) + ", " +
                      std::to_string(cfg.max_len) + "] outside the length filter [" +
                      std::to_string(cfg.limits.min_tokens) + ", " +
                      std::to_string(cfg.limits.max_tokens) + "]");
  }
  if (cfg.coherence < 0.0 || cfg.coherence > 1.0) throw ConfigError("coherence must be in [0, 1]");

  const auto V = cfg.vocab_size;
  const auto weights = zipf_weights(V, kZipfExponent);
  std::discrete_distribution<std::size_t> unigram(weights.begin(), weights.end());

  // Successor table depends only on the source seed, so every language built
  // from the same seed shares its source sentences.
  std::mt19937_64 table_rng(derive_seed(cfg.source_seed, {kTagSelect, 0}));
  const auto degree = std::max<std::size_t>(1, std::min(cfg.successors, V));
  std::vector<std::vector<std::size_t>> successors(V);
  for (auto& next : successors) {
    while (next.size() < degree) {
      const auto w = unigram(table_rng);
      if (std::find(next.begin(), next.end(), w) == next.end()) next.push_back(w);
    }
  }

  const auto perm = synthetic_bijection(cfg);
  const std::string prefix =
      !cfg.target_prefix.empty() ? cfg.target_prefix
                                 : (cfg.identity_bijection ? std::string("w") : cfg.lang.code() + "_");

  std::mt19937_64 rng(derive_seed(cfg.source_seed, {kTagSelect, 1}));
  std::uniform_int_distribution<std::size_t> length(cfg.min_len, cfg.max_len);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Corpus out;
  out.reserve(cfg.pair_count);
  std::vector<std::size_t> words;
  for (std::size_t n = 0; n < cfg.pair_count; ++n) {
    const auto len = length(rng);
    words.clear();
    words.push_back(unigram(rng));
    while (words.size() < len) {
      const auto& next = successors[words.back()];
      if (unit(rng) < cfg.coherence) {
        std::uniform_int_distribution<std::size_t> pick(0, next.size() - 1);
        words.push_back(next[pick(rng)]);
      } else {
        words.push_back(unigram(rng));
      }
    }

    std::vector<std::size_t> target(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) target[i] = perm[words[i]];
    switch (cfg.reorder) {
      case Reorder::none: break;
      case Reorder::swap_adjacent:
        for (std::size_t i = 0; i + 1 < target.size(); i += 2) std::swap(target[i], target[i + 1]);
        break;
      case Reorder::reverse: std::reverse(target.begin(), target.end()); break;
    }

    std::string src;
    std::string tgt;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) {
        src += ' ';
        tgt += ' ';
      }
      src += 'w' + std::to_string(words[i]);
      tgt += prefix + std::to_string(target[i]);
    }
    out.push_back({std::move(src), std::move(tgt), cfg.lang});
  }
  return out;
}

BatchPlan plan_balanced_batches(const CorpusSet& datasets, std::size_t batch_size,
                                std::uint64_t seed) {
  const auto k = datasets.size();
  if (k == 0) throw ConfigError("no datasets to plan batches for");
  if (batch_size < k) {
    throw ConfigError("batch size " + std::to_string(batch_size) +
                      " is smaller than the number of languages " + std::to_string(k));
  }
  std::vector<std::size_t> sizes;
  for (const auto& [lang, pairs] : datasets) {
    if (pairs.empty()) throw DataError("empty dataset for language " + lang.code());
    sizes.push_back(pairs.size());
  }

  struct Stream {
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    std::size_t cycle = 0;
    bool first_pass_done = false;
  };
  std::vector<Stream> streams(k);
  auto reshuffle = [&](std::size_t lang) {
    auto& s = streams[lang];
    s.order.resize(sizes[lang]);
    std::iota(s.order.begin(), s.order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(seed, {kTagShuffle, lang, s.cycle}));
    std::shuffle(s.order.begin(), s.order.end(), rng);
    s.cursor = 0;
  };
  for (std::size_t l = 0; l < k; ++l) reshuffle(l);

  const auto quota = batch_size / k;
  const auto remainder = batch_size % k;
  const auto rotation = static_cast<std::size_t>(derive_seed(seed, {kTagRotation}) % k);

  BatchPlan plan;
  plan.batch_size = batch_size;
  plan.seed = seed;
  auto all_done = [&] {
    return std::all_of(streams.begin(), streams.end(), [](const Stream& s) { return s.first_pass_done; });
  };
  for (std::size_t b = 0; !all_done(); ++b) {
    std::vector<PairRef> batch;
    batch.reserve(batch_size);
    for (std::size_t l = 0; l < k; ++l) {
      // Slot j of the remainder goes to language (rotation + b + j) mod k.
      const bool extra = remainder && ((l + k - (rotation + b) % k) % k) < remainder;
      const auto want = quota + (extra ? 1 : 0);
      auto& s = streams[l];
      for (std::size_t taken = 0; taken < want; ++taken) {
        if (s.cursor == s.order.size()) {
          s.first_pass_done = true;
          if (all_done()) break;
          ++s.cycle;
          reshuffle(l);
        }
        batch.push_back({l, s.order[s.cursor++]});
        if (s.cursor == s.order.size() && !s.first_pass_done) s.first_pass_done = true;
      }
    }
    if (!batch.empty()) plan.batches.push_back(std::move(batch));
  }
  return plan;
}

}  // namespace mmkd
