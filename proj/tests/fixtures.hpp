#pragma once

// Tiny two-language setup shared by the trainer, checkpoint and pretraining tests.

#include "mmkd/corpus.hpp"
#include "mmkd/model.hpp"
#include "mmkd/tokenization.hpp"
#include "mmkd/trainer.hpp"

#include <random>
#include <string>
#include <vector>

namespace fixture {

struct Tiny {
  mmkd::CorpusSet corpus;
  std::vector<std::string> source_texts;
  mmkd::Vocabulary teacher_vocab;
  mmkd::Vocabulary student_vocab;
  mmkd::BundleConfig bundle;
  mmkd::TrainConfig train;
};

inline mmkd::EncoderConfig encoder(std::size_t vocab, std::uint64_t seed) {
  mmkd::EncoderConfig c;
  c.layers = 1;
  c.hidden_dim = 16;
  c.heads = 2;
  c.ffn_dim = 32;
  c.max_len = 48;
  c.vocab_size = vocab;
  c.seed = seed;
  c.dropout = 0.1;
  return c;
}

inline Tiny tiny(std::size_t pairs = 24, std::size_t languages = 2) {
  Tiny t;
  std::vector<std::string> all;
  for (std::size_t l = 0; l < languages; ++l) {
    mmkd::SyntheticConfig sc;
    sc.lang = mmkd::LanguageId("syn" + std::to_string(l + 1));
    sc.vocab_size = 30;
    sc.pair_count = pairs;
    sc.bijection_seed = 7 + l;
    const auto corpus = mmkd::generate_synthetic_parallel(sc);
    for (const auto& p : corpus) {
      if (l == 0) t.source_texts.push_back(p.source);
      all.push_back(p.source);
      all.push_back(p.target);
    }
    t.corpus[sc.lang] = corpus;
  }
  t.teacher_vocab = mmkd::build_vocab(t.source_texts, 1000);
  t.student_vocab = mmkd::build_vocab(all, 1000);
  t.bundle.teacher = encoder(t.teacher_vocab.size(), 101);
  t.bundle.student = encoder(t.student_vocab.size(), 202);
  t.bundle.head = {16, 16, 8};
  t.train.batch_size = 4;
  t.train.epochs = 1;
  t.train.peak_lr = 1e-3;
  t.train.seed = 5;
  return t;
}

/// Redraws every value from N(0, sd^2). Freshly initialized heads produce
/// nearly parallel outputs, which makes a poorly conditioned test instance.
template <typename S>
void randomize(const mmkd::Params<S>& params, std::uint64_t seed, double sd) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  for (auto p : params) {
    auto& v = p.tensor.mutable_value();
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = static_cast<S>(g(rng));
  }
}

}  // namespace fixture
