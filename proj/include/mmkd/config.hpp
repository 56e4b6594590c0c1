#pragma once

#include "mmkd/corpus.hpp"
#include "mmkd/model.hpp"
#include "mmkd/pretrain.hpp"
#include "mmkd/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mmkd {

/// One parallel TSV per target language.
struct CorpusFile {
  LanguageId lang;
  std::filesystem::path path;

  bool operator==(const CorpusFile&) const = default;
};

struct CorpusSection {
  std::vector<CorpusFile> files;
  std::string source_lang = "src";
  LengthFilter limits{};
  std::size_t prune = 0;            // per-language cap on kept pairs, 0 = no cap
  std::size_t heldout = 200;        // per-language held-out pairs
  bool source_copy = false;         // add the source side as a training language paired with itself

  bool operator==(const CorpusSection&) const = default;
};

struct SyntheticSection {
  bool enabled = false;
  std::vector<std::string> languages{"syn1"};
  std::size_t vocab_size = 300;
  std::size_t pair_count = 1000;
  std::size_t min_len = 10;
  std::size_t max_len = 20;
  std::size_t successors = 8;
  double coherence = 0.6;
  Reorder reorder = Reorder::none;

  bool operator==(const SyntheticSection&) const = default;
};

/// Encoder shape plus the vocabulary budget it is built with.
struct ModelSection {
  EncoderConfig encoder;
  std::size_t vocab_max = 1000;
  std::size_t chunk = 0;

  bool operator==(const ModelSection&) const = default;
};

struct EvalSection {
  std::size_t viz_sentences = 20;

  bool operator==(const EvalSection&) const = default;
};

/// Everything a pipeline command needs. Every field has a default.
struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";
  CorpusSection corpus;
  SyntheticSection synthetic;
  ModelSection teacher;
  ModelSection student;
  PretrainConfig pretrain;
  HeadConfig head;
  std::uint64_t head_seed = 11;
  bool teacher_heads_trainable = false;
  TrainConfig train;
  EvalSection eval;

  /// Throws ConfigError on any inconsistency.
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

/// `section.key` -> value. Later entries win.
using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// Parses an INI file (sections and `key = value` lines, `;` or `#`
/// comments), applies overrides, derives every component seed from `seed`,
/// and validates. Unknown sections or keys are errors.
RunConfig load_run_config(const std::optional<std::filesystem::path>& path, const ConfigOverrides& overrides = {});

/// Same, from INI text.
RunConfig parse_run_config(const std::string& ini_text, const ConfigOverrides& overrides = {});

/// INI text that parses back to an equal config.
std::string to_ini(const RunConfig& cfg);

/// Recomputes encoder, head, pretraining and training seeds from cfg.seed.
void derive_component_seeds(RunConfig& cfg);

/// Seeds for the synthetic generator: the shared source side, and the
/// bijection of target language `index`.
std::uint64_t synthetic_source_seed(const RunConfig& cfg);
std::uint64_t synthetic_bijection_seed(const RunConfig& cfg, std::size_t index);

}  // namespace mmkd
