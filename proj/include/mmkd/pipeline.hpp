#pragma once

#include "mmkd/config.hpp"
#include "mmkd/eval.hpp"
#include "mmkd/objectives.hpp"
#include "mmkd/trainer.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mmkd {

/// File layout of one run directory.
struct RunPaths {
  explicit RunPaths(std::filesystem::path out);

  std::filesystem::path out;
  std::filesystem::path lock;
  std::filesystem::path config;
  std::filesystem::path data_dir;
  std::filesystem::path manifest;
  std::filesystem::path teacher_vocab;
  std::filesystem::path student_vocab;
  std::filesystem::path teacher_checkpoint;
  std::filesystem::path pretrain_log;
  std::filesystem::path student_checkpoint;
  std::filesystem::path train_log;
  std::filesystem::path eval_report;
  std::filesystem::path eval_cross_report;
  std::filesystem::path viz;

  std::filesystem::path train_file(const LanguageId& lang) const;
  std::filesystem::path heldout_file(const LanguageId& lang) const;
  std::filesystem::path epoch_checkpoint(std::size_t epoch) const;
};

/// Holds `<out>/.lock` for its lifetime. A second holder gets ConfigError.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& out);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

struct ManifestRow {
  LanguageId lang;
  std::size_t raw = 0;
  std::size_t filtered = 0;  // after the length filter
  std::size_t pruned = 0;    // after the per-language cap
  std::size_t train = 0;
  std::size_t heldout = 0;

  bool operator==(const ManifestRow&) const = default;
};

using Manifest = std::vector<ManifestRow>;

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);

/// Training and held-out pairs of a prepared run, by target language.
struct PreparedData {
  CorpusSet train;
  CorpusSet heldout;
  /// Distinct training source sentences in first-seen order.
  std::vector<std::string> sources;
};

PreparedData load_prepared(const RunConfig& cfg);

/// The corpus the student is trained on: the prepared training pairs, plus
/// source-to-source copies under the source language when enabled.
CorpusSet training_corpus(const RunConfig& cfg, const PreparedData& data);

/// Loads or generates the raw pairs, length-filters, prunes, splits off the
/// held-out set, builds both vocabularies and writes everything under the
/// run directory. Throws DataError (after writing the manifest) when a
/// language keeps too few pairs.
Manifest cmd_prepare(const RunConfig& cfg);

struct PretrainSummary {
  std::size_t steps = 0;
  double initial_loss = 0;  // fixed-mask MLM loss before and after
  double final_loss = 0;
};

PretrainSummary cmd_pretrain_teacher(const RunConfig& cfg,
                                     const std::function<void(std::size_t, double, double)>& on_step = {});

struct TrainOptions {
  std::vector<Objective> disable;
  bool resume = false;
  std::function<void(const StepRecord&)> on_step;
};

struct TrainSummary {
  std::size_t steps = 0;
  std::size_t skipped = 0;  // over-length pairs the trainer left out
  std::vector<StepRecord> history;
};

/// Distils the student. Refuses (ConfigError) when every objective ends up
/// disabled. Writes the step log, a checkpoint per epoch and the final
/// student checkpoint. With `resume` it continues from the latest student
/// checkpoint, whose training settings must match.
TrainSummary cmd_train(const RunConfig& cfg, const TrainOptions& options = {});

enum class EvalModel { student, teacher };

struct EvalOptions {
  EvalModel model = EvalModel::student;
  std::optional<std::filesystem::path> checkpoint;  // default: the run's own
  bool baseline = false;  // add rows for the untrained student
};

struct EvalRow {
  std::string model;  // "student", "baseline" or "teacher"
  LanguageId lang;
  LanguageId other;  // the paired language
  std::size_t n = 0;
  double p_at_1_forward = 0;   // lang -> other
  double p_at_1_backward = 0;  // other -> lang
  ClusterStats stats;
};

struct EvalReport {
  std::vector<EvalRow> languages;  // source vs each target language
  std::vector<EvalRow> cross;      // each pair of target languages on shared sources
};

/// Retrieval and cluster statistics on the held-out pairs. The teacher only
/// reads the source language, so its rows compare the source side with
/// itself.
EvalReport cmd_eval(const RunConfig& cfg, const EvalOptions& options = {});

void write_eval_report(const std::filesystem::path& path, const std::vector<EvalRow>& rows);

/// Embeds `n` held-out sentences that every language shares, in each target
/// language and in the source language, and writes their 2-D projection.
/// Yields n * (targets + 1) rows.
EmbeddingSet cmd_viz(const RunConfig& cfg, std::size_t n,
                     const std::optional<std::filesystem::path>& checkpoint = {});

/// Student encoder of the run as an untrained, freshly seeded model.
Encoder<float> baseline_student(const RunConfig& cfg, const Vocabulary& student_vocab);

BundleConfig bundle_config(const RunConfig& cfg, const Vocabulary& student_vocab, const Vocabulary& teacher_vocab);

}  // namespace mmkd
