#pragma once

#include "mmkd/corpus.hpp"
#include "mmkd/masking.hpp"
#include "mmkd/model.hpp"
#include "mmkd/objectives.hpp"
#include "mmkd/optim.hpp"
#include "mmkd/tokenization.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace mmkd {

struct TrainConfig {
  double peak_lr = 5e-4;  // small models trained from scratch; large pretrained ones want ~2e-5
  double weight_decay = 1e-2;
  double warmup_frac = 0.1;
  std::size_t batch_size = 16;
  std::size_t epochs = 5;
  std::size_t max_seq_len = kMaxSequenceLength;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;  // global norm; 0 disables
  ObjectiveConfig objectives;
  MaskOptions mask;

  AdamOptions adam() const { return {beta1, beta2, adam_eps, weight_decay}; }
  void validate(std::size_t languages) const;
  bool operator==(const TrainConfig&) const = default;
};

/// Everything the three training views need for one pair, precomputed once.
struct PreparedPair {
  std::size_t id = 0;        // position in PreparedCorpus::pairs
  ConcatenatedPair concat;   // student vocabulary, [CLS] s [SEP] t [SEP]
  TokenSequence target;      // student vocabulary, [CLS] t [SEP]
  TokenSequence teacher_source;  // teacher vocabulary, [CLS] s [SEP]
  WordAlignment alignment;
};

struct PreparedCorpus {
  std::vector<PreparedPair> pairs;
  std::vector<std::vector<std::size_t>> by_language;  // CorpusSet key order -> pair ids
  std::vector<LanguageId> languages;
  std::size_t skipped = 0;  // over-length pairs left out
};

PreparedCorpus prepare_corpus(const CorpusSet& corpus, const Vocabulary& student_vocab,
                              const Vocabulary& teacher_vocab, std::size_t max_seq_len);

/// Teacher last-layer states per prepared pair id.
template <typename S>
using TeacherCache = std::vector<ag::Matrix<S>>;

template <typename S>
TeacherCache<S> build_teacher_cache(const Encoder<S>& teacher, const PreparedCorpus& corpus);

template <typename S>
struct BatchLoss {
  ag::Tensor<S> total;
  std::array<ag::Tensor<S>, 4> terms;  // undefined for disabled objectives
  LossBreakdown breakdown;
};

/// Builds the three views for every pair (TLM masks on both sides, XWCL
/// whole-word masks on the source against the clean teacher pass, clean
/// target for SentA/StrucA) and evaluates the enabled objectives. All masks
/// and dropout draws derive from `seed`.
template <typename S>
BatchLoss<S> compute_batch_loss(const ModelBundle<S>& bundle, std::span<const PreparedPair* const> batch,
                                const ObjectiveConfig& objectives, const MaskOptions& mask,
                                std::uint64_t seed, Mode mode, const TeacherCache<S>* cache = nullptr);

struct StepRecord {
  std::size_t step = 0;
  LossBreakdown loss;
  double lr = 0;
};

struct TrainingState {
  std::size_t step = 0;  // completed optimizer steps
  std::size_t total_steps = 0;
  AdamState<float> adam;
  std::vector<StepRecord> history;
  double best_epoch_total = std::numeric_limits<double>::infinity();
};

/// Drives joint training of the student. Randomness for each step derives
/// from (seed, step), so a restored TrainingState resumes exactly.
class Trainer {
 public:
  Trainer(ModelBundle<float>& bundle, const Vocabulary& student_vocab, const Vocabulary& teacher_vocab,
          const CorpusSet& corpus, TrainConfig cfg, TrainingState state = {});

  std::size_t steps_per_epoch() const { return steps_per_epoch_; }
  std::size_t total_steps() const { return state_.total_steps; }
  std::size_t skipped() const { return data_.skipped; }
  const TrainConfig& config() const { return cfg_; }
  const TrainingState& state() const { return state_; }
  bool finished() const { return state_.step >= state_.total_steps; }

  /// One optimizer step; throws NumericError on a non-finite loss.
  StepRecord step();

  struct Hooks {
    std::function<void(const StepRecord&)> on_step;
    std::function<void(std::size_t epoch, double mean_total, bool best)> on_epoch;
  };
  /// Runs the remaining steps.
  void run(const Hooks& hooks = {});

 private:
  ModelBundle<float>& bundle_;
  TrainConfig cfg_;
  PreparedCorpus data_;
  TeacherCache<float> cache_;
  TrainingState state_;
  Params<float> params_;
  std::size_t steps_per_epoch_ = 0;
  std::size_t plan_epoch_ = std::numeric_limits<std::size_t>::max();
  BatchPlan plan_;
  double epoch_total_ = 0;

  const BatchPlan& plan_for(std::size_t epoch);
};

/// Writes one `step tlm xwcl senta struca total lr` line.
void write_log_line(std::ostream& out, const StepRecord& rec);
inline constexpr const char* kLogHeader = "step\ttlm\txwcl\tsenta\tstruca\ttotal\tlr";

struct GradCheckReport {
  double max_rel_error = 0;
  std::size_t probes = 0;
  double teacher_grad_max_abs = 0;  // analytic gradient on frozen parameters
  double worst_analytic = 0;
  double worst_numeric = 0;
  std::string worst_parameter;
};

/// Compares analytic gradients with fourth-order central finite differences
/// on `probe_count` student parameter entries drawn from those with
/// |gradient| >= min_grad. Relative error is |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport grad_check(const std::function<ag::Tensor<double>()>& loss, const ModelBundle<double>& bundle,
                           std::size_t probe_count, double fd_step = 1e-3, std::uint64_t seed = 0,
                           double min_grad = 1e-5);

}  // namespace mmkd
