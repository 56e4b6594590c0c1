#pragma once

#include "mmkd/autograd.hpp"
#include "mmkd/masking.hpp"
#include "mmkd/model.hpp"
#include "mmkd/tokenization.hpp"

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmkd {

enum class Objective : std::uint8_t { tlm = 0, xwcl = 1, senta = 2, struca = 3 };

inline constexpr std::array<Objective, 4> kAllObjectives{Objective::tlm, Objective::xwcl,
                                                         Objective::senta, Objective::struca};

/// Accepts the canonical names TLM, XWCL, SentA, StrucA (case-insensitive).
Objective parse_objective(std::string_view name);
std::string_view to_string(Objective o);

struct ObjectiveConfig {
  double tau_xwcl = 0.1;
  double tau_struca = 0.1;
  double alpha = 1.0;
  std::array<bool, 4> enabled{true, true, true, true};
  bool xwcl_sum = false;              // sum over masked words instead of mean
  bool xwcl_cosine = false;           // cosine instead of raw dot product
  bool struca_cross_entropy = false;  // drop the teacher-entropy term

  bool is_enabled(Objective o) const { return enabled[static_cast<std::size_t>(o)]; }
  void set_enabled(Objective o, bool on) { enabled[static_cast<std::size_t>(o)] = on; }
  bool any_enabled() const;
  void validate() const;
  bool operator==(const ObjectiveConfig&) const = default;
};

struct LossBreakdown {
  double tlm = 0;
  double xwcl = 0;
  double senta = 0;
  double struca = 0;
  double total = 0;

  bool finite() const;
  bool operator==(const LossBreakdown&) const = default;
};

/// Unit-length copy of `v`; throws NumericError when ||v|| <= 1e-12.
std::vector<double> l2_normalize(std::span<const double> v);

template <typename S>
struct LossTerm {
  ag::Tensor<S> value;  // 1x1
  bool empty = false;   // nothing to average over; value is 0
};

/// Mean cross-entropy of `logits` (one row per plan position) against the
/// plan's original ids. An empty plan yields 0 with `empty` set.
template <typename S>
LossTerm<S> tlm_loss(const ag::Tensor<S>& logits, const MaskPlan& plan);

struct XwclOptions {
  double tau = 0.1;
  bool sum = false;
  bool cosine = false;
};

/// Word-level infoNCE. For every masked word head, the positive is the
/// teacher's first-token state of the same word and the candidates are the
/// teacher's first-token states of all source words.
template <typename S>
LossTerm<S> xwcl_loss(const ag::Tensor<S>& student_hidden, const ag::Tensor<S>& teacher_hidden,
                      const WordAlignment& alignment, const MaskPlan& plan, const XwclOptions& opts);

/// Mean over the batch of ||normalize(pred) - normalize(proj)||^2.
template <typename S>
ag::Tensor<S> senta_loss(const ag::Tensor<S>& student_pred, const ag::Tensor<S>& teacher_proj);

/// Applies the SentA heads to [CLS] batches, then senta_loss.
template <typename S>
ag::Tensor<S> senta_loss(const ModelBundle<S>& bundle, const ag::Tensor<S>& student_cls,
                         const ag::Tensor<S>& teacher_cls);

/// Sum over rows of KL(teacher row distribution || student row
/// distribution), where each is a row-softmax of the similarity matrix of
/// L2-normalized vectors divided by tau. With `cross_entropy` the
/// teacher-entropy term is dropped.
template <typename S>
ag::Tensor<S> struca_loss(const ag::Tensor<S>& student_pred, const ag::Tensor<S>& teacher_proj,
                          double tau, bool cross_entropy = false);

/// Applies the StrucA projector(+predictor on the student) to [CLS] batches.
template <typename S>
ag::Tensor<S> struca_loss(const ModelBundle<S>& bundle, const ag::Tensor<S>& student_cls,
                          const ag::Tensor<S>& teacher_cls, double tau, bool cross_entropy = false);

/// Per-objective values; terms for disabled objectives are ignored.
struct LossParts {
  double tlm = 0;
  double xwcl = 0;
  double senta = 0;
  double struca = 0;
};

LossBreakdown total_loss(const LossParts& parts, const ObjectiveConfig& cfg);

/// Weighted sum of the enabled terms, for backpropagation.
template <typename S>
ag::Tensor<S> combine_losses(const std::array<ag::Tensor<S>, 4>& terms, const ObjectiveConfig& cfg);

}  // namespace mmkd
