#include "mmkd/objectives.hpp"

#include "mmkd/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

namespace mmkd {

Objective parse_objective(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "tlm") return Objective::tlm;
  if (lower == "xwcl") return Objective::xwcl;
  if (lower == "senta") return Objective::senta;
  if (lower == "struca") return Objective::struca;
  throw ConfigError("unknown objective '" + std::string(name) + "' (expected TLM, XWCL, SentA or StrucA)");
}

std::string_view to_string(Objective o) {
  switch (o) {
    case Objective::tlm: return "TLM";
    case Objective::xwcl: return "XWCL";
    case Objective::senta: return "SentA";
    case Objective::struca: return "StrucA";
  }
  return "?";
}

bool ObjectiveConfig::any_enabled() const {
  return std::any_of(enabled.begin(), enabled.end(), [](bool b) { return b; });
}

void ObjectiveConfig::validate() const {
  if (!(tau_xwcl > 0.0) || !(tau_struca > 0.0)) throw ConfigError("temperatures must be positive");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
}

bool LossBreakdown::finite() const {
  return std::isfinite(tlm) && std::isfinite(xwcl) && std::isfinite(senta) && std::isfinite(struca) &&
         std::isfinite(total);
}

std::vector<double> l2_normalize(std::span<const double> v) {
  double sq = 0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm > 1e-12)) throw NumericError("l2 normalization of a near-zero vector");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return out;
}

namespace {
template <typename S>
ag::Tensor<S> scalar(S v) {
  ag::Matrix<S> m(1, 1);
  m(0, 0) = v;
  return ag::Tensor<S>::constant(std::move(m));
}
}  // namespace

template <typename S>
LossTerm<S> tlm_loss(const ag::Tensor<S>& logits, const MaskPlan& plan) {
  if (plan.empty()) return {scalar<S>(0), true};
  if (static_cast<std::size_t>(logits.rows()) != plan.size()) {
    throw ConfigError("TLM logits rows do not match the mask plan");
  }
  std::vector<std::int64_t> targets(plan.original_ids.begin(), plan.original_ids.end());
  return {ag::cross_entropy(logits, std::span<const std::int64_t>(targets)), false};
}

template <typename S>
LossTerm<S> xwcl_loss(const ag::Tensor<S>& student_hidden, const ag::Tensor<S>& teacher_hidden,
                      const WordAlignment& alignment, const MaskPlan& plan, const XwclOptions& opts) {
  if (!(opts.tau > 0.0)) throw ConfigError("XWCL temperature must be positive");
  if (plan.word_heads.empty()) throw DataError("XWCL needs at least one masked word");
  if (alignment.pairs.empty()) throw DataError("XWCL alignment has no words");

  std::unordered_map<std::size_t, std::int64_t> word_at;
  std::vector<std::int64_t> candidates;
  candidates.reserve(alignment.pairs.size());
  for (std::size_t w = 0; w < alignment.pairs.size(); ++w) {
    const auto& p = alignment.pairs[w];
    word_at[p.student_position] = static_cast<std::int64_t>(w);
    candidates.push_back(static_cast<std::int64_t>(p.teacher_position));
  }
  std::vector<std::int64_t> heads;
  std::vector<std::int64_t> targets;
  for (auto pos : plan.word_heads) {
    const auto it = word_at.find(pos);
    if (it == word_at.end()) {
      throw DataError("masked word head at position " + std::to_string(pos) + " is not an aligned word");
    }
    heads.push_back(static_cast<std::int64_t>(pos));
    targets.push_back(it->second);
  }

  auto masked = ag::gather_rows(student_hidden, std::span<const std::int64_t>(heads));
  auto cands = ag::gather_rows(teacher_hidden, std::span<const std::int64_t>(candidates));
  if (opts.cosine) {
    masked = ag::l2_normalize_rows(masked);
    cands = ag::l2_normalize_rows(cands);
  }
  auto logits = ag::scale(ag::matmul_bt(masked, cands), static_cast<S>(1.0 / opts.tau));
  auto loss = ag::cross_entropy(logits, std::span<const std::int64_t>(targets));
  if (opts.sum) loss = ag::scale(loss, static_cast<S>(targets.size()));
  return {loss, false};
}

template <typename S>
ag::Tensor<S> senta_loss(const ag::Tensor<S>& student_pred, const ag::Tensor<S>& teacher_proj) {
  if (student_pred.rows() != teacher_proj.rows() || student_pred.cols() != teacher_proj.cols()) {
    throw ConfigError("SentA batches differ in shape");
  }
  if (student_pred.rows() == 0) throw ConfigError("SentA needs a non-empty batch");
  auto diff = ag::sub(ag::l2_normalize_rows(student_pred), ag::l2_normalize_rows(teacher_proj));
  return ag::scale(ag::sum(ag::mul(diff, diff)), S(1) / static_cast<S>(student_pred.rows()));
}

template <typename S>
ag::Tensor<S> senta_loss(const ModelBundle<S>& bundle, const ag::Tensor<S>& student_cls,
                         const ag::Tensor<S>& teacher_cls) {
  auto pred = predict(bundle.student_pred_senta, project(bundle.student_head_senta, student_cls));
  auto proj = project(bundle.teacher_head_senta, teacher_cls);
  return senta_loss(pred, proj);
}

template <typename S>
ag::Tensor<S> struca_loss(const ag::Tensor<S>& student_pred, const ag::Tensor<S>& teacher_proj, double tau,
                          bool cross_entropy) {
  if (!(tau > 0.0)) throw ConfigError("StrucA temperature must be positive");
  if (student_pred.rows() != teacher_proj.rows() || student_pred.cols() != teacher_proj.cols()) {
    throw ConfigError("StrucA batches differ in shape");
  }
  const S inv_tau = static_cast<S>(1.0 / tau);
  auto zt = ag::l2_normalize_rows(teacher_proj);
  auto zs = ag::l2_normalize_rows(student_pred);
  auto teacher_scores = ag::scale(ag::matmul_bt(zt, zt), inv_tau);
  auto student_log = ag::log_softmax_rows(ag::scale(ag::matmul_bt(zs, zs), inv_tau));
  auto p = ag::softmax_rows(teacher_scores);
  if (cross_entropy) return ag::scale(ag::sum(ag::mul(p, student_log)), S(-1));
  auto teacher_log = ag::log_softmax_rows(teacher_scores);
  return ag::sum(ag::mul(p, ag::sub(teacher_log, student_log)));
}

template <typename S>
ag::Tensor<S> struca_loss(const ModelBundle<S>& bundle, const ag::Tensor<S>& student_cls,
                          const ag::Tensor<S>& teacher_cls, double tau, bool cross_entropy) {
  auto pred = predict(bundle.student_pred_struca, project(bundle.student_head_struca, student_cls));
  auto proj = project(bundle.teacher_head_struca, teacher_cls);
  return struca_loss(pred, proj, tau, cross_entropy);
}

LossBreakdown total_loss(const LossParts& parts, const ObjectiveConfig& cfg) {
  LossBreakdown out;
  if (cfg.is_enabled(Objective::tlm)) out.tlm = parts.tlm;
  if (cfg.is_enabled(Objective::xwcl)) out.xwcl = parts.xwcl;
  if (cfg.is_enabled(Objective::senta)) out.senta = parts.senta;
  if (cfg.is_enabled(Objective::struca)) out.struca = parts.struca;
  out.total = out.tlm + out.xwcl + out.senta + cfg.alpha * out.struca;
  return out;
}

template <typename S>
ag::Tensor<S> combine_losses(const std::array<ag::Tensor<S>, 4>& terms, const ObjectiveConfig& cfg) {
  ag::Tensor<S> total;
  for (auto o : kAllObjectives) {
    const auto i = static_cast<std::size_t>(o);
    if (!cfg.is_enabled(o) || !terms[i].defined()) continue;
    auto term = o == Objective::struca ? ag::scale(terms[i], static_cast<S>(cfg.alpha)) : terms[i];
    total = total.defined() ? ag::add(total, term) : term;
  }
  return total.defined() ? total : scalar<S>(0);
}

#define MMKD_INSTANTIATE(S)                                                                             \
  template LossTerm<S> tlm_loss<S>(const ag::Tensor<S>&, const MaskPlan&);                              \
  template LossTerm<S> xwcl_loss<S>(const ag::Tensor<S>&, const ag::Tensor<S>&, const WordAlignment&,   \
                                    const MaskPlan&, const XwclOptions&);                               \
  template ag::Tensor<S> senta_loss<S>(const ag::Tensor<S>&, const ag::Tensor<S>&);                     \
  template ag::Tensor<S> senta_loss<S>(const ModelBundle<S>&, const ag::Tensor<S>&, const ag::Tensor<S>&); \
  template ag::Tensor<S> struca_loss<S>(const ag::Tensor<S>&, const ag::Tensor<S>&, double, bool);      \
  template ag::Tensor<S> struca_loss<S>(const ModelBundle<S>&, const ag::Tensor<S>&, const ag::Tensor<S>&, \
                                        double, bool);                                                  \
  template ag::Tensor<S> combine_losses<S>(const std::array<ag::Tensor<S>, 4>&, const ObjectiveConfig&);

MMKD_INSTANTIATE(float)
MMKD_INSTANTIATE(double)

#undef MMKD_INSTANTIATE

}  // namespace mmkd
