#include "mmkd/optim.hpp"

#include "mmkd/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mmkd {

double lr_at_step(std::size_t step, std::size_t total_steps, double peak_lr, double warmup_frac) {
  if (total_steps == 0) throw ConfigError("learning-rate schedule needs at least one step");
  if (step > total_steps) throw ConfigError("step past the end of the schedule");
  if (!(warmup_frac > 0.0 && warmup_frac < 1.0)) throw ConfigError("warmup fraction must be in (0, 1)");
  auto warmup = static_cast<std::size_t>(std::llround(warmup_frac * static_cast<double>(total_steps)));
  warmup = std::clamp<std::size_t>(warmup, 1, total_steps);
  if (step < warmup) return peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
  if (warmup == total_steps) return peak_lr;
  return peak_lr * static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup);
}

template <typename S>
void adamw_step(std::span<ag::Matrix<S>* const> params, std::span<const ag::Matrix<S>* const> grads,
                AdamState<S>& state, double lr, const AdamOptions& opts) {
  if (params.size() != grads.size()) throw ConfigError("gradient list does not match parameters");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i]->rows() != params[i]->rows() || grads[i]->cols() != params[i]->cols()) {
      throw ConfigError("gradient shape does not match parameter " + std::to_string(i));
    }
    if (!grads[i]->allFinite()) {
      throw NumericError("non-finite gradient for parameter " + std::to_string(i) + "; step aborted");
    }
  }
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.push_back(ag::Matrix<S>::Zero(p->rows(), p->cols()));
      state.v.push_back(ag::Matrix<S>::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != params.size()) throw ConfigError("optimizer state does not match parameters");

  ++state.t;
  const S b1 = static_cast<S>(opts.beta1);
  const S b2 = static_cast<S>(opts.beta2);
  const S bias1 = static_cast<S>(1.0 - std::pow(opts.beta1, static_cast<double>(state.t)));
  const S bias2 = static_cast<S>(1.0 - std::pow(opts.beta2, static_cast<double>(state.t)));
  const S step_size = static_cast<S>(lr);
  const S decay = static_cast<S>(1.0 - lr * opts.weight_decay);
  const S eps = static_cast<S>(opts.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    const auto& g = *grads[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = b1 * m + (S(1) - b1) * g;
    v = b2 * v + (S(1) - b2) * g.cwiseProduct(g);
    p *= decay;
    p.array() -= step_size * (m.array() / bias1) / ((v.array() / bias2).sqrt() + eps);
  }
}

template <typename S>
void adamw_step(const Params<S>& params, AdamState<S>& state, double lr, const AdamOptions& opts) {
  std::vector<ag::Matrix<S>*> values;
  std::vector<const ag::Matrix<S>*> grads;
  for (auto p : params) {
    values.push_back(&p.tensor.mutable_value());
    grads.push_back(&p.tensor.grad());
  }
  adamw_step<S>(std::span<ag::Matrix<S>* const>(values), std::span<const ag::Matrix<S>* const>(grads), state,
                lr, opts);
}

template <typename S>
double clip_grad_norm(const Params<S>& params, double max_norm) {
  double sq = 0;
  for (const auto& p : params) {
    if (p.tensor.has_grad()) sq += static_cast<double>(p.tensor.grad().squaredNorm());
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm && std::isfinite(norm)) {
    const S factor = static_cast<S>(max_norm / (norm + 1e-6));
    for (auto p : params) {
      if (p.tensor.has_grad()) p.tensor.node()->grad *= factor;
    }
  }
  return norm;
}

template void adamw_step<float>(std::span<ag::Matrix<float>* const>, std::span<const ag::Matrix<float>* const>,
                                AdamState<float>&, double, const AdamOptions&);
template void adamw_step<double>(std::span<ag::Matrix<double>* const>,
                                 std::span<const ag::Matrix<double>* const>, AdamState<double>&, double,
                                 const AdamOptions&);
template void adamw_step<float>(const Params<float>&, AdamState<float>&, double, const AdamOptions&);
template void adamw_step<double>(const Params<double>&, AdamState<double>&, double, const AdamOptions&);
template double clip_grad_norm<float>(const Params<float>&, double);
template double clip_grad_norm<double>(const Params<double>&, double);

}  // namespace mmkd
