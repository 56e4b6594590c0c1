#pragma once

#include "mmkd/autograd.hpp"
#include "mmkd/model.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace mmkd {

/// Linear warmup from 0 to `peak_lr` over the first round(warmup_frac * T)
/// steps, then linear decay to 0 at step T. Throws ConfigError for T == 0 or
/// step > T.
double lr_at_step(std::size_t step, std::size_t total_steps, double peak_lr, double warmup_frac);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

template <typename S>
struct AdamState {
  std::size_t t = 0;
  std::vector<ag::Matrix<S>> m;
  std::vector<ag::Matrix<S>> v;
};

/// One AdamW update with decoupled weight decay (p <- p - lr*wd*p, then the
/// bias-corrected adaptive step). Leaves everything untouched and throws
/// NumericError when any gradient is non-finite.
template <typename S>
void adamw_step(std::span<ag::Matrix<S>* const> params, std::span<const ag::Matrix<S>* const> grads,
                AdamState<S>& state, double lr, const AdamOptions& opts);

/// Convenience over model parameters, reading each leaf's accumulated grad.
template <typename S>
void adamw_step(const Params<S>& params, AdamState<S>& state, double lr, const AdamOptions& opts);

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename S>
double clip_grad_norm(const Params<S>& params, double max_norm);

template <typename S>
void zero_grads(const Params<S>& params) {
  for (auto p : params) p.tensor.zero_grad();
}

}  // namespace mmkd
