#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rrtrack/autodiff.hpp"

namespace rrtrack {

/// Adam with bias correction. Moment buffers are created lazily on the first
/// step and are indexed by parameter position, so the parameter list passed to
/// adam_step must keep a fixed order.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// Applies one update to every parameter from its gradient buffer (a missing
/// buffer counts as zero). Throws NumericalError, leaving parameters and state
/// untouched, if any gradient is non-finite.
void adam_step(std::span<Tensor> params, AdamState& state);

/// Single-tensor form with an explicit gradient.
void adam_step(Tensor& param, std::span<const double> grad, AdamState& state);

struct GradCheckOptions {
  double eps = 1e-5;
  double tol = 1e-5;
  // Denominator floor for the relative error, so near-zero gradients are
  // compared absolutely.
  double abs_floor = 1e-6;
  // 0 checks every coordinate; otherwise at most this many per parameter.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckFailure {
  std::size_t param;
  std::size_t index;
  double analytic;
  double numeric;
  double rel_error;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool non_finite = false;
  std::vector<GradCheckFailure> failures;

  bool passed() const { return !non_finite && failures.empty(); }
  std::string summary() const;
};

/// Compares reverse-mode gradients of `loss_fn` against central differences.
/// `loss_fn` must build a fresh scalar loss on the graph it is handed.
GradCheckReport grad_check(const std::function<Tensor(Graph&)>& loss_fn, std::span<Tensor> params,
                           const GradCheckOptions& options = {});

}  // namespace rrtrack
