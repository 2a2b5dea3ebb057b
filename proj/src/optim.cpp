#include "rrtrack/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "rrtrack/errors.hpp"

namespace rrtrack {
namespace {

void update(std::span<double> w, std::span<const double> g, std::vector<double>& m, std::vector<double>& v,
            const AdamState& s, double correction1, double correction2) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double gi = g.empty() ? 0.0 : g[i];
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * gi;
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * gi * gi;
    const double mhat = m[i] / correction1;
    const double vhat = v[i] / correction2;
    w[i] -= s.lr * mhat / (std::sqrt(vhat) + s.epsilon);
  }
}

void ensure_slots(AdamState& state, std::span<const Tensor> params) {
  if (state.m.size() == params.size()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (state.m[i].size() != params[i].size()) {
        throw ShapeError("adam_step: parameter " + std::to_string(i) + " changed size");
      }
    }
    return;
  }
  if (!state.m.empty()) throw UsageError("adam_step: parameter list length changed between steps");
  for (const auto& p : params) {
    state.m.emplace_back(p.size(), 0.0);
    state.v.emplace_back(p.size(), 0.0);
  }
}

}  // namespace

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (!(state.lr > 0.0)) throw UsageError("adam_step: lr must be positive");
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (double g : params[i].grad()) {
      if (!std::isfinite(g)) {
        throw NumericalError("adam_step: non-finite gradient in parameter " + std::to_string(i));
      }
    }
  }
  ensure_slots(state, params);
  state.step += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    update(params[i].data(), params[i].grad(), state.m[i], state.v[i], state, c1, c2);
  }
}

void adam_step(Tensor& param, std::span<const double> grad, AdamState& state) {
  if (grad.size() != param.size()) throw ShapeError("adam_step: gradient size does not match parameter");
  if (!(state.lr > 0.0)) throw UsageError("adam_step: lr must be positive");
  for (double g : grad) {
    if (!std::isfinite(g)) throw NumericalError("adam_step: non-finite gradient");
  }
  ensure_slots(state, std::span<const Tensor>(&param, 1));
  state.step += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  update(param.data(), grad, state.m[0], state.v[0], state, c1, c2);
}

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << "checked=" << checked << " max_rel_error=" << max_rel_error << " failures=" << failures.size();
  if (non_finite) os << " non_finite";
  for (std::size_t i = 0; i < std::min<std::size_t>(failures.size(), 5); ++i) {
    const auto& f = failures[i];
    os << "\n  param " << f.param << "[" << f.index << "] analytic=" << f.analytic << " numeric=" << f.numeric
       << " rel=" << f.rel_error;
  }
  return os.str();
}

GradCheckReport grad_check(const std::function<Tensor(Graph&)>& loss_fn, std::span<Tensor> params,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  {
    Graph g;
    Tensor loss = loss_fn(g);
    if (!std::isfinite(loss.item())) {
      report.non_finite = true;
      return report;
    }
    g.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) {
    analytic.emplace_back(p.has_grad() ? std::vector<double>(p.grad().begin(), p.grad().end())
                                       : std::vector<double>(p.size(), 0.0));
  }

  auto evaluate = [&]() {
    Graph g(false);
    return loss_fn(g).item();
  };

  std::mt19937_64 rng(options.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi].data();
    std::vector<std::size_t> coords(values.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_param != 0 && coords.size() > options.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t idx : coords) {
      const double saved = values[idx];
      values[idx] = saved + options.eps;
      const double up = evaluate();
      values[idx] = saved - options.eps;
      const double down = evaluate();
      values[idx] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        report.non_finite = true;
        continue;
      }
      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic[pi][idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      report.max_rel_error = std::max(report.max_rel_error, rel);
      ++report.checked;
      if (rel > options.tol) report.failures.push_back({pi, idx, a, numeric, rel});
    }
  }
  return report;
}

}  // namespace rrtrack
