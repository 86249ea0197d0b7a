#pragma once

#include <cmath>
#include <vector>

#include "ptdt/diffcore/params.hpp"

namespace ptdt::diff {

struct AdamWConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Linear warmup from 0 to lr over this many steps; 0 disables.
  int warmup_steps = 0;
};

template <typename T>
struct AdamWState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

// Decoupled weight decay: p <- p (1 - lr wd), then the bias-corrected Adam
// update. Moments are kept in double regardless of T.
template <typename T>
void adamw_step(ParamStore<T>& params, const AdamWConfig& cfg, AdamWState<T>& state) {
  if (!(cfg.lr > 0)) throw ContractError("adamw_step: lr must be > 0");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.value.size(), 0.0);
      state.v.emplace_back(p.value.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adamw_step: optimizer state does not match parameters");
  ++state.step;
  double lr = cfg.lr;
  if (cfg.warmup_steps > 0 && state.step < cfg.warmup_steps) {
    lr *= static_cast<double>(state.step) / cfg.warmup_steps;
  }
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  std::size_t k = 0;
  for (auto& p : params) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != p.value.size() || p.grad.size() != p.value.size()) {
      throw ShapeError("adamw_step: shape mismatch for parameter '" + p.name + "'");
    }
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = static_cast<double>(p.grad[i]);
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      double x = static_cast<double>(p.value[i]);
      x *= 1.0 - lr * cfg.weight_decay;
      x -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.eps);
      p.value[i] = static_cast<T>(x);
    }
    ++k;
  }
}

}  // namespace ptdt::diff
