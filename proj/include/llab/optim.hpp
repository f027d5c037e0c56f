#pragma once

#include <cmath>
#include <vector>

#include "llab/common.hpp"

namespace llab {

enum class LrKind { Constant, StepMilestones, WarmupCosine };

struct LrSchedule {
  LrKind kind = LrKind::Constant;
  double base = 0.1;
  std::vector<int> milestones;  // StepMilestones
  double decay = 0.1;
  int warmup_epochs = 5;  // WarmupCosine
  int total_epochs = 0;   // WarmupCosine horizon

  // Rate at a wall epoch. Epochs past the configured horizon keep the
  // last in-horizon rate; the rate is always > 0.
  double rate(int epoch) const {
    switch (kind) {
      case LrKind::Constant:
        return base;
      case LrKind::StepMilestones: {
        double r = base;
        for (int m : milestones)
          if (epoch >= m) r *= decay;
        return r;
      }
      case LrKind::WarmupCosine: {
        const int e = std::min(epoch, total_epochs - 1);
        if (e < warmup_epochs) return base * static_cast<double>(e + 1) / warmup_epochs;
        const int span = std::max(1, total_epochs - warmup_epochs);
        const double t = static_cast<double>(e - warmup_epochs) / span;
        return 0.5 * base * (1.0 + std::cos(M_PI * t));
      }
    }
    return base;
  }
};

// Classical SGD with momentum; weight decay is coupled (added to the
// gradient before the momentum update).
struct OptimState {
  std::vector<double> momentum;
  double momentum_coef = 0.0;
  double weight_decay = 0.0;

  OptimState() = default;
  OptimState(size_t n, double mu, double wd)
      : momentum(n, 0.0), momentum_coef(mu), weight_decay(wd) {}
};

// buffer <- mu * buffer + (grad + wd * w); returns u = lr * buffer.
// This is the update term the masked rules consume.
inline std::vector<double> update_term(OptimState& state, const std::vector<double>& params,
                                       const std::vector<double>& grad, double lr) {
  if (params.size() != grad.size() || params.size() != state.momentum.size())
    throw Error("sgd: shape mismatch");
  std::vector<double> u(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    state.momentum[i] =
        state.momentum_coef * state.momentum[i] + (grad[i] + state.weight_decay * params[i]);
    u[i] = lr * state.momentum[i];
  }
  return u;
}

inline std::vector<double> sgd_step(const std::vector<double>& params,
                                    const std::vector<double>& grad, OptimState& state,
                                    double lr) {
  auto u = update_term(state, params, grad, lr);
  std::vector<double> out(params.size());
  for (size_t i = 0; i < params.size(); ++i) out[i] = params[i] - u[i];
  return out;
}

}  // namespace llab
