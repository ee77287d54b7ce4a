#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mixcast/loss.hpp"
#include "mixcast/predictor.hpp"
#include "mixcast/process.hpp"

namespace mixcast {

struct ActionRisk {
    std::vector<double> action;  // in [0,1]^n
    double risk = 0.0;           // conditional expected loss at the action
};

struct ContextOptimum {
    std::vector<int> context;
    double weight = 0.0;  // stationary probability of the context
    ActionRisk opt;
};

// The best achievable long-run average loss for the chain, together with the
// per-context optimal actions that realise it.
struct OptimalRisk {
    double value = 0.0;
    std::vector<ContextOptimum> per_context;
};

// Kernel row for a context tuple (sums to 1).
std::vector<double> conditional_distribution(const MarkovProcess& p, std::span<const int> context);

// Loss-minimising action for a context: closed form (conditional mean /
// quantile, ties toward the smaller value).
ActionRisk optimal_action(const MarkovProcess& p, const LossFn& loss, std::span<const int> context);

// Same optimisation done numerically by per-coordinate golden section on
// [0,1]; the independent route used to cross-check the closed forms.
ActionRisk optimal_action_numeric(const MarkovProcess& p, const LossFn& loss,
                                  std::span<const int> context, double tol = 1e-10);

// Exact optimal risk via enumeration of all K^d_eval contexts weighted by the
// stationary law. d_eval must be at least the process order; extra memory
// cannot change the value.
OptimalRisk optimal_risk(const MarkovProcess& p, const LossFn& loss, int d_eval,
                         std::size_t context_cap = 1000000);

// Exact expected one-step loss of a fixed predictor reading d_eval
// observations, under the stationary law.
double expected_loss(const MarkovProcess& p, const LossFn& loss, const Predictor& fn, int d_eval,
                     std::size_t context_cap = 1000000);

}  // namespace mixcast
