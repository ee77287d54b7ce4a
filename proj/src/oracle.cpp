#include "mixcast/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mixcast/errors.hpp"

namespace mixcast {

namespace {

std::size_t checked_context_total(const MarkovProcess& p, int d_eval, std::size_t cap) {
    if (d_eval < p.order())
        throw UnsupportedError("evaluation memory shorter than the process order");
    std::size_t total = 1;
    for (int i = 0; i < d_eval; ++i) {
        if (total > cap / static_cast<std::size_t>(p.state_count()))
            throw ContextExplosionError("K^d exceeds the context cap");
        total *= static_cast<std::size_t>(p.state_count());
    }
    return total;
}

// Visit every length-d_eval context with its stationary weight and the kernel
// row index of its trailing order-d suffix.
template <typename F>
void for_each_context(const MarkovProcess& p, int d_eval, std::size_t cap, F&& visit) {
    const std::size_t total = checked_context_total(p, d_eval, cap);
    const int d = p.order();
    std::vector<int> states(d_eval, 0);
    for (std::size_t idx = 0; idx < total; ++idx) {
        double w = p.stationary()[p.context_index({states.data(), static_cast<std::size_t>(d)})];
        std::size_t roll = p.context_index({states.data(), static_cast<std::size_t>(d)});
        for (int i = d; i < d_eval; ++i) {
            w *= p.kernel()(roll, states[i]);
            roll = p.step_context(roll, states[i]);
        }
        visit(states, roll, w);
        for (int i = d_eval - 1; i >= 0; --i) {
            if (++states[i] < p.state_count()) break;
            states[i] = 0;
        }
    }
}

struct WeightedValue {
    double value;
    double prob;
};

// Smallest q with CDF(q) >= level over a discrete distribution.
double lower_quantile(std::vector<WeightedValue> xs, double level) {
    std::sort(xs.begin(), xs.end(),
              [](const WeightedValue& a, const WeightedValue& b) { return a.value < b.value; });
    double acc = 0.0;
    for (const auto& wv : xs) {
        acc += wv.prob;
        if (acc >= level - 1e-15) return wv.value;
    }
    return xs.back().value;
}

double conditional_risk(const MarkovProcess& p, const LossFn& loss,
                        std::span<const double> action, std::span<const double> row) {
    double risk = 0.0;
    for (int y = 0; y < p.state_count(); ++y) {
        if (row[y] == 0.0) continue;
        const auto& e = p.embedding(y);
        risk += row[y] * loss.eval(action, e);
    }
    return risk;
}

// Golden section localises the minimum to a coarse bracket; value
// comparisons on doubles cannot certify brackets much below sqrt(eps), so the
// convex objective is finished by bisection on its subgradient, which pins
// the argmin (leftmost, on flat bottoms) to the requested tolerance.
double golden_section_min(const std::function<double(double)>& f,
                          const std::function<double(double)>& subgrad, double lo, double hi,
                          double tol) {
    const double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    const double coarse = std::max(tol, 1e-6);
    while (b - a > coarse) {
        if (f1 <= f2) {  // ties shrink toward the smaller value
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    if (subgrad(a) >= 0.0) return a;
    if (subgrad(b) <= 0.0) return b;
    while (b - a > 0.1 * tol) {
        const double mid = 0.5 * (a + b);
        if (subgrad(mid) < 0.0) a = mid;
        else b = mid;
    }
    return f(a) <= f(b) ? a : b;
}

}  // namespace

std::vector<double> conditional_distribution(const MarkovProcess& p,
                                             std::span<const int> context) {
    const std::size_t row = p.context_index(context);
    const auto r = p.kernel().row(row);
    return {r.begin(), r.end()};
}

ActionRisk optimal_action(const MarkovProcess& p, const LossFn& loss,
                          std::span<const int> context) {
    const std::size_t row_idx = p.context_index(context);
    const auto row = p.kernel().row(row_idx);
    const int n = p.dim();

    ActionRisk out;
    out.action.resize(n);
    for (int j = 0; j < n; ++j) {
        std::vector<WeightedValue> marginal;
        marginal.reserve(p.state_count());
        double mean = 0.0;
        for (int y = 0; y < p.state_count(); ++y) {
            if (row[y] == 0.0) continue;
            const double v = p.embedding(y)[j];
            marginal.push_back({v, row[y]});
            mean += row[y] * v;
        }
        switch (loss.kind()) {
            case LossKind::Squared: out.action[j] = mean; break;
            case LossKind::Absolute: out.action[j] = lower_quantile(marginal, 0.5); break;
            case LossKind::Pinball: out.action[j] = lower_quantile(marginal, loss.tau()); break;
        }
    }
    out.risk = conditional_risk(p, loss, out.action, row);
    return out;
}

ActionRisk optimal_action_numeric(const MarkovProcess& p, const LossFn& loss,
                                  std::span<const int> context, double tol) {
    const std::size_t row_idx = p.context_index(context);
    const auto row = p.kernel().row(row_idx);
    const int n = p.dim();

    ActionRisk out;
    out.action.resize(n);
    // The loss is a mean of per-coordinate scalar terms, so each coordinate
    // minimises independently.
    for (int j = 0; j < n; ++j) {
        auto objective = [&](double v) {
            double acc = 0.0;
            for (int y = 0; y < p.state_count(); ++y) {
                if (row[y] == 0.0) continue;
                acc += row[y] * loss.eval1(v, p.embedding(y)[j]);
            }
            return acc;
        };
        auto subgrad = [&](double v) {
            double acc = 0.0;
            for (int y = 0; y < p.state_count(); ++y) {
                if (row[y] == 0.0) continue;
                acc += row[y] * loss.grad1(v, p.embedding(y)[j]);
            }
            return acc;
        };
        out.action[j] = golden_section_min(objective, subgrad, 0.0, 1.0, tol);
    }
    out.risk = conditional_risk(p, loss, out.action, row);
    return out;
}

OptimalRisk optimal_risk(const MarkovProcess& p, const LossFn& loss, int d_eval,
                         std::size_t context_cap) {
    // Actions depend only on the trailing order-d suffix; compute those once.
    std::vector<ActionRisk> by_row(p.context_count());
    for (std::size_t r = 0; r < p.context_count(); ++r) {
        const auto states = p.context_states(r);
        by_row[r] = optimal_action(p, loss, states);
    }

    OptimalRisk out;
    for_each_context(p, d_eval, context_cap,
                     [&](const std::vector<int>& states, std::size_t roll, double w) {
                         out.value += w * by_row[roll].risk;
                         out.per_context.push_back({states, w, by_row[roll]});
                     });
    return out;
}

double expected_loss(const MarkovProcess& p, const LossFn& loss, const Predictor& fn, int d_eval,
                     std::size_t context_cap) {
    double total = 0.0;
    for_each_context(p, d_eval, context_cap,
                     [&](const std::vector<int>& states, std::size_t roll, double w) {
                         if (w == 0.0) return;
                         const auto ctx = p.embed_context(states);
                         const auto pred = fn(ctx);
                         total += w * conditional_risk(p, loss, pred, p.kernel().row(roll));
                     });
    return total;
}

}  // namespace mixcast
