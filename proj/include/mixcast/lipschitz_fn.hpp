#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mixcast/loss.hpp"
#include "mixcast/predictor.hpp"

namespace mixcast {

/**
 * Capacity schedule for the fitted class: L_T = L0 * max(ln T, 1)^(1/(m_eff+2)).
 * Nondecreasing, unbounded, floored at L0 for tiny horizons.
 */
struct Schedule {
    double L0 = 1.0;
    int m_eff = 1;  // flattened context dimension n*d

    double operator()(double T) const;
};

struct FitSample {
    std::vector<double> x;  // context point in [0,1]^m_eff
    std::vector<double> y;  // target
};

/**
 * An L-Lipschitz function represented by anchored sample values and evaluated
 * everywhere by the midpoint of the upper and lower Lipschitz envelopes,
 * clipped to [0,1] per output coordinate. When the anchor values satisfy the
 * pairwise constraints |v_i - v_j| <= L ||x_i - x_j||, the extension is
 * L-Lipschitz globally and interpolates the anchors exactly.
 */
class LipschitzFn {
public:
    LipschitzFn() = default;
    LipschitzFn(std::vector<std::vector<double>> points, std::vector<std::vector<double>> values,
                double L);

    std::vector<double> eval(std::span<const double> x) const;
    Predictor as_predictor() const;

    double budget() const { return budget_; }
    std::size_t anchor_count() const { return points_.size(); }
    std::size_t input_dim() const { return points_.empty() ? 0 : points_.front().size(); }
    std::size_t output_dim() const { return values_.empty() ? 0 : values_.front().size(); }
    const std::vector<std::vector<double>>& points() const { return points_; }
    const std::vector<std::vector<double>>& values() const { return values_; }

    // Largest pairwise violation of |v_i - v_j| - L d_ij (<= 0 when feasible).
    double max_pair_violation() const;

    void save(std::ostream& os) const;
    static LipschitzFn load(std::istream& is);

private:
    std::vector<std::vector<double>> points_;
    std::vector<std::vector<double>> values_;
    double budget_ = 1.0;
};

struct McshaneOptions {
    double constraint_tol = 1e-8;
    double objective_tol = 1e-10;
    std::size_t max_sweeps = 100000;
    // projected-subgradient settings for non-quadratic losses
    double subgrad_step0 = 0.25;
    std::size_t subgrad_iters = 20000;
};

/**
 * Empirical risk minimiser over the L-Lipschitz class, solved exactly on the
 * sample: anchor values minimise the total loss subject to all pairwise
 * Lipschitz constraints. Squared loss goes through Dykstra projections (the
 * unconstrained optimum projected onto the constraint intersection); other
 * convex losses through a projected subgradient loop. Duplicate sample points
 * are grouped first, so discrete-state sources stay cheap at long horizons.
 */
LipschitzFn mcshane_fit(std::span<const FitSample> samples, double L, const LossFn& loss,
                        const McshaneOptions& opt = {});

// Max over supplied pairs of ||f(a)-f(b)|| / ||a-b||; throws DegeneratePairError
// on identical points.
double empirical_lipschitz(const Predictor& fn,
                           std::span<const std::pair<std::vector<double>, std::vector<double>>> pairs);

// Deterministic family of random L-Lipschitz witnesses (random anchors made
// feasible by mcshane_fit); used by the uniform-deviation checks and the CLI.
std::vector<LipschitzFn> make_witness_family(int m_eff, int out_dim, double L, std::size_t count,
                                             std::size_t anchors_per_fn, std::uint64_t seed);

}  // namespace mixcast
