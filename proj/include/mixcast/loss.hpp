#pragma once

#include <span>
#include <string>
#include <vector>

namespace mixcast {

enum class LossKind { Squared, Absolute, Pinball };

/**
 * Per-round loss u(y, x), convex and Lipschitz in the prediction y.
 *
 * Scalar losses are normalised at construction so the first-argument
 * Lipschitz constant on [0,1] equals 1 (squared divides by 2, pinball by
 * max(tau, 1-tau)). Vector arguments are scored as the mean of the
 * per-coordinate scalar losses, which keeps the normalised constant at most 1
 * in the Euclidean norm for every dimension. `scale` multiplies the
 * normalised value, so raw-scale losses stay recoverable.
 */
class LossFn {
public:
    static LossFn squared() { return LossFn(LossKind::Squared, 0.5); }
    static LossFn absolute() { return LossFn(LossKind::Absolute, 0.5); }
    static LossFn pinball(double tau);

    LossKind kind() const { return kind_; }
    double tau() const { return tau_; }
    double scale() const { return scale_; }
    // The raw scalar Lipschitz constant divided out at construction.
    double lipschitz_rescale() const { return rescale_; }

    LossFn scaled(double c) const;

    double eval1(double y, double x) const;
    // Derivative (subgradient) of eval1 in y.
    double grad1(double y, double x) const;

    double eval(std::span<const double> y, std::span<const double> x) const;
    void grad(std::span<const double> y, std::span<const double> x, std::span<double> out) const;

    std::string name() const;

private:
    LossFn(LossKind kind, double tau) : kind_(kind), tau_(tau) { init_rescale(); }
    void init_rescale();

    LossKind kind_;
    double tau_;
    double rescale_ = 1.0;
    double scale_ = 1.0;
};

}  // namespace mixcast
