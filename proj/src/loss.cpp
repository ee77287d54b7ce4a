#include "mixcast/loss.hpp"

#include <algorithm>
#include <cmath>

#include "mixcast/errors.hpp"

namespace mixcast {

LossFn LossFn::pinball(double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("pinball tau must lie in (0,1)");
    return LossFn(LossKind::Pinball, tau);
}

void LossFn::init_rescale() {
    switch (kind_) {
        case LossKind::Squared: rescale_ = 2.0; break;
        case LossKind::Absolute: rescale_ = 1.0; break;
        case LossKind::Pinball: rescale_ = std::max(tau_, 1.0 - tau_); break;
    }
}

LossFn LossFn::scaled(double c) const {
    if (!(c > 0.0)) throw ConfigError("loss scale must be positive");
    LossFn out = *this;
    out.scale_ = scale_ * c;
    return out;
}

double LossFn::eval1(double y, double x) const {
    const double diff = y - x;
    double raw = 0.0;
    switch (kind_) {
        case LossKind::Squared: raw = diff * diff; break;
        case LossKind::Absolute: raw = std::abs(diff); break;
        case LossKind::Pinball:
            raw = diff >= 0.0 ? (1.0 - tau_) * diff : -tau_ * diff;
            break;
    }
    return scale_ * raw / rescale_;
}

double LossFn::grad1(double y, double x) const {
    const double diff = y - x;
    double raw = 0.0;
    switch (kind_) {
        case LossKind::Squared: raw = 2.0 * diff; break;
        case LossKind::Absolute: raw = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0); break;
        case LossKind::Pinball: raw = diff > 0.0 ? (1.0 - tau_) : (diff < 0.0 ? -tau_ : 0.0); break;
    }
    return scale_ * raw / rescale_;
}

double LossFn::eval(std::span<const double> y, std::span<const double> x) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) acc += eval1(y[j], x[j]);
    return acc / static_cast<double>(y.size());
}

void LossFn::grad(std::span<const double> y, std::span<const double> x,
                  std::span<double> out) const {
    const double inv = 1.0 / static_cast<double>(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) out[j] = grad1(y[j], x[j]) * inv;
}

std::string LossFn::name() const {
    switch (kind_) {
        case LossKind::Squared: return "squared";
        case LossKind::Absolute: return "absolute";
        case LossKind::Pinball: return "pinball(" + std::to_string(tau_) + ")";
    }
    return "?";
}

}  // namespace mixcast
