#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "mixcast/lipschitz_fn.hpp"
#include "mixcast/loss.hpp"
#include "mixcast/matrix.hpp"

namespace mixcast {

// Largest singular value by power iteration on W^T W with a fixed
// deterministic start vector. Zero matrices give 0.
double spectral_norm(const Matrix& w, int iters = 200, double rel_tol = 1e-10);

// Whole-matrix rescale to bring the spectral norm under the cap; matrices
// already inside the cap pass through unchanged.
Matrix project_spectral(Matrix w, double cap);

/**
 * Small rectifier network whose layer operator norms are capped, so the
 * product of the caps certifies a network-wide Lipschitz budget. The
 * rectifier is 1-Lipschitz and biases do not enter the bound.
 */
class SpectralMlp {
public:
    SpectralMlp() = default;
    SpectralMlp(std::vector<Matrix> weights, std::vector<std::vector<double>> biases,
                std::vector<double> caps);

    std::size_t layer_count() const { return w_.size(); }
    std::size_t input_dim() const { return w_.front().cols; }
    std::size_t output_dim() const { return w_.back().rows; }
    const Matrix& weight(std::size_t i) const { return w_[i]; }
    Matrix& weight(std::size_t i) { return w_[i]; }
    const std::vector<double>& bias(std::size_t i) const { return b_[i]; }
    std::vector<double>& bias(std::size_t i) { return b_[i]; }
    const std::vector<double>& caps() const { return caps_; }

    std::vector<double> forward(std::span<const double> x) const;
    Predictor as_predictor() const;

    // Certified upper bound: product of per-layer spectral norms.
    double lipschitz_bound() const;

    // Rescale every layer to its cap.
    void project_layers();

    void save(std::ostream& os) const;
    static SpectralMlp load(std::istream& is);

private:
    std::vector<Matrix> w_;
    std::vector<std::vector<double>> b_;
    std::vector<double> caps_;
};

struct MlpConfig {
    int layers = 2;
    int width = 16;
    int epochs = 200;
    int batch = 32;
    double lr = 0.25;
    std::uint64_t seed = 1;
};

struct MlpGradients {
    std::vector<Matrix> weight;
    std::vector<std::vector<double>> bias;
};

// Mean loss over a batch and its exact parameter gradients (backprop); the
// finite-difference suite checks these.
double mlp_loss(const SpectralMlp& mlp, std::span<const FitSample> batch, const LossFn& loss);
MlpGradients mlp_loss_gradients(const SpectralMlp& mlp, std::span<const FitSample> batch,
                                const LossFn& loss);

/**
 * Mini-batch gradient descent on the empirical loss with every layer
 * projected back to the uniform cap budget^(1/k) after each step. Returns the
 * parameter state with the lowest full-sample loss seen. Deterministic in the
 * config seed.
 */
SpectralMlp mlp_fit(std::span<const FitSample> samples, double budget, const LossFn& loss,
                    const MlpConfig& cfg);

}  // namespace mixcast
