#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixcast/matrix.hpp"

namespace mixcast {

/**
 * A sampled path of T observations in [0,1]^n, stored row-major.
 *
 * `states` carries the underlying state indices for finite Markov sources
 * (empty for continuous sources); several exact-law checks use it.
 * Regenerating with the same (process, T, seed) yields identical bytes.
 */
struct Trajectory {
    std::uint64_t seed = 0;
    std::size_t dim = 1;        // n
    std::vector<double> data;   // T x n
    std::vector<int> states;    // Markov sources only
    std::string source;

    std::size_t size() const { return dim == 0 ? 0 : data.size() / dim; }

    // 0-based step index.
    std::span<const double> obs(std::size_t t) const { return {data.data() + t * dim, dim}; }

    // Flattened window of `count` consecutive observations starting at `first`.
    std::span<const double> window(std::size_t first, std::size_t count) const {
        return {data.data() + first * dim, count * dim};
    }
};

struct MarkovOptions {
    bool require_ergodic = true;
    // Exponent cap for the positivity check of the context chain;
    // 0 means the default K^d * K + 1.
    std::size_t ergodic_power_cap = 0;
    double stationary_tol = 1e-12;
    std::size_t stationary_max_iter = 500000;
};

/**
 * Finite-state Markov source of order d over K states, embedded into [0,1]^n.
 *
 * The kernel has one row per length-d context (K^d rows, lexicographic with
 * the oldest state most significant) and one column per next state. The
 * stationary law of the context chain is computed at construction, so sample
 * paths are stationary from the first step. The law of the chain is fully
 * known, which makes the optimal risk and the mixing coefficients exactly
 * computable downstream.
 */
class MarkovProcess {
public:
    using Options = MarkovOptions;

    static MarkovProcess build(Matrix kernel, std::vector<std::vector<double>> embedding, int order,
                               MarkovOptions opt = {});

    int state_count() const { return k_; }
    int order() const { return d_; }
    int dim() const { return n_; }
    std::size_t context_count() const { return kernel_.rows; }
    const Matrix& kernel() const { return kernel_; }
    const std::vector<double>& embedding(int state) const { return embedding_[state]; }
    const std::string& descriptor() const { return descriptor_; }

    // Stationary distribution over length-d contexts (solves pi P = pi).
    const std::vector<double>& stationary() const { return stationary_; }

    // Exact absolute-regularity coefficient of the context chain:
    // beta_m = sum_c pi(c) * TV(P^m(c,.), pi).
    double beta(int m) const;

    // Stationary sample path; the first d observations are the start context.
    Trajectory sample(std::size_t T, std::uint64_t seed) const;
    Trajectory sample(std::size_t T, std::uint64_t seed, std::span<const int> start_context) const;

    // Context tuple <-> kernel row index (oldest state most significant).
    std::size_t context_index(std::span<const int> states) const;
    std::vector<int> context_states(std::size_t index) const;
    // Flattened embedding of a context tuple (n*d coordinates).
    std::vector<double> embed_context(std::span<const int> states) const;
    // Nearest-embedding inverse; embeddings are injective so this is exact
    // on observations the process emitted.
    int state_of(std::span<const double> obs) const;

    // Context index advanced by one observed state.
    std::size_t step_context(std::size_t context, int next_state) const;

private:
    MarkovProcess() = default;

    int k_ = 0;
    int d_ = 1;
    int n_ = 1;
    Matrix kernel_;  // K^d x K
    std::vector<std::vector<double>> embedding_;
    std::vector<double> stationary_;
    std::string descriptor_;
};

// Fixed-point solve of pi P = pi for a row-stochastic kernel given as a
// sparse successor structure: next_index(row, col) with probability p(row, col).
// Throws NoConvergenceError when the residual stays above tol.
std::vector<double> stationary_fixed_point(
    std::size_t n_rows, const Matrix& kernel,
    const std::vector<std::vector<std::size_t>>& successors, double tol, std::size_t max_iter);

/**
 * Clamped autoregressive source on [0,1]; continuous-state smoke-test source.
 * x_t = clamp(sum_i coeffs[i] * x_{t-i} + e_t), e_t ~ Uniform(-noise, +noise).
 * The first `order` outputs are the initial values.
 */
struct ArProcess {
    std::vector<double> coeffs;       // l1 norm strictly below 1
    double noise_half_width = 0.0;
    double clamp_lo = 0.0;
    double clamp_hi = 1.0;
    std::vector<double> init;         // length == coeffs.size()

    int order() const { return static_cast<int>(coeffs.size()); }
    void validate() const;
};

Trajectory sample_ar(const ArProcess& p, std::size_t T, std::uint64_t seed);

// CSV export/import: header `t,x_1,...,x_n`, 17 significant digits.
void write_trajectory_csv(const Trajectory& traj, std::ostream& os);
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory_csv(std::istream& is);
Trajectory read_trajectory_csv(const std::string& path);

}  // namespace mixcast
