#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mixcast/loss.hpp"
#include "mixcast/predictor.hpp"
#include "mixcast/process.hpp"

namespace mixcast {

struct BlockCounts {
    std::size_t mu;  // number of block pairs
    std::size_t a;   // block length
};

// mu = ceil(sqrt(T/2)), a = floor(T / (2 mu)); throws TooShortError when a
// would be zero (T == 3 is the only such horizon).
BlockCounts default_block_counts(std::size_t T);

/**
 * Alternating H/T index blocks over {1..T} (1-based, matching the usual
 * statement): H_j = {2(j-1)a+1 .. (2j-1)a}, T_j = {(2j-1)a+1 .. 2ja}, with the
 * tail 2*mu*a+1..T kept as an auditable remainder.
 */
struct BlockPartition {
    std::size_t T = 0, mu = 0, a = 0;
    std::vector<std::vector<std::uint32_t>> h_blocks;
    std::vector<std::vector<std::uint32_t>> t_blocks;
    std::vector<std::uint32_t> remainder;
};

BlockPartition block_partition(std::size_t T, std::size_t mu, std::size_t a);

/**
 * mu independently generated blocks, each with the stationary law of an
 * H-block. Every block carries a d-observation prefix so losses over the
 * block have full contexts, and is drawn from its own generator substream.
 */
struct IndependentBlocks {
    std::uint64_t seed = 0;
    std::size_t block_len = 0;  // a
    std::size_t prefix_len = 0; // d
    std::size_t dim = 1;        // n
    std::vector<std::vector<double>> prefixes;  // mu rows, d*n each
    std::vector<std::vector<double>> blocks;    // mu rows, a*n each
};

IndependentBlocks resample_independent_blocks(const MarkovProcess& p,
                                              const BlockPartition& partition,
                                              std::uint64_t seed);

// Max over the witness family of |empirical average loss - exact expected
// loss|, empirical taken per scored observation.
double uniform_deviation(const Trajectory& traj, std::span<const Predictor> fns,
                         const LossFn& loss, int d, const MarkovProcess& p);
double uniform_deviation(const IndependentBlocks& blocks, std::span<const Predictor> fns,
                         const LossFn& loss, int d, const MarkovProcess& p);

// Empirical-minimiser excess vs twice the uniform deviation; a deterministic
// inequality, `holds` must always come back true.
struct ErmDeviation {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

ErmDeviation erm_deviation_check(const Trajectory& traj, std::span<const Predictor> fns,
                                 const LossFn& loss, const MarkovProcess& p, int d);

/**
 * Uniform-deviation tail calculator for the L-Lipschitz class on [0,1]^m:
 *   D    = (T / ln T) * (eps / (C2 L))^(m+2)
 *   tail = 2 D^(-m/(m+2)) exp(-ln T (C1 D - 1))
 * `tail` is clamped to [0,1]; `tail_raw` keeps the formula value.
 */
struct BoundReport {
    double T = 0, epsilon = 0, L = 0;
    int m = 0;
    double C1 = 1, C2 = 1;
    double D = 0;
    double tail_raw = 0;
    double tail = 0;
};

BoundReport concentration_bound(double T, double epsilon, double L, int m, double C1 = 1.0,
                                double C2 = 1.0);

/**
 * Monte Carlo check of the block-independence inequality: frequency of the
 * original-sequence deviation event vs 2 * (blocked frequency) + 2 mu beta_a,
 * with exact beta. Holds for the true probabilities; the 3-sigma slack covers
 * estimation error on both sides.
 */
struct YuCheck {
    double lhs_freq = 0;
    double rhs_estimate = 0;
    double mc_se = 0;
    std::size_t mu = 0, a = 0;
    double beta_a = 0;
    double beta_a_minus_d = 0;
    bool holds = false;
};

YuCheck yu_decomposition_check(const MarkovProcess& p, std::span<const Predictor> fns,
                               const LossFn& loss, int d, std::size_t T, double epsilon,
                               std::size_t n_seeds, std::uint64_t seed0 = 1);

}  // namespace mixcast
