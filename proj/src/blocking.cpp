#include "mixcast/blocking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mixcast/errors.hpp"
#include "mixcast/oracle.hpp"
#include "mixcast/rng.hpp"

namespace mixcast {

BlockCounts default_block_counts(std::size_t T) {
    if (T < 2) throw TooShortError("block construction needs T >= 2");
    const auto mu = static_cast<std::size_t>(
        std::ceil(std::sqrt(static_cast<double>(T) / 2.0) - 1e-12));
    const std::size_t a = T / (2 * mu);
    if (a == 0) throw TooShortError("horizon too short: block length would be zero");
    return {mu, a};
}

BlockPartition block_partition(std::size_t T, std::size_t mu, std::size_t a) {
    if (2 * mu * a > T) throw OversizedError("2*mu*a exceeds the horizon");
    BlockPartition part;
    part.T = T;
    part.mu = mu;
    part.a = a;
    part.h_blocks.resize(mu);
    part.t_blocks.resize(mu);
    for (std::size_t j = 1; j <= mu; ++j) {
        auto& h = part.h_blocks[j - 1];
        auto& t = part.t_blocks[j - 1];
        for (std::size_t i = 2 * (j - 1) * a + 1; i <= (2 * j - 1) * a; ++i)
            h.push_back(static_cast<std::uint32_t>(i));
        for (std::size_t i = (2 * j - 1) * a + 1; i <= 2 * j * a; ++i)
            t.push_back(static_cast<std::uint32_t>(i));
    }
    for (std::size_t i = 2 * mu * a + 1; i <= T; ++i)
        part.remainder.push_back(static_cast<std::uint32_t>(i));
    return part;
}

IndependentBlocks resample_independent_blocks(const MarkovProcess& p,
                                              const BlockPartition& partition,
                                              std::uint64_t seed) {
    const std::size_t n = static_cast<std::size_t>(p.dim());
    const std::size_t d = static_cast<std::size_t>(p.order());
    IndependentBlocks out;
    out.seed = seed;
    out.block_len = partition.a;
    out.prefix_len = d;
    out.dim = n;
    out.prefixes.resize(partition.mu);
    out.blocks.resize(partition.mu);

    const Xoshiro256pp root(seed);
    for (std::size_t j = 0; j < partition.mu; ++j) {
        auto rng = root.substream(j);
        // Start context from the stationary law, then d+a transitions: the
        // first d draws are the context prefix, the rest is the block, which
        // by stationarity has the same law as an H-block of the original path.
        std::size_t ctx = static_cast<std::size_t>(rng.categorical(p.stationary()));
        const auto ctx_states = p.context_states(ctx);
        auto& prefix = out.prefixes[j];
        prefix.reserve(d * n);
        for (int s : ctx_states) {
            const auto& e = p.embedding(s);
            prefix.insert(prefix.end(), e.begin(), e.end());
        }
        auto& block = out.blocks[j];
        block.reserve(partition.a * n);
        for (std::size_t i = 0; i < partition.a; ++i) {
            const int y = rng.categorical(p.kernel().row(ctx));
            const auto& e = p.embedding(y);
            block.insert(block.end(), e.begin(), e.end());
            ctx = p.step_context(ctx, y);
        }
    }
    return out;
}

namespace {

double exact_expected(const MarkovProcess& p, const LossFn& loss, const Predictor& fn, int d) {
    return expected_loss(p, loss, fn, d);
}

double empirical_trajectory(const Trajectory& traj, const Predictor& fn, const LossFn& loss,
                            int d) {
    const std::size_t T = traj.size();
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t t = static_cast<std::size_t>(d); t < T; ++t) {
        const auto ctx = traj.window(t - d, d);
        const auto pred = fn(ctx);
        acc += loss.eval(pred, traj.obs(t));
        ++count;
    }
    if (count == 0) throw TooShortError("trajectory shorter than the context length");
    return acc / static_cast<double>(count);
}

double empirical_blocks(const IndependentBlocks& blocks, const Predictor& fn,
                        const LossFn& loss) {
    const std::size_t n = blocks.dim;
    const std::size_t d = blocks.prefix_len;
    double acc = 0.0;
    std::size_t count = 0;
    std::vector<double> ctx(d * n);
    for (std::size_t j = 0; j < blocks.blocks.size(); ++j) {
        const auto& prefix = blocks.prefixes[j];
        const auto& block = blocks.blocks[j];
        for (std::size_t i = 0; i < blocks.block_len; ++i) {
            // Context spans the prefix for the first d elements of the block.
            for (std::size_t q = 0; q < d; ++q) {
                const std::size_t pos = i + q;  // offset into prefix+block
                const double* src = pos < d ? prefix.data() + pos * n
                                            : block.data() + (pos - d) * n;
                std::copy(src, src + n, ctx.begin() + q * n);
            }
            const auto pred = fn(ctx);
            acc += loss.eval(pred, {block.data() + i * n, n});
            ++count;
        }
    }
    if (count == 0) throw TooShortError("no block observations");
    return acc / static_cast<double>(count);
}

}  // namespace

double uniform_deviation(const Trajectory& traj, std::span<const Predictor> fns,
                         const LossFn& loss, int d, const MarkovProcess& p) {
    if (fns.empty()) throw ConfigError("uniform_deviation needs a nonempty witness family");
    double worst = 0.0;
    for (const auto& fn : fns) {
        const double emp = empirical_trajectory(traj, fn, loss, d);
        const double exp = exact_expected(p, loss, fn, d);
        worst = std::max(worst, std::abs(emp - exp));
    }
    return worst;
}

double uniform_deviation(const IndependentBlocks& blocks, std::span<const Predictor> fns,
                         const LossFn& loss, int d, const MarkovProcess& p) {
    if (fns.empty()) throw ConfigError("uniform_deviation needs a nonempty witness family");
    if (static_cast<std::size_t>(d) != blocks.prefix_len)
        throw ConfigError("block prefix length does not match the context length");
    double worst = 0.0;
    for (const auto& fn : fns) {
        const double emp = empirical_blocks(blocks, fn, loss);
        const double exp = exact_expected(p, loss, fn, d);
        worst = std::max(worst, std::abs(emp - exp));
    }
    return worst;
}

ErmDeviation erm_deviation_check(const Trajectory& traj, std::span<const Predictor> fns,
                                 const LossFn& loss, const MarkovProcess& p, int d) {
    if (fns.empty()) throw ConfigError("erm_deviation_check needs a nonempty class");
    double best_emp = std::numeric_limits<double>::infinity();
    double emp_of_minimiser = 0.0;
    double best_exp = std::numeric_limits<double>::infinity();
    double dev = 0.0;
    for (const auto& fn : fns) {
        const double emp = empirical_trajectory(traj, fn, loss, d);
        const double exp = exact_expected(p, loss, fn, d);
        if (emp < best_emp) {
            best_emp = emp;
            emp_of_minimiser = emp;
        }
        best_exp = std::min(best_exp, exp);
        dev = std::max(dev, std::abs(emp - exp));
    }
    ErmDeviation out;
    out.lhs = emp_of_minimiser - best_exp;
    out.rhs = 2.0 * dev;
    out.holds = out.lhs <= out.rhs + 1e-12;
    return out;
}

BoundReport concentration_bound(double T, double epsilon, double L, int m, double C1, double C2) {
    if (!(T >= 2.0)) throw TooShortError("concentration bound needs T >= 2");
    if (!(epsilon > 0.0) || !(L > 0.0) || !(C1 > 0.0) || !(C2 > 0.0) || m < 0)
        throw ConfigError("concentration bound inputs must be positive");
    BoundReport r;
    r.T = T;
    r.epsilon = epsilon;
    r.L = L;
    r.m = m;
    r.C1 = C1;
    r.C2 = C2;
    const double log_t = std::log(T);
    r.D = T / log_t * std::pow(epsilon / (C2 * L), static_cast<double>(m) + 2.0);
    const double mexp = static_cast<double>(m) / (static_cast<double>(m) + 2.0);
    // Assemble in log space so large D does not overflow on the way.
    const double log_tail = std::log(2.0) - mexp * std::log(r.D) - log_t * (C1 * r.D - 1.0);
    r.tail_raw = std::exp(log_tail);
    r.tail = std::clamp(r.tail_raw, 0.0, 1.0);
    return r;
}

YuCheck yu_decomposition_check(const MarkovProcess& p, std::span<const Predictor> fns,
                               const LossFn& loss, int d, std::size_t T, double epsilon,
                               std::size_t n_seeds, std::uint64_t seed0) {
    if (n_seeds < 100) throw ConfigError("yu_decomposition_check needs at least 100 seeds");
    const auto counts = default_block_counts(T);
    const auto partition = block_partition(T, counts.mu, counts.a);

    std::size_t orig_hits = 0, block_hits = 0;
    for (std::size_t s = 0; s < n_seeds; ++s) {
        const std::uint64_t seed = seed0 + s;
        const auto traj = p.sample(T, seed);
        if (uniform_deviation(traj, fns, loss, d, p) > epsilon) ++orig_hits;
        // Independent stream for the resampled blocks.
        std::uint64_t sm = seed ^ 0xB10C5EED0B10C5EEull;
        const auto blocks = resample_independent_blocks(p, partition, splitmix64(sm));
        if (uniform_deviation(blocks, fns, loss, d, p) > epsilon) ++block_hits;
    }

    YuCheck out;
    out.mu = counts.mu;
    out.a = counts.a;
    out.beta_a = p.beta(static_cast<int>(counts.a));
    out.beta_a_minus_d =
        counts.a > static_cast<std::size_t>(d) ? p.beta(static_cast<int>(counts.a) - d) : 1.0;
    const double n = static_cast<double>(n_seeds);
    out.lhs_freq = static_cast<double>(orig_hits) / n;
    const double block_freq = static_cast<double>(block_hits) / n;
    out.rhs_estimate = 2.0 * block_freq + 2.0 * static_cast<double>(counts.mu) * out.beta_a;
    const double var_lhs = out.lhs_freq * (1.0 - out.lhs_freq) / n;
    const double var_rhs = 4.0 * block_freq * (1.0 - block_freq) / n;
    out.mc_se = std::sqrt(var_lhs + var_rhs);
    out.holds = out.lhs_freq <= out.rhs_estimate + 3.0 * out.mc_se;
    return out;
}

}  // namespace mixcast
