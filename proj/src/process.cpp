#include "mixcast/process.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "mixcast/errors.hpp"
#include "mixcast/rng.hpp"

namespace mixcast {

namespace {

constexpr double kRowSumTol = 1e-12;
// Dense boolean powering is only used for the ergodicity check; context
// spaces past this size are out of scope for the exact-law machinery.
constexpr std::size_t kDenseContextCap = 4096;

std::size_t checked_pow(std::size_t base, int exp, std::size_t cap) {
    std::size_t v = 1;
    for (int i = 0; i < exp; ++i) {
        if (v > cap / base) throw ContextExplosionError("context space exceeds cap");
        v *= base;
    }
    return v;
}

bool power_becomes_positive(const std::vector<std::vector<std::uint8_t>>& adj, std::size_t cap) {
    const std::size_t n = adj.size();
    auto all_positive = [n](const std::vector<std::vector<std::uint8_t>>& m) {
        for (const auto& row : m)
            for (std::uint8_t v : row)
                if (!v) return false;
        return true;
    };
    // Positivity of powers is monotone for row-stochastic chains (every state
    // has a successor), so squaring covers all exponents up to the cap.
    auto cur = adj;
    std::size_t exponent = 1;
    while (true) {
        if (all_positive(cur)) return true;
        if (exponent >= cap) return false;
        std::vector<std::vector<std::uint8_t>> next(n, std::vector<std::uint8_t>(n, 0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k)
                if (cur[i][k])
                    for (std::size_t j = 0; j < n; ++j)
                        if (cur[k][j]) next[i][j] = 1;
        cur = std::move(next);
        exponent *= 2;
    }
}

}  // namespace

std::vector<double> stationary_fixed_point(
    std::size_t n_rows, const Matrix& kernel,
    const std::vector<std::vector<std::size_t>>& successors, double tol, std::size_t max_iter) {
    std::vector<double> pi(n_rows, 1.0 / static_cast<double>(n_rows));
    std::vector<double> next(n_rows);
    for (std::size_t it = 0; it < max_iter; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t c = 0; c < n_rows; ++c) {
            const double w = pi[c];
            if (w == 0.0) continue;
            const auto row = kernel.row(c);
            for (std::size_t y = 0; y < row.size(); ++y) next[successors[c][y]] += w * row[y];
        }
        double residual = 0.0;
        for (std::size_t c = 0; c < n_rows; ++c) residual += std::abs(next[c] - pi[c]);
        // Damped update: converges for periodic chains as well.
        for (std::size_t c = 0; c < n_rows; ++c) pi[c] = 0.5 * (pi[c] + next[c]);
        if (residual <= tol) {
            double total = 0.0;
            for (double v : pi) total += v;
            for (double& v : pi) v /= total;
            return pi;
        }
    }
    throw NoConvergenceError("stationary distribution did not converge");
}

MarkovProcess MarkovProcess::build(Matrix kernel, std::vector<std::vector<double>> embedding,
                                   int order, MarkovOptions opt) {
    if (order < 1) throw ConfigError("process order must be >= 1");
    if (embedding.empty()) throw ConfigError("embedding must list at least one state");
    const int k = static_cast<int>(embedding.size());
    const std::size_t n = embedding.front().size();
    if (n == 0) throw ConfigError("observation dimension must be >= 1");
    for (const auto& e : embedding) {
        if (e.size() != n) throw ConfigError("embedding rows must share one dimension");
        for (double v : e)
            if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("embedding coordinates must lie in [0,1]");
    }
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j)
            if (embedding[i] == embedding[j]) throw ConfigError("embedding must be injective");

    const std::size_t contexts = checked_pow(static_cast<std::size_t>(k), order, std::size_t(1) << 40);
    if (kernel.rows != contexts || kernel.cols != static_cast<std::size_t>(k))
        throw ConfigError("kernel must be K^d x K for K=" + std::to_string(k) +
                          ", d=" + std::to_string(order));

    for (std::size_t r = 0; r < kernel.rows; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < kernel.cols; ++c) {
            const double v = kernel(r, c);
            if (v < 0.0) throw RowSumError(r, v);
            sum += v;
        }
        if (std::abs(sum - 1.0) > kRowSumTol) throw RowSumError(r, sum);
    }

    MarkovProcess p;
    p.k_ = k;
    p.d_ = order;
    p.n_ = static_cast<int>(n);
    p.kernel_ = std::move(kernel);
    p.embedding_ = std::move(embedding);
    p.descriptor_ = "markov(K=" + std::to_string(k) + ",d=" + std::to_string(order) +
                    ",n=" + std::to_string(n) + ")";

    std::vector<std::vector<std::size_t>> successors(contexts, std::vector<std::size_t>(k));
    for (std::size_t c = 0; c < contexts; ++c)
        for (int y = 0; y < k; ++y) successors[c][y] = p.step_context(c, y);

    if (opt.require_ergodic) {
        if (contexts > kDenseContextCap)
            throw ContextExplosionError("context space too large for the ergodicity check");
        std::vector<std::vector<std::uint8_t>> adj(contexts, std::vector<std::uint8_t>(contexts, 0));
        for (std::size_t c = 0; c < contexts; ++c)
            for (int y = 0; y < k; ++y)
                if (p.kernel_(c, y) > 0.0) adj[c][successors[c][y]] = 1;
        const std::size_t cap = opt.ergodic_power_cap
                                    ? opt.ergodic_power_cap
                                    : contexts * static_cast<std::size_t>(k) + 1;
        if (!power_becomes_positive(adj, cap))
            throw NotErgodicError("no power of the context chain is entrywise positive (cap " +
                                  std::to_string(cap) + ")");
    }

    p.stationary_ = stationary_fixed_point(contexts, p.kernel_, successors, opt.stationary_tol,
                                           opt.stationary_max_iter);
    return p;
}

std::size_t MarkovProcess::context_index(std::span<const int> states) const {
    if (states.size() != static_cast<std::size_t>(d_))
        throw UnknownContextError("context length " + std::to_string(states.size()) +
                                  ", expected " + std::to_string(d_));
    std::size_t idx = 0;
    for (int s : states) {
        if (s < 0 || s >= k_) throw UnknownContextError("state " + std::to_string(s) + " outside space");
        idx = idx * static_cast<std::size_t>(k_) + static_cast<std::size_t>(s);
    }
    return idx;
}

std::vector<int> MarkovProcess::context_states(std::size_t index) const {
    std::vector<int> states(d_);
    for (int i = d_ - 1; i >= 0; --i) {
        states[i] = static_cast<int>(index % k_);
        index /= k_;
    }
    return states;
}

std::vector<double> MarkovProcess::embed_context(std::span<const int> states) const {
    std::vector<double> out;
    out.reserve(states.size() * n_);
    for (int s : states) {
        const auto& e = embedding_[static_cast<std::size_t>(s)];
        out.insert(out.end(), e.begin(), e.end());
    }
    return out;
}

int MarkovProcess::state_of(std::span<const double> obs) const {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int s = 0; s < k_; ++s) {
        double d2 = 0.0;
        for (int j = 0; j < n_; ++j) {
            const double diff = obs[j] - embedding_[s][j];
            d2 += diff * diff;
        }
        if (d2 < best_d) {
            best_d = d2;
            best = s;
        }
    }
    return best;
}

std::size_t MarkovProcess::step_context(std::size_t context, int next_state) const {
    std::size_t tail_mod = 1;
    for (int i = 0; i < d_ - 1; ++i) tail_mod *= static_cast<std::size_t>(k_);
    return (context % tail_mod) * static_cast<std::size_t>(k_) + static_cast<std::size_t>(next_state);
}

double MarkovProcess::beta(int m) const {
    if (m < 1) throw UnsupportedError("beta coefficient needs m >= 1");
    const std::size_t contexts = context_count();
    if (contexts > kDenseContextCap)
        throw ContextExplosionError("context space too large for exact beta");
    // Evolve each row distribution of P^m with sparse steps instead of
    // materialising the dense power.
    double beta_m = 0.0;
    std::vector<double> row(contexts), next(contexts);
    for (std::size_t c0 = 0; c0 < contexts; ++c0) {
        std::fill(row.begin(), row.end(), 0.0);
        row[c0] = 1.0;
        for (int step = 0; step < m; ++step) {
            std::fill(next.begin(), next.end(), 0.0);
            for (std::size_t c = 0; c < contexts; ++c) {
                const double w = row[c];
                if (w == 0.0) continue;
                for (int y = 0; y < k_; ++y) {
                    const double pv = kernel_(c, y);
                    if (pv > 0.0) next[step_context(c, y)] += w * pv;
                }
            }
            row.swap(next);
        }
        double tv = 0.0;
        for (std::size_t c = 0; c < contexts; ++c) tv += std::abs(row[c] - stationary_[c]);
        beta_m += stationary_[c0] * 0.5 * tv;
    }
    return beta_m;
}

Trajectory MarkovProcess::sample(std::size_t T, std::uint64_t seed) const {
    return sample(T, seed, {});
}

Trajectory MarkovProcess::sample(std::size_t T, std::uint64_t seed,
                                 std::span<const int> start_context) const {
    if (T < 1) throw TooShortError("trajectory length must be >= 1");
    Xoshiro256pp rng(seed);
    std::size_t ctx;
    if (start_context.empty()) {
        ctx = static_cast<std::size_t>(rng.categorical(stationary_));
    } else {
        ctx = context_index(start_context);
    }

    Trajectory traj;
    traj.seed = seed;
    traj.dim = static_cast<std::size_t>(n_);
    traj.source = descriptor_;
    traj.data.reserve(T * traj.dim);
    traj.states.reserve(T);

    // The start context supplies the first min(d, T) observations.
    const auto ctx_states = context_states(ctx);
    for (int i = 0; i < d_ && traj.states.size() < T; ++i) {
        traj.states.push_back(ctx_states[i]);
        const auto& e = embedding_[ctx_states[i]];
        traj.data.insert(traj.data.end(), e.begin(), e.end());
    }
    while (traj.states.size() < T) {
        const int y = rng.categorical(kernel_.row(ctx));
        traj.states.push_back(y);
        const auto& e = embedding_[y];
        traj.data.insert(traj.data.end(), e.begin(), e.end());
        ctx = step_context(ctx, y);
    }
    return traj;
}

void ArProcess::validate() const {
    if (coeffs.empty()) throw ConfigError("ar process needs at least one coefficient");
    double l1 = 0.0;
    for (double c : coeffs) l1 += std::abs(c);
    if (l1 >= 1.0) throw ConfigError("ar coefficient l1 norm must be strictly below 1");
    if (noise_half_width < 0.0) throw ConfigError("noise half-width must be >= 0");
    if (!(clamp_lo < clamp_hi)) throw ConfigError("clamp range must be nonempty");
    if (init.size() != coeffs.size()) throw ConfigError("ar init must provide one value per lag");
}

Trajectory sample_ar(const ArProcess& p, std::size_t T, std::uint64_t seed) {
    p.validate();
    if (T < 1) throw TooShortError("trajectory length must be >= 1");
    Xoshiro256pp rng(seed);
    const int d = p.order();

    Trajectory traj;
    traj.seed = seed;
    traj.dim = 1;
    traj.source = "ar(d=" + std::to_string(d) + ")";
    traj.data.reserve(T);

    auto clamp = [&](double v) { return std::min(p.clamp_hi, std::max(p.clamp_lo, v)); };
    for (int i = 0; i < d && traj.data.size() < T; ++i) traj.data.push_back(clamp(p.init[i]));
    while (traj.data.size() < T) {
        double v = 0.0;
        const std::size_t t = traj.data.size();
        for (int i = 0; i < d; ++i) v += p.coeffs[i] * traj.data[t - 1 - i];
        if (p.noise_half_width > 0.0) v += rng.uniform(-p.noise_half_width, p.noise_half_width);
        traj.data.push_back(clamp(v));
    }
    return traj;
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
    os << "t";
    for (std::size_t j = 1; j <= traj.dim; ++j) os << ",x_" << j;
    os << "\n";
    char buf[64];
    const std::size_t T = traj.size();
    for (std::size_t t = 0; t < T; ++t) {
        os << (t + 1);
        const auto row = traj.obs(t);
        for (double v : row) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            os << ',' << buf;
        }
        os << "\n";
    }
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    write_trajectory_csv(traj, os);
}

Trajectory read_trajectory_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("trajectory csv is empty");
    std::size_t dim = 0;
    for (char c : line)
        if (c == ',') ++dim;
    if (dim == 0 || line.rfind("t,", 0) != 0) throw IoError("bad trajectory csv header: " + line);

    Trajectory traj;
    traj.dim = dim;
    traj.source = "csv";
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        if (!std::getline(ss, field, ',')) throw IoError("bad trajectory csv row: " + line);
        for (std::size_t j = 0; j < dim; ++j) {
            if (!std::getline(ss, field, ',')) throw IoError("short trajectory csv row: " + line);
            traj.data.push_back(std::stod(field));
        }
    }
    return traj;
}

Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    return read_trajectory_csv(is);
}

}  // namespace mixcast
