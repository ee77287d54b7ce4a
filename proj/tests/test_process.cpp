#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "mixcast/errors.hpp"
#include "mixcast/process.hpp"
#include "mixcast/rng.hpp"
#include "test_helpers.hpp"

using namespace mixcast;
using namespace mixcast::testutil;

namespace {

// Brute-force beta via explicit dense matrix powering of the context chain;
// independent of the row-evolution route inside the library.
double beta_brute_force(const MarkovProcess& p, int m) {
    const std::size_t n = p.context_count();
    Matrix q(n, n);
    for (std::size_t c = 0; c < n; ++c)
        for (int y = 0; y < p.state_count(); ++y) q(c, p.step_context(c, y)) += p.kernel()(c, y);
    Matrix power = Matrix::identity(n);
    for (int i = 0; i < m; ++i) power = matmul(power, q);
    const auto& pi = p.stationary();
    double beta = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        double tv = 0.0;
        for (std::size_t c2 = 0; c2 < n; ++c2) tv += std::abs(power(c, c2) - pi[c2]);
        beta += pi[c] * 0.5 * tv;
    }
    return beta;
}

MarkovProcess random_ergodic_chain(std::uint64_t seed, int states) {
    Xoshiro256pp rng(seed);
    Matrix k(states, states);
    for (int r = 0; r < states; ++r) {
        double sum = 0.0;
        for (int c = 0; c < states; ++c) {
            k(r, c) = 0.05 + rng.uniform();  // bounded away from zero: primitive
            sum += k(r, c);
        }
        double acc = 0.0;
        for (int c = 0; c < states - 1; ++c) {
            k(r, c) /= sum;
            acc += k(r, c);
        }
        k(r, states - 1) = 1.0 - acc;  // exact row sum
    }
    std::vector<std::vector<double>> embedding;
    for (int s = 0; s < states; ++s)
        embedding.push_back({static_cast<double>(s) / (states - 1)});
    return MarkovProcess::build(std::move(k), std::move(embedding), 1);
}

}  // namespace

TEST_CASE("build validates kernels") {
    CHECK_NOTHROW(stay09());

    SUBCASE("row sum off by more than 1e-12") {
        Matrix bad = kernel2(0.5, 0.49, 0.5, 0.5);
        CHECK_THROWS_AS(MarkovProcess::build(std::move(bad), embed01(), 1), RowSumError);
    }
    SUBCASE("reducible chain rejected when ergodicity is required") {
        Matrix identity = kernel2(1.0, 0.0, 0.0, 1.0);
        CHECK_THROWS_AS(MarkovProcess::build(std::move(identity), embed01(), 1), NotErgodicError);
    }
    SUBCASE("periodic chain rejected too") {
        Matrix cyc = kernel2(0.0, 1.0, 1.0, 0.0);
        CHECK_THROWS_AS(MarkovProcess::build(std::move(cyc), embed01(), 1), NotErgodicError);
    }
    SUBCASE("negative entry rejected") {
        Matrix bad = kernel2(1.1, -0.1, 0.5, 0.5);
        CHECK_THROWS_AS(MarkovProcess::build(std::move(bad), embed01(), 1), RowSumError);
    }
    SUBCASE("duplicate embedding rejected") {
        CHECK_THROWS_AS(MarkovProcess::build(kernel2(0.9, 0.1, 0.1, 0.9), {{0.5}, {0.5}}, 1),
                        ConfigError);
    }
}

TEST_CASE("stationary distribution") {
    SUBCASE("symmetric chain is uniform") {
        const auto p = stay09();
        CHECK(p.stationary()[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(p.stationary()[1] == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("asymmetric chain solved by hand: pi = (5/6, 1/6)") {
        const auto p = MarkovProcess::build(kernel2(0.9, 0.1, 0.5, 0.5), embed01(), 1);
        CHECK(p.stationary()[0] == doctest::Approx(5.0 / 6.0).epsilon(1e-10));
        CHECK(p.stationary()[1] == doctest::Approx(1.0 / 6.0).epsilon(1e-10));
    }
    SUBCASE("single state") {
        Matrix k(1, 1);
        k(0, 0) = 1.0;
        const auto p = MarkovProcess::build(std::move(k), {{0.3}}, 1);
        CHECK(p.stationary() == std::vector<double>{1.0});
    }
    SUBCASE("fixed point residual") {
        const auto p = stay09();
        const auto& pi = p.stationary();
        for (int j = 0; j < 2; ++j) {
            double v = pi[0] * p.kernel()(0, j) + pi[1] * p.kernel()(1, j);
            CHECK(std::abs(v - pi[j]) <= 1e-12);
        }
    }
    SUBCASE("iteration cap raises") {
        Matrix k = kernel2(0.9, 0.1, 0.5, 0.5);
        std::vector<std::vector<std::size_t>> succ{{0, 1}, {0, 1}};
        CHECK_THROWS_AS(stationary_fixed_point(2, k, succ, 1e-12, 3), NoConvergenceError);
    }
}

TEST_CASE("sampling") {
    SUBCASE("deterministic 2-cycle from state 0") {
        const auto p = cycle2();
        const int start[] = {0};
        const auto traj = p.sample(4, 7, start);
        CHECK(traj.states == std::vector<int>{0, 1, 0, 1});
        CHECK(traj.data == std::vector<double>{0.0, 1.0, 0.0, 1.0});
    }
    SUBCASE("same seed, same bytes") {
        const auto p = stay09();
        const auto a = p.sample(500, 42);
        const auto b = p.sample(500, 42);
        CHECK(a.data == b.data);
        CHECK(a.states == b.states);
        const auto c = p.sample(500, 43);
        CHECK(a.states != c.states);
    }
    SUBCASE("single-state chain is constant") {
        Matrix k(1, 1);
        k(0, 0) = 1.0;
        const auto p = MarkovProcess::build(std::move(k), {{0.25}}, 1);
        const auto traj = p.sample(16, 5);
        for (std::size_t t = 0; t < traj.size(); ++t) CHECK(traj.obs(t)[0] == 0.25);
    }
    SUBCASE("observations stay in the unit cube") {
        const auto p = random_ergodic_chain(11, 3);
        const auto traj = p.sample(5000, 9);
        for (double v : traj.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    SUBCASE("concurrent sampling matches serial") {
        const auto p = stay09();
        const auto want1 = p.sample(2000, 1).states;
        const auto want2 = p.sample(2000, 2).states;
        std::vector<int> got1, got2;
        std::thread t1([&] { got1 = p.sample(2000, 1).states; });
        std::thread t2([&] { got2 = p.sample(2000, 2).states; });
        t1.join();
        t2.join();
        CHECK(got1 == want1);
        CHECK(got2 == want2);
    }
}

TEST_CASE("beta coefficients") {
    const auto p = stay09();

    SUBCASE("stay-0.9 values: 0.5 * 0.8^m") {
        CHECK(p.beta(1) == doctest::Approx(0.4).epsilon(1e-12));
        CHECK(p.beta(2) == doctest::Approx(0.32).epsilon(1e-12));
        for (int m = 1; m <= 20; ++m)
            CHECK(std::abs(p.beta(m) - 0.5 * std::pow(0.8, m)) <= 1e-12);
    }
    SUBCASE("iid chain mixes instantly") {
        const auto q = iid05();
        for (int m : {1, 3, 10}) CHECK(q.beta(m) == doctest::Approx(0.0).epsilon(1e-15));
    }
    SUBCASE("matches the dense matrix-power brute force") {
        for (std::uint64_t seed : {3u, 4u, 5u}) {
            const auto q = random_ergodic_chain(seed, 3);
            for (int m = 1; m <= 20; ++m)
                CHECK(std::abs(q.beta(m) - beta_brute_force(q, m)) <= 1e-12);
        }
    }
    SUBCASE("nonincreasing in m") {
        for (std::uint64_t seed : {6u, 7u}) {
            const auto q = random_ergodic_chain(seed, 4);
            for (int m = 1; m < 20; ++m) CHECK(q.beta(m + 1) <= q.beta(m) + 1e-12);
        }
    }
    SUBCASE("geometric decay at the second eigenvalue rate") {
        // stay-p symmetric chains have second eigenvalue 2p-1.
        for (double stay : {0.9, 0.7, 0.6}) {
            const auto q =
                MarkovProcess::build(kernel2(stay, 1 - stay, 1 - stay, stay), embed01(), 1);
            const double rho = 2 * stay - 1;
            double c = 0.0;
            for (int m = 1; m <= 5; ++m) c = std::max(c, q.beta(m) / std::pow(rho, m));
            for (int m = 1; m <= 20; ++m) CHECK(q.beta(m) <= c * std::pow(rho, m) + 1e-12);
        }
    }
}

TEST_CASE("empirical state frequencies match the stationary law") {
    const auto p = stay09();
    const std::size_t T = 100000;
    const auto traj = p.sample(T, 2024);
    std::vector<double> freq(2, 0.0);
    for (int s : traj.states) freq[s] += 1.0;
    for (auto& f : freq) f /= static_cast<double>(T);
    for (int s = 0; s < 2; ++s) {
        const double pi = p.stationary()[s];
        const double tol = 3.0 * std::sqrt(pi * (1 - pi) / static_cast<double>(T));
        CHECK(std::abs(freq[s] - pi) <= tol);
    }
}

TEST_CASE("second-order chains") {
    // d=2 over 2 states: rows indexed by (older, newer).
    Matrix k(4, 2);
    const double rows[4][2] = {{0.2, 0.8}, {0.6, 0.4}, {0.4, 0.6}, {0.8, 0.2}};
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 2; ++c) k(r, c) = rows[r][c];
    const auto p = MarkovProcess::build(std::move(k), embed01(), 2);

    const int ctx01[] = {0, 1};
    CHECK(p.context_index(ctx01) == 1);
    CHECK(p.context_states(2) == std::vector<int>{1, 0});
    CHECK(p.embed_context(ctx01) == std::vector<double>{0.0, 1.0});

    // The mixing coefficient lives on the context chain for higher orders.
    for (int m = 1; m <= 10; ++m)
        CHECK(std::abs(p.beta(m) - beta_brute_force(p, m)) <= 1e-12);

    const auto traj = p.sample(20000, 3);
    CHECK(traj.size() == 20000);
    // The empirical law of context pairs should roughly match pi.
    std::vector<double> freq(4, 0.0);
    for (std::size_t t = 1; t < traj.size(); ++t) {
        const int ctx[] = {traj.states[t - 1], traj.states[t]};
        freq[p.context_index(ctx)] += 1.0;
    }
    for (int c = 0; c < 4; ++c) {
        freq[c] /= static_cast<double>(traj.size() - 1);
        CHECK(std::abs(freq[c] - p.stationary()[c]) < 0.02);
    }
}

TEST_CASE("ar source") {
    SUBCASE("deterministic recursion halves") {
        ArProcess p;
        p.coeffs = {0.5};
        p.init = {1.0};
        const auto traj = sample_ar(p, 4, 1);
        CHECK(traj.data[0] == 1.0);
        CHECK(traj.data[1] == 0.5);
        CHECK(traj.data[2] == 0.25);
        CHECK(traj.data[3] == 0.125);
    }
    SUBCASE("zero coefficients decay to zero after the init") {
        // With no feedback and no noise the recursion emits the clamped zero,
        // so only the first output carries the initial value.
        ArProcess p;
        p.coeffs = {0.0};
        p.init = {0.5};
        const auto traj = sample_ar(p, 4, 1);
        CHECK(traj.data[0] == 0.5);
        for (std::size_t t = 1; t < 4; ++t) CHECK(traj.data[t] == 0.0);
    }
    SUBCASE("huge noise still lands inside the clamp range") {
        ArProcess p;
        p.coeffs = {0.3};
        p.init = {0.5};
        p.noise_half_width = 10.0;
        const auto traj = sample_ar(p, 2000, 99);
        for (double v : traj.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    SUBCASE("coefficient norm validated") {
        ArProcess p;
        p.coeffs = {0.7, 0.4};
        p.init = {0.5, 0.5};
        CHECK_THROWS_AS(sample_ar(p, 10, 1), ConfigError);
    }
}

TEST_CASE("trajectory csv round trip") {
    const auto p = random_ergodic_chain(15, 3);
    const auto traj = p.sample(64, 123);
    std::ostringstream first;
    write_trajectory_csv(traj, first);
    std::istringstream in(first.str());
    const auto parsed = read_trajectory_csv(in);
    CHECK(parsed.dim == traj.dim);
    CHECK(parsed.data == traj.data);  // 17 digits round-trips doubles exactly
    std::ostringstream second;
    write_trajectory_csv(parsed, second);
    CHECK(first.str() == second.str());
}
