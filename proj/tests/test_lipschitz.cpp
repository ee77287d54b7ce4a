#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mixcast/errors.hpp"
#include "mixcast/lipschitz_fn.hpp"
#include "mixcast/rng.hpp"
#include "mixcast/spectral_mlp.hpp"

using namespace mixcast;

namespace {

std::vector<FitSample> two_point_sample() {
    return {{{0.0}, {0.0}}, {{1.0}, {2.0}}};
}

std::vector<FitSample> random_sample(std::uint64_t seed, std::size_t count, int in_dim) {
    Xoshiro256pp rng(seed);
    std::vector<FitSample> s(count);
    for (auto& fs : s) {
        fs.x.resize(in_dim);
        for (auto& v : fs.x) v = rng.uniform();
        fs.y = {rng.uniform()};
    }
    return s;
}

Matrix diag2(double a, double b) {
    Matrix m(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

Matrix rotation(double theta) {
    Matrix r(2, 2);
    r(0, 0) = std::cos(theta);
    r(0, 1) = -std::sin(theta);
    r(1, 0) = std::sin(theta);
    r(1, 1) = std::cos(theta);
    return r;
}

}  // namespace

TEST_CASE("capacity schedule") {
    const Schedule s{1.0, 1};
    CHECK(s(2.0) == 1.0);  // ln 2 < 1: floored
    CHECK(s(std::exp(1.0)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s(std::exp(3.0)) == doctest::Approx(std::pow(3.0, 1.0 / 3.0)).epsilon(1e-12));

    const Schedule doubled{2.0, 1};
    for (double t : {2.0, 10.0, 1e4, 1e8}) CHECK(doubled(t) == doctest::Approx(2.0 * s(t)));

    // Nondecreasing, strictly increasing past the floor, unbounded growth.
    const Schedule s5{0.7, 4};
    double prev = 0.0;
    for (int k = 1; k <= 9; ++k) {
        const double cur = s5(std::pow(10.0, k));
        CHECK(cur >= prev);
        if (k >= 2) CHECK(cur > prev);
        prev = cur;
    }
    CHECK(s5(1e300) > 2.0 * s5(10.0));  // (ln T)^(1/6) grows without bound, slowly
}

TEST_CASE("envelope evaluation") {
    SUBCASE("two anchors pin the midpoint") {
        LipschitzFn f({{0.0}, {1.0}}, {{0.0}, {1.0}}, 1.0);
        CHECK(f.eval(std::vector<double>{0.5})[0] == doctest::Approx(0.5).epsilon(1e-12));
        LipschitzFn g({{0.0}, {1.0}}, {{0.0}, {1.0}}, 2.0);
        CHECK(g.eval(std::vector<double>{0.5})[0] == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("single anchor extends constantly") {
        LipschitzFn f({{0.3}}, {{0.7}}, 5.0);
        for (double x : {0.0, 0.3, 0.9})
            CHECK(f.eval(std::vector<double>{x})[0] == doctest::Approx(0.7).epsilon(1e-12));
    }
    SUBCASE("anchors are interpolated exactly when feasible") {
        const auto samples = random_sample(3, 20, 2);
        const auto f = mcshane_fit(samples, 4.0, LossFn::squared());
        for (std::size_t i = 0; i < f.anchor_count(); ++i)
            CHECK(f.eval(f.points()[i])[0] == doctest::Approx(f.values()[i][0]).epsilon(1e-9));
    }
}

TEST_CASE("mcshane fit, squared loss") {
    SUBCASE("two-point problem splits the excess") {
        const auto f = mcshane_fit(two_point_sample(), 1.0, LossFn::squared());
        CHECK(f.values()[0][0] == doctest::Approx(0.5).epsilon(1e-7));
        CHECK(f.values()[1][0] == doctest::Approx(1.5).epsilon(1e-7));
    }
    SUBCASE("feasible targets are returned unchanged") {
        std::vector<FitSample> s{{{0.0}, {0.1}}, {{0.5}, {0.4}}, {{1.0}, {0.6}}};
        const auto f = mcshane_fit(s, 1.0, LossFn::squared());
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(f.values()[i][0] == doctest::Approx(s[i].y[0]).epsilon(1e-12));
    }
    SUBCASE("single sample keeps its target") {
        std::vector<FitSample> s{{{0.2, 0.8}, {0.9}}};
        const auto f = mcshane_fit(s, 0.01, LossFn::squared());
        CHECK(f.values()[0][0] == 0.9);
    }
    SUBCASE("duplicate points collapse to the weighted mean") {
        std::vector<FitSample> s{{{0.5}, {0.2}}, {{0.5}, {0.8}}, {{0.5}, {0.5}}};
        const auto f = mcshane_fit(s, 1.0, LossFn::squared());
        CHECK(f.anchor_count() == 1);
        CHECK(f.values()[0][0] == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("fits stay feasible") {
        for (std::uint64_t seed : {5u, 6u, 7u}) {
            const auto f = mcshane_fit(random_sample(seed, 30, 2), 0.5, LossFn::squared());
            CHECK(f.max_pair_violation() <= 1e-8);
        }
    }
    SUBCASE("sweep cap raises") {
        McshaneOptions opt;
        opt.max_sweeps = 1;
        opt.constraint_tol = 1e-14;
        CHECK_THROWS_AS(mcshane_fit(two_point_sample(), 0.2, LossFn::squared(), opt),
                        NoConvergenceError);
    }
}

TEST_CASE("mcshane fit, quantile losses") {
    SUBCASE("feasible targets unchanged") {
        std::vector<FitSample> s{{{0.0}, {0.1}}, {{0.6}, {0.4}}, {{1.0}, {0.6}}};
        const auto f = mcshane_fit(s, 1.0, LossFn::absolute());
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(f.values()[i][0] == doctest::Approx(s[i].y[0]).epsilon(1e-9));
    }
    SUBCASE("constrained optimum reached") {
        // min |v1| + |v2-2| s.t. |v1-v2| <= 1 has optimal value 1 on a flat set.
        const auto f = mcshane_fit(two_point_sample(), 1.0, LossFn::absolute());
        const double obj =
            std::abs(f.values()[0][0] - 0.0) + std::abs(f.values()[1][0] - 2.0);
        CHECK(obj == doctest::Approx(1.0).epsilon(1e-3));
        CHECK(f.max_pair_violation() <= 1e-8);
    }
    SUBCASE("single group pinball sits at the quantile") {
        std::vector<FitSample> s{{{0.5}, {0.2}}, {{0.5}, {0.6}}, {{0.5}, {0.9}},
                                 {{0.5}, {0.4}}, {{0.5}, {0.1}}};
        const auto f = mcshane_fit(s, 1.0, LossFn::pinball(0.4));
        // Lower 0.4-quantile of {0.1,0.2,0.4,0.6,0.9}: 0.2.
        CHECK(f.values()[0][0] == doctest::Approx(0.2).epsilon(1e-9));
    }
}

TEST_CASE("erm dominance over random in-class candidates") {
    const double L = 1.5;
    const auto samples = random_sample(11, 25, 2);
    const auto fit = mcshane_fit(samples, L, LossFn::squared());
    double fit_loss = 0.0;
    for (const auto& s : samples) fit_loss += LossFn::squared().eval(fit.eval(s.x), s.y);

    const auto family = make_witness_family(2, 1, L, 100, 6, 77);
    for (const auto& h : family) {
        double h_loss = 0.0;
        for (const auto& s : samples) h_loss += LossFn::squared().eval(h.eval(s.x), s.y);
        CHECK(fit_loss <= h_loss + 1e-6);
    }
}

TEST_CASE("adjacent-pair reduction matches the full pairwise solve") {
    // Embedding scalar contexts into 2-d with a zero coordinate preserves all
    // distances but routes the fit through the full constraint set.
    for (std::uint64_t seed : {101u, 102u, 103u}) {
        const auto line = random_sample(seed, 40, 1);
        std::vector<FitSample> plane = line;
        for (auto& s : plane) s.x.push_back(0.0);
        for (double L : {0.3, 1.0}) {
            const auto a = mcshane_fit(line, L, LossFn::squared());
            const auto b = mcshane_fit(plane, L, LossFn::squared());
            REQUIRE(a.anchor_count() == b.anchor_count());
            // Group order differs only if points collide; match by coordinate.
            for (std::size_t i = 0; i < a.anchor_count(); ++i) {
                bool matched = false;
                for (std::size_t j = 0; j < b.anchor_count(); ++j) {
                    if (b.points()[j][0] != a.points()[i][0]) continue;
                    CHECK(std::abs(a.values()[i][0] - b.values()[j][0]) <= 1e-6);
                    matched = true;
                }
                CHECK(matched);
            }
        }
    }
}

TEST_CASE("nested classes: empirical loss nonincreasing in L") {
    const auto samples = random_sample(21, 20, 1);
    double prev = std::numeric_limits<double>::infinity();
    for (double L : {0.05, 0.2, 0.5, 1.0, 3.0, 10.0}) {
        const auto fit = mcshane_fit(samples, L, LossFn::squared());
        double loss = 0.0;
        for (const auto& s : samples) loss += LossFn::squared().eval(fit.eval(s.x), s.y);
        CHECK(loss <= prev + 1e-9);
        prev = loss;
    }
}

TEST_CASE("global lipschitz property of the envelope") {
    const double L = 0.8;
    const auto fit = mcshane_fit(random_sample(31, 25, 2), L, LossFn::squared());
    Xoshiro256pp rng(32);
    for (int i = 0; i < 10000; ++i) {
        std::vector<double> a{rng.uniform(), rng.uniform()};
        std::vector<double> b{rng.uniform(), rng.uniform()};
        const double dist = std::hypot(a[0] - b[0], a[1] - b[1]);
        const double diff = std::abs(fit.eval(a)[0] - fit.eval(b)[0]);
        CHECK(diff <= L * dist + 1e-8);
    }
}

TEST_CASE("spectral norm") {
    CHECK(spectral_norm(Matrix::identity(2)) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(spectral_norm(diag2(3.0, 1.0)) == doctest::Approx(3.0).epsilon(1e-10));
    Matrix shift(2, 2);
    shift(0, 1) = 2.0;  // nilpotent
    CHECK(spectral_norm(shift) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(spectral_norm(Matrix(3, 4)) == 0.0);

    SUBCASE("rotations preserve the singular values") {
        Xoshiro256pp rng(8);
        for (int i = 0; i < 20; ++i) {
            const double smax = 0.5 + 3.0 * rng.uniform();
            const double smin = smax * rng.uniform();
            const auto a = matmul(rotation(rng.uniform(0, 6.28)),
                                  matmul(diag2(smax, smin), rotation(rng.uniform(0, 6.28))));
            CHECK(spectral_norm(a) == doctest::Approx(smax).epsilon(1e-8));
        }
    }
}

TEST_CASE("spectral projection") {
    SUBCASE("scales down to the cap") {
        const auto p = project_spectral(diag2(4.0, 1.0), 2.0);
        CHECK(p(0, 0) == doctest::Approx(2.0).epsilon(1e-8));
        CHECK(p(1, 1) == doctest::Approx(0.5).epsilon(1e-8));
        CHECK(spectral_norm(p) <= 2.0 + 1e-6);
    }
    SUBCASE("inside the cap: unchanged") {
        const auto m = diag2(1.5, 0.25);
        const auto p = project_spectral(m, 2.0);
        CHECK(p.a == m.a);
    }
    SUBCASE("zero matrix unchanged") {
        const auto p = project_spectral(Matrix(2, 2), 1.0);
        CHECK(p.a == std::vector<double>{0, 0, 0, 0});
    }
}

TEST_CASE("network lipschitz bound") {
    SUBCASE("product of layer norms") {
        SpectralMlp mlp({diag2(2.0, 0.5), diag2(3.0, 1.0)}, {{0.0, 0.0}, {0.0, 0.0}},
                        {2.0, 3.0});
        CHECK(mlp.lipschitz_bound() == doctest::Approx(6.0).epsilon(1e-9));
    }
    SUBCASE("identity layers give 1") {
        SpectralMlp mlp({Matrix::identity(2), Matrix::identity(2)}, {{0.0, 0.0}, {0.0, 0.0}},
                        {1.0, 1.0});
        CHECK(mlp.lipschitz_bound() == doctest::Approx(1.0).epsilon(1e-10));
    }
    SUBCASE("projection enforces the caps") {
        auto fit = mlp_fit(random_sample(41, 40, 2), 2.0, LossFn::squared(),
                           MlpConfig{2, 8, 5, 16, 0.3, 9});
        const double cap = std::sqrt(2.0);
        for (std::size_t l = 0; l < fit.layer_count(); ++l)
            CHECK(spectral_norm(fit.weight(l)) <= cap + 1e-6);
        CHECK(fit.lipschitz_bound() <= 2.0 + 1e-6);
    }
}

TEST_CASE("mlp training") {
    SUBCASE("constant targets are absorbed by the bias") {
        std::vector<FitSample> s;
        Xoshiro256pp rng(51);
        for (int i = 0; i < 32; ++i) s.push_back({{rng.uniform(), rng.uniform()}, {0.35}});
        const auto fit = mlp_fit(s, 0.5, LossFn::squared(), MlpConfig{2, 8, 150, 8, 0.3, 3});
        CHECK(mlp_loss(fit, s, LossFn::squared()) <= 1e-3);
    }
    SUBCASE("a 1-Lipschitz ramp is inside the class at budget 1") {
        std::vector<FitSample> s;
        for (int i = 0; i < 64; ++i) {
            const double x = static_cast<double>(i) / 63.0;
            s.push_back({{x}, {x}});
        }
        const auto fit = mlp_fit(s, 1.0, LossFn::squared(), MlpConfig{2, 8, 2000, 16, 0.5, 4});
        CHECK(mlp_loss(fit, s, LossFn::squared()) <= 1e-3);
        // The envelope route fits the same data exactly.
        const auto env = mcshane_fit(s, 1.0, LossFn::squared());
        double env_loss = 0.0;
        for (const auto& fs : s) env_loss += LossFn::squared().eval(env.eval(fs.x), fs.y);
        CHECK(env_loss / s.size() <= 1e-12);
    }
    SUBCASE("a collapsed budget cannot beat the best constant") {
        std::vector<FitSample> s;
        Xoshiro256pp rng(52);
        double mean = 0.0;
        for (int i = 0; i < 40; ++i) {
            const double y = rng.uniform();
            s.push_back({{rng.uniform()}, {y}});
            mean += y;
        }
        mean /= 40.0;
        double best_constant = 0.0;
        for (const auto& fs : s)
            best_constant += LossFn::squared().eval(std::vector<double>{mean}, fs.y);
        best_constant /= 40.0;
        const auto fit = mlp_fit(s, 1e-4, LossFn::squared(), MlpConfig{2, 8, 200, 8, 0.3, 5});
        CHECK(mlp_loss(fit, s, LossFn::squared()) >= best_constant - 1e-3);
    }
    SUBCASE("deterministic in the seed") {
        const auto s = random_sample(61, 30, 2);
        const auto a = mlp_fit(s, 1.5, LossFn::squared(), MlpConfig{2, 6, 20, 8, 0.3, 11});
        const auto b = mlp_fit(s, 1.5, LossFn::squared(), MlpConfig{2, 6, 20, 8, 0.3, 11});
        for (std::size_t l = 0; l < a.layer_count(); ++l) CHECK(a.weight(l).a == b.weight(l).a);
    }
}

TEST_CASE("analytic gradients match central differences") {
    Xoshiro256pp rng(71);
    for (int trial = 0; trial < 5; ++trial) {
        auto net = mlp_fit(random_sample(100 + trial, 6, 2), 2.0, LossFn::squared(),
                           MlpConfig{2, 4, 1, 6, 0.1, 100 + static_cast<std::uint64_t>(trial)});
        const auto batch = random_sample(200 + trial, 6, 2);
        const auto g = mlp_loss_gradients(net, batch, LossFn::squared());
        const double step = 1e-5;
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < net.weight(l).a.size(); ++i) {
                const double keep = net.weight(l).a[i];
                net.weight(l).a[i] = keep + step;
                const double up = mlp_loss(net, batch, LossFn::squared());
                net.weight(l).a[i] = keep - step;
                const double dn = mlp_loss(net, batch, LossFn::squared());
                net.weight(l).a[i] = keep;
                const double fd = (up - dn) / (2 * step);
                num += (fd - g.weight[l].a[i]) * (fd - g.weight[l].a[i]);
                den += fd * fd + g.weight[l].a[i] * g.weight[l].a[i];
            }
            CHECK(std::sqrt(num) <= 1e-4 * std::max(std::sqrt(den), 1e-8));
        }
    }
}

TEST_CASE("empirical lipschitz witness") {
    using PairVec = std::vector<std::pair<std::vector<double>, std::vector<double>>>;
    SUBCASE("constants and the identity") {
        PairVec pairs{{{0.1}, {0.9}}, {{0.4}, {0.2}}};
        const Predictor constant = [](std::span<const double>) {
            return std::vector<double>{0.5};
        };
        CHECK(empirical_lipschitz(constant, pairs) == 0.0);
        const Predictor identity = [](std::span<const double> x) {
            return std::vector<double>(x.begin(), x.end());
        };
        CHECK(empirical_lipschitz(identity, pairs) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("degenerate pair throws") {
        PairVec pairs{{{0.5}, {0.5}}};
        const Predictor identity = [](std::span<const double> x) {
            return std::vector<double>(x.begin(), x.end());
        };
        CHECK_THROWS_AS(empirical_lipschitz(identity, pairs), DegeneratePairError);
    }
    SUBCASE("projected network stays under its certified bound") {
        const auto net = mlp_fit(random_sample(81, 40, 2), 1.2, LossFn::squared(),
                                 MlpConfig{3, 8, 10, 8, 0.3, 6});
        PairVec pairs;
        Xoshiro256pp rng(82);
        for (int i = 0; i < 2000; ++i)
            pairs.push_back({{rng.uniform(), rng.uniform()}, {rng.uniform(), rng.uniform()}});
        CHECK(empirical_lipschitz(net.as_predictor(), pairs) <= net.lipschitz_bound() + 1e-6);
    }
}

TEST_CASE("predictor serialisation round trip") {
    SUBCASE("envelope") {
        const auto fit = mcshane_fit(random_sample(91, 12, 2), 0.7, LossFn::squared());
        std::stringstream ss;
        fit.save(ss);
        const auto back = LipschitzFn::load(ss);
        CHECK(back.budget() == fit.budget());
        CHECK(back.points() == fit.points());
        CHECK(back.values() == fit.values());
    }
    SUBCASE("mlp") {
        const auto net = mlp_fit(random_sample(92, 10, 2), 1.1, LossFn::squared(),
                                 MlpConfig{2, 5, 3, 4, 0.2, 12});
        std::stringstream ss;
        net.save(ss);
        const auto back = SpectralMlp::load(ss);
        CHECK(back.layer_count() == net.layer_count());
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            CHECK(back.weight(l).a == net.weight(l).a);
            CHECK(back.bias(l) == net.bias(l));
        }
        Xoshiro256pp rng(93);
        for (int i = 0; i < 20; ++i) {
            const std::vector<double> x{rng.uniform(), rng.uniform()};
            CHECK(back.forward(x) == net.forward(x));
        }
    }
}
