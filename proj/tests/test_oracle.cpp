#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "mixcast/errors.hpp"
#include "mixcast/oracle.hpp"
#include "test_helpers.hpp"

using namespace mixcast;
using namespace mixcast::testutil;

namespace {
const int kCtx0[] = {0};
const int kCtx1[] = {1};
}  // namespace

TEST_CASE("conditional distributions read kernel rows") {
    const auto p = stay09();
    CHECK(conditional_distribution(p, kCtx0) == std::vector<double>{0.9, 0.1});
    CHECK(conditional_distribution(p, kCtx1) == std::vector<double>{0.1, 0.9});

    const auto iid = iid05();
    CHECK(conditional_distribution(iid, kCtx0) == conditional_distribution(iid, kCtx1));

    const int too_long[] = {0, 1};
    CHECK_THROWS_AS(conditional_distribution(p, too_long), UnknownContextError);
    const int bad_state[] = {7};
    CHECK_THROWS_AS(conditional_distribution(p, bad_state), UnknownContextError);
}

TEST_CASE("optimal actions") {
    const auto p = stay09();

    SUBCASE("squared loss: conditional mean, risk = variance/2") {
        const auto ar = optimal_action(p, LossFn::squared(), kCtx0);
        CHECK(ar.action[0] == doctest::Approx(0.1).epsilon(1e-12));
        // E[(0.1 - X)^2] = 0.09, halved by the Lipschitz rescale.
        CHECK(ar.risk == doctest::Approx(0.045).epsilon(1e-12));
    }
    SUBCASE("absolute loss: lower median of Bernoulli(0.1)") {
        const auto ar = optimal_action(p, LossFn::absolute(), kCtx0);
        CHECK(ar.action[0] == 0.0);
        CHECK(ar.risk == doctest::Approx(0.1).epsilon(1e-12));
    }
    SUBCASE("pinball loss: lower quantile") {
        // CDF(0) = 0.9 covers any tau <= 0.9.
        const auto ar = optimal_action(p, LossFn::pinball(0.25), kCtx0);
        CHECK(ar.action[0] == 0.0);
        // E rho_tau(X) / max(tau,1-tau) = 0.1 * 0.25 / 0.75
        CHECK(ar.risk == doctest::Approx(0.025 / 0.75).epsilon(1e-12));
    }
    SUBCASE("deterministic row has zero risk") {
        const auto p2 = cycle2();
        const auto ar = optimal_action(p2, LossFn::squared(), kCtx0);
        CHECK(ar.action[0] == 1.0);  // next state is certainly 1
        CHECK(ar.risk == 0.0);
    }
    SUBCASE("golden section agrees with the closed form") {
        const LossFn losses[] = {LossFn::squared(), LossFn::absolute(), LossFn::pinball(0.3)};
        for (const auto& loss : losses) {
            const auto closed = optimal_action(p, loss, kCtx0);
            const auto numeric = optimal_action_numeric(p, loss, kCtx0);
            CHECK(numeric.risk <= closed.risk + 1e-10);
            if (loss.kind() == LossKind::Squared)
                CHECK(std::abs(numeric.action[0] - closed.action[0]) <= 1e-10);
        }
        // Asymmetric chains probe means away from the embedded values.
        const auto q = MarkovProcess::build(kernel2(0.73, 0.27, 0.41, 0.59), embed01(), 1);
        for (const int* ctx : {kCtx0, kCtx1}) {
            const auto closed = optimal_action(q, LossFn::squared(), {ctx, 1});
            const auto numeric = optimal_action_numeric(q, LossFn::squared(), {ctx, 1});
            CHECK(std::abs(numeric.action[0] - closed.action[0]) <= 1e-10);
        }
    }
}

TEST_CASE("optimal risk") {
    SUBCASE("iid Bernoulli(1/2), squared: variance/2 = 0.125") {
        const auto p = iid05();
        const auto opt = optimal_risk(p, LossFn::squared(), 1);
        CHECK(opt.value == doctest::Approx(0.125).epsilon(1e-12));
    }
    SUBCASE("stay-0.9, squared: 0.045") {
        const auto p = stay09();
        const auto opt = optimal_risk(p, LossFn::squared(), 1);
        CHECK(opt.value == doctest::Approx(0.045).epsilon(1e-12));
        CHECK(opt.per_context.size() == 2);
        double total = 0.0;
        for (const auto& pc : opt.per_context) total += pc.weight * pc.opt.risk;
        CHECK(std::abs(total - opt.value) <= 1e-10);
    }
    SUBCASE("deterministic cycle: zero for every loss") {
        const auto p = cycle2();
        CHECK(optimal_risk(p, LossFn::squared(), 1).value == 0.0);
        CHECK(optimal_risk(p, LossFn::absolute(), 1).value == 0.0);
    }
    SUBCASE("extra memory does not change the value") {
        const auto p = stay09();
        const double base = optimal_risk(p, LossFn::squared(), 1).value;
        for (int d_eval : {2, 3, 5}) {
            const auto more = optimal_risk(p, LossFn::squared(), d_eval);
            CHECK(std::abs(more.value - base) <= 1e-10);
        }
        const auto p2 = MarkovProcess::build(kernel2(0.8, 0.2, 0.3, 0.7), embed01(), 1);
        const double b2 = optimal_risk(p2, LossFn::absolute(), 1).value;
        CHECK(std::abs(optimal_risk(p2, LossFn::absolute(), 3).value - b2) <= 1e-10);
    }
    SUBCASE("memory shorter than the order is rejected") {
        const auto p = stay09();
        CHECK_THROWS_AS(optimal_risk(p, LossFn::squared(), 0), UnsupportedError);
    }
    SUBCASE("context cap") {
        const auto p = stay09();
        CHECK_THROWS_AS(optimal_risk(p, LossFn::squared(), 30, 1000), ContextExplosionError);
    }
    SUBCASE("never beats a constant action") {
        const auto p = MarkovProcess::build(kernel2(0.7, 0.3, 0.4, 0.6), embed01(), 1);
        const LossFn losses[] = {LossFn::squared(), LossFn::absolute()};
        for (const auto& loss : losses) {
            const double opt = optimal_risk(p, loss, 1).value;
            for (double c : {0.0, 0.25, 0.5, 0.75, 1.0}) {
                const std::vector<double> action{c};
                const double risk = expected_loss(
                    p, loss, [&](std::span<const double>) { return action; }, 1);
                CHECK(opt <= risk + 1e-12);
            }
        }
    }
}

TEST_CASE("rescaling invariance") {
    const auto p = MarkovProcess::build(kernel2(0.85, 0.15, 0.2, 0.8), embed01(), 1);
    for (double c : {2.0, 7.5, 0.1}) {
        const auto base = LossFn::squared();
        const auto scaled = base.scaled(c);
        const auto a0 = optimal_action(p, base, kCtx0);
        const auto a1 = optimal_action(p, scaled, kCtx0);
        CHECK(a0.action == a1.action);  // argmin unaffected
        CHECK(a1.risk == doctest::Approx(c * a0.risk).epsilon(1e-12));
        const double l0 = optimal_risk(p, base, 1).value;
        const double l1 = optimal_risk(p, scaled, 1).value;
        CHECK(l1 == doctest::Approx(c * l0).epsilon(1e-12));
    }
}

TEST_CASE("expected loss of a fixed predictor") {
    const auto p = stay09();
    // Predicting the context itself: risk = E[(x_{t-1} - x_t)^2]/2 = P(flip)/2.
    const auto identity = [](std::span<const double> ctx) {
        return std::vector<double>(ctx.begin(), ctx.end());
    };
    const double risk = expected_loss(p, LossFn::squared(), identity, 1);
    CHECK(risk == doctest::Approx(0.05).epsilon(1e-12));
}
