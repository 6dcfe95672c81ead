#include "doctest.h"

#include "gdk/schedule.hpp"

using namespace gdk;

TEST_SUITE_BEGIN("schedule");

TEST_CASE("single step linear schedule") {
    auto s = build_schedule(1, 0.1, 0.1, BetaSpacing::Linear);
    REQUIRE(s.T == 1);
    CHECK(s.beta(1) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(s.alpha_bar(0) == 1.0);
}

TEST_CASE("two step linear schedule cumulative product") {
    auto s = build_schedule(2, 0.1, 0.2, BetaSpacing::Linear);
    CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(s.alpha_bar(2) == doctest::Approx(0.72).epsilon(1e-15));
}

TEST_CASE("default scaled-linear schedule matches the high-precision product") {
    // Golden value from a 60-digit decimal evaluation of
    // prod_{t=1..1000} (1 - (sqrt(b1) + (t-1)/(T-1)*(sqrt(bT)-sqrt(b1)))^2)
    // with b1 = 0.00085, bT = 0.012, recorded before this implementation.
    const double golden = 0.004660098513077240;
    auto s = build_schedule(1000, 0.00085, 0.012, BetaSpacing::ScaledLinear);
    CHECK(std::abs(s.alpha_bar(1000) - golden) <= 5e-15);
    CHECK(s.beta(1) == doctest::Approx(0.00085).epsilon(1e-12));
    CHECK(s.beta(1000) == doctest::Approx(0.012).epsilon(1e-12));
}

TEST_CASE("schedule invariants hold for representative configurations") {
    struct Cfg {
        int T;
        double b0, b1;
        BetaSpacing sp;
    };
    for (Cfg cfg : {Cfg{1000, 0.00085, 0.012, BetaSpacing::ScaledLinear},
                    Cfg{1000, 0.0001, 0.02, BetaSpacing::Linear},
                    Cfg{7, 0.01, 0.3, BetaSpacing::Linear},
                    Cfg{1, 0.5, 0.5, BetaSpacing::ScaledLinear}}) {
        auto s = build_schedule(cfg.T, cfg.b0, cfg.b1, cfg.sp);
        double prev = 1.0;
        for (int t = 1; t <= s.T; ++t) {
            CHECK(s.beta(t) > 0.0);
            CHECK(s.beta(t) < 1.0);
            CHECK(s.alpha(t) > 0.0);
            CHECK(s.alpha(t) < 1.0);
            CHECK(s.alpha_bar(t) < prev);  // strictly decreasing
            CHECK(std::abs(s.alpha_bar(t) - s.alpha(t) * prev) <= 1e-12);
            prev = s.alpha_bar(t);
        }
        CHECK(s.alpha_bar(s.T) > 0.0);
    }
}

TEST_CASE("invalid schedule arguments are rejected") {
    CHECK_THROWS_AS(build_schedule(0, 0.1, 0.2, BetaSpacing::Linear), std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(10, 0.0, 0.2, BetaSpacing::Linear), std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(10, 0.1, 1.0, BetaSpacing::Linear), std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(10, 0.3, 0.2, BetaSpacing::Linear), std::invalid_argument);
    auto s = build_schedule(10, 0.1, 0.2, BetaSpacing::Linear);
    CHECK_THROWS_AS(s.alpha_bar(11), std::invalid_argument);
    CHECK_THROWS_AS(s.beta(0), std::invalid_argument);
}

TEST_SUITE_END();
