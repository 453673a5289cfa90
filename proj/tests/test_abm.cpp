#include <cmath>

#include "doctest.h"
#include "refmarket/abm.hpp"

using namespace refmarket;

namespace {

AbmConfig small(std::int64_t firms, AbmMode mode = AbmMode::Myopic)
{
    AbmConfig c;
    c.firm_count = firms;
    c.mode = mode;
    c.periods = 5;
    c.seed = 17;
    return c;
}

bool same(const AbmTrajectory& a, const AbmTrajectory& b)
{
    if (a.periods.size() != b.periods.size()) return false;
    for (std::size_t t = 0; t < a.periods.size(); ++t) {
        const auto& x = a.periods[t];
        const auto& y = b.periods[t];
        if (x.next_e_g != y.next_e_g || x.next_e_b != y.next_e_b || x.production != y.production ||
            x.mean_wage_g != y.mean_wage_g || x.redraw_draws != y.redraw_draws || x.employed != y.employed)
            return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("abm") {

TEST_CASE("fixed seed reproduces the run across thread counts")
{
    for (AbmMode mode : {AbmMode::Myopic, AbmMode::Redraw}) {
        auto c = small(20000, mode);
        auto a = simulate_abm(c);
        auto b = simulate_abm(c);
        c.threads = 4;
        auto d = simulate_abm(c);
        CHECK(same(a, b));
        CHECK(same(a, d));
        c.seed = 18;
        CHECK_FALSE(same(a, simulate_abm(c)));
    }
    auto c = small(20000);
    c.matching = PoolMatching::Sequential;
    auto s1 = simulate_abm(c);
    c.threads = 3;
    CHECK(same(s1, simulate_abm(c)));
}

TEST_CASE("a single firm runs without crashing")
{
    for (AbmMode mode : {AbmMode::Myopic, AbmMode::Redraw}) {
        auto t = simulate_abm(small(1, mode));
        REQUIRE(t.periods.size() == 5);
        for (const auto& p : t.periods) {
            CHECK(p.employed + p.unemployed == p.workers);
            CHECK(p.employed <= 1);
        }
    }
    CHECK_THROWS_AS(simulate_abm(small(0)), DomainError);
}

TEST_CASE("every worker is hired or unemployed each period")
{
    for (AbmMode mode : {AbmMode::Myopic, AbmMode::Redraw}) {
        auto t = simulate_abm(small(50000, mode));
        for (const auto& p : t.periods) {
            CHECK(p.employed + p.unemployed == p.workers);
            CHECK(p.workers == t.blue_workers + t.green_workers);
            CHECK(p.employed == t.firm_count);  // the pool is large enough to fill every firm
            CHECK(p.next_e_b + p.next_e_g == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("myopic sampling stays near the continuum trajectory")
{
    auto c = small(200000);
    c.periods = 8;
    auto t = simulate_abm(c);
    auto analytic = simulate(t.initial_state, c.params, c.F, c.w_min, c.periods, c.opt);
    for (std::size_t i = 0; i < t.periods.size(); ++i) {
        const auto& p = t.periods[i];
        REQUIRE(p.stderr_e_g > 0.0);
        CHECK(std::abs(p.next_e_g - analytic[i].next.e_g) < 5.0 * p.stderr_e_g);
        CHECK(std::abs(p.hire_ref_g - analytic[i].green.hired_referral) < 5.0 * p.stderr_ref_g + 1e-12);
    }
}

TEST_CASE("redraw firms tilt the first round toward greens")
{
    auto c = small(200000, AbmMode::Redraw);
    c.periods = 1;
    auto r = simulate_abm(c);
    c.mode = AbmMode::Myopic;
    c.matching = PoolMatching::Sequential;
    auto m = simulate_abm(c);
    CHECK(r.periods[0].premium > 0.0);
    CHECK(r.periods[0].redraw_draws > 0);
    CHECK(r.periods[0].redraw_cost > 0.0);
    CHECK(r.periods[0].next_e_g > m.periods[0].next_e_g);
    CHECK(m.periods[0].redraw_draws == 0);
}

TEST_CASE("convergence study")
{
    AbmConfig c = small(1000);
    c.periods = 3;
    auto a = convergence_study(c, {1000, 10000, 100000}, 4);
    auto b = convergence_study(c, {1000, 10000, 100000}, 4);
    REQUIRE(a.points.size() == 3);
    CHECK(a.points[0].errors == b.points[0].errors);
    CHECK(a.slope == b.slope);
    CHECK(a.slope < -0.2);
    CHECK_THROWS_AS(convergence_study(c, {1000}, 1), DomainError);

    // Monte Carlo error should fall like N^-1/2 over three decades.
    AbmConfig w;
    w.periods = 3;
    w.seed = 11;
    auto wide = convergence_study(w, {1000, 10000, 100000, 1000000}, 6);
    CHECK(wide.slope > -0.6);
    CHECK(wide.slope < -0.4);
    c.mode = AbmMode::Redraw;
    CHECK_THROWS_AS(convergence_study(c, {1000}, 3), DomainError);
}

}
