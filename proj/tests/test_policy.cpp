#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "refmarket/policy.hpp"

using namespace refmarket;

namespace {

Scenario workhorse()
{
    return {ValueDistribution::two_point(0.0, 1.0, 0.05), GroupParams{}, {0.7, 0.3}, 0.0, {}};
}

Scenario three_value(double e_g)
{
    GroupParams p;
    p.n_b = p.n_g = 0.7;
    ValueDistribution F({{0.0, 1.0 / 3.0}, {1.0 / 3.0, 1.0 / 3.0}, {1.0, 1.0 / 3.0}});
    return {F, p, {1.0 - e_g, e_g}, 0.0, {}};
}

}  // namespace

TEST_SUITE("policy") {

TEST_CASE("zero-size policy is the plain round")
{
    auto s = workhorse();
    auto base = step(s.state, s.params, s.F, s.w_min).second;
    for (AAKind k : {AAKind::DemoteBlue, AAKind::PromoteGreen}) {
        auto o = apply_aa(s, {k, 0.0, 0});
        CHECK(o.next.e_g == base.next.e_g);
        CHECK(o.production == base.production);
        CHECK(o.wage_gap() == base.wage_gap());
    }
}

TEST_CASE("infeasible sizes name the cap")
{
    auto s = workhorse();
    auto caps = aa_caps(s);
    CHECK(caps.demote_blue == doctest::Approx(0.05 * (1.0 - std::exp(-0.7))));
    CHECK(caps.promote_green == doctest::Approx(0.95 * (1.0 - std::exp(-0.3))));
    try {
        apply_aa(s, {AAKind::DemoteBlue, caps.demote_blue * 1.5, 0});
        FAIL("expected a policy error");
    } catch (const PolicyError& e) {
        CHECK(std::string(e.what()).find("blue") != std::string::npos);
    }
    CHECK_THROWS_AS(apply_aa(s, {AAKind::PromoteGreen, -0.1, 0}), PolicyError);
}

TEST_CASE("demote-blue round matches the closed form")
{
    auto s = workhorse();
    for (double size : {0.001, 0.004, 0.01}) {
        auto o = apply_aa(s, {AAKind::DemoteBlue, size, 0});
        auto ref = oracle::two_value_round<double>(0.7, 0.3, 0.05, size);
        CHECK(o.next.e_g == doctest::Approx(ref.next_g).epsilon(1e-12));
        CHECK(o.production == doctest::Approx(ref.production).epsilon(1e-12));
        CHECK(o.wage_gap() == doctest::Approx(ref.wage_gap).epsilon(1e-10));
    }
}

TEST_CASE("one-time demote-blue: lower output now, better afterwards where resolvable")
{
    auto s = workhorse();
    auto rows = compare_policy(s, {AAKind::DemoteBlue, 0.004, 0}, 21);
    CHECK(rows[0].production_policy < rows[0].production_base);
    CHECK(rows[0].e_g_policy > rows[0].e_g_base);
    for (std::size_t t = 1; t < rows.size(); ++t) {
        CHECK(resolved_sign(rows[t].e_g_policy, rows[t].e_g_base) >= 0);
        CHECK(resolved_sign(rows[t].production_policy, rows[t].production_base) >= 0);
        CHECK(resolved_sign(rows[t].wage_gap_base, rows[t].wage_gap_policy, 0.05) >= 0);  // wages are O(f_H)
    }
    CHECK(rows[1].e_g_policy > rows[1].e_g_base);
    CHECK(rows[1].production_policy > rows[1].production_base);
    CHECK(rows[1].wage_gap_policy < rows[1].wage_gap_base);
}

TEST_CASE("promote-green reaching the same target costs a different amount")
{
    auto s = workhorse();
    const double target = 0.002;
    const double sd = aa_size_for_target(s, AAKind::DemoteBlue, target);
    const double sp = aa_size_for_target(s, AAKind::PromoteGreen, target);
    auto base = step(s.state, s.params, s.F, s.w_min).second;
    auto od = apply_aa(s, {AAKind::DemoteBlue, sd, 0});
    auto op = apply_aa(s, {AAKind::PromoteGreen, sp, 0});
    CHECK(od.next.e_g - base.next.e_g == doctest::Approx(target).epsilon(1e-9));
    CHECK(op.next.e_g - base.next.e_g == doctest::Approx(target).epsilon(1e-9));
    CHECK(std::abs(od.production - op.production) > 1e-6);
    CHECK_THROWS_AS(aa_size_for_target(s, AAKind::DemoteBlue, 0.1), PolicyError);
}

TEST_CASE("shifting employment toward green")
{
    auto s = workhorse();
    auto rep = aa_multiplier_check(s, {0.0, 0.01}, 20);
    CHECK_FALSE(rep.improved[0]);  // identical trajectories are not strictly better
    CHECK(rep.resolved_periods[0] == 0);
    CHECK(rep.first_reversal[1] == -1);
    CHECK(rep.resolved_periods[1] >= 2);
    REQUIRE(rep.largest_passing_resolved.has_value());
    CHECK(*rep.largest_passing_resolved == doctest::Approx(0.01));

    // Beyond double resolution the wide-precision oracle carries the comparison.
    using W = oracle::Wide;
    W a_b = 0.7, a_g = 0.3, b_b = W(0.7) - W(0.01), b_g = W(0.3) + W(0.01);
    for (int t = 0; t < 20; ++t) {
        auto ra = oracle::two_value_round<W>(a_b, a_g, W(0.05));
        auto rb = oracle::two_value_round<W>(b_b, b_g, W(0.05));
        CHECK(rb.next_g > ra.next_g);
        CHECK(rb.production > ra.production);
        a_b = ra.next_b; a_g = ra.next_g;
        b_b = rb.next_b; b_g = rb.next_g;
    }
}

TEST_CASE("a large shift across the regime switch backfires")
{
    auto s = three_value(0.350);
    auto rep = aa_multiplier_check(s, {0.001, 0.01}, 1);
    CHECK(rep.first_reversal[1] == 0);
    CHECK(rep.first_reversal[0] == -1);
}

TEST_CASE("direction rule")
{
    CHECK(optimal_aa_direction(0.5, 0.5, 0.0, 1.0).direction == AADirection::Indifferent);
    auto d = optimal_aa_direction(0.9, 0.5, 0.0, 1.0);
    CHECK(d.direction == AADirection::DemoteBlue);
    CHECK(d.promote_ratio == doctest::Approx(0.2));
    CHECK(d.demote_ratio == doctest::Approx(1.8));
    CHECK(optimal_aa_direction(0.1, 0.5, 0.0, 1.0).direction == AADirection::PromoteGreen);
    CHECK_THROWS_AS(optimal_aa_direction(0.5, 1.5, 0.0, 1.0), DomainError);
}

TEST_CASE("direction rule minimizes the pool-level loss (property)")
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 5000; ++i) {
        const double vL = u(rng), vH = vL + 0.01 + u(rng);
        const double pool = vL + (vH - vL) * (0.01 + 0.98 * u(rng));
        const double fg = 0.01 + 0.98 * u(rng);
        oracle::PoolLevel pl{fg, pool, vL, vH};
        const double d = 1e-4;
        CHECK(promote_loss_per_unit(fg, pool, vL) * d == doctest::Approx(pl.promote_loss(d)).epsilon(1e-12));
        CHECK(demote_loss_per_unit(fg, pool, vH) * d == doctest::Approx(pl.demote_loss(d)).epsilon(1e-12));
        auto r = optimal_aa_direction(fg, pool, vL, vH);
        const double chosen = r.direction == AADirection::PromoteGreen ? pl.promote_loss(d) : pl.demote_loss(d);
        CHECK(chosen <= std::min(pl.promote_loss(d), pl.demote_loss(d)) * (1.0 + 1e-12));
        CHECK(chosen <= pl.mixture_loss(d) * (1.0 + 1e-12));
    }
}

TEST_CASE("macro shock")
{
    auto s = workhorse();
    auto none = macro_shock(s, {0.0});
    CHECK(none.shocked.production == none.baseline.production);
    CHECK(none.wage_order == Dominance::Equal);
    auto m = macro_shock(s, {0.2});
    CHECK(m.pool_active);
    CHECK(m.production_down);
    CHECK(m.productivity_up);
    CHECK(m.wage_order == Dominance::FirstDominates);
    CHECK(m.lost_screened_b > 0.0);
    CHECK(m.lost_screened_g > 0.0);
    CHECK_THROWS_AS(macro_shock(s, {1.0}), DomainError);
}

}
