#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "refmarket/equilibrium.hpp"

using namespace refmarket;

namespace {

MarketPrimitives half_half(double w_min)
{
    return MarketPrimitives(ValueDistribution::two_point(0.0, 1.0, 0.5), ReferralPMF({0.5, 0.5}), 2.0, w_min);
}

std::vector<oracle::Atom> to_oracle(const ValueDistribution& F)
{
    std::vector<oracle::Atom> out;
    for (const auto& a : F.atoms()) out.push_back({a.value, a.prob});
    return out;
}

ValueDistribution from_oracle(const std::vector<oracle::Atom>& F)
{
    std::vector<Atom> a;
    for (const auto& x : F) a.push_back({x.v, x.p});
    return ValueDistribution(a);
}

// Threshold by bisection on t -> max(w_min, pool mean when values below t are rejected) - t.
double bisect_threshold(const std::vector<oracle::Atom>& F, double p0, double w_min)
{
    auto g = [&](double t) {
        std::size_t cut = 0;
        while (cut < F.size() && F[cut].v < t) ++cut;
        return std::max(w_min, oracle::pool_mean(F, p0, cut, 0.0)) - t;
    };
    double lo = -1.0, hi = 2.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (g(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_SUITE("equilibrium") {

TEST_CASE("pool value hand examples")
{
    auto F = ValueDistribution::two_point(0.0, 1.0, 0.5);
    CHECK(pool_value(F, 0.5, 0.5, 0.3) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(pool_value(F, 0.5, 0.5, 0.9) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(pool_value(F, 0.2, -1.0, 1.0) == doctest::Approx(F.mean()).epsilon(1e-15));

    auto F2 = ValueDistribution::two_point(0.0, 1.0, 0.05);
    const double p0 = (std::exp(-0.3) + std::exp(-0.7)) / 2.0;
    const double direct = p0 * 0.05 / (p0 + (1.0 - p0) * 0.95);
    CHECK(pool_value(F2, p0, 0.5, 1.0) == doctest::Approx(direct).epsilon(1e-14));
    CHECK(std::abs(direct - 0.031535) < 2e-6);
}

TEST_CASE("threshold for the half-half economy")
{
    auto eq = solve_threshold(half_half(0.0));
    CHECK(eq.threshold == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(eq.pool_hiring == PoolHiring::Hire);
    CHECK(eq.mass_hired_referral == doctest::Approx(0.5));
    CHECK(eq.mass_hired_pool == doctest::Approx(0.5));

    auto shut = solve_threshold(half_half(0.5));
    CHECK(shut.threshold == doctest::Approx(0.5));
    CHECK(shut.pool_hiring == PoolHiring::NoHire);
    CHECK(shut.pool_value == doctest::Approx(1.0 / 3.0));
    CHECK(shut.mass_hired_pool == 0.0);
}

TEST_CASE("threshold for the two-value workhorse economy")
{
    auto P = mix(poisson_pmf(0.7), poisson_pmf(0.3), 1.0, 1.0);
    MarketPrimitives prim(ValueDistribution::two_point(0.0, 1.0, 0.05), P, 2.0, 0.0);
    auto eq = solve_threshold(prim);
    const double p0 = (std::exp(-0.3) + std::exp(-0.7)) / 2.0;
    CHECK(eq.threshold == doctest::Approx(p0 * 0.05 / (p0 + (1.0 - p0) * 0.95)).epsilon(1e-13));
    CHECK(lemons_gap(prim, eq) == doctest::Approx(0.05 - eq.threshold).epsilon(1e-14));
    CHECK(std::abs(lemons_gap(prim, eq) - 0.018465) < 2e-6);
}

TEST_CASE("wages")
{
    auto eq = solve_threshold(half_half(0.0));
    CHECK(wage(1.0, 2, eq) == doctest::Approx(2.0 / 3.0));
    CHECK(wage(1.0, 5, eq) == doctest::Approx(2.0 / 3.0));
    CHECK(wage(1.0, 1, eq) == 0.0);
    CHECK(wage(eq.threshold, 2, eq) == doctest::Approx(0.0));
    CHECK(wage(0.0, 0, eq) == 0.0);  // pool hire

    auto shut = solve_threshold(half_half(0.5));
    CHECK(wage(1.0, 1, shut) == 0.5);
    CHECK(wage(1.0, 2, shut) == doctest::Approx(1.0));
    CHECK_THROWS_AS(wage(0.0, 0, shut), ContractError);
    CHECK_THROWS_AS(wage(0.0, 1, shut), ContractError);
}

TEST_CASE("lemons gap vanishes as nobody is referred")
{
    auto F = ValueDistribution::two_point(0.0, 1.0, 0.5);
    MarketPrimitives prim(F, ReferralPMF({1.0 - 1e-9, 1e-9}), 1.0, 0.0);
    auto eq = solve_threshold(prim);
    CHECK(lemons_gap(prim, eq) > 0.0);
    CHECK(lemons_gap(prim, eq) < 1e-8);
    CHECK(lemons_gap(half_half(0.0), solve_threshold(half_half(0.0))) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("planner matches the equilibrium on hand examples")
{
    auto pl = planner_threshold(half_half(0.0));
    CHECK(decision_equivalent(pl, solve_threshold(half_half(0.0))));
    CHECK(pl.pool_open);
    CHECK(pl.accept[0] == 0.0);
    CHECK(pl.accept[1] == 1.0);
    auto ps = planner_threshold(half_half(0.5));
    CHECK_FALSE(ps.pool_open);
    CHECK(decision_equivalent(ps, solve_threshold(half_half(0.5))));
}

TEST_CASE("random instances: unique regime, lemons gap, planner equivalence (property)")
{
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int it = 0; it < 500; ++it) {
        auto atoms = oracle::random_atoms(rng, 2, 6);
        auto F = from_oracle(atoms);
        const double p0 = 0.02 + 0.96 * u(rng);
        const double w_min = u(rng) < 0.3 ? u(rng) * F.max_value() : 0.0;
        auto scan = oracle::scan_regimes(atoms, p0, w_min);
        REQUIRE(scan.count == 1);
        auto eq = solve_cut(F, p0, w_min);
        CHECK(eq.threshold == doctest::Approx(scan.threshold).epsilon(1e-12));
        CHECK(std::abs(eq.threshold - bisect_threshold(atoms, p0, w_min)) < 1e-9);
        CHECK(eq.pool_value < F.mean());
        // fixed point: threshold equals max(w_min, pool value) at the chosen mixing
        CHECK(std::abs(eq.threshold - std::max(w_min, eq.pool_value)) < 1e-10);

        const double n = 1.0 + u(rng);
        const double s = std::min(1.0 - p0, 0.95 / n);
        MarketPrimitives prim(F, ReferralPMF({1.0 - s, s}), n, w_min);
        auto e = solve_threshold(prim);
        CHECK(decision_equivalent(planner_threshold(prim), e));
    }
}

TEST_CASE("pool value profile")
{
    auto prim = half_half(0.0);
    auto prof = pool_value_profile(prim, {0.1, 1.0 / 3.0, 0.9});
    CHECK(prof.points[prof.argmin].min_value == doctest::Approx(1.0 / 3.0));
    CHECK(prof.points[0].min_value == doctest::Approx(1.0 / 3.0));
    auto below = pool_value_profile(prim, {-0.5, -0.3, -0.1});
    for (const auto& p : below.points) CHECK(p.max_value == doctest::Approx(0.5));

    // Three equally likely values: constant between atoms, jumps at atoms.
    ValueDistribution F3({{0.0, 1.0 / 3.0}, {1.0 / 3.0, 1.0 / 3.0}, {1.0, 1.0 / 3.0}});
    MarketPrimitives p3(F3, ReferralPMF({0.4, 0.6}), 1.0, 0.0);
    std::vector<double> grid;
    for (int i = 0; i <= 120; ++i) grid.push_back(-0.1 + i * 0.01);
    auto pr = pool_value_profile(p3, grid);
    CHECK(pr.v_shaped);
    for (std::size_t i = 1; i < pr.points.size(); ++i) {
        const double a = pr.points[i - 1].v, b = pr.points[i].v;
        bool atom_between = false;
        for (const auto& at : F3.atoms()) atom_between = atom_between || (at.value > a - 1e-12 && at.value <= b + 1e-12);
        if (!atom_between) CHECK(pr.points[i].min_value == doctest::Approx(pr.points[i - 1].min_value).epsilon(1e-14));
    }
}

TEST_CASE("inconsistent referral mass is rejected")
{
    MarketPrimitives prim(ValueDistribution::two_point(0.0, 1.0, 0.9), ReferralPMF({0.1, 0.9}), 3.0, 0.0);
    CHECK_THROWS_AS(solve_threshold(prim), DomainError);
}

}
