#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "refmarket/dynamics.hpp"

using namespace refmarket;

namespace {

const ValueDistribution kWorkhorse = ValueDistribution::two_point(0.0, 1.0, 0.05);

std::vector<double> grid(double lo, double hi, int n)
{
    std::vector<double> g;
    for (int i = 0; i <= n; ++i) g.push_back(lo + (hi - lo) * i / n);
    return g;
}

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("referral means")
{
    GroupParams p;
    auto [mb, mg] = referral_means({0.7, 0.3}, p);
    CHECK(mb == doctest::Approx(0.7));
    CHECK(mg == doctest::Approx(0.3));

    GroupParams mixed;
    mixed.h_b = mixed.h_g = 0.5;
    mixed.n_b = mixed.n_g = 0.8;
    auto [a, b] = referral_means({0.9, 0.1}, mixed);
    CHECK(a == doctest::Approx(1.0 / 1.6));
    CHECK(b == doctest::Approx(1.0 / 1.6));

    GroupParams tilt;
    tilt.h_g = 0.5;
    auto [tb, tg] = referral_means({0.5, 0.5}, tilt);
    CHECK(tb == doctest::Approx(0.75));
    CHECK(tg == doctest::Approx(0.25));
}

TEST_CASE("referral balance")
{
    GroupParams p;
    p.n_b = 0.6;
    p.n_g = 1.4;
    CHECK(referral_balance(p).balanced);
    GroupParams tilt;
    tilt.h_g = 0.5;
    auto rb = referral_balance(tilt);
    CHECK(rb.R_b == doctest::Approx(0.75));
    CHECK(rb.R_g == doctest::Approx(0.25));
    CHECK_FALSE(rb.balanced);
    GroupParams comp;
    comp.h_b = 0.6;
    comp.h_g = 0.4;
    auto rc = referral_balance(comp);
    CHECK(rc.R_b == doctest::Approx(0.6));
    CHECK(rc.R_g == doctest::Approx(0.4));
    CHECK_FALSE(rc.balanced);
}

TEST_CASE("one round of the workhorse economy against the closed form")
{
    GroupParams p;
    auto [next, out] = step({0.7, 0.3}, p, kWorkhorse, 0.0);
    const double Pb = std::exp(-0.7), Pg = std::exp(-0.3);
    const double H = 0.05 * (2.0 - Pb - Pg);
    const double Q = (1.0 - H) / (2.0 - H);
    // quoted hand figures are good to about five decimals
    CHECK(std::abs(H - 0.038135) < 1e-5);
    CHECK(std::abs(Q - 0.490278) < 1e-5);
    auto ref = oracle::two_value_round<double>(0.7, 0.3, 0.05);
    CHECK(next.e_g == doctest::Approx(ref.next_g).epsilon(1e-13));
    CHECK(next.e_b == doctest::Approx(ref.next_b).epsilon(1e-13));
    CHECK(std::abs(next.e_g - 0.4969) < 1e-4);
    CHECK(std::abs(next.e_b - 0.5031) < 1e-4);
    CHECK(next.e_b + next.e_g == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(out.production == doctest::Approx(ref.production).epsilon(1e-13));
    CHECK(out.production == doctest::Approx(2.0 * 0.05 - out.eq.threshold).epsilon(1e-13));
    CHECK(out.wage_gap() == doctest::Approx(ref.wage_gap).epsilon(1e-12));
    CHECK(out.hired_referral == doctest::Approx(H).epsilon(1e-13));

    auto c = group_comparison(out);
    CHECK(c.wage_fosd == Dominance::FirstDominates);
    CHECK(c.employment_rate.blue == doctest::Approx(next.e_b));
    CHECK(c.employment_rate.sign() == 1);
}

TEST_CASE("symmetric state stays symmetric")
{
    GroupParams p;
    p.h_b = p.h_g = 0.8;
    auto [next, out] = step({0.5, 0.5}, p, kWorkhorse, 0.0);
    CHECK(next.e_b == doctest::Approx(next.e_g).epsilon(1e-15));
    auto c = group_comparison(out);
    CHECK(c.wage_fosd == Dominance::Equal);
    CHECK(c.employment_rate.sign() == 0);
    CHECK(c.employed_productivity.sign() == 0);
    CHECK(c.unemployed_productivity.sign() == 0);
}

TEST_CASE("accounting holds on random rounds (property)")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int it = 0; it < 300; ++it) {
        auto atoms = oracle::random_atoms(rng, 2, 5);
        std::vector<Atom> a;
        for (auto& x : atoms) a.push_back({x.v, x.p});
        ValueDistribution F(a);
        GroupParams p;
        p.n_b = 0.5 + u(rng);
        p.n_g = 0.5 + u(rng);
        p.h_b = 0.5 + 0.5 * u(rng);
        p.h_g = 0.5 + 0.5 * u(rng);
        const double eb = u(rng) * std::min(1.0, p.n_b);
        const double eg = std::min(p.n_g, 1.0 - eb) * u(rng);
        const double w_min = u(rng) < 0.3 ? 0.5 * u(rng) * F.mean() : 0.0;
        auto [next, out] = step({eb, eg}, p, F, w_min);
        CHECK(next.e_b >= 0.0);
        CHECK(next.e_g >= 0.0);
        CHECK(next.e_b <= p.n_b + 1e-12);
        CHECK(next.e_g <= p.n_g + 1e-12);
        CHECK(next.e_b + next.e_g <= 1.0 + 1e-12);
        CHECK(out.hired_referral + out.hired_pool == doctest::Approx(next.e_b + next.e_g).epsilon(1e-12));
        // hires plus the pool left behind account for every worker
        CHECK(next.e_b + next.e_g + out.pool_mass - out.hired_pool == doctest::Approx(p.n()).epsilon(1e-11));
    }
}

TEST_CASE("employment advantage and referral tilt toward blue (property)")
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    for (int it = 0; it < 300; ++it) {
        auto atoms = oracle::random_atoms(rng, 2, 5);
        std::vector<Atom> a;
        for (auto& x : atoms) a.push_back({x.v, x.p});
        ValueDistribution F(a);
        GroupParams p;
        p.h_b = 0.5 + 0.5 * u(rng);
        p.h_g = p.h_b - 0.3 * (p.h_b - 0.5) * u(rng);
        const double eg = 0.45 * u(rng);
        const double eb = eg + (1.0 - 2.0 * eg) * u(rng);
        auto [mb, mg] = referral_means({eb, eg}, p);
        if (!(mb > mg)) continue;
        auto [next, out] = step({eb, eg}, p, F, 0.0);
        auto c = group_comparison(out);
        CHECK(c.wage_fosd != Dominance::SecondDominates);
        CHECK(c.wage_fosd != Dominance::Incomparable);
        CHECK(c.employment_rate.sign() >= 0);
        CHECK(c.employed_productivity.sign() >= 0);
        CHECK(c.unemployed_productivity.sign() <= 0);
        ++checked;
    }
    CHECK(checked > 100);
}

TEST_CASE("workhorse trajectory rises toward one half")
{
    GroupParams p;
    auto traj = simulate({0.7, 0.3}, p, kWorkhorse, 0.0, 10);
    REQUIRE(traj.size() == 10);
    double prev = 0.3;
    for (const auto& o : traj) {
        CHECK(o.next.e_g >= prev);
        CHECK(o.next.e_g <= 0.5 + 1e-15);
        prev = o.next.e_g;
    }
    CHECK(std::abs(traj.back().next.e_g - 0.5) < 1e-12);
    auto one = simulate({0.7, 0.3}, p, kWorkhorse, 0.0, 1);
    CHECK(one[0].next.e_g == step({0.7, 0.3}, p, kWorkhorse, 0.0).first.e_g);
}

TEST_CASE("steady states")
{
    GroupParams p;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<GroupState> starts;
    for (int i = 0; i < 100; ++i) {
        double a = u(rng), b = u(rng);
        if (a + b > 1.0) { a = 1.0 - a; b = 1.0 - b; }
        starts.push_back({a, b});
    }
    auto [ss, diag] = steady_state(p, kWorkhorse, 0.0, starts);
    CHECK(diag.all_converged);
    CHECK(diag.common_state);
    CHECK(diag.balanced);
    CHECK(ss.e_b == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(ss.e_g == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::abs(ss.e_b / ss.e_g - 1.0) < 1e-8);

    GroupParams tilt;
    tilt.h_g = 0.6;
    auto [ts, td] = steady_state(tilt, kWorkhorse, 0.0, starts);
    CHECK_FALSE(td.balanced);
    CHECK(td.common_state);
    CHECK(td.unique_on_grid);
    CHECK(ts.e_b > ts.e_g);
    auto again = step(ts, tilt, kWorkhorse, 0.0).first;
    CHECK(std::abs(again.e_g - ts.e_g) < 1e-9);
}

TEST_CASE("pool shutdown cycle")
{
    GroupParams p;
    auto F = ValueDistribution::two_point(0.0, 1.0, 0.5);
    auto [ss, diag] = steady_state(p, F, 0.41, {{0.5, 0.5}, {0.6, 0.3}});
    CHECK(diag.cycles_detected >= 1);
    CHECK_FALSE(diag.all_converged);
    const auto& run = diag.runs[0];
    REQUIRE(run.cycle_length == 2);
    CHECK(run.cycle_pool_hiring[0] != run.cycle_pool_hiring[1]);
    // the reported state lies on the orbit
    CHECK(run.final_state.e_g == run.cycle_states.front().e_g);
    CHECK((std::abs(run.final_state.e_g - 0.5) < 1e-9 || std::abs(run.final_state.e_g - 0.19673467014368329) < 1e-9));
    auto traj = simulate({0.5, 0.5}, p, F, 0.41, 4);
    CHECK(traj[0].eq.hires_from_pool != traj[1].eq.hires_from_pool);
    CHECK(traj[0].eq.hires_from_pool == traj[2].eq.hires_from_pool);
    CHECK(traj[1].next.e_g == doctest::Approx(0.5));
}

TEST_CASE("concentration of referrals")
{
    GroupParams p;
    auto r = concentration_check(p, grid(0.0, 1.0, 100));
    CHECK(r.e_g[r.argmin_p0] == doctest::Approx(0.5));
    CHECK(r.p0_convex);
    CHECK(r.minimum_at_equalizer);

    GroupParams small;
    small.n_b = small.n_g = 0.7;
    auto s = concentration_check(small, grid(0.3, 0.7, 80));
    CHECK(s.e_g[s.argmin_p0] == doctest::Approx(0.5));

    GroupParams tilt;
    tilt.h_g = 0.5;
    auto t = concentration_check(tilt, grid(0.0, 1.0, 100));
    CHECK(t.equalizing_e_g == doctest::Approx(1.0));
    CHECK(t.e_g[t.argmin_p0] == doctest::Approx(1.0));
    CHECK(t.minimum_at_equalizer);
}

TEST_CASE("correlated values")
{
    CHECK(value_homophily_steady(1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(value_homophily_steady(0.5) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS(value_homophily_steady(0.4), DomainError);
    for (double e : {0.1, 0.5, 0.9}) CHECK(value_homophily_transition(e, 0.5) == doctest::Approx(2.0 / 3.0));
    double prev = 0.0;
    for (int i = 0; i <= 10; ++i) {
        const double a = 0.5 + 0.05 * i;
        const double e = value_homophily_steady(a);
        double x = 0.5;
        for (int k = 0; k < 20000; ++k) x = value_homophily_transition(x, a);
        if (a < 1.0) CHECK(std::abs(x - e) < 1e-10);
        CHECK(e > prev);
        prev = e;
    }
}

TEST_CASE("state validation")
{
    GroupParams p;
    CHECK_THROWS(validate_state({0.8, 0.4}, p));
    CHECK_THROWS(validate_state({-0.1, 0.4}, p));
    GroupParams bad;
    bad.h_b = 0.3;
    bad.h_g = 0.4;
    CHECK_THROWS(bad.validate());
}

}
