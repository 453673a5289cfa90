#include "refmarket/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace refmarket {

MarketPrimitives::MarketPrimitives(ValueDistribution F_, ReferralPMF P_, double n_, double w_min_)
    : F(std::move(F_)), P(std::move(P_)), n(n_), w_min(w_min_)
{
    if (!(n >= 1.0) || !std::isfinite(n)) throw DomainError("worker mass n must be at least 1");
    if (!(w_min < F.max_value())) throw DomainError("w_min must lie below the largest value");
    if (!(P.p0() > 0.0)) throw DomainError("P(0) must be positive");
}

std::string to_string(PoolHiring p)
{
    switch (p) {
    case PoolHiring::Hire: return "hire";
    case PoolHiring::NoHire: return "no-hire";
    case PoolHiring::Indifferent: return "indifferent";
    }
    return "?";
}

double pool_value_at_cut(const ValueDistribution& F, double p0, std::size_t cut, double partial)
{
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < F.size() && i <= cut; ++i) {
        const double w = i < cut ? 1.0 : partial;
        num += F.prob(i) * w * F.value(i);
        den += F.prob(i) * w;
    }
    return (p0 * F.mean() + (1.0 - p0) * num) / (p0 + (1.0 - p0) * den);
}

double pool_value(const ValueDistribution& F, double p0, double threshold, double r)
{
    if (!(p0 > 0.0 && p0 <= 1.0)) throw DomainError("pool value needs p0 in (0,1]");
    if (!(r >= 0.0 && r <= 1.0)) throw DomainError("mixing r must lie in [0,1]");
    std::size_t cut = 0;
    while (cut < F.size() && F.value(cut) < threshold && std::abs(F.value(cut) - threshold) > kTol.indifference)
        ++cut;
    const bool at_atom = cut < F.size() && std::abs(F.value(cut) - threshold) <= kTol.indifference;
    return pool_value_at_cut(F, p0, cut, at_atom ? 1.0 - r : 0.0);
}

Equilibrium solve_cut(const ValueDistribution& F, double p0, double w_min, double default_r,
                      bool hire_when_indifferent)
{
    if (!(p0 > 0.0 && p0 <= 1.0)) throw DomainError("threshold solve needs p0 in (0,1]");
    if (!(default_r >= 0.0 && default_r <= 1.0)) throw DomainError("mixing r must lie in [0,1]");
    const std::size_t K = F.size();
    const double tol = kTol.indifference;

    // Cut j rejects atoms 0..j-1. Its candidate threshold is max(w_min, G_j).
    std::vector<double> G(K + 1), T(K + 1);
    for (std::size_t j = 0; j <= K; ++j) {
        G[j] = pool_value_at_cut(F, p0, j);
        T[j] = std::max(w_min, G[j]);
    }

    Equilibrium eq;
    eq.w_min = w_min;
    eq.p0 = p0;
    eq.accept.assign(K, 0.0);
    bool found = false;

    // Thresholds strictly between atoms (including below the first and above the last).
    for (std::size_t j = 0; j <= K && !found; ++j) {
        const double lo = j == 0 ? -std::numeric_limits<double>::infinity() : F.value(j - 1);
        const double hi = j == K ? std::numeric_limits<double>::infinity() : F.value(j);
        if (T[j] > lo + tol && T[j] < hi - tol) {
            eq.threshold = T[j];
            eq.r = default_r;
            for (std::size_t i = j; i < K; ++i) eq.accept[i] = 1.0;
            found = true;
        }
    }
    // Threshold exactly at an atom. Mixing the atom into the pool cannot move the
    // pool mean across the atom, so the r = 1 pool value decides validity.
    for (std::size_t j = 0; j < K && !found; ++j) {
        if (std::abs(T[j] - F.value(j)) <= tol) {
            eq.threshold = F.value(j);
            eq.r = default_r;
            eq.accept[j] = default_r;
            eq.marginal_atom = static_cast<int>(j);
            for (std::size_t i = j + 1; i < K; ++i) eq.accept[i] = 1.0;
            found = true;
        }
    }
    if (!found) {
        std::ostringstream msg;
        msg << "no threshold regime satisfies the fixed point; candidates bracket [" << T.front() << ", "
            << T.back() << "]";
        throw SolverError(msg.str());
    }

    eq.pool_value = pool_value(F, p0, eq.threshold, eq.r);
    if (eq.pool_value > w_min + tol)
        eq.pool_hiring = PoolHiring::Hire;
    else if (eq.pool_value < w_min - tol)
        eq.pool_hiring = PoolHiring::NoHire;
    else
        eq.pool_hiring = PoolHiring::Indifferent;
    eq.hires_from_pool = eq.pool_hiring == PoolHiring::Hire ||
                         (eq.pool_hiring == PoolHiring::Indifferent && hire_when_indifferent);
    return eq;
}

Equilibrium solve_threshold(const MarketPrimitives& prim, double default_r, bool hire_when_indifferent)
{
    Equilibrium eq = solve_cut(prim.F, prim.P.p0(), prim.w_min, default_r, hire_when_indifferent);
    eq.n = prim.n;
    double accepted = 0.0;
    for (std::size_t i = 0; i < prim.F.size(); ++i) accepted += prim.F.prob(i) * eq.accept[i];
    eq.mass_hired_referral = prim.n * (1.0 - prim.P.p0()) * accepted;
    if (eq.mass_hired_referral > 1.0 + kTol.residual)
        throw DomainError("referral hires exceed the unit mass of firms; referral PMF inconsistent with n");
    eq.mass_hired_pool = eq.hires_from_pool ? std::max(0.0, 1.0 - eq.mass_hired_referral) : 0.0;
    eq.employment_mass = eq.mass_hired_referral + eq.mass_hired_pool;
    return eq;
}

double wage(double v, int k_referrals, const Equilibrium& eq)
{
    if (k_referrals < 0) throw ContractError("negative referral count");
    const bool referral_hire = k_referrals >= 1 && v >= eq.threshold - kTol.indifference;
    if (!referral_hire && !eq.hires_from_pool)
        throw ContractError("wage requested for a worker who is not hired");
    if (referral_hire && k_referrals >= 2) return std::max(eq.w_min, v - eq.threshold + eq.w_min);
    return eq.w_min;
}

double lemons_gap(const MarketPrimitives& prim, const Equilibrium& eq)
{
    return prim.F.mean() - eq.pool_value;
}

namespace {

struct CutProduction {
    double production;
    double referral_hires;
};

CutProduction cut_production(const MarketPrimitives& prim, std::size_t cut, bool pool_open)
{
    const auto& F = prim.F;
    const double screened = prim.n * (1.0 - prim.P.p0());
    double hired = 0.0, value = 0.0;
    for (std::size_t i = cut; i < F.size(); ++i) {
        hired += screened * F.prob(i);
        value += screened * F.prob(i) * F.value(i);
    }
    double employed = hired;
    if (pool_open) {
        const double pool_hires = std::max(0.0, 1.0 - hired);
        value += pool_hires * pool_value_at_cut(F, prim.P.p0(), cut);
        employed += pool_hires;
    }
    return {value + prim.w_min * (prim.n - employed), hired};
}

}  // namespace

PlannerResult planner_threshold(const MarketPrimitives& prim)
{
    const auto& F = prim.F;
    const std::size_t K = F.size();
    PlannerResult best;
    best.production = -std::numeric_limits<double>::infinity();
    std::size_t best_cut = 0;
    // Production is constant between atoms, so each cut position is one decision class.
    for (std::size_t cut = 0; cut <= K; ++cut) {
        for (bool open : {true, false}) {
            const auto cp = cut_production(prim, cut, open);
            if (cp.referral_hires > 1.0 + kTol.residual) continue;
            if (cp.production > best.production + kTol.indifference) {
                best.production = cp.production;
                best.pool_open = open;
                best_cut = cut;
            }
        }
    }
    if (!std::isfinite(best.production)) throw SolverError("planner found no feasible cut");
    const double lo = best_cut == 0 ? F.min_value() - 1.0 : F.value(best_cut - 1);
    const double hi = best_cut == K ? F.max_value() + 1.0 : F.value(best_cut);
    best.threshold = 0.5 * (lo + hi);
    best.accept.assign(K, 0.0);
    for (std::size_t i = best_cut; i < K; ++i) best.accept[i] = 1.0;
    return best;
}

bool decision_equivalent(const PlannerResult& planner, const Equilibrium& eq)
{
    for (std::size_t i = 0; i < eq.accept.size(); ++i) {
        const double a = eq.accept[i];
        // an atom exactly at the threshold is payoff-indifferent either way
        if (static_cast<int>(i) == eq.marginal_atom) continue;
        if (std::abs(a - planner.accept[i]) > 0.5) return false;
    }
    if (eq.pool_hiring != PoolHiring::Indifferent && planner.pool_open != eq.hires_from_pool) return false;
    return true;
}

PoolValueProfile pool_value_profile(const MarketPrimitives& prim, const std::vector<double>& threshold_grid)
{
    for (std::size_t i = 1; i < threshold_grid.size(); ++i)
        if (threshold_grid[i] < threshold_grid[i - 1]) throw DomainError("threshold grid must be sorted");
    const auto& F = prim.F;
    const double p0 = prim.P.p0();
    PoolValueProfile prof;
    for (double v : threshold_grid) {
        const double a = pool_value(F, p0, v, 0.0);
        const double b = pool_value(F, p0, v, 1.0);
        prof.points.push_back({v, std::min(a, b), std::max(a, b)});
    }
    if (prof.points.empty()) return prof;
    for (std::size_t i = 1; i < prof.points.size(); ++i)
        if (prof.points[i].min_value < prof.points[prof.argmin].min_value) prof.argmin = i;

    const double vt = solve_threshold(prim).threshold;
    const double tol = kTol.indifference;
    const auto& pts = prof.points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            if (pts[j].v <= vt && pts[i].min_value < pts[j].max_value - tol) prof.v_shaped = false;
            if (pts[i].v >= vt && pts[i].max_value > pts[j].min_value + tol) prof.v_shaped = false;
        }
    }
    return prof;
}

}  // namespace refmarket
