#include "refmarket/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace refmarket {

ProductionReport total_production(const Equilibrium& eq, const ValueDistribution& F)
{
    const double screened = eq.n * (1.0 - eq.p0);
    double value = 0.0;
    for (std::size_t i = 0; i < F.size(); ++i) value += screened * F.prob(i) * eq.accept[i] * F.value(i);
    value += eq.mass_hired_pool * eq.pool_value;

    ProductionReport rep;
    rep.employment_mass = eq.employment_mass;
    rep.employed_value = value;
    rep.accounting_employed_value = eq.n * F.mean() - (eq.n - eq.employment_mass) * eq.pool_value;
    rep.total_production = value + eq.w_min * (eq.n - eq.employment_mass);
    rep.per_worker_productivity = eq.employment_mass > 0.0 ? value / eq.employment_mass : 0.0;
    return rep;
}

ProductionReport total_production(const GroupOutcome& o, const ValueDistribution& F)
{
    ProductionReport rep;
    rep.employment_mass = o.next.e_b + o.next.e_g;
    rep.employed_value = o.employed_value;
    rep.accounting_employed_value = o.n * F.mean() - (o.n - rep.employment_mass) * o.pool_mean;
    rep.total_production = o.production;
    rep.per_worker_productivity = rep.employment_mass > 0.0 ? o.employed_value / rep.employment_mass : 0.0;
    return rep;
}

ReferralPMF zero_one_pmf(double p0)
{
    return ReferralPMF({p0, 1.0 - p0});
}

P0Monotonicity production_vs_p0(const ValueDistribution& F, double n, double w_min,
                                const std::vector<double>& p0_grid, const PmfBuilder& builder)
{
    P0Monotonicity rep;
    for (std::size_t i = 1; i < p0_grid.size(); ++i)
        if (p0_grid[i] < p0_grid[i - 1]) throw DomainError("P(0) grid must be sorted ascending");
    for (double p0 : p0_grid) {
        MarketPrimitives prim(F, builder(p0), n, w_min);
        const Equilibrium eq = solve_threshold(prim);
        rep.p0.push_back(p0);
        rep.production.push_back(total_production(eq, F).total_production);
        rep.pool_value.push_back(eq.pool_value);
        rep.regime.push_back(eq.pool_hiring);
    }
    const double tol = kTol.indifference;
    for (std::size_t i = 1; i < rep.p0.size(); ++i) {
        const double dp = rep.production[i] - rep.production[i - 1];
        const double dv = rep.pool_value[i] - rep.pool_value[i - 1];
        if (dp > tol) rep.production_nonincreasing = false;
        if (dv < -tol) rep.pool_value_nondecreasing = false;
        if (rep.p0[i] > rep.p0[i - 1] + tol && !(dp < -tol && dv > tol)) rep.strict = false;
    }
    rep.strict = rep.strict && rep.production_nonincreasing && rep.pool_value_nondecreasing;
    return rep;
}

double gini_two_point(const GiniInputs& in)
{
    if (!(in.pi_H >= 0.0 && in.pi_H <= 1.0)) throw DomainError("pi_H must lie in [0,1]");
    if (in.w_H < in.w_min) throw DomainError("high wage below the minimum wage");
    const double pi_L = 1.0 - in.pi_H;
    const double mean = in.pi_H * in.w_H + pi_L * in.w_min;
    if (mean <= 0.0) return 0.0;
    return in.pi_H * pi_L * (in.w_H - in.w_min) / mean;
}

double gini_general(const std::vector<WageAtom>& wage_atoms)
{
    const auto atoms = normalize_atoms(wage_atoms);
    double total = 0.0, income = 0.0;
    for (const auto& a : atoms) {
        if (a.mass < 0.0 || a.wage < 0.0) throw DomainError("Gini needs nonnegative wages and masses");
        total += a.mass;
        income += a.mass * a.wage;
    }
    if (!(total > 0.0)) throw DomainError("Gini of an empty distribution");
    const double mean = income / total;
    if (mean <= 0.0) return 0.0;
    double mad = 0.0;
    for (const auto& a : atoms)
        for (const auto& b : atoms) mad += a.mass * b.mass * std::abs(a.wage - b.wage);
    return mad / (2.0 * total * total * mean);
}

std::vector<WageAtom> add_uniform_income(std::vector<WageAtom> atoms, double amount)
{
    for (auto& a : atoms) a.wage += amount;
    return atoms;
}

double TwoValueEconomy::threshold() const
{
    return solve_cut(ValueDistribution::two_point(v_L, v_H, f_H), p0, w_min).threshold;
}

GiniInputs TwoValueEconomy::gini_inputs() const
{
    const double t = threshold();
    if (v_L > t + kTol.indifference)
        throw DomainError("two-wage Gini form needs low-value workers at or below the threshold");
    return {p2plus * f_H, v_H - t + w_min, w_min};
}

GiniSensitivity gini_sensitivity(const TwoValueEconomy& econ, GiniDirection direction, double h)
{
    const double p1 = 1.0 - econ.p0 - econ.p2plus;
    if (p1 < h) throw DomainError("P(1) too small to shift mass away from it");
    TwoValueEconomy moved = econ;
    if (direction == GiniDirection::RaiseP0)
        moved.p0 += h;
    else
        moved.p2plus += h;

    GiniSensitivity s;
    const GiniInputs base = econ.gini_inputs();
    s.gini_base = gini_two_point(base);
    s.gini_moved = gini_two_point(moved.gini_inputs());
    // Differences at rounding level count as no movement.
    const double d = s.gini_moved - s.gini_base;
    const double noise = 8.0 * std::numeric_limits<double>::epsilon() * std::max({std::abs(s.gini_base), std::abs(s.gini_moved), 1.0});
    s.observed_sign = d > noise ? 1 : (d < -noise ? -1 : 0);
    if (direction == GiniDirection::RaiseP0) {
        // A shut pool pins the threshold at w_min. With w_min = 0 the two-wage Gini is 1 - pi_H
        // whatever the high wage, so neither case moves.
        const double pv = pool_value(ValueDistribution::two_point(econ.v_L, econ.v_H, econ.f_H), econ.p0,
                                     econ.threshold(), 1.0);
        s.predicted_sign = (pv > econ.w_min + kTol.indifference && econ.w_min > 0.0) ? -1 : 0;
    } else {
        const double pi_L = 1.0 - base.pi_H;
        const double lhs = base.w_min * pi_L * pi_L;    // I_L * pi_L
        const double rhs = base.w_H * base.pi_H * base.pi_H;  // I_H * pi_H
        s.predicted_sign = lhs > rhs ? 1 : (lhs < rhs ? -1 : 0);
    }
    s.agrees = s.observed_sign == s.predicted_sign;
    return s;
}

std::optional<double> profits(double P1, double f_H, double v_H, double threshold, double w_min, double n)
{
    if (!(threshold > w_min)) return std::nullopt;
    return n * P1 * f_H * v_H + (1.0 - P1 * f_H) * threshold - w_min;
}

}  // namespace refmarket
