#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "refmarket/dynamics.hpp"
#include "refmarket/equilibrium.hpp"

namespace refmarket {

struct ProductionReport {
    double total_production = 0.0;
    double per_worker_productivity = 0.0;  // mean value of the employed
    double employment_mass = 0.0;
    double employed_value = 0.0;           // summed directly over hires
    double accounting_employed_value = 0.0;  // n E[v] minus the value left unhired
};

ProductionReport total_production(const Equilibrium& eq, const ValueDistribution& F);
ProductionReport total_production(const GroupOutcome& outcome, const ValueDistribution& F);

// Maps a no-referral probability to a referral PMF; only P(0) affects the equilibrium.
using PmfBuilder = std::function<ReferralPMF(double p0)>;
ReferralPMF zero_one_pmf(double p0);

struct P0Monotonicity {
    std::vector<double> p0;
    std::vector<double> production;
    std::vector<double> pool_value;
    std::vector<PoolHiring> regime;
    bool production_nonincreasing = true;
    bool pool_value_nondecreasing = true;
    bool strict = true;  // strict changes wherever P(0) strictly increases
};

P0Monotonicity production_vs_p0(const ValueDistribution& F, double n, double w_min,
                                const std::vector<double>& p0_grid, const PmfBuilder& builder = zero_one_pmf);

struct GiniInputs {
    double pi_H;   // share of workers earning the high wage
    double w_H;
    double w_min;
};

double gini_two_point(const GiniInputs& in);
// Mean absolute difference over twice the mean.
double gini_general(const std::vector<WageAtom>& wage_atoms);
// Adds a uniform amount to every income before computing Gini.
std::vector<WageAtom> add_uniform_income(std::vector<WageAtom> atoms, double amount);

// Two-value economy used for the inequality comparative statics.
struct TwoValueEconomy {
    double v_L;
    double v_H;
    double f_H;
    double n;
    double w_min;
    double p0;
    double p2plus;

    double threshold() const;
    GiniInputs gini_inputs() const;
};

enum class GiniDirection { RaiseP0, RaiseP2plus };

struct GiniSensitivity {
    double gini_base;
    double gini_moved;
    int observed_sign;
    int predicted_sign;
    bool agrees;
};

// Finite-difference check of the Gini response to moving P(0) (holding P(2+)) or P(2+) (holding P(0)).
GiniSensitivity gini_sensitivity(const TwoValueEconomy& econ, GiniDirection direction, double h = 1e-6);

// Profit per unit of firms in the two-value economy. Returns nothing outside the
// formula's regime (pool value must exceed w_min).
std::optional<double> profits(double P1, double f_H, double v_H, double threshold, double w_min, double n);

}  // namespace refmarket
