#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "refmarket/distributions.hpp"

namespace refmarket {

struct MarketPrimitives {
    ValueDistribution F;
    ReferralPMF P;  // aggregate referral distribution
    double n;       // worker mass; the firm mass is one
    double w_min;

    MarketPrimitives(ValueDistribution F, ReferralPMF P, double n, double w_min);
};

enum class PoolHiring { Hire, NoHire, Indifferent };
std::string to_string(PoolHiring p);

struct Equilibrium {
    double threshold = 0.0;
    double r = 1.0;
    double pool_value = 0.0;
    PoolHiring pool_hiring = PoolHiring::Hire;
    bool hires_from_pool = true;
    double mass_hired_referral = 0.0;
    double mass_hired_pool = 0.0;
    double employment_mass = 0.0;
    double w_min = 0.0;
    double n = 1.0;
    double p0 = 0.0;
    // Probability that a referred worker at atom i is hired by a referring firm.
    std::vector<double> accept;
    int marginal_atom = -1;  // index of the atom sitting exactly at the threshold, if any
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Mean value of the open-application pool when referred workers below the
// threshold are rejected and a share 1-r of an atom sitting at the threshold is too.
double pool_value(const ValueDistribution& F, double p0, double threshold, double r);

// Pool mean when atoms 0..cut-1 are rejected and a share `partial` of atom `cut` is rejected.
double pool_value_at_cut(const ValueDistribution& F, double p0, std::size_t cut, double partial = 0.0);

// Threshold/mixing fixed point for a population F with no-referral share p0.
// Fills everything except the hire masses.
Equilibrium solve_cut(const ValueDistribution& F, double p0, double w_min, double default_r = 1.0,
                      bool hire_when_indifferent = true);

Equilibrium solve_threshold(const MarketPrimitives& prim, double default_r = 1.0,
                            bool hire_when_indifferent = true);

// Wage of a hired worker with value v holding k referrals.
double wage(double v, int k_referrals, const Equilibrium& eq);

double lemons_gap(const MarketPrimitives& prim, const Equilibrium& eq);

struct PlannerResult {
    double threshold = 0.0;  // any threshold inside the chosen cut
    double production = 0.0;
    bool pool_open = true;
    std::vector<double> accept;
};

// Production-maximizing referral threshold and pool decision.
PlannerResult planner_threshold(const MarketPrimitives& prim);

// Same hire/reject decision for every atom (atoms at an indifferent threshold match either way).
bool decision_equivalent(const PlannerResult& planner, const Equilibrium& eq);

struct PoolValuePoint {
    double v;
    double min_value;  // over r in [0,1]
    double max_value;
};

struct PoolValueProfile {
    std::vector<PoolValuePoint> points;
    std::size_t argmin = 0;
    bool v_shaped = true;
};

PoolValueProfile pool_value_profile(const MarketPrimitives& prim, const std::vector<double>& threshold_grid);

}  // namespace refmarket
