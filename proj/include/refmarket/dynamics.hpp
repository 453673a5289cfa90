#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "refmarket/distributions.hpp"
#include "refmarket/equilibrium.hpp"

namespace refmarket {

struct GroupParams {
    double n_b = 1.0;
    double n_g = 1.0;
    double h_b = 1.0;
    double h_g = 1.0;
    ReferralFamily family = ReferralFamily::poisson();
    bool unsafe = false;  // permit h_b < 1 - h_g

    double n() const { return n_b + n_g; }
    void validate() const;
};

struct GroupState {
    double e_b = 0.0;
    double e_g = 0.0;
};

void validate_state(const GroupState& s, const GroupParams& p);

// Everything one group experiences in a single hiring round.
struct GroupBlock {
    double n = 0.0;            // group population
    double employed_in = 0.0;  // incumbent employment that generated this round's referrals
    double m = 0.0;
    double p0 = 0.0, p1 = 0.0, p2plus = 0.0;
    double hired_referral = 0.0;
    double hired_pool = 0.0;
    double next_employment = 0.0;
    std::vector<WageAtom> wages;      // hired workers only
    std::vector<double> pool_atoms;   // pool mass by atom of F
    double pool_mass = 0.0;
    double pool_mean = 0.0;
    double employed_value = 0.0;      // total value of this group's hires
    double wage_total = 0.0;

    // Group average income, unemployed members earning the outside option.
    double mean_wage(double w_min) const;
    double employment_rate() const { return next_employment / n; }
    double employed_mean_value() const;
    // Hired wages plus the unemployed at w_min, total mass n.
    std::vector<WageAtom> income_distribution(double w_min) const;
};

struct GroupOutcome {
    GroupBlock blue;
    GroupBlock green;
    Equilibrium eq;
    double w_min = 0.0;
    double n = 0.0;
    double firm_mass = 1.0;
    double hired_referral = 0.0;
    double hired_pool = 0.0;
    double pool_mass = 0.0;
    double pool_mean = 0.0;  // realized mean of everyone left in the pool
    double employed_value = 0.0;
    double production = 0.0;
    GroupState next;

    double wage_gap() const { return blue.mean_wage(w_min) - green.mean_wage(w_min); }
    std::vector<WageAtom> income_distribution() const;
};

std::pair<double, double> referral_means(const GroupState& state, const GroupParams& params);

struct ReferralBalance {
    double R_b;
    double R_g;
    bool balanced;
};
ReferralBalance referral_balance(const GroupParams& params);

struct StepOptions {
    double r = 1.0;
    bool hire_pool_when_indifferent = true;
};

std::pair<GroupState, GroupOutcome> step(const GroupState& state, const GroupParams& params,
                                         const ValueDistribution& F, double w_min,
                                         const StepOptions& opt = {});

// Lower-level assembly of one round given group PMFs and a hiring decision.
// demote_q: each firm holding a hireable blue referral is diverted to the pool independently with
// this probability. promote_mass: rejected green referrals hired anyway, best values first.
struct RoundSpec {
    const ValueDistribution* F = nullptr;
    double w_min = 0.0;
    double n_b = 1.0, n_g = 1.0;
    double e_b = 0.0, e_g = 0.0;
    double m_b = 0.0, m_g = 0.0;
    double firm_mass = 1.0;
    const ReferralPMF* pmf_b = nullptr;
    const ReferralPMF* pmf_g = nullptr;
    Equilibrium eq;
    double demote_q = 0.0;
    double promote_mass = 0.0;
};

GroupOutcome assemble_round(const RoundSpec& spec);

using Trajectory = std::vector<GroupOutcome>;

// Row t holds the round played from the period-t incumbent state.
Trajectory simulate(const GroupState& state0, const GroupParams& params, const ValueDistribution& F,
                    double w_min, int T, const StepOptions& opt = {});

struct SteadyOptions {
    StepOptions step;
    Tolerances tol = kTol;
    int uniqueness_grid = 400;
};

struct StartResult {
    GroupState start;
    GroupState final_state;
    bool converged = false;
    bool damped = false;   // converged only after falling back to damping
    int iterations = 0;
    int cycle_length = 0;  // 0 if no cycle seen in the undamped run
    std::vector<GroupState> cycle_states;
    std::vector<PoolHiring> cycle_pool_hiring;
};

struct SteadyDiagnostics {
    std::vector<StartResult> runs;
    bool all_converged = true;
    bool common_state = true;
    double spread = 0.0;       // sup distance between converged finals
    int cycles_detected = 0;
    int grid_sign_changes = 0; // along e_b + e_g = 1
    bool unique_on_grid = true;
    bool balanced = false;
};

std::pair<GroupState, SteadyDiagnostics> steady_state(const GroupParams& params, const ValueDistribution& F,
                                                      double w_min, const std::vector<GroupState>& starts,
                                                      const SteadyOptions& opt = {});

struct OrderedPair {
    double blue;
    double green;
    int sign(double tol = 1e-12) const { return blue > green + tol ? 1 : (green > blue + tol ? -1 : 0); }
};

struct GroupComparison {
    Dominance wage_fosd;  // FirstDominates means blue dominates green
    OrderedPair employment_rate;
    OrderedPair employed_productivity;
    OrderedPair unemployed_productivity;
};

GroupComparison group_comparison(const GroupOutcome& outcome);

struct ConcentrationReport {
    std::vector<double> e_g;
    std::vector<double> p0;
    std::vector<double> p2plus;
    bool p0_convex = true;
    bool p2plus_convex = true;
    std::size_t argmin_p0 = 0;
    std::size_t argmin_p2plus = 0;
    bool degenerate = false;          // m_b = m_g along the whole line
    double equalizing_e_g = 0.0;      // clamped to the grid range
    bool minimum_at_equalizer = true;
    bool hypotheses_hold = true;
};

// Scans e_g with e_b = 1 - e_g.
ConcentrationReport concentration_check(const GroupParams& params, const std::vector<double>& e_grid);

// Two-type correlated-values model: one round's map of high-type employment.
double value_homophily_transition(double e_high, double alpha);
double value_homophily_steady(double alpha);

}  // namespace refmarket
