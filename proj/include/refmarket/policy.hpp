#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "refmarket/dynamics.hpp"

namespace refmarket {

// Inputs of one hiring round.
struct Scenario {
    ValueDistribution F;
    GroupParams params;
    GroupState state;
    double w_min = 0.0;
    StepOptions opt;
};

enum class AAKind { PromoteGreen, DemoteBlue };

struct AAPolicy {
    AAKind kind = AAKind::DemoteBlue;
    double size = 0.0;  // mass of hiring outcomes changed
    int period = 0;
};

class PolicyError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct AACaps {
    double demote_blue;    // blue referral hires
    double promote_green;  // rejected green referrals
};

AACaps aa_caps(const Scenario& s);

// The threshold stays at its no-policy value; pool composition and matching are recomputed.
GroupOutcome apply_aa(const Scenario& s, const AAPolicy& policy);
GroupOutcome apply_aa_mix(const Scenario& s, double promote_size, double demote_size);

// Size whose one-round green employment gain over no policy equals delta_e_g.
double aa_size_for_target(const Scenario& s, AAKind kind, double delta_e_g);

// Trajectory with an optional one-time policy applied in round policy->period.
Trajectory simulate_policy(const Scenario& s, int T, const std::optional<AAPolicy>& policy);

struct PolicyRow {
    int period;
    double e_g_base, e_g_policy;          // employment produced by the round
    double wage_gap_base, wage_gap_policy;
    double production_base, production_policy;
};

std::vector<PolicyRow> compare_policy(const Scenario& s, const AAPolicy& policy, int T);

// Per-period differences below double resolution are "unresolved": neither better nor worse.
struct MultiplierReport {
    std::vector<double> epsilon;
    std::vector<bool> improved;          // every period strictly better in e_g and production
    std::vector<int> first_failure;      // first period not strictly better, -1 if none
    std::vector<int> first_reversal;     // first period resolvably worse in either metric, -1 if none
    std::vector<int> resolved_periods;   // periods where both differences exceed resolution
    std::optional<double> largest_passing;
    std::optional<double> largest_passing_resolved;  // no reversal anywhere on the horizon
    int horizon = 20;
};

// +1 better, -1 worse, 0 within a few ulps of the larger of |policy|, |base| and scale.
// A difference of two larger quantities (a wage gap, say) needs their magnitude as scale.
int resolved_sign(double policy, double base, double scale = 0.0);

// Moves epsilon of employment from blue to green in the incumbent state and compares
// rounds 0..horizon-1 against the unperturbed trajectory.
MultiplierReport aa_multiplier_check(const Scenario& s, const std::vector<double>& epsilon_grid,
                                     int horizon = 20);

enum class AADirection { PromoteGreen, DemoteBlue, Indifferent };

struct DirectionRule {
    AADirection direction;
    double promote_ratio;  // (1 - f_g) / (v - v_L)
    double demote_ratio;   // f_g / (v_H - v)
};

DirectionRule optimal_aa_direction(double f_g, double pool_value, double v_L, double v_H);

// First-order production loss per unit of extra green employment in the pool-level model.
double promote_loss_per_unit(double f_g, double pool_value, double v_L);
double demote_loss_per_unit(double f_g, double pool_value, double v_H);

struct MacroShock {
    double kappa = 0.0;
};

struct MacroResult {
    GroupOutcome baseline;
    GroupOutcome shocked;
    bool pool_active = true;
    bool production_down = false;
    bool productivity_up = false;
    Dominance wage_order = Dominance::Equal;  // FirstDominates means the baseline dominates
    double lost_screened_b = 0.0;  // fraction of referral-screened workers lost per group
    double lost_screened_g = 0.0;
};

MacroResult macro_shock(const Scenario& s, const MacroShock& shock);
GroupOutcome shocked_round(const Scenario& s, double kappa);

}  // namespace refmarket
