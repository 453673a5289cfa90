#pragma once

#include <vector>

#include "refmarket/dynamics.hpp"

namespace refmarket {

struct StageGroup {
    double employment = 0.0;
    double employed_value = 0.0;
};

struct FiringEquilibrium {
    double lambda = 0.0;
    double v1 = 0.0;  // referral hiring threshold
    double v2 = 0.0;  // firing threshold for pool hires
    double r1 = 1.0;
    double r2 = 1.0;  // share of pool hires exactly at v2 who are kept
    double base_threshold = 0.0;
    double pool1_value = 0.0;
    double pool2_value = 0.0;
    bool pool1_hiring = true;
    bool pool2_hiring = true;
    double production_pre = 0.0;
    double production_post = 0.0;
    double production_total = 0.0;
    double production_identity = 0.0;  // firm-side expression plus the unemployed at w_min
    double eq3_residual = 0.0;
    double eq4_residual = 0.0;
    double referral_hires = 0.0;
    double pool1_hires = 0.0;
    double fired = 0.0;
    double rehired = 0.0;
    double min_referral_value = 0.0;  // smallest value among referral hires
    StageGroup pre_b, pre_g, post_b, post_g;
    double bias_pre = 0.0;   // e_b/n_b - e_g/n_g before firing
    double bias_post = 0.0;
    int valid_regimes = 0;
};

// Referral threshold with a firing stage of length lambda; r2 = 1 keeps marginal workers.
FiringEquilibrium solve_firing(const ValueDistribution& F, double w_min, const GroupParams& params,
                               const GroupState& state, double lambda, double default_r1 = 1.0);

struct FiringComparative {
    std::vector<FiringEquilibrium> rows;
    bool total_nondecreasing = true;
    bool total_strict_vs_zero = true;
    bool bias_pre_nonincreasing = true;
    bool production_pre_nonincreasing = true;
    bool production_post_nondecreasing = true;
    bool v1_nondecreasing = true;  // weak: v1 stays on an atom over a range of lambda
    bool v2_nonincreasing = true;  // weak: pool 2 moves only when the referral cut does
    bool ordering = true;  // v2 < base < v1 for every lambda > 0
};

FiringComparative firing_comparative(const ValueDistribution& F, double w_min, const GroupParams& params,
                                     const GroupState& state, const std::vector<double>& lambda_grid);

}  // namespace refmarket
