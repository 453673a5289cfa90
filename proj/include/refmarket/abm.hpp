#pragma once

#include <cstdint>
#include <vector>

#include "refmarket/dynamics.hpp"

namespace refmarket {

enum class AbmMode { Myopic, Redraw };

// How unmatched firms draw from the pool.
// Subset: a uniformly random subset of the pool is hired (fast selection).
// Sequential: firms draw one at a time in random order; required for redraw mode.
enum class PoolMatching { Subset, Sequential };

struct AbmConfig {
    std::int64_t firm_count = 100000;
    ValueDistribution F = ValueDistribution::two_point(0.0, 1.0, 0.05);
    GroupParams params;
    GroupState state{0.7, 0.3};
    double w_min = 0.0;
    StepOptions opt;
    AbmMode mode = AbmMode::Myopic;
    PoolMatching matching = PoolMatching::Subset;  // forced to Sequential in redraw mode
    int periods = 10;
    std::uint64_t seed = 1;
    int threads = 1;
};

struct AbmPeriod {
    int period = 0;
    double e_b = 0.0, e_g = 0.0;  // incumbent shares entering the round
    double threshold = 0.0;
    double pool_value = 0.0;
    double hire_ref_b = 0.0, hire_ref_g = 0.0;
    double hire_pool_b = 0.0, hire_pool_g = 0.0;
    double next_e_b = 0.0, next_e_g = 0.0;
    double mean_wage_b = 0.0, mean_wage_g = 0.0;
    double production = 0.0;
    double per_worker_productivity = 0.0;
    double stderr_e_b = 0.0, stderr_e_g = 0.0;
    double stderr_ref_b = 0.0, stderr_ref_g = 0.0;
    double premium = 0.0;             // green minus blue expected pool value
    std::int64_t redraw_draws = 0;    // extra draws paid for
    double redraw_cost = 0.0;
    std::int64_t green_exhausted = 0; // searching firms that found no green left
    std::int64_t employed = 0;
    std::int64_t unemployed = 0;
    std::int64_t workers = 0;
};

struct AbmTrajectory {
    std::vector<AbmPeriod> periods;
    std::uint64_t seed = 0;
    std::int64_t firm_count = 0;
    std::int64_t blue_workers = 0;
    std::int64_t green_workers = 0;
    GroupState initial_state;  // incumbent shares after rounding to whole firms
};

AbmTrajectory simulate_abm(const AbmConfig& config);

struct ConvergencePoint {
    std::int64_t firm_count;
    std::vector<double> errors;  // one per seed: max over periods of |e_g - analytic|
    double mean_error;
    double ci_width;             // width of a 95% normal interval for the mean
};

struct ConvergenceReport {
    std::vector<ConvergencePoint> points;
    double slope;  // least-squares slope of log mean error against log N
};

ConvergenceReport convergence_study(const AbmConfig& config, const std::vector<std::int64_t>& firm_counts,
                                    int seeds);

}  // namespace refmarket
