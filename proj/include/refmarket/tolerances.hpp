#pragma once

namespace refmarket {

// Every numerical tolerance used by the library lives here.
struct Tolerances {
    double indifference = 1e-12;     // equality tests on values and probabilities
    double residual = 1e-10;         // fixed-point residual checks
    double pmf_sum = 1e-12;          // referral PMFs must sum to one within this
    double pmf_tail = 1e-12;         // Poisson truncation tail bound
    double steady_change = 1e-10;    // sup-norm step size that counts as converged
    double cycle_resolution = 1e-9;  // state hashing grid for cycle detection
    int max_periods = 10000;         // iteration budget for steady states
};

inline constexpr Tolerances kTol{};

}  // namespace refmarket
