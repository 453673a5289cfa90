#include "refmarket/firing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace refmarket {

namespace {

struct Aggregate {
    double n, p0;
    ReferralPMF pb, pg;
};

struct StageOne {
    std::vector<double> acc;
    std::vector<double> pool1;  // aggregate pool-1 mass by atom
    double H1 = 0.0;
    double mu1 = 0.0;
    double eq3_rhs = 0.0;
    Equilibrium inner;          // firing threshold solve over pool 2
    double p0_eff = 0.0;
};

StageOne evaluate(const ValueDistribution& F, double w_min, const Aggregate& ag, std::vector<double> acc,
                  double lambda)
{
    StageOne s;
    const std::size_t K = F.size();
    s.acc = std::move(acc);
    s.pool1.assign(K, 0.0);
    double N1 = 0.0, sum1 = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
        const double base = ag.n * F.prob(i);
        s.H1 += base * (1.0 - ag.p0) * s.acc[i];
        s.pool1[i] = base * ag.p0 + base * (1.0 - ag.p0) * (1.0 - s.acc[i]);
        N1 += s.pool1[i];
        sum1 += s.pool1[i] * F.value(i);
    }
    s.mu1 = sum1 / N1;

    // Pool 2 holds the n-1 pool-1 members nobody hired plus fired pool-1 hires, both
    // distributed like pool 1, so it has the pool shape with an effective p0.
    std::vector<Atom> g1;
    for (std::size_t i = 0; i < K; ++i) g1.push_back({F.value(i), s.pool1[i] / N1});
    double total = 0.0;
    for (const auto& a : g1) total += a.prob;
    for (auto& a : g1) a.prob /= total;
    const ValueDistribution G1(g1);
    const double unhired = ag.n - 1.0;
    const double hires = 1.0 - s.H1;
    s.p0_eff = unhired / (unhired + hires);
    s.inner = solve_cut(G1, s.p0_eff, w_min, 1.0);
    double emax = 0.0;
    for (std::size_t i = 0; i < K; ++i) emax += G1.prob(i) * std::max(G1.value(i), s.inner.threshold);
    s.eq3_rhs = (1.0 - lambda) * s.mu1 + lambda * emax;
    return s;
}

std::vector<double> accept_vector(std::size_t K, std::size_t cut, double at_cut)
{
    std::vector<double> acc(K, 0.0);
    for (std::size_t i = cut; i < K; ++i) acc[i] = 1.0;
    if (cut < K) acc[cut] = at_cut;
    return acc;
}

}  // namespace

FiringEquilibrium solve_firing(const ValueDistribution& F, double w_min, const GroupParams& params,
                               const GroupState& state, double lambda, double default_r1)
{
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("lambda must lie in [0,1]");
    params.validate();
    validate_state(state, params);
    const auto [m_b, m_g] = referral_means(state, params);
    Aggregate ag{params.n(), 0.0, pmf_from_mean(params.family, m_b), pmf_from_mean(params.family, m_g)};
    const MarketPrimitives prim(F, mix(ag.pb, ag.pg, params.n_b, params.n_g), ag.n, w_min);
    ag.p0 = prim.P.p0();
    const Equilibrium base = solve_threshold(prim, default_r1);
    if (lambda > 0.0 && !(ag.n > 1.0 + kTol.indifference))
        throw DomainError("a firing stage needs more workers than firms (n > 1)");

    const std::size_t K = F.size();
    const double tol = kTol.indifference;
    FiringEquilibrium fe;
    fe.lambda = lambda;
    fe.base_threshold = base.threshold;

    StageOne chosen;
    bool found = false;
    if (lambda == 0.0) {
        // no time left to act on what is learned: the base round, with v2 pinned to it
        fe.v1 = base.threshold;
        fe.r1 = base.r;
        fe.valid_regimes = 1;
        found = true;
        chosen.acc = base.accept;
        chosen.H1 = base.mass_hired_referral;
        chosen.pool1.assign(K, 0.0);
        for (std::size_t i = 0; i < K; ++i) {
            const double b = ag.n * F.prob(i);
            chosen.pool1[i] = b * ag.p0 + b * (1.0 - ag.p0) * (1.0 - chosen.acc[i]);
        }
        chosen.mu1 = base.pool_value;
        chosen.eq3_rhs = base.pool_value;
        fe.v2 = base.threshold;
        fe.r2 = 1.0;
        fe.pool2_value = base.pool_value;
    } else {
        for (std::size_t j = 0; j <= K; ++j) {
            StageOne s = evaluate(F, w_min, ag, accept_vector(K, j, 1.0), lambda);
            const double T = std::max(w_min, s.eq3_rhs);
            const double lo = j == 0 ? -std::numeric_limits<double>::infinity() : F.value(j - 1);
            const double hi = j == K ? std::numeric_limits<double>::infinity() : F.value(j);
            if (T > lo + tol && T < hi - tol) {
                ++fe.valid_regimes;
                if (!found) {
                    chosen = std::move(s);
                    fe.v1 = T;
                    fe.r1 = default_r1;
                    found = true;
                }
            }
        }
        for (std::size_t j = 0; j < K; ++j) {
            const double v = F.value(j);
            auto gap = [&](double r) {
                return std::max(w_min, evaluate(F, w_min, ag, accept_vector(K, j, r), lambda).eq3_rhs) - v;
            };
            double r = default_r1;
            bool ok = std::abs(gap(r)) <= tol;
            if (!ok) {
                double g0 = gap(0.0), g1 = gap(1.0);
                if ((g0 < 0.0) != (g1 < 0.0)) {
                    double lo = 0.0, hi = 1.0;
                    for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
                        const double mid = 0.5 * (lo + hi);
                        if ((gap(mid) < 0.0) == (g0 < 0.0))
                            lo = mid;
                        else
                            hi = mid;
                    }
                    r = 0.5 * (lo + hi);
                    ok = std::abs(gap(r)) <= kTol.residual;
                }
            }
            if (ok) {
                ++fe.valid_regimes;
                if (!found) {
                    chosen = evaluate(F, w_min, ag, accept_vector(K, j, r), lambda);
                    fe.v1 = v;
                    fe.r1 = r;
                    found = true;
                }
            }
        }
        if (!found) throw SolverError("no referral-threshold regime satisfies the firing equilibrium");
        fe.v2 = chosen.inner.threshold;
        fe.r2 = chosen.inner.r;
        fe.pool2_value = chosen.inner.pool_value;
    }

    fe.pool1_value = chosen.mu1;
    fe.pool1_hiring = chosen.eq3_rhs >= w_min - tol;
    fe.pool2_hiring = lambda == 0.0 ? fe.pool1_hiring : chosen.inner.hires_from_pool;
    fe.eq3_residual = std::abs(fe.v1 - std::max(w_min, chosen.eq3_rhs));
    fe.eq4_residual = lambda == 0.0 ? 0.0 : std::abs(fe.v2 - std::max(w_min, chosen.inner.pool_value));

    // per-group flows through both stages
    const double N1 = ag.n - chosen.H1;
    const double Q1 = fe.pool1_hiring ? std::max(0.0, 1.0 - chosen.H1) / N1 : 0.0;
    std::vector<double> fire(K, 0.0);
    if (lambda > 0.0) {
        for (std::size_t i = 0; i < K; ++i) {
            if (F.value(i) < fe.v2 - tol)
                fire[i] = 1.0;
            else if (std::abs(F.value(i) - fe.v2) <= tol)
                fire[i] = 1.0 - fe.r2;
        }
    }
    struct Flows {
        std::vector<double> ref, pool1, hire1, fired, pool2;
    };
    auto group_flows = [&](double n_g, const ReferralPMF& P) {
        Flows f;
        for (std::size_t i = 0; i < K; ++i) {
            const double base_i = n_g * F.prob(i);
            f.ref.push_back(base_i * (1.0 - P.p0()) * chosen.acc[i]);
            f.pool1.push_back(base_i * P.p0() + base_i * (1.0 - P.p0()) * (1.0 - chosen.acc[i]));
            f.hire1.push_back(Q1 * f.pool1.back());
            f.fired.push_back(f.hire1.back() * fire[i]);
            f.pool2.push_back((1.0 - Q1) * f.pool1.back() + f.fired.back());
        }
        return f;
    };
    const Flows fb = group_flows(params.n_b, ag.pb);
    const Flows fg = group_flows(params.n_g, ag.pg);
    double fired = 0.0, pool2 = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
        fired += fb.fired[i] + fg.fired[i];
        pool2 += fb.pool2[i] + fg.pool2[i];
    }
    const double Q2 = (lambda > 0.0 && fe.pool2_hiring && pool2 > 0.0) ? fired / pool2 : 0.0;

    fe.min_referral_value = std::numeric_limits<double>::infinity();
    auto stage = [&](const Flows& f, bool post) {
        StageGroup g;
        for (std::size_t i = 0; i < K; ++i) {
            const double hired = f.ref[i] + f.hire1[i] - (post ? f.fired[i] - Q2 * f.pool2[i] : 0.0);
            g.employment += hired;
            g.employed_value += hired * F.value(i);
            if (f.ref[i] > 0.0) fe.min_referral_value = std::min(fe.min_referral_value, F.value(i));
        }
        return g;
    };
    fe.pre_b = stage(fb, false);
    fe.pre_g = stage(fg, false);
    fe.post_b = stage(fb, true);
    fe.post_g = stage(fg, true);

    auto production = [&](const StageGroup& b, const StageGroup& g) {
        return b.employed_value + g.employed_value + w_min * (ag.n - b.employment - g.employment);
    };
    fe.production_pre = production(fe.pre_b, fe.pre_g);
    fe.production_post = production(fe.post_b, fe.post_g);
    fe.production_total = (1.0 - lambda) * fe.production_pre + lambda * fe.production_post;
    double emax1 = 0.0;
    for (std::size_t i = 0; i < K; ++i) emax1 += F.prob(i) * std::max(F.value(i), fe.v1);
    const double screened = ag.n * (1.0 - ag.p0);
    fe.production_identity = screened * emax1 + (1.0 - screened) * fe.v1 + w_min * (ag.n - 1.0);

    fe.referral_hires = chosen.H1;
    fe.pool1_hires = Q1 * N1;
    fe.fired = fired;
    fe.rehired = Q2 * pool2;
    fe.bias_pre = fe.pre_b.employment / params.n_b - fe.pre_g.employment / params.n_g;
    fe.bias_post = fe.post_b.employment / params.n_b - fe.post_g.employment / params.n_g;
    return fe;
}

FiringComparative firing_comparative(const ValueDistribution& F, double w_min, const GroupParams& params,
                                     const GroupState& state, const std::vector<double>& lambda_grid)
{
    if (std::find(lambda_grid.begin(), lambda_grid.end(), 0.0) == lambda_grid.end())
        throw DomainError("firing comparison grid must include lambda = 0");
    std::vector<double> grid = lambda_grid;
    std::sort(grid.begin(), grid.end());
    FiringComparative rep;
    for (double l : grid) rep.rows.push_back(solve_firing(F, w_min, params, state, l));
    const double tol = kTol.indifference;
    const auto& z = rep.rows.front();
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const auto& r = rep.rows[i];
        if (r.lambda > 0.0) {
            if (!(r.production_total > z.production_total + tol)) rep.total_strict_vs_zero = false;
            if (!(r.v2 < r.base_threshold - tol && r.base_threshold < r.v1 - tol)) rep.ordering = false;
        }
        if (i == 0) continue;
        const auto& p = rep.rows[i - 1];
        if (r.production_total < p.production_total - tol) rep.total_nondecreasing = false;
        if (r.bias_pre > p.bias_pre + tol) rep.bias_pre_nonincreasing = false;
        if (r.production_pre > p.production_pre + tol) rep.production_pre_nonincreasing = false;
        if (r.production_post < p.production_post - tol) rep.production_post_nondecreasing = false;
        if (r.v1 < p.v1 - tol) rep.v1_nondecreasing = false;
        if (r.v2 > p.v2 + tol) rep.v2_nonincreasing = false;
    }
    return rep;
}

}  // namespace refmarket
