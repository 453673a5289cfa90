#include "refmarket/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace refmarket {

void GroupParams::validate() const
{
    if (!(n_b > 0.0 && n_g > 0.0)) throw DomainError("group masses must be positive");
    if (!(h_b >= 0.0 && h_b <= 1.0 && h_g >= 0.0 && h_g <= 1.0)) throw DomainError("homophily must lie in [0,1]");
    if (!unsafe && h_b < 1.0 - h_g - kTol.indifference)
        throw DomainError("homophily violates h_b >= 1 - h_g; set the unsafe flag to allow it");
    if (n() < 1.0 - kTol.indifference) throw DomainError("total worker mass must be at least 1");
}

void validate_state(const GroupState& s, const GroupParams& p)
{
    const double tol = kTol.residual;
    if (!(s.e_b >= 0.0 && s.e_g >= 0.0)) throw DomainError("employment masses must be nonnegative");
    if (s.e_b > p.n_b + tol || s.e_g > p.n_g + tol) throw DomainError("employment exceeds group population");
    if (s.e_b + s.e_g > 1.0 + tol) throw DomainError("employment exceeds the unit mass of firms");
}

double GroupBlock::mean_wage(double w_min) const
{
    return (wage_total + w_min * (n - next_employment)) / n;
}

double GroupBlock::employed_mean_value() const
{
    return next_employment > 0.0 ? employed_value / next_employment : 0.0;
}

std::vector<WageAtom> GroupBlock::income_distribution(double w_min) const
{
    auto out = wages;
    out.push_back({w_min, std::max(0.0, n - next_employment)});
    return normalize_atoms(std::move(out));
}

std::vector<WageAtom> GroupOutcome::income_distribution() const
{
    auto out = blue.income_distribution(w_min);
    const auto g = green.income_distribution(w_min);
    out.insert(out.end(), g.begin(), g.end());
    return normalize_atoms(std::move(out));
}

std::pair<double, double> referral_means(const GroupState& s, const GroupParams& p)
{
    const double m_b = (p.h_b * s.e_b + (1.0 - p.h_g) * s.e_g) / p.n_b;
    const double m_g = (p.h_g * s.e_g + (1.0 - p.h_b) * s.e_b) / p.n_g;
    return {std::max(0.0, m_b), std::max(0.0, m_g)};
}

ReferralBalance referral_balance(const GroupParams& p)
{
    const double n = p.n();
    ReferralBalance rb;
    rb.R_b = (p.h_b * p.n_b + (1.0 - p.h_g) * p.n_g) / n;
    rb.R_g = (p.h_g * p.n_g + (1.0 - p.h_b) * p.n_b) / n;
    // cross-multiplied to stay finite when R_g = 0
    rb.balanced = std::abs(rb.R_b * p.n_g - rb.R_g * p.n_b) <= kTol.indifference * std::max(1.0, rb.R_b * p.n_g);
    return rb;
}

namespace {

struct Split {
    double single;  // hired with exactly one competing firm left
    double multi;   // hired with two or more firms competing
    double demoted; // every referring firm diverted
};

Split split_referrals(const ReferralPMF& P, double q)
{
    if (q == 0.0) return {P.p1(), P.p2plus(), 0.0};
    double single = 0.0, demoted = 0.0;
    double qk = 1.0;  // q^(k-1)
    for (std::size_t k = 1; k < P.size(); ++k) {
        single += P[k] * static_cast<double>(k) * (1.0 - q) * qk;
        qk *= q;
        demoted += P[k] * qk;
    }
    const double multi = std::max(0.0, (1.0 - P.p0()) - single - demoted);
    return {single, multi, demoted};
}

void fill_block(GroupBlock& b, const ValueDistribution& F, const Equilibrium& eq, double n, double employed_in,
                double m, const ReferralPMF& P, double q, double w_min, std::vector<double>& hires,
                std::vector<double>& rejected)
{
    const std::size_t K = F.size();
    b.n = n;
    b.employed_in = employed_in;
    b.m = m;
    b.p0 = P.p0();
    b.p1 = P.p1();
    b.p2plus = P.p2plus();
    const Split sp = split_referrals(P, q);
    const double screened = 1.0 - b.p0;
    hires.assign(K, 0.0);
    rejected.assign(K, 0.0);
    b.pool_atoms.assign(K, 0.0);
    for (std::size_t i = 0; i < K; ++i) {
        const double base = n * F.prob(i);
        const double acc = eq.accept[i];
        const double single = base * acc * sp.single;
        const double multi = base * acc * sp.multi;
        hires[i] = single + multi;
        rejected[i] = base * screened * (1.0 - acc);
        b.pool_atoms[i] = base * b.p0 + rejected[i] + base * acc * sp.demoted;
        const double w_hi = std::max(w_min, F.value(i) - eq.threshold + w_min);
        if (single > 0.0) b.wages.push_back({w_min, single});
        if (multi > 0.0) b.wages.push_back({w_hi, multi});
    }
}

}  // namespace

GroupOutcome assemble_round(const RoundSpec& s)
{
    if (s.F == nullptr || s.pmf_b == nullptr || s.pmf_g == nullptr) throw std::logic_error("incomplete round spec");
    const auto& F = *s.F;
    const std::size_t K = F.size();
    GroupOutcome out;
    out.eq = s.eq;
    out.w_min = s.w_min;
    out.n = s.n_b + s.n_g;
    out.firm_mass = s.firm_mass;

    std::vector<double> hb, rb, hg, rg;
    fill_block(out.blue, F, s.eq, s.n_b, s.e_b, s.m_b, *s.pmf_b, s.demote_q, s.w_min, hb, rb);
    fill_block(out.green, F, s.eq, s.n_g, s.e_g, s.m_g, *s.pmf_g, 0.0, s.w_min, hg, rg);

    if (s.promote_mass > 0.0) {
        double left = s.promote_mass;
        for (std::size_t i = K; i-- > 0 && left > 0.0;) {
            const double take = std::min(left, rg[i]);
            if (take <= 0.0) continue;
            hg[i] += take;
            out.green.pool_atoms[i] -= take;
            out.green.wages.push_back({s.w_min, take});
            left -= take;
        }
        if (left > kTol.residual) throw DomainError("promotion exceeds the rejected green referral mass");
    }

    double H = 0.0, pool_total = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
        H += hb[i] + hg[i];
        pool_total += out.blue.pool_atoms[i] + out.green.pool_atoms[i];
    }
    double open_firms = s.firm_mass - H;
    if (open_firms < -kTol.residual) throw DomainError("referral hires exceed the mass of hiring firms");
    open_firms = std::max(0.0, open_firms);
    const double Q = (s.eq.hires_from_pool && pool_total > 0.0) ? std::min(1.0, open_firms / pool_total) : 0.0;

    auto finish = [&](GroupBlock& b, const std::vector<double>& hires) {
        double ref = 0.0, pool = 0.0, pool_val = 0.0, value = 0.0;
        for (std::size_t i = 0; i < K; ++i) {
            ref += hires[i];
            pool += b.pool_atoms[i];
            pool_val += b.pool_atoms[i] * F.value(i);
            value += (hires[i] + Q * b.pool_atoms[i]) * F.value(i);
        }
        b.hired_referral = ref;
        b.hired_pool = Q * pool;
        b.next_employment = ref + b.hired_pool;
        b.pool_mass = pool;
        b.pool_mean = pool > 0.0 ? pool_val / pool : 0.0;
        b.employed_value = value;
        if (b.hired_pool > 0.0) b.wages.push_back({s.w_min, b.hired_pool});
        b.wages = normalize_atoms(std::move(b.wages));
        b.wage_total = 0.0;
        for (const auto& w : b.wages) b.wage_total += w.wage * w.mass;
    };
    finish(out.blue, hb);
    finish(out.green, hg);

    out.hired_referral = out.blue.hired_referral + out.green.hired_referral;
    out.hired_pool = out.blue.hired_pool + out.green.hired_pool;
    out.pool_mass = out.blue.pool_mass + out.green.pool_mass;
    out.pool_mean = out.pool_mass > 0.0
                        ? (out.blue.pool_mean * out.blue.pool_mass + out.green.pool_mean * out.green.pool_mass) /
                              out.pool_mass
                        : 0.0;
    out.employed_value = out.blue.employed_value + out.green.employed_value;
    const double employed = out.blue.next_employment + out.green.next_employment;
    out.production = out.employed_value + s.w_min * (out.n - employed);
    out.next = {out.blue.next_employment, out.green.next_employment};
    return out;
}

std::pair<GroupState, GroupOutcome> step(const GroupState& state, const GroupParams& params,
                                         const ValueDistribution& F, double w_min, const StepOptions& opt)
{
    params.validate();
    validate_state(state, params);
    const auto [m_b, m_g] = referral_means(state, params);
    const ReferralPMF pb = pmf_from_mean(params.family, m_b);
    const ReferralPMF pg = pmf_from_mean(params.family, m_g);
    MarketPrimitives prim(F, mix(pb, pg, params.n_b, params.n_g), params.n(), w_min);
    RoundSpec spec;
    spec.F = &F;
    spec.w_min = w_min;
    spec.n_b = params.n_b;
    spec.n_g = params.n_g;
    spec.e_b = state.e_b;
    spec.e_g = state.e_g;
    spec.m_b = m_b;
    spec.m_g = m_g;
    spec.pmf_b = &pb;
    spec.pmf_g = &pg;
    spec.eq = solve_threshold(prim, opt.r, opt.hire_pool_when_indifferent);
    GroupOutcome out = assemble_round(spec);

    const double tol = kTol.residual;
    if (std::abs(out.hired_referral - out.eq.mass_hired_referral) > tol ||
        std::abs(out.hired_pool - out.eq.mass_hired_pool) > tol ||
        std::abs(out.pool_mean - out.eq.pool_value) > tol ||
        (out.eq.hires_from_pool && std::abs(out.next.e_b + out.next.e_g - 1.0) > tol))
        throw std::logic_error("group masses disagree with the aggregate equilibrium");
    return {out.next, std::move(out)};
}

Trajectory simulate(const GroupState& state0, const GroupParams& params, const ValueDistribution& F,
                    double w_min, int T, const StepOptions& opt)
{
    if (T < 1) throw DomainError("simulation length must be at least 1");
    Trajectory traj;
    traj.reserve(static_cast<std::size_t>(T));
    GroupState s = state0;
    for (int t = 0; t < T; ++t) {
        auto [next, out] = step(s, params, F, w_min, opt);
        traj.push_back(std::move(out));
        s = next;
    }
    return traj;
}

namespace {

double sup_dist(const GroupState& a, const GroupState& b)
{
    return std::max(std::abs(a.e_b - b.e_b), std::abs(a.e_g - b.e_g));
}

GroupState clamp_state(GroupState s, const GroupParams& p)
{
    s.e_b = std::clamp(s.e_b, 0.0, p.n_b);
    s.e_g = std::clamp(s.e_g, 0.0, p.n_g);
    const double total = s.e_b + s.e_g;
    if (total > 1.0) {
        s.e_b /= total;
        s.e_g /= total;
    }
    return s;
}

StartResult run_from(const GroupState& start, const GroupParams& params, const ValueDistribution& F, double w_min,
                     const SteadyOptions& opt)
{
    StartResult res;
    res.start = start;
    const double res_grid = opt.tol.cycle_resolution;
    std::map<std::pair<long long, long long>, int> seen;
    auto key = [res_grid](const GroupState& s) {
        return std::make_pair(std::llround(s.e_b / res_grid), std::llround(s.e_g / res_grid));
    };
    GroupState s = start;
    seen[key(s)] = 0;
    for (int t = 0; t < opt.tol.max_periods; ++t) {
        const GroupState next = step(s, params, F, w_min, opt.step).first;
        res.iterations = t + 1;
        if (sup_dist(next, s) < opt.tol.steady_change) {
            res.converged = true;
            res.final_state = next;
            return res;
        }
        const auto k = key(next);
        auto it = seen.find(k);
        if (it != seen.end() && t + 1 - it->second >= 2) {
            // confirm a genuine orbit rather than a slowly shrinking oscillation
            const int L = t + 1 - it->second;
            GroupState probe = next;
            std::vector<GroupState> orbit;
            std::vector<PoolHiring> regimes;
            for (int j = 0; j < L; ++j) {
                auto [nx, out] = step(probe, params, F, w_min, opt.step);
                orbit.push_back(probe);
                regimes.push_back(out.eq.pool_hiring);
                probe = nx;
            }
            if (sup_dist(probe, next) <= 1e-12) {
                res.cycle_length = L;
                res.cycle_states = std::move(orbit);
                res.cycle_pool_hiring = std::move(regimes);
                break;
            }
        }
        seen[k] = t + 1;
        s = next;
    }

    // fallback: half-damped iteration to locate a fixed point of the map
    s = start;
    for (int t = 0; t < opt.tol.max_periods; ++t) {
        const GroupState next = step(s, params, F, w_min, opt.step).first;
        const GroupState damped = clamp_state({0.5 * (s.e_b + next.e_b), 0.5 * (s.e_g + next.e_g)}, params);
        if (sup_dist(next, s) < opt.tol.steady_change) {
            res.converged = true;
            res.damped = true;
            res.final_state = s;
            res.iterations += t + 1;
            return res;
        }
        s = damped;
    }
    res.iterations += opt.tol.max_periods;
    // an unconverged damped search says nothing useful; point at the orbit when there is one
    res.final_state = res.cycle_length > 0 ? res.cycle_states.front() : s;
    return res;
}

}  // namespace

std::pair<GroupState, SteadyDiagnostics> steady_state(const GroupParams& params, const ValueDistribution& F,
                                                      double w_min, const std::vector<GroupState>& starts,
                                                      const SteadyOptions& opt)
{
    if (starts.empty()) throw DomainError("steady state needs at least one start");
    params.validate();
    SteadyDiagnostics d;
    d.balanced = referral_balance(params).balanced;
    for (const auto& s0 : starts) {
        d.runs.push_back(run_from(s0, params, F, w_min, opt));
        const auto& r = d.runs.back();
        if (!r.converged) d.all_converged = false;
        if (r.cycle_length > 0) ++d.cycles_detected;
    }
    const StartResult* ref = nullptr;
    for (const auto& r : d.runs) {
        if (!r.converged) continue;
        if (!ref) ref = &r;
        for (const auto& o : d.runs)
            if (o.converged) d.spread = std::max(d.spread, sup_dist(r.final_state, o.final_state));
    }
    d.common_state = ref != nullptr && d.spread <= 1e-8;

    // sign changes of the one-step green employment change along e_b + e_g = 1
    const double lo = std::max(0.0, 1.0 - params.n_b);
    const double hi = std::min(1.0, params.n_g);
    int prev_sign = 0;
    bool zero_seen = false;
    for (int i = 0; i <= opt.uniqueness_grid && hi > lo; ++i) {
        const double eg = lo + (hi - lo) * i / opt.uniqueness_grid;
        const GroupState s = clamp_state({1.0 - eg, eg}, params);
        const double phi = step(s, params, F, w_min, opt.step).first.e_g - s.e_g;
        const int sg = phi > 1e-13 ? 1 : (phi < -1e-13 ? -1 : 0);
        if (sg == 0) {
            zero_seen = true;
            continue;
        }
        if (prev_sign != 0 && sg != prev_sign) ++d.grid_sign_changes;
        prev_sign = sg;
    }
    if (d.grid_sign_changes == 0 && zero_seen) d.grid_sign_changes = 1;
    d.unique_on_grid = d.grid_sign_changes <= 1;
    return {ref ? ref->final_state : d.runs.front().final_state, std::move(d)};
}

GroupComparison group_comparison(const GroupOutcome& o)
{
    GroupComparison c;
    c.wage_fosd = check_fosd(o.blue.income_distribution(o.w_min), o.green.income_distribution(o.w_min));
    c.employment_rate = {o.blue.employment_rate(), o.green.employment_rate()};
    c.employed_productivity = {o.blue.employed_mean_value(), o.green.employed_mean_value()};
    c.unemployed_productivity = {o.blue.pool_mean, o.green.pool_mean};
    return c;
}

ConcentrationReport concentration_check(const GroupParams& params, const std::vector<double>& e_grid)
{
    if (e_grid.size() < 3) throw DomainError("concentration check needs at least three grid points");
    ConcentrationReport rep;
    double m_lo = HUGE_VAL, m_hi = 0.0;
    for (double eg : e_grid) {
        const GroupState s{1.0 - eg, eg};
        const auto [m_b, m_g] = referral_means(s, params);
        m_lo = std::min({m_lo, m_b, m_g});
        m_hi = std::max({m_hi, m_b, m_g});
        const auto agg = mix(pmf_from_mean(params.family, m_b), pmf_from_mean(params.family, m_g), params.n_b,
                             params.n_g);
        rep.e_g.push_back(eg);
        rep.p0.push_back(agg.p0());
        rep.p2plus.push_back(agg.p2plus());
    }
    auto convex = [&](const std::vector<double>& y) {
        for (std::size_t i = 1; i + 1 < y.size(); ++i) {
            const double s1 = (y[i] - y[i - 1]) / (e_grid[i] - e_grid[i - 1]);
            const double s2 = (y[i + 1] - y[i]) / (e_grid[i + 1] - e_grid[i]);
            if (s2 - s1 < -1e-12) return false;
        }
        return true;
    };
    rep.p0_convex = convex(rep.p0);
    rep.p2plus_convex = convex(rep.p2plus);
    rep.argmin_p0 = static_cast<std::size_t>(std::min_element(rep.p0.begin(), rep.p0.end()) - rep.p0.begin());
    rep.argmin_p2plus =
        static_cast<std::size_t>(std::min_element(rep.p2plus.begin(), rep.p2plus.end()) - rep.p2plus.begin());

    if (m_hi > m_lo) {
        std::vector<double> mg;
        for (int i = 0; i <= 40; ++i) mg.push_back(m_lo + (m_hi - m_lo) * i / 40.0);
        const auto cs = convexity_scan(params.family, mg);
        rep.hypotheses_hold = cs.p0.convex && cs.p2plus.convex;
    }

    // m_b - m_g = a + b e_g along e_b = 1 - e_g
    const double a = params.h_b / params.n_b - (1.0 - params.h_b) / params.n_g;
    const double b = (1.0 - params.h_b - params.h_g) * (1.0 / params.n_b + 1.0 / params.n_g);
    if (std::abs(b) < 1e-14) {
        rep.degenerate = true;
        rep.minimum_at_equalizer = true;
        return rep;
    }
    rep.equalizing_e_g = std::clamp(-a / b, e_grid.front(), e_grid.back());
    double spacing = 0.0;
    for (std::size_t i = 1; i < e_grid.size(); ++i) spacing = std::max(spacing, e_grid[i] - e_grid[i - 1]);
    rep.minimum_at_equalizer = std::abs(e_grid[rep.argmin_p0] - rep.equalizing_e_g) <= spacing + 1e-12;
    return rep;
}

double value_homophily_transition(double e_high, double alpha)
{
    // probability a high-value worker holds the single referral
    const double p = e_high * alpha + (1.0 - e_high) * (1.0 - alpha);
    return p + (1.0 - p) * (1.0 - p) / (2.0 - p);
}

double value_homophily_steady(double alpha)
{
    if (!(alpha >= 0.5 && alpha <= 1.0)) throw DomainError("value homophily alpha must lie in [1/2, 1]");
    if (alpha - 0.5 > 1e-6) {
        const double root = std::sqrt((1.0 - alpha) * (5.0 - alpha));
        return (1.0 + alpha - root) / (2.0 * (2.0 * alpha - 1.0));
    }
    // near 1/2 the closed form cancels; bisect e = T(e) on [0,1] instead
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (value_homophily_transition(mid, alpha) - mid > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace refmarket
