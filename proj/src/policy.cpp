#include "refmarket/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace refmarket {

namespace {

struct RoundBase {
    double m_b, m_g;
    ReferralPMF pb, pg;
    Equilibrium eq;
};

RoundBase base_round(const Scenario& s)
{
    s.params.validate();
    validate_state(s.state, s.params);
    const auto [m_b, m_g] = referral_means(s.state, s.params);
    RoundBase b{m_b, m_g, pmf_from_mean(s.params.family, m_b), pmf_from_mean(s.params.family, m_g), {}};
    MarketPrimitives prim(s.F, mix(b.pb, b.pg, s.params.n_b, s.params.n_g), s.params.n(), s.w_min);
    b.eq = solve_threshold(prim, s.opt.r, s.opt.hire_pool_when_indifferent);
    return b;
}

RoundSpec spec_for(const Scenario& s, const RoundBase& b)
{
    RoundSpec spec;
    spec.F = &s.F;
    spec.w_min = s.w_min;
    spec.n_b = s.params.n_b;
    spec.n_g = s.params.n_g;
    spec.e_b = s.state.e_b;
    spec.e_g = s.state.e_g;
    spec.m_b = b.m_b;
    spec.m_g = b.m_g;
    spec.pmf_b = &b.pb;
    spec.pmf_g = &b.pg;
    spec.eq = b.eq;
    return spec;
}

double accepted_share(const Scenario& s, const Equilibrium& eq)
{
    double a = 0.0;
    for (std::size_t i = 0; i < s.F.size(); ++i) a += s.F.prob(i) * eq.accept[i];
    return a;
}

// diversion probability per firm that removes `size` blue referral hires
double demote_probability(const Scenario& s, const RoundBase& b, double size)
{
    const double scale = s.params.n_b * accepted_share(s, b.eq);
    auto demoted = [&](double q) { return scale * (b.pb.pgf(q) - b.pb.p0()); };
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200 && hi - lo > 1e-17; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (demoted(mid) < size)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

AACaps caps_for(const Scenario& s, const RoundBase& b)
{
    const double acc = accepted_share(s, b.eq);
    return {s.params.n_b * (1.0 - b.pb.p0()) * acc, s.params.n_g * (1.0 - b.pg.p0()) * (1.0 - acc)};
}

std::string fmt(double x)
{
    std::ostringstream o;
    o.precision(10);
    o << x;
    return o.str();
}

}  // namespace

AACaps aa_caps(const Scenario& s)
{
    return caps_for(s, base_round(s));
}

GroupOutcome apply_aa_mix(const Scenario& s, double promote_size, double demote_size)
{
    if (!(promote_size >= 0.0 && demote_size >= 0.0)) throw PolicyError("policy size must be nonnegative");
    const RoundBase b = base_round(s);
    const AACaps caps = caps_for(s, b);
    if (demote_size > caps.demote_blue + kTol.residual)
        throw PolicyError("demote-blue size " + fmt(demote_size) + " exceeds the blue referral-hire mass " +
                          fmt(caps.demote_blue));
    if (promote_size > caps.promote_green + kTol.residual)
        throw PolicyError("promote-green size " + fmt(promote_size) + " exceeds the rejected green referral mass " +
                          fmt(caps.promote_green));
    RoundSpec spec = spec_for(s, b);
    spec.promote_mass = std::min(promote_size, caps.promote_green);
    if (demote_size > 0.0) spec.demote_q = demote_size >= caps.demote_blue ? 1.0 : demote_probability(s, b, demote_size);
    return assemble_round(spec);
}

GroupOutcome apply_aa(const Scenario& s, const AAPolicy& policy)
{
    if (policy.size == 0.0) return step(s.state, s.params, s.F, s.w_min, s.opt).second;
    return policy.kind == AAKind::PromoteGreen ? apply_aa_mix(s, policy.size, 0.0) : apply_aa_mix(s, 0.0, policy.size);
}

double aa_size_for_target(const Scenario& s, AAKind kind, double delta_e_g)
{
    const double base = step(s.state, s.params, s.F, s.w_min, s.opt).first.e_g;
    const AACaps caps = aa_caps(s);
    const double cap = kind == AAKind::PromoteGreen ? caps.promote_green : caps.demote_blue;
    auto gain = [&](double size) { return apply_aa(s, {kind, size, 0}).next.e_g - base; };
    if (gain(cap) < delta_e_g) throw PolicyError("target green employment gain exceeds what the policy can reach");
    double lo = 0.0, hi = cap;
    for (int i = 0; i < 200 && hi - lo > 1e-16; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (gain(mid) < delta_e_g)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

Trajectory simulate_policy(const Scenario& s, int T, const std::optional<AAPolicy>& policy)
{
    if (T < 1) throw DomainError("simulation length must be at least 1");
    Trajectory traj;
    Scenario cur = s;
    for (int t = 0; t < T; ++t) {
        GroupOutcome out = (policy && policy->period == t) ? apply_aa(cur, *policy)
                                                          : step(cur.state, cur.params, cur.F, cur.w_min, cur.opt).second;
        cur.state = out.next;
        traj.push_back(std::move(out));
    }
    return traj;
}

std::vector<PolicyRow> compare_policy(const Scenario& s, const AAPolicy& policy, int T)
{
    const Trajectory base = simulate_policy(s, T, std::nullopt);
    const Trajectory pol = simulate_policy(s, T, policy);
    std::vector<PolicyRow> rows;
    for (int t = 0; t < T; ++t) {
        const auto& a = base[static_cast<std::size_t>(t)];
        const auto& b = pol[static_cast<std::size_t>(t)];
        rows.push_back({t, a.next.e_g, b.next.e_g, a.wage_gap(), b.wage_gap(), a.production, b.production});
    }
    return rows;
}

int resolved_sign(double policy, double base, double scale)
{
    const double d = policy - base;
    const double res = 8.0 * std::numeric_limits<double>::epsilon() * std::max({std::abs(policy), std::abs(base), scale});
    return d > res ? 1 : (d < -res ? -1 : 0);
}

MultiplierReport aa_multiplier_check(const Scenario& s, const std::vector<double>& epsilon_grid, int horizon)
{
    MultiplierReport rep;
    rep.horizon = horizon;
    const Trajectory base = simulate(s.state, s.params, s.F, s.w_min, horizon, s.opt);
    for (double eps : epsilon_grid) {
        const GroupState moved{s.state.e_b - eps, s.state.e_g + eps};
        rep.epsilon.push_back(eps);
        int fail = -1, reversal = -1, resolved = 0;
        try {
            const Trajectory pert = simulate(moved, s.params, s.F, s.w_min, horizon, s.opt);
            for (int t = 0; t < horizon; ++t) {
                const auto& a = base[static_cast<std::size_t>(t)];
                const auto& b = pert[static_cast<std::size_t>(t)];
                const int se = resolved_sign(b.next.e_g, a.next.e_g);
                const int sp = resolved_sign(b.production, a.production);
                if (fail < 0 && !(b.next.e_g > a.next.e_g && b.production > a.production)) fail = t;
                if (reversal < 0 && (se < 0 || sp < 0)) reversal = t;
                if (se != 0 && sp != 0) ++resolved;
            }
        } catch (const DomainError&) {
            fail = 0;
            reversal = 0;
        }
        rep.improved.push_back(fail < 0);
        rep.first_failure.push_back(fail);
        rep.first_reversal.push_back(reversal);
        rep.resolved_periods.push_back(resolved);
        if (eps > 0.0 && fail < 0 && (!rep.largest_passing || eps > *rep.largest_passing)) rep.largest_passing = eps;
        if (eps > 0.0 && reversal < 0 && (!rep.largest_passing_resolved || eps > *rep.largest_passing_resolved))
            rep.largest_passing_resolved = eps;
    }
    return rep;
}

double promote_loss_per_unit(double f_g, double pool_value, double v_L)
{
    return (pool_value - v_L) / (1.0 - f_g);
}

double demote_loss_per_unit(double f_g, double pool_value, double v_H)
{
    return (v_H - pool_value) / f_g;
}

DirectionRule optimal_aa_direction(double f_g, double pool_value, double v_L, double v_H)
{
    if (!(v_L < pool_value && pool_value < v_H)) throw DomainError("pool value must lie strictly between v_L and v_H");
    if (!(f_g > 0.0 && f_g < 1.0)) throw DomainError("green pool share must lie in (0,1)");
    DirectionRule r;
    r.promote_ratio = (1.0 - f_g) / (pool_value - v_L);
    r.demote_ratio = f_g / (v_H - pool_value);
    const double scale = std::max(r.promote_ratio, r.demote_ratio);
    if (std::abs(r.promote_ratio - r.demote_ratio) <= 1e-12 * scale)
        r.direction = AADirection::Indifferent;
    else
        r.direction = r.promote_ratio > r.demote_ratio ? AADirection::PromoteGreen : AADirection::DemoteBlue;
    return r;
}

GroupOutcome shocked_round(const Scenario& s, double kappa)
{
    if (!(kappa >= 0.0 && kappa < 1.0)) throw DomainError("macro shock kappa must lie in [0,1)");
    if (kappa == 0.0) return step(s.state, s.params, s.F, s.w_min, s.opt).second;
    s.params.validate();
    validate_state(s.state, s.params);
    const auto [m_b, m_g] = referral_means(s.state, s.params);
    const ReferralPMF pb = pmf_from_mean(s.params.family, m_b).thinned(1.0 - kappa);
    const ReferralPMF pg = pmf_from_mean(s.params.family, m_g).thinned(1.0 - kappa);
    MarketPrimitives prim(s.F, mix(pb, pg, s.params.n_b, s.params.n_g), s.params.n(), s.w_min);
    RoundSpec spec;
    spec.F = &s.F;
    spec.w_min = s.w_min;
    spec.n_b = s.params.n_b;
    spec.n_g = s.params.n_g;
    spec.e_b = s.state.e_b;
    spec.e_g = s.state.e_g;
    spec.m_b = m_b * (1.0 - kappa);
    spec.m_g = m_g * (1.0 - kappa);
    spec.firm_mass = 1.0 - kappa;
    spec.pmf_b = &pb;
    spec.pmf_g = &pg;
    spec.eq = solve_threshold(prim, s.opt.r, s.opt.hire_pool_when_indifferent);
    return assemble_round(spec);
}

MacroResult macro_shock(const Scenario& s, const MacroShock& shock)
{
    MacroResult res;
    res.baseline = step(s.state, s.params, s.F, s.w_min, s.opt).second;
    res.shocked = shocked_round(s, shock.kappa);
    res.pool_active = res.baseline.eq.hires_from_pool;
    const double tol = kTol.indifference;
    res.production_down = res.shocked.production < res.baseline.production - tol;
    const auto pw = [](const GroupOutcome& o) { return o.employed_value / (o.next.e_b + o.next.e_g); };
    res.productivity_up = pw(res.shocked) > pw(res.baseline) + tol;
    res.wage_order = check_fosd(res.baseline.income_distribution(), res.shocked.income_distribution());
    auto lost = [](const GroupBlock& a, const GroupBlock& b) { return 1.0 - (1.0 - b.p0) / (1.0 - a.p0); };
    res.lost_screened_b = lost(res.baseline.blue, res.shocked.blue);
    res.lost_screened_g = lost(res.baseline.green, res.shocked.green);
    return res;
}

}  // namespace refmarket
