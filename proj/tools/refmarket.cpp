#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <thread>

#include "refmarket/abm.hpp"
#include "refmarket/config.hpp"
#include "refmarket/csv.hpp"
#include "refmarket/firing.hpp"
#include "refmarket/metrics.hpp"
#include "refmarket/policy.hpp"

#ifndef REFMARKET_VERSION
#define REFMARKET_VERSION "0.0.0"
#endif

using namespace refmarket;
using csv::format_double;
using csv::Table;

namespace {

std::string fd(double x) { return format_double(x); }
std::string fi(long long x) { return std::to_string(x); }
std::string fb(bool b) { return b ? "1" : "0"; }

struct Options {
    bool compare_baseline = false;
    bool check = false;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

MarketPrimitives primitives_at(const ScenarioConfig& c, const GroupState& s)
{
    const auto [m_b, m_g] = referral_means(s, c.params);
    return MarketPrimitives(c.F, mix(pmf_from_mean(c.params.family, m_b), pmf_from_mean(c.params.family, m_g),
                                     c.params.n_b, c.params.n_g),
                            c.params.n(), c.w_min);
}

std::optional<double> profit_of(const ScenarioConfig& c, const GroupOutcome& o)
{
    if (c.F.size() != 2) return std::nullopt;
    const auto [m_b, m_g] = referral_means({o.blue.employed_in, o.green.employed_in}, c.params);
    const ReferralPMF P = mix(pmf_from_mean(c.params.family, m_b), pmf_from_mean(c.params.family, m_g), c.params.n_b,
                              c.params.n_g);
    return profits(P.p1(), c.F.prob(1), c.F.value(1), o.eq.threshold, c.w_min, c.params.n());
}

const std::vector<std::string> kTrajectoryHeader = {
    "period",      "e_b",         "e_g",        "threshold",  "pool_value",
    "hire_ref_b",  "hire_ref_g",  "hire_pool_b", "hire_pool_g", "mean_wage_b",
    "mean_wage_g", "production",  "per_worker_productivity", "gini", "profits", "next_e_b", "next_e_g"};

std::vector<std::string> trajectory_row(const ScenarioConfig& c, int t, const GroupOutcome& o)
{
    const ProductionReport pr = total_production(o, c.F);
    return {fi(t),
            fd(o.blue.employed_in),
            fd(o.green.employed_in),
            fd(o.eq.threshold),
            fd(o.eq.pool_value),
            fd(o.blue.hired_referral),
            fd(o.green.hired_referral),
            fd(o.blue.hired_pool),
            fd(o.green.hired_pool),
            fd(o.blue.mean_wage(c.w_min)),
            fd(o.green.mean_wage(c.w_min)),
            fd(o.production),
            fd(pr.per_worker_productivity),
            fd(gini_general(o.income_distribution())),
            csv::format_optional(profit_of(c, o)),
            fd(o.next.e_b),
            fd(o.next.e_g)};
}

struct Check {
    std::string name;
    double value;
    bool pass;
};

std::vector<Check> invariant_suite(const ScenarioConfig& c)
{
    std::vector<Check> out;
    const auto [next, o] = step(c.state, c.params, c.F, c.w_min, c.opt);
    const MarketPrimitives prim = primitives_at(c, c.state);
    const Equilibrium& eq = o.eq;
    const double target = std::max(c.w_min, eq.pool_value);
    const double fp = eq.marginal_atom >= 0 ? std::abs(eq.threshold - c.F.value(static_cast<std::size_t>(eq.marginal_atom)))
                                            : std::abs(eq.threshold - target);
    out.push_back({"fixed_point_residual", fp, fp < kTol.residual});
    out.push_back({"lemons_gap_positive", lemons_gap(prim, eq), lemons_gap(prim, eq) > 0.0});
    const double recomputed = pool_value(c.F, prim.P.p0(), eq.threshold, eq.r);
    out.push_back({"pool_value_consistent", std::abs(recomputed - eq.pool_value),
                   std::abs(recomputed - eq.pool_value) < kTol.residual});
    const ProductionReport pr = total_production(o, c.F);
    const double acc = std::abs(pr.employed_value - pr.accounting_employed_value);
    out.push_back({"production_accounting", acc, acc < kTol.residual});
    const double emp = next.e_b + next.e_g;
    const double emp_err = eq.hires_from_pool ? std::abs(emp - 1.0) : std::abs(emp - eq.mass_hired_referral);
    out.push_back({"employment_conservation", emp_err, emp_err < kTol.residual});
    const PlannerResult pl = planner_threshold(prim);
    const bool same = decision_equivalent(pl, eq);
    out.push_back({"planner_decision_match", same ? 0.0 : 1.0, same});
    const double prod_gap = pl.production - o.production;
    out.push_back({"planner_production_gap", prod_gap, std::abs(prod_gap) < kTol.residual});
    return out;
}

Table cmd_check(const ScenarioConfig& c)
{
    Table t({"check", "value", "pass"});
    for (const auto& ch : invariant_suite(c)) t.add_row({ch.name, fd(ch.value), fb(ch.pass)});
    return t;
}

Table cmd_equilibrium(const ScenarioConfig& c)
{
    const auto [next, o] = step(c.state, c.params, c.F, c.w_min, c.opt);
    const MarketPrimitives prim = primitives_at(c, c.state);
    const ProductionReport pr = total_production(o, c.F);
    const PlannerResult pl = planner_threshold(prim);
    Table t({"e_b", "e_g", "p0", "threshold", "r", "pool_value", "pool_hiring", "hire_referral", "hire_pool",
             "employment", "lemons_gap", "production", "per_worker_productivity", "gini", "next_e_b", "next_e_g",
             "planner_production", "planner_match"});
    t.add_row({fd(c.state.e_b), fd(c.state.e_g), fd(prim.P.p0()), fd(o.eq.threshold), fd(o.eq.r), fd(o.eq.pool_value),
               to_string(o.eq.pool_hiring), fd(o.hired_referral), fd(o.hired_pool), fd(next.e_b + next.e_g),
               fd(lemons_gap(prim, o.eq)), fd(o.production), fd(pr.per_worker_productivity),
               fd(gini_general(o.income_distribution())), fd(next.e_b), fd(next.e_g), fd(pl.production),
               fb(decision_equivalent(pl, o.eq))});
    return t;
}

Table paired(const ScenarioConfig& c, const Trajectory& base, const Trajectory& pol)
{
    std::vector<std::string> h = {"scenario"};
    h.insert(h.end(), kTrajectoryHeader.begin(), kTrajectoryHeader.end());
    Table t(h);
    for (const auto& [name, traj] : {std::pair{"baseline", &base}, std::pair{"policy", &pol}})
        for (std::size_t i = 0; i < traj->size(); ++i) {
            auto row = trajectory_row(c, static_cast<int>(i), (*traj)[i]);
            row.insert(row.begin(), name);
            t.add_row(std::move(row));
        }
    return t;
}

Table cmd_dynamics(const ScenarioConfig& c, const Options& o)
{
    if (o.compare_baseline) {
        if (!c.policy.aa) throw ConfigError("--compare-baseline needs [policy] aa_kind and aa_size", 0);
        const Scenario s = c.scenario();
        return paired(c, simulate_policy(s, c.run.periods, std::nullopt), simulate_policy(s, c.run.periods, c.policy.aa));
    }
    const Trajectory traj = simulate(c.state, c.params, c.F, c.w_min, c.run.periods, c.opt);
    Table t(kTrajectoryHeader);
    for (std::size_t i = 0; i < traj.size(); ++i) t.add_row(trajectory_row(c, static_cast<int>(i), traj[i]));
    return t;
}

Table cmd_steady(const ScenarioConfig& c, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ub(0.0, c.params.n_b), ug(0.0, c.params.n_g);
    std::vector<GroupState> starts;
    while (static_cast<int>(starts.size()) < c.run.steady_starts) {
        const GroupState s{ub(rng), ug(rng)};
        if (s.e_b + s.e_g <= 1.0) starts.push_back(s);
    }
    SteadyOptions opt;
    opt.step = c.opt;
    opt.tol = c.run.tol;
    opt.uniqueness_grid = c.run.uniqueness_grid;
    const auto [state, diag] = steady_state(c.params, c.F, c.w_min, starts, opt);
    Table t({"kind", "start_e_b", "start_e_g", "final_e_b", "final_e_g", "converged", "damped", "iterations",
             "cycle_length", "ratio_gap"});
    const double target = c.params.n_b / c.params.n_g;
    for (const auto& r : diag.runs)
        t.add_row({"start", fd(r.start.e_b), fd(r.start.e_g), fd(r.final_state.e_b), fd(r.final_state.e_g),
                   fb(r.converged), fb(r.damped), fi(r.iterations), fi(r.cycle_length),
                   fd(r.final_state.e_g > 0.0 ? std::abs(r.final_state.e_b / r.final_state.e_g - target) : NAN)});
    t.add_row({"summary", "", "", fd(state.e_b), fd(state.e_g), fb(diag.all_converged && diag.common_state), "",
               fi(diag.cycles_detected), fi(diag.grid_sign_changes),
               fd(state.e_g > 0.0 ? std::abs(state.e_b / state.e_g - target) : NAN)});
    std::cerr << "steady: balanced=" << diag.balanced << " common_state=" << diag.common_state
              << " unique_on_grid=" << diag.unique_on_grid << " cycles=" << diag.cycles_detected << "\n";
    return t;
}

Table cmd_policy(const ScenarioConfig& c)
{
    if (!c.policy.aa) throw ConfigError("the policy command needs [policy] aa_kind and aa_size", 0);
    const auto rows = compare_policy(c.scenario(), *c.policy.aa, c.run.periods);
    Table t({"period", "e_g_base", "e_g_policy", "wage_gap_base", "wage_gap_policy", "production_base",
             "production_policy", "delta_e_g", "delta_wage_gap", "delta_production"});
    for (const auto& r : rows)
        t.add_row({fi(r.period), fd(r.e_g_base), fd(r.e_g_policy), fd(r.wage_gap_base), fd(r.wage_gap_policy),
                   fd(r.production_base), fd(r.production_policy), fd(r.e_g_policy - r.e_g_base),
                   fd(r.wage_gap_policy - r.wage_gap_base), fd(r.production_policy - r.production_base)});
    return t;
}

Table cmd_firing(const ScenarioConfig& c)
{
    // a single lambda (set directly or by a sweep) takes precedence over the grid
    std::vector<double> grid = c.policy.lambda ? std::vector<double>{*c.policy.lambda} : c.policy.lambda_grid;
    if (grid.empty()) grid = {0, 0.25, 0.5, 0.75, 1};
    std::vector<FiringEquilibrium> rows;
    for (double l : grid) rows.push_back(solve_firing(c.F, c.w_min, c.params, c.state, l));
    Table t({"lambda", "v1", "v2", "r1", "r2", "base_threshold", "pool1_value", "pool2_value", "production_pre", "production_post",
             "production_total", "bias_pre", "bias_post", "fired", "rehired", "eq3_residual", "eq4_residual"});
    for (const auto& f : rows)
        t.add_row({fd(f.lambda), fd(f.v1), fd(f.v2), fd(f.r1), fd(f.r2), fd(f.base_threshold), fd(f.pool1_value),
                   fd(f.pool2_value), fd(f.production_pre),
                   fd(f.production_post), fd(f.production_total), fd(f.bias_pre), fd(f.bias_post), fd(f.fired),
                   fd(f.rehired), fd(f.eq3_residual), fd(f.eq4_residual)});
    if (std::find(grid.begin(), grid.end(), 0.0) != grid.end() && grid.size() > 1) {
        const FiringComparative fc = firing_comparative(c.F, c.w_min, c.params, c.state, grid);
        std::cerr << "firing: total_nondecreasing=" << fc.total_nondecreasing
                  << " bias_pre_nonincreasing=" << fc.bias_pre_nonincreasing
                  << " production_pre_nonincreasing=" << fc.production_pre_nonincreasing
                  << " production_post_nondecreasing=" << fc.production_post_nondecreasing
                  << " ordering=" << fc.ordering << "\n";
    }
    return t;
}

Table cmd_macro(const ScenarioConfig& c)
{
    const double kappa = c.policy.kappa.value_or(0.2);
    const MacroResult m = macro_shock(c.scenario(), {kappa});
    Table t({"scenario", "kappa", "threshold", "pool_value", "production", "per_worker_productivity", "employment",
             "mean_wage_b", "mean_wage_g", "lost_screened_b", "lost_screened_g", "wage_order_vs_shocked"});
    auto row = [&](const char* name, double k, const GroupOutcome& o, double lb, double lg) {
        t.add_row({name, fd(k), fd(o.eq.threshold), fd(o.eq.pool_value), fd(o.production),
                   fd(total_production(o, c.F).per_worker_productivity), fd(o.next.e_b + o.next.e_g),
                   fd(o.blue.mean_wage(c.w_min)), fd(o.green.mean_wage(c.w_min)), fd(lb), fd(lg),
                   to_string(m.wage_order)});
    };
    row("baseline", 0.0, m.baseline, 0.0, 0.0);
    row("shocked", kappa, m.shocked, m.lost_screened_b, m.lost_screened_g);
    return t;
}

Table cmd_abm(const ScenarioConfig& c, const Options& o)
{
    std::vector<std::pair<std::string, AbmConfig>> runs;
    AbmConfig a = c.abm;
    if (o.compare_baseline) {
        a.matching = PoolMatching::Sequential;
        a.mode = AbmMode::Myopic;
        runs.emplace_back("myopic", a);
        a.mode = AbmMode::Redraw;
        runs.emplace_back("redraw", a);
    } else {
        runs.emplace_back(a.mode == AbmMode::Redraw ? "redraw" : "myopic", a);
    }
    std::vector<std::string> h = {"mode"};
    h.insert(h.end(), kTrajectoryHeader.begin(), kTrajectoryHeader.end() - 4);
    for (const char* extra : {"next_e_b", "next_e_g", "stderr_e_g", "redraw_draws_total", "redraw_cost_total",
                              "green_exhausted", "seed"})
        h.push_back(extra);
    Table t(h);
    for (const auto& [name, cfg] : runs) {
        const AbmTrajectory tr = simulate_abm(cfg);
        for (const auto& p : tr.periods)
            t.add_row({name, fi(p.period), fd(p.e_b), fd(p.e_g), fd(p.threshold), fd(p.pool_value), fd(p.hire_ref_b),
                       fd(p.hire_ref_g), fd(p.hire_pool_b), fd(p.hire_pool_g), fd(p.mean_wage_b), fd(p.mean_wage_g),
                       fd(p.production), fd(p.per_worker_productivity), fd(p.next_e_b), fd(p.next_e_g),
                       fd(p.stderr_e_g), fi(p.redraw_draws), fd(p.redraw_cost), fi(p.green_exhausted),
                       std::to_string(tr.seed)});
    }
    return t;
}

struct SweepSpec {
    std::string key;
    std::vector<double> values;
};

SweepSpec parse_sweep(const std::string& text)
{
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("--sweep expects key=start:stop:step", 0);
    SweepSpec s{text.substr(0, eq), {}};
    double a, b, st;
    char tail;
    if (std::sscanf(text.c_str() + eq + 1, "%lf:%lf:%lf%c", &a, &b, &st, &tail) != 3 || !(st > 0.0) || b < a)
        throw ConfigError("--sweep expects key=start:stop:step with step > 0 and stop >= start", 0);
    const auto count = static_cast<long long>(std::floor((b - a) / st + 1e-9)) + 1;
    if (count > 1000000) throw ConfigError("--sweep grid too large", 0);
    for (long long i = 0; i < count; ++i) s.values.push_back(a + static_cast<double>(i) * st);
    return s;
}

using Command = std::function<Table(const ScenarioConfig&)>;

Table run_sweep(const RawConfig& raw, const std::string& base_dir, const SweepSpec& sw, const Command& cmd,
                int threads, const Options& o)
{
    std::vector<std::optional<Table>> results(sw.values.size());
    std::vector<std::exception_ptr> errors(sw.values.size());
    auto work = [&](std::size_t i) {
        try {
            RawConfig r = raw;
            r.set(sw.key, format_double(sw.values[i]));
            ScenarioConfig c = build_config(r, base_dir);
            if (o.threads) c.abm.threads = *o.threads;
            results[i] = cmd(c);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const std::size_t T = static_cast<std::size_t>(std::max(1, threads));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < T; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < sw.values.size(); i += T) work(i);
        });
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<std::string> h = {"sweep_" + sw.key};
    h.insert(h.end(), results.front()->header().begin(), results.front()->header().end());
    Table out(h);
    for (std::size_t i = 0; i < results.size(); ++i)
        for (auto row : results[i]->rows()) {
            row.insert(row.begin(), format_double(sw.values[i]));
            out.add_row(std::move(row));
        }
    return out;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Referral labor-market equilibrium solver and simulator"};
    app.set_version_flag("--version", REFMARKET_VERSION);
    std::string config_path, out_path, sweep;
    Options opt;
    std::uint64_t seed = 0;
    int threads = 0;
    bool grammar = false;
    app.add_option("--config", config_path, "Scenario config file")->check(CLI::ExistingFile);
    app.add_option("--out", out_path, "Write CSV here instead of stdout");
    auto* seed_opt = app.add_option("--seed", seed, "Master seed for random starts and the ABM");
    auto* threads_opt = app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--check", opt.check, "Run the invariant suite on the solution; exit 1 on failure");
    app.add_flag("--compare-baseline", opt.compare_baseline, "Emit paired baseline/counterfactual trajectories");
    app.add_option("--sweep", sweep, "Grid over one config key: key=start:stop:step");
    app.add_flag("--grammar", grammar, "Print the config grammar and exit");
    app.fallthrough();

    const std::vector<std::string> names = {"equilibrium", "dynamics", "steady", "policy", "firing",
                                            "macro",       "abm",      "sweep",  "check"};
    for (const auto& n : names) app.add_subcommand(n, "Run the " + n + " computation");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    if (grammar) {
        std::cout << config_grammar();
        return 0;
    }
    const auto subs = app.get_subcommands();
    if (subs.size() != 1) {
        std::cerr << "error: choose exactly one subcommand\n" << app.help();
        return 2;
    }
    const std::string sub = subs.front()->get_name();

    try {
        if (config_path.empty()) throw ConfigError("--config is required", 0);
        RawConfig raw;
        ScenarioConfig cfg = load_config(config_path, &raw);
        if (*seed_opt) {
            raw.set("abm.seed", std::to_string(seed));
            opt.seed = seed;
        }
        if (*threads_opt) opt.threads = threads;
        std::string dir = std::filesystem::path(config_path).parent_path().string();
        if (dir.empty()) dir = ".";
        cfg = build_config(raw, dir);
        if (opt.threads) cfg.abm.threads = *opt.threads;
        const std::uint64_t run_seed = opt.seed.value_or(cfg.abm.seed);

        Command cmd;
        if (sub == "equilibrium" || sub == "sweep")
            cmd = cmd_equilibrium;
        else if (sub == "check")
            cmd = cmd_check;
        else if (sub == "dynamics")
            cmd = [&](const ScenarioConfig& c) { return cmd_dynamics(c, opt); };
        else if (sub == "steady")
            cmd = [&](const ScenarioConfig& c) { return cmd_steady(c, run_seed); };
        else if (sub == "policy")
            cmd = cmd_policy;
        else if (sub == "firing")
            cmd = cmd_firing;
        else if (sub == "macro")
            cmd = cmd_macro;
        else
            cmd = [&](const ScenarioConfig& c) { return cmd_abm(c, opt); };

        std::string tag = raw.canonical();
        Table table({"_"});
        if (!sweep.empty()) {
            const SweepSpec sw = parse_sweep(sweep);
            tag += "sweep=" + sweep + "\n";
            const int workers = sub == "abm" ? 1 : opt.threads.value_or(1);
            table = run_sweep(raw, dir, sw, cmd, workers, opt);
        } else if (sub == "sweep") {
            throw ConfigError("the sweep command needs --sweep key=start:stop:step", 0);
        } else {
            table = cmd(cfg);
        }
        if (opt.compare_baseline) tag += "compare-baseline\n";
        const std::string text =
            table.render("refmarket " REFMARKET_VERSION " config=" + csv::hex64(csv::fnv1a64(tag)));
        if (out_path.empty())
            std::cout << text;
        else
            csv::write_file_atomic(out_path, text);

        bool failed = sub == "check" && std::any_of(table.rows().begin(), table.rows().end(),
                                                    [](const auto& r) { return r.back() == "0"; });
        if (opt.check) {
            for (const auto& ch : invariant_suite(cfg)) {
                std::cerr << "check " << ch.name << " " << (ch.pass ? "pass" : "FAIL") << " " << fd(ch.value) << "\n";
                failed = failed || !ch.pass;
            }
        }
        return failed ? 1 : 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
