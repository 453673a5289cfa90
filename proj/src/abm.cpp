#include "refmarket/abm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

namespace refmarket {

namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

// SplitMix64 finalizer; counter-based so any (period, stream, id) draw is reproducible in isolation.
inline std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum Stream : std::uint64_t { Value, Coin, Index, Margin, PoolKey, Order, Pick, Draws };

struct Rng {
    std::uint64_t base;
    Rng(std::uint64_t seed, int period, Stream s)
        : base(mix64(mix64(seed ^ 0x5DEECE66DULL) + static_cast<std::uint64_t>(period) * 16 + s))
    {
    }
    std::uint64_t bits(std::uint64_t id) const { return mix64(base + id * 0xD6E8FEB86659FD93ULL); }
    // Uniform in [0,1).
    double uniform(std::uint64_t id) const { return static_cast<double>(bits(id) >> 11) * 0x1.0p-53; }
    std::uint64_t below(std::uint64_t id, std::uint64_t n) const
    {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(bits(id)) * n) >> 64);
    }
};

// Per-worker record, one cache line shared by the referral phases.
struct Worker {
    std::uint32_t owner;  // lowest referring firm that can hire this worker
    std::uint16_t refs;
    std::uint8_t status;  // 0 unhired, 1 referral hire, 2 pool hire
    std::uint8_t pad;
};

template <class Fn>
void parallel_chunks(int threads, std::size_t n, Fn&& fn)
{
    const std::size_t t = static_cast<std::size_t>(std::max(1, threads));
    if (t == 1 || n < 4096) {
        fn(std::size_t{0}, std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t c = 0; c < t; ++c) {
        const std::size_t lo = n * c / t, hi = n * (c + 1) / t;
        pool.emplace_back([&fn, c, lo, hi] { fn(c, lo, hi); });
    }
    for (auto& th : pool) th.join();
}

struct Counts {
    std::vector<std::int64_t> ref_atom[2], multi_atom[2], pool_atom[2];
    explicit Counts(std::size_t K)
    {
        for (int g = 0; g < 2; ++g) {
            ref_atom[g].assign(K, 0);
            multi_atom[g].assign(K, 0);
            pool_atom[g].assign(K, 0);
        }
    }
    void add(const Counts& o)
    {
        for (int g = 0; g < 2; ++g)
            for (std::size_t i = 0; i < ref_atom[g].size(); ++i) {
                ref_atom[g][i] += o.ref_atom[g][i];
                multi_atom[g][i] += o.multi_atom[g][i];
                pool_atom[g][i] += o.pool_atom[g][i];
            }
    }
};

std::int64_t sum(const std::vector<std::int64_t>& v)
{
    return std::accumulate(v.begin(), v.end(), std::int64_t{0});
}

class Engine {
public:
    explicit Engine(const AbmConfig& c) : cfg_(c), N_(c.firm_count)
    {
        if (c.firm_count < 1) throw DomainError("firm_count must be at least 1");
        if (c.firm_count >= static_cast<std::int64_t>(kNone)) throw DomainError("firm_count too large");
        if (c.periods < 1) throw DomainError("ABM periods must be at least 1");
        if (c.F.size() > 255) throw DomainError("ABM supports at most 255 value atoms");
        c.params.validate();
        validate_state(c.state, c.params);
        nw_[0] = std::llround(c.params.n_b * static_cast<double>(N_));
        nw_[1] = std::llround(c.params.n_g * static_cast<double>(N_));
        if (nw_[0] + nw_[1] >= static_cast<std::int64_t>(kNone)) throw DomainError("worker population too large");
        offset_[0] = 0;
        offset_[1] = nw_[0];
        W_ = nw_[0] + nw_[1];
        double acc = 0.0;
        for (const auto& a : c.F.atoms()) cdf_.push_back(acc += a.prob);
        cdf_.back() = 1.0;
        std::int64_t inc_b = std::min<std::int64_t>(nw_[0], std::llround(c.state.e_b * static_cast<double>(N_)));
        std::int64_t inc_g = std::min<std::int64_t>(nw_[1], std::llround(c.state.e_g * static_cast<double>(N_)));
        inc_g = std::min(inc_g, N_ - inc_b);
        incumbent_.assign(static_cast<std::size_t>(N_), -1);
        std::fill_n(incumbent_.begin(), inc_b, std::int8_t{0});
        std::fill_n(incumbent_.begin() + inc_b, inc_g, std::int8_t{1});
        workers_.resize(static_cast<std::size_t>(W_));
        target_.resize(static_cast<std::size_t>(N_));
    }

    AbmTrajectory run()
    {
        AbmTrajectory traj;
        traj.seed = cfg_.seed;
        traj.firm_count = N_;
        traj.blue_workers = nw_[0];
        traj.green_workers = nw_[1];
        traj.initial_state = shares();
        for (int t = 0; t < cfg_.periods; ++t) traj.periods.push_back(period(t));
        return traj;
    }

private:
    const AbmConfig& cfg_;
    std::int64_t N_;
    std::int64_t nw_[2]{};
    std::int64_t offset_[2]{};
    std::int64_t W_ = 0;
    std::vector<double> cdf_;
    std::vector<std::int8_t> incumbent_;
    std::vector<Worker> workers_;
    std::vector<std::uint32_t> target_;

    GroupState shares() const
    {
        std::int64_t c[2] = {0, 0};
        for (auto g : incumbent_)
            if (g >= 0) ++c[g];
        return {static_cast<double>(c[0]) / static_cast<double>(N_), static_cast<double>(c[1]) / static_cast<double>(N_)};
    }

    int group_of(std::uint32_t w) const { return static_cast<std::int64_t>(w) >= offset_[1] ? 1 : 0; }

    std::size_t atom_of(const Rng& rv, std::uint32_t w) const
    {
        const double u = rv.uniform(w);
        std::size_t i = 0;
        while (i + 1 < cdf_.size() && u >= cdf_[i]) ++i;
        return i;
    }

    AbmPeriod period(int t)
    {
        const double Nd = static_cast<double>(N_);
        const std::size_t K = cfg_.F.size();
        const GroupState s = shares();
        GroupState analytic_in{std::min(s.e_b, cfg_.params.n_b), std::min(s.e_g, cfg_.params.n_g)};
        const GroupOutcome ana = step(analytic_in, cfg_.params, cfg_.F, cfg_.w_min, cfg_.opt).second;
        const Equilibrium& eq = ana.eq;

        AbmPeriod row;
        row.period = t;
        row.e_b = s.e_b;
        row.e_g = s.e_g;
        row.threshold = eq.threshold;
        row.pool_value = eq.pool_value;
        row.workers = W_;

        const Rng r_value(cfg_.seed, t, Value), r_coin(cfg_.seed, t, Coin), r_index(cfg_.seed, t, Index),
            r_margin(cfg_.seed, t, Margin);
        const int threads = cfg_.threads;
        const double h[2] = {cfg_.params.h_b, cfg_.params.h_g};

        parallel_chunks(threads, workers_.size(), [&](std::size_t, std::size_t lo, std::size_t hi) {
            for (std::size_t w = lo; w < hi; ++w) workers_[w] = {kNone, 0, 0, 0};
        });

        // each incumbent refers one worker: homophily coin, then uniform within the chosen group
        parallel_chunks(threads, target_.size(), [&](std::size_t, std::size_t lo, std::size_t hi) {
            for (std::size_t f = lo; f < hi; ++f) {
                const int g = incumbent_[f];
                target_[f] = kNone;
                if (g < 0) continue;
                const int tg = r_coin.uniform(f) < h[g] ? g : 1 - g;
                if (nw_[tg] == 0) continue;
                const auto w = static_cast<std::uint32_t>(offset_[tg] + static_cast<std::int64_t>(
                                                                            r_index.below(f, static_cast<std::uint64_t>(nw_[tg]))));
                target_[f] = w;
                std::atomic_ref<std::uint16_t> refs(workers_[w].refs);
                if (refs.load(std::memory_order_relaxed) < std::numeric_limits<std::uint16_t>::max())
                    refs.fetch_add(1, std::memory_order_relaxed);
            }
        });

        auto accepted = [&](std::uint32_t w) {
            const double a = eq.accept[atom_of(r_value, w)];
            return a >= 1.0 || (a > 0.0 && r_margin.uniform(w) < a);
        };
        parallel_chunks(threads, target_.size(), [&](std::size_t, std::size_t lo, std::size_t hi) {
            for (std::size_t f = lo; f < hi; ++f) {
                const std::uint32_t w = target_[f];
                if (w == kNone || !accepted(w)) continue;
                std::atomic_ref<std::uint32_t> owner(workers_[w].owner);
                std::uint32_t cur = owner.load(std::memory_order_relaxed);
                const auto me = static_cast<std::uint32_t>(f);
                while (me < cur && !owner.compare_exchange_weak(cur, me, std::memory_order_relaxed)) {
                }
            }
        });

        // referral hires; the winning firm records the worker's group as its next incumbent
        const std::size_t chunks = static_cast<std::size_t>(std::max(1, threads));
        std::vector<Counts> part(chunks, Counts(K));
        std::vector<std::int8_t> next(static_cast<std::size_t>(N_), -1);
        parallel_chunks(threads, target_.size(), [&](std::size_t c, std::size_t lo, std::size_t hi) {
            Counts& cnt = part[c];
            for (std::size_t f = lo; f < hi; ++f) {
                const std::uint32_t w = target_[f];
                if (w == kNone || workers_[w].owner != f) continue;
                workers_[w].status = 1;
                const int g = group_of(w);
                next[f] = static_cast<std::int8_t>(g);
                const std::size_t a = atom_of(r_value, w);
                ++cnt.ref_atom[g][a];
                if (workers_[w].refs >= 2) ++cnt.multi_atom[g][a];
            }
        });
        Counts total(K);
        for (const auto& p : part) total.add(p);

        const std::int64_t ref_hires = sum(total.ref_atom[0]) + sum(total.ref_atom[1]);
        const std::int64_t open_firms = N_ - ref_hires;
        if (eq.hires_from_pool && open_firms > 0) {
            const bool sequential = cfg_.mode == AbmMode::Redraw || cfg_.matching == PoolMatching::Sequential;
            const double premium = ana.green.pool_mean - ana.blue.pool_mean;
            row.premium = premium;
            if (sequential)
                match_sequential(t, next, total, row, r_value, premium);
            else
                match_subset(t, next, total, r_value, open_firms);
        } else {
            row.premium = ana.green.pool_mean - ana.blue.pool_mean;
        }

        std::int64_t employed[2], ref[2], pool[2];
        double value = 0.0, wages[2] = {0.0, 0.0};
        for (int g = 0; g < 2; ++g) {
            ref[g] = sum(total.ref_atom[g]);
            pool[g] = sum(total.pool_atom[g]);
            employed[g] = ref[g] + pool[g];
            std::int64_t multi = 0;
            for (std::size_t i = 0; i < K; ++i) {
                const double v = cfg_.F.value(i);
                value += v * static_cast<double>(total.ref_atom[g][i] + total.pool_atom[g][i]);
                wages[g] += static_cast<double>(total.multi_atom[g][i]) *
                            std::max(cfg_.w_min, v - eq.threshold + cfg_.w_min);
                multi += total.multi_atom[g][i];
            }
            wages[g] += static_cast<double>(employed[g] - multi) * cfg_.w_min;
            wages[g] += static_cast<double>(nw_[g] - employed[g]) * cfg_.w_min;
        }
        row.employed = employed[0] + employed[1];
        row.unemployed = W_ - row.employed;
        row.hire_ref_b = static_cast<double>(ref[0]) / Nd;
        row.hire_ref_g = static_cast<double>(ref[1]) / Nd;
        row.hire_pool_b = static_cast<double>(pool[0]) / Nd;
        row.hire_pool_g = static_cast<double>(pool[1]) / Nd;
        row.next_e_b = static_cast<double>(employed[0]) / Nd;
        row.next_e_g = static_cast<double>(employed[1]) / Nd;
        row.mean_wage_b = nw_[0] > 0 ? wages[0] / static_cast<double>(nw_[0]) : cfg_.w_min;
        row.mean_wage_g = nw_[1] > 0 ? wages[1] / static_cast<double>(nw_[1]) : cfg_.w_min;
        row.production = (value + cfg_.w_min * static_cast<double>(row.unemployed)) / Nd;
        row.per_worker_productivity = row.employed > 0 ? value / static_cast<double>(row.employed) : 0.0;
        auto se = [&](std::int64_t count, std::int64_t pop) {
            if (pop == 0) return 0.0;
            const double p = static_cast<double>(count) / static_cast<double>(pop);
            return std::sqrt(static_cast<double>(pop) * p * (1.0 - p)) / Nd;
        };
        row.stderr_e_b = se(employed[0], nw_[0]);
        row.stderr_e_g = se(employed[1], nw_[1]);
        row.stderr_ref_b = se(ref[0], nw_[0]);
        row.stderr_ref_g = se(ref[1], nw_[1]);

        incumbent_.swap(next);
        return row;
    }

    // Uniform random subset of the pool: the open_firms smallest keys win.
    void match_subset(int t, std::vector<std::int8_t>& next, Counts& total, const Rng& r_value,
                      std::int64_t open_firms)
    {
        const Rng r_key(cfg_.seed, t, PoolKey);
        std::vector<std::uint64_t> keys;
        keys.reserve(static_cast<std::size_t>(W_));
        for (std::size_t w = 0; w < workers_.size(); ++w)
            if (workers_[w].status == 0) keys.push_back(r_key.bits(w));
        const auto pool_size = static_cast<std::int64_t>(keys.size());
        const std::int64_t hires = std::min(open_firms, pool_size);
        if (hires == 0) return;
        std::uint64_t cut = std::numeric_limits<std::uint64_t>::max();
        std::int64_t below = 0;
        if (hires < pool_size) {
            std::nth_element(keys.begin(), keys.begin() + (hires - 1), keys.end());
            cut = keys[static_cast<std::size_t>(hires - 1)];
            below = std::count_if(keys.begin(), keys.end(), [cut](std::uint64_t k) { return k < cut; });
        }
        std::int64_t ties_left = hires - below, taken = 0;
        std::size_t f = 0;
        for (std::size_t w = 0; w < workers_.size() && taken < hires; ++w) {
            if (workers_[w].status != 0) continue;
            const std::uint64_t k = r_key.bits(w);
            if (k > cut) continue;
            if (k == cut) {
                if (ties_left == 0) continue;
                --ties_left;
            }
            while (next[f] >= 0) ++f;
            const int g = group_of(static_cast<std::uint32_t>(w));
            workers_[w].status = 2;
            next[f++] = static_cast<std::int8_t>(g);
            ++total.pool_atom[g][atom_of(r_value, static_cast<std::uint32_t>(w))];
            ++taken;
        }
    }

    // Firms draw one at a time in random order from shuffled group queues.
    void match_sequential(int t, std::vector<std::int8_t>& next, Counts& total, AbmPeriod& row, const Rng& r_value,
                          double premium)
    {
        const Rng r_key(cfg_.seed, t, PoolKey), r_order(cfg_.seed, t, Order), r_pick(cfg_.seed, t, Pick),
            r_draws(cfg_.seed, t, Draws);
        std::vector<std::pair<std::uint64_t, std::uint32_t>> queue[2];
        for (std::size_t w = 0; w < workers_.size(); ++w)
            if (workers_[w].status == 0) {
                const auto id = static_cast<std::uint32_t>(w);
                queue[group_of(id)].emplace_back(r_key.bits(w), id);
            }
        for (auto& q : queue) std::sort(q.begin(), q.end());
        std::vector<std::pair<std::uint64_t, std::uint32_t>> firms;
        for (std::size_t f = 0; f < next.size(); ++f)
            if (next[f] < 0) firms.emplace_back(r_order.bits(f), static_cast<std::uint32_t>(f));
        std::sort(firms.begin(), firms.end());

        const bool redraw = cfg_.mode == AbmMode::Redraw;
        const double Nd = static_cast<double>(N_);
        std::size_t head[2] = {0, 0};
        for (const auto& [key, f] : firms) {
            const auto left_b = static_cast<std::int64_t>(queue[0].size() - head[0]);
            const auto left_g = static_cast<std::int64_t>(queue[1].size() - head[1]);
            if (left_b + left_g == 0) break;
            const double cost = static_cast<double>(f) / Nd;
            int g;
            if (redraw && cost < premium) {
                if (left_g > 0) {
                    g = 1;
                    const double p = static_cast<double>(left_g) / static_cast<double>(left_b + left_g);
                    std::int64_t draws = 1;
                    if (p < 1.0) {
                        const double u = 1.0 - r_draws.uniform(f);  // (0,1]
                        const double d = std::floor(std::log(u) / std::log1p(-p));
                        draws = 1 + static_cast<std::int64_t>(std::min(d, static_cast<double>(left_b)));
                    }
                    row.redraw_draws += draws - 1;
                    row.redraw_cost += cost * static_cast<double>(draws - 1);
                } else {
                    g = 0;
                    ++row.green_exhausted;
                }
            } else {
                const double share_b = static_cast<double>(left_b) / static_cast<double>(left_b + left_g);
                g = r_pick.uniform(f) < share_b ? 0 : 1;
            }
            const std::uint32_t w = queue[g][head[g]++].second;
            workers_[w].status = 2;
            next[f] = static_cast<std::int8_t>(g);
            ++total.pool_atom[g][atom_of(r_value, w)];
        }
    }
};

}  // namespace

AbmTrajectory simulate_abm(const AbmConfig& config)
{
    Engine engine(config);
    return engine.run();
}

ConvergenceReport convergence_study(const AbmConfig& config, const std::vector<std::int64_t>& firm_counts, int seeds)
{
    if (config.mode != AbmMode::Myopic) throw DomainError("convergence study requires myopic mode");
    if (seeds < 2) throw DomainError("convergence study needs at least two seeds");
    ConvergenceReport rep{};
    std::vector<double> xs, ys;
    for (std::int64_t N : firm_counts) {
        ConvergencePoint pt{N, {}, 0.0, 0.0};
        for (int s = 0; s < seeds; ++s) {
            AbmConfig c = config;
            c.firm_count = N;
            c.seed = config.seed + static_cast<std::uint64_t>(s);
            const AbmTrajectory sim = simulate_abm(c);
            const Trajectory ana = simulate(sim.initial_state, c.params, c.F, c.w_min, c.periods, c.opt);
            double err = 0.0;
            for (std::size_t t = 0; t < sim.periods.size(); ++t)
                err = std::max(err, std::abs(sim.periods[t].next_e_g - ana[t].next.e_g));
            pt.errors.push_back(err);
        }
        const double S = static_cast<double>(seeds);
        pt.mean_error = std::accumulate(pt.errors.begin(), pt.errors.end(), 0.0) / S;
        double ss = 0.0;
        for (double e : pt.errors) ss += (e - pt.mean_error) * (e - pt.mean_error);
        pt.ci_width = 2.0 * 1.959963984540054 * std::sqrt(ss / (S - 1.0)) / std::sqrt(S);
        if (pt.mean_error > 0.0) {
            xs.push_back(std::log(static_cast<double>(N)));
            ys.push_back(std::log(pt.mean_error));
        }
        rep.points.push_back(std::move(pt));
    }
    rep.slope = std::numeric_limits<double>::quiet_NaN();
    if (xs.size() >= 2) {
        const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
        const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxy += (xs[i] - mx) * (ys[i] - my);
            sxx += (xs[i] - mx) * (xs[i] - mx);
        }
        rep.slope = sxy / sxx;
    }
    return rep;
}

}  // namespace refmarket
