#include "refmarket/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "refmarket/csv.hpp"

namespace refmarket {

namespace {

double atoms_mean(const std::vector<Atom>& atoms)
{
    double s = 0.0;
    for (const auto& a : atoms) s += a.value * a.prob;
    return s;
}

}  // namespace

ValueDistribution::ValueDistribution(std::vector<Atom> atoms) : atoms_(std::move(atoms))
{
    if (atoms_.size() < 2)
        throw DomainError("value distribution needs at least two atoms");
    double total = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
        const auto& a = atoms_[i];
        if (!std::isfinite(a.value) || !std::isfinite(a.prob))
            throw DomainError("value distribution has a non-finite entry");
        if (!(a.prob > 0.0 && a.prob <= 1.0))
            throw DomainError("atom probability must lie in (0,1]");
        if (i > 0 && !(a.value > atoms_[i - 1].value))
            throw DomainError("atom values must be strictly increasing");
        total += a.prob;
    }
    if (std::abs(total - 1.0) > kTol.pmf_sum)
        throw DomainError("atom probabilities must sum to 1");
    mean_ = atoms_mean(atoms_);
}

ValueDistribution::ValueDistribution(std::vector<Atom> atoms, Unchecked) : atoms_(std::move(atoms))
{
    mean_ = atoms_mean(atoms_);
}

ValueDistribution ValueDistribution::point_mass(double v)
{
    return ValueDistribution({{v, 1.0}}, Unchecked{});
}

ValueDistribution ValueDistribution::two_point(double v_low, double v_high, double p_high)
{
    return ValueDistribution({{v_low, 1.0 - p_high}, {v_high, p_high}});
}

std::optional<std::size_t> ValueDistribution::find_atom(double v, double tol) const
{
    for (std::size_t i = 0; i < atoms_.size(); ++i)
        if (std::abs(atoms_[i].value - v) <= tol) return i;
    return std::nullopt;
}

double ValueDistribution::prob_below(double v) const
{
    double s = 0.0;
    for (const auto& a : atoms_)
        if (a.value < v) s += a.prob;
    return s;
}

double ValueDistribution::prob_above(double v) const
{
    double s = 0.0;
    for (const auto& a : atoms_)
        if (a.value > v) s += a.prob;
    return s;
}

ReferralPMF::ReferralPMF(std::vector<double> probs, double tail_mass)
    : probs_(std::move(probs)), tail_mass_(tail_mass)
{
    if (probs_.empty()) throw DomainError("referral PMF is empty");
    double total = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0 && p <= 1.0)) throw DomainError("referral probability outside [0,1]");
        total += p;
    }
    if (!(tail_mass_ >= 0.0 && tail_mass_ < kTol.pmf_tail))
        throw DomainError("referral PMF truncation tail too large");
    if (std::abs(total - 1.0) > 2.0 * kTol.pmf_sum)
        throw DomainError("referral probabilities must sum to 1");
}

double ReferralPMF::p2plus() const
{
    return std::max(0.0, 1.0 - p0() - p1());
}

double ReferralPMF::mean() const
{
    double s = 0.0;
    for (std::size_t k = 1; k < probs_.size(); ++k) s += static_cast<double>(k) * probs_[k];
    return s;
}

double ReferralPMF::cdf(std::size_t k) const
{
    double s = 0.0;
    for (std::size_t j = 0; j <= k && j < probs_.size(); ++j) s += probs_[j];
    return std::min(1.0, s);
}

double ReferralPMF::pgf(double q) const
{
    double s = 0.0;
    for (std::size_t k = probs_.size(); k-- > 0;) s = s * q + probs_[k];
    return s;
}

ReferralPMF ReferralPMF::thinned(double keep) const
{
    if (!(keep >= 0.0 && keep <= 1.0)) throw DomainError("thinning probability outside [0,1]");
    const std::size_t K = probs_.size();
    std::vector<double> out(K, 0.0);
    // binomial(k, keep) mixture; binomial weights by recurrence
    for (std::size_t k = 0; k < K; ++k) {
        if (probs_[k] == 0.0) continue;
        if (keep == 1.0) {
            out[k] += probs_[k];
            continue;
        }
        if (keep == 0.0) {
            out[0] += probs_[k];
            continue;
        }
        double w = std::pow(1.0 - keep, static_cast<double>(k));
        const double ratio = keep / (1.0 - keep);
        for (std::size_t j = 0; j <= k; ++j) {
            out[j] += probs_[k] * w;
            w *= ratio * static_cast<double>(k - j) / static_cast<double>(j + 1);
        }
    }
    return ReferralPMF(std::move(out), tail_mass_);
}

ReferralPMF poisson_pmf(double m, double tail)
{
    if (!(m >= 0.0) || !std::isfinite(m)) throw DomainError("Poisson mean must be a finite nonnegative number");
    if (m == 0.0) return ReferralPMF({1.0});
    std::vector<double> probs;
    double term = std::exp(-m);
    double cum = 0.0;
    for (std::size_t k = 0;; ++k) {
        probs.push_back(term);
        cum += term;
        const double next = term * m / static_cast<double>(k + 1);
        // geometric bound on the remaining tail once terms are decreasing
        if (static_cast<double>(k + 1) > m) {
            const double ratio = m / static_cast<double>(k + 2);
            const double bound = next / (1.0 - ratio);
            if (bound < tail * 1e-3 && next < tail) {
                return ReferralPMF(std::move(probs), std::max(0.0, std::min(bound, 1.0 - cum)));
            }
        }
        term = next;
        if (k > 100000) throw DomainError("Poisson mean too large to tabulate");
    }
}

ReferralFamily ReferralFamily::poisson()
{
    return ReferralFamily{};
}

ReferralFamily ReferralFamily::tabulated(std::vector<double> means, std::vector<ReferralPMF> rows)
{
    if (means.size() != rows.size() || means.size() < 2)
        throw DomainError("tabulated family needs at least two rows");
    for (std::size_t i = 0; i < means.size(); ++i) {
        if (i > 0 && !(means[i] > means[i - 1]))
            throw DomainError("tabulated family means must be strictly increasing");
        if (std::abs(rows[i].mean() - means[i]) > 1e-9)
            throw DomainError("tabulated family row mean does not match its m");
    }
    ReferralFamily f;
    f.kind_ = Kind::Tabulated;
    f.means_ = std::move(means);
    f.rows_ = std::move(rows);
    return f;
}

double ReferralFamily::min_mean() const
{
    return kind_ == Kind::Poisson ? 0.0 : means_.front();
}

double ReferralFamily::max_mean() const
{
    return kind_ == Kind::Poisson ? HUGE_VAL : means_.back();
}

ReferralPMF ReferralFamily::pmf(double m) const
{
    if (kind_ == Kind::Poisson) return poisson_pmf(m);
    const double slack = 1e-12;
    if (!(m >= means_.front() - slack && m <= means_.back() + slack)) {
        std::ostringstream msg;
        msg << "mean " << m << " outside tabulated range [" << means_.front() << ", " << means_.back() << "]";
        throw DomainError(msg.str());
    }
    m = std::clamp(m, means_.front(), means_.back());
    auto it = std::upper_bound(means_.begin(), means_.end(), m);
    std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - means_.begin()), means_.size() - 1);
    std::size_t lo = hi - 1;
    const double t = (m - means_[lo]) / (means_[hi] - means_[lo]);
    const std::size_t K = std::max(rows_[lo].size(), rows_[hi].size());
    std::vector<double> probs(K);
    for (std::size_t k = 0; k < K; ++k) probs[k] = (1.0 - t) * rows_[lo][k] + t * rows_[hi][k];
    return ReferralPMF(std::move(probs));
}

ReferralPMF pmf_from_mean(const ReferralFamily& family, double m)
{
    if (!(m >= 0.0)) throw DomainError("referral mean must be nonnegative");
    return family.pmf(m);
}

ReferralPMF mix(const ReferralPMF& pmf_b, const ReferralPMF& pmf_g, double n_b, double n_g)
{
    if (!(n_b > 0.0 && n_g > 0.0)) throw DomainError("mixture weights must be positive");
    const double n = n_b + n_g;
    const double wb = n_b / n;
    const double wg = n_g / n;
    const std::size_t K = std::max(pmf_b.size(), pmf_g.size());
    std::vector<double> probs(K);
    for (std::size_t k = 0; k < K; ++k) probs[k] = wb * pmf_b[k] + wg * pmf_g[k];
    return ReferralPMF(std::move(probs), std::max(pmf_b.tail_mass(), pmf_g.tail_mass()));
}

std::string to_string(Dominance d)
{
    switch (d) {
    case Dominance::FirstDominates: return "first-dominates";
    case Dominance::SecondDominates: return "second-dominates";
    case Dominance::Equal: return "equal";
    case Dominance::Incomparable: return "incomparable";
    }
    return "?";
}

namespace {

// a dominates b when a's CDF lies weakly below b's everywhere and strictly somewhere
Dominance classify(const std::vector<double>& cdf_a, const std::vector<double>& cdf_b, double tol)
{
    bool a_below = false;
    bool b_below = false;
    for (std::size_t i = 0; i < cdf_a.size(); ++i) {
        const double d = cdf_a[i] - cdf_b[i];
        if (d < -tol) a_below = true;
        if (d > tol) b_below = true;
    }
    if (a_below && b_below) return Dominance::Incomparable;
    if (a_below) return Dominance::FirstDominates;
    if (b_below) return Dominance::SecondDominates;
    return Dominance::Equal;
}

}  // namespace

FosdVerdict check_fosd(const ReferralPMF& a, const ReferralPMF& b, double tol)
{
    const std::size_t K = std::max(a.size(), b.size());
    std::vector<double> ca(K), cb(K);
    double sa = 0.0, sb = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        sa += a[k];
        sb += b[k];
        ca[k] = sa;
        cb[k] = sb;
    }
    return {classify(ca, cb, tol), std::abs(a.p0() - b.p0()) > tol};
}

std::vector<WageAtom> normalize_atoms(std::vector<WageAtom> atoms)
{
    std::sort(atoms.begin(), atoms.end(), [](const WageAtom& x, const WageAtom& y) { return x.wage < y.wage; });
    std::vector<WageAtom> out;
    for (const auto& a : atoms) {
        if (a.mass == 0.0) continue;
        if (!out.empty() && std::abs(out.back().wage - a.wage) <= kTol.indifference)
            out.back().mass += a.mass;
        else
            out.push_back(a);
    }
    return out;
}

Dominance check_fosd(const std::vector<WageAtom>& a, const std::vector<WageAtom>& b, double tol)
{
    auto na = normalize_atoms(a);
    auto nb = normalize_atoms(b);
    double ta = 0.0, tb = 0.0;
    for (const auto& x : na) ta += x.mass;
    for (const auto& x : nb) tb += x.mass;
    if (!(ta > 0.0 && tb > 0.0)) throw DomainError("FOSD comparison of an empty distribution");
    std::vector<double> grid;
    for (const auto& x : na) grid.push_back(x.wage);
    for (const auto& x : nb) grid.push_back(x.wage);
    std::sort(grid.begin(), grid.end());
    auto cdf_at = [](const std::vector<WageAtom>& d, double total, double w) {
        double s = 0.0;
        for (const auto& x : d)
            if (x.wage <= w + kTol.indifference) s += x.mass;
        return s / total;
    };
    std::vector<double> ca, cb;
    for (double w : grid) {
        ca.push_back(cdf_at(na, ta, w));
        cb.push_back(cdf_at(nb, tb, w));
    }
    return classify(ca, cb, tol);
}

ConvexityReport convexity_scan(const ReferralFamily& family, const std::vector<double>& m_grid)
{
    if (m_grid.size() < 3) throw DomainError("convexity scan needs at least three grid points");
    for (std::size_t i = 1; i < m_grid.size(); ++i)
        if (!(m_grid[i] > m_grid[i - 1])) throw DomainError("convexity grid must be strictly increasing");

    std::vector<double> p0, p2;
    for (double m : m_grid) {
        auto pmf = pmf_from_mean(family, m);
        p0.push_back(pmf.p0());
        p2.push_back(pmf.p2plus());
    }
    auto scan = [&](const std::string& name, const std::vector<double>& y) {
        ConvexityStat st;
        st.name = name;
        const double tol = 1e-12;
        for (std::size_t i = 1; i + 1 < y.size(); ++i) {
            const double x0 = m_grid[i - 1], x1 = m_grid[i], x2 = m_grid[i + 1];
            const double s1 = (y[i] - y[i - 1]) / (x1 - x0);
            const double s2 = (y[i + 1] - y[i]) / (x2 - x1);
            const double dd = (s2 - s1) / (x2 - x0);
            if (dd < -tol) {
                st.convex = false;
                st.violations.push_back({x0, x1, x2});
            }
            if (!(dd > tol)) st.strictly_convex = false;
        }
        for (std::size_t i = 1; i < y.size(); ++i)
            if (!(y[i] < y[i - 1])) st.decreasing = false;
        return st;
    };
    return {scan("P(0)", p0), scan("P(2+)", p2)};
}

ValueDistribution read_value_distribution(std::istream& in)
{
    std::vector<Atom> atoms;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto fields = csv::split_fields(line);
        if (fields.empty()) continue;
        if (fields.size() != 2)
            throw DomainError("distribution line " + std::to_string(lineno) + ": expected value,prob");
        atoms.push_back({csv::parse_double(fields[0], lineno), csv::parse_double(fields[1], lineno)});
    }
    return ValueDistribution(std::move(atoms));
}

void write_value_distribution(std::ostream& out, const ValueDistribution& F)
{
    for (const auto& a : F.atoms()) out << csv::format_double(a.value) << ',' << csv::format_double(a.prob) << '\n';
}

ReferralFamily read_tabulated_family(std::istream& in)
{
    std::vector<double> means;
    std::vector<ReferralPMF> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto fields = csv::split_fields(line);
        if (fields.empty()) continue;
        if (fields.size() < 2)
            throw DomainError("family table line " + std::to_string(lineno) + ": expected m,P(0),...");
        means.push_back(csv::parse_double(fields[0], lineno));
        std::vector<double> probs;
        for (std::size_t i = 1; i < fields.size(); ++i) probs.push_back(csv::parse_double(fields[i], lineno));
        rows.emplace_back(std::move(probs));
    }
    return ReferralFamily::tabulated(std::move(means), std::move(rows));
}

}  // namespace refmarket
