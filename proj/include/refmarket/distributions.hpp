#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "refmarket/tolerances.hpp"

namespace refmarket {

struct Atom {
    double value;
    double prob;
};

// Discrete productivity distribution: strictly increasing atoms with positive mass.
class ValueDistribution {
public:
    explicit ValueDistribution(std::vector<Atom> atoms);

    // Single-atom distribution; only for tests that need a degenerate population.
    static ValueDistribution point_mass(double v);
    static ValueDistribution two_point(double v_low, double v_high, double p_high);

    const std::vector<Atom>& atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }
    double value(std::size_t i) const { return atoms_[i].value; }
    double prob(std::size_t i) const { return atoms_[i].prob; }
    double mean() const { return mean_; }
    double min_value() const { return atoms_.front().value; }
    double max_value() const { return atoms_.back().value; }

    std::optional<std::size_t> find_atom(double v, double tol = kTol.indifference) const;
    double prob_below(double v) const;
    double prob_above(double v) const;

private:
    struct Unchecked {};
    ValueDistribution(std::vector<Atom> atoms, Unchecked);
    std::vector<Atom> atoms_;
    double mean_ = 0.0;
};

// Distribution of the number of referrals a worker receives, k = 0..size()-1.
class ReferralPMF {
public:
    explicit ReferralPMF(std::vector<double> probs, double tail_mass = 0.0);

    const std::vector<double>& probs() const { return probs_; }
    std::size_t size() const { return probs_.size(); }
    double operator[](std::size_t k) const { return k < probs_.size() ? probs_[k] : 0.0; }
    double p0() const { return (*this)[0]; }
    double p1() const { return (*this)[1]; }
    double p2plus() const;
    double mean() const;
    double cdf(std::size_t k) const;
    double tail_mass() const { return tail_mass_; }
    // Probability generating function sum_k P(k) q^k.
    double pgf(double q) const;
    // Each referral survives independently with probability keep.
    ReferralPMF thinned(double keep) const;

private:
    std::vector<double> probs_;
    double tail_mass_;
};

ReferralPMF poisson_pmf(double m, double tail = kTol.pmf_tail);

// Mean-parameterized family m -> P(.|m).
class ReferralFamily {
public:
    enum class Kind { Poisson, Tabulated };

    static ReferralFamily poisson();
    // Rows are PMFs at strictly increasing means; evaluation interpolates linearly in m.
    static ReferralFamily tabulated(std::vector<double> means, std::vector<ReferralPMF> rows);

    Kind kind() const { return kind_; }
    std::string tag() const { return kind_ == Kind::Poisson ? "poisson" : "tabulated"; }
    double min_mean() const;
    double max_mean() const;
    ReferralPMF pmf(double m) const;

private:
    Kind kind_ = Kind::Poisson;
    std::vector<double> means_;
    std::vector<ReferralPMF> rows_;
};

ReferralPMF pmf_from_mean(const ReferralFamily& family, double m);

// Population-weighted mixture of two group PMFs.
ReferralPMF mix(const ReferralPMF& pmf_b, const ReferralPMF& pmf_g, double n_b, double n_g);

enum class Dominance { FirstDominates, SecondDominates, Equal, Incomparable };
std::string to_string(Dominance d);

struct FosdVerdict {
    Dominance order;
    bool strict_at_zero;  // CDFs differ at k = 0 beyond tolerance
};

FosdVerdict check_fosd(const ReferralPMF& a, const ReferralPMF& b, double tol = kTol.indifference);

// Weighted real-valued atoms, used for wage and income distributions.
struct WageAtom {
    double wage;
    double mass;
};

// Sort by wage and merge equal levels.
std::vector<WageAtom> normalize_atoms(std::vector<WageAtom> atoms);

// FOSD comparison of two weighted distributions after normalizing each to unit mass.
Dominance check_fosd(const std::vector<WageAtom>& a, const std::vector<WageAtom>& b,
                     double tol = kTol.indifference);

struct ConvexityStat {
    std::string name;
    bool convex = true;
    bool strictly_convex = true;
    bool decreasing = true;
    std::vector<std::array<double, 3>> violations;  // offending m triples
};

struct ConvexityReport {
    ConvexityStat p0;
    ConvexityStat p2plus;
};

ConvexityReport convexity_scan(const ReferralFamily& family, const std::vector<double>& m_grid);

ValueDistribution read_value_distribution(std::istream& in);
void write_value_distribution(std::ostream& out, const ValueDistribution& F);
// One row per line: m,P(0),P(1),...
ReferralFamily read_tabulated_family(std::istream& in);

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace refmarket
