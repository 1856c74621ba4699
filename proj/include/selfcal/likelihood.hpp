#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "selfcal/model.hpp"
#include "selfcal/probability.hpp"

namespace selfcal {

// The 24 recorded event counts in count-table order: n1..n5 = left detector 1'
// with right (1,2,3,4,null), n6..n10 = left 2', n11..n15 = left 3',
// n16..n20 = left 4', n21..n24 = left null with right (1,2,3,4).  The
// double-null count is never observed and has no entry.
struct CountRecord {
    std::array<std::int64_t, 24> n{};

    std::int64_t total() const;
    // singles totals: events where only one side detected
    std::int64_t left_only() const;   // n5, n10, n15, n20
    std::int64_t right_only() const;  // n21..n24
    void validate() const;            // throws on negative entries
};

// log L for the known-nu scenario: nu*p0 + sum_k n_k log p_k (overall
// data-dependent constants dropped).  Returns -inf when some n_k > 0 has
// p_k = 0; the n_k = 0, p_k = 0 terms contribute nothing.
double log_likelihood_known_nu(const CountRecord& d, const JointPoint& p, double nu,
                               double tol_psd = kTolPsd);

// log L for the unknown-nu scenario: sum_k [n_k log(nu p_k) - nu p_k]
// (factorials dropped).  Uses p.nu.
double log_likelihood_unknown_nu(const CountRecord& d, const JointPoint& p,
                                 double tol_psd = kTolPsd);

// Scenario dispatch on cfg.mode; KnownNu uses cfg.known_nu().
double log_likelihood(const CountRecord& d, const JointPoint& p, const ScenarioConfig& cfg);

// The two closed forms drop different data-dependent constants relative to the
// full likelihood L(D|rho,eta,nu).  These return those constants, so that
//   appendix = closed_form + dropped_constant
// holds exactly (used by the oracle comparisons).
double dropped_constant_known_nu(const CountRecord& d, double nu);
double dropped_constant_unknown_nu(const CountRecord& d);

// Test oracle: log L(D|rho,eta,nu) by explicit truncated summation over the
// unobserved double-null count n0 = 0..n0_max of Poisson weight x sequence
// count x multinomial factor x product of outcome probabilities, in log space.
double appendix_log_likelihood(const CountRecord& d, const JointPoint& p, double nu,
                               int n0_max);

// Gradient of the scenario log-likelihood with respect to the unconstrained
// coordinates at the image of p (chain rule through from_unconstrained).
// Throws std::domain_error at boundary points.
std::vector<double> grad_log_likelihood(const CountRecord& d, const JointPoint& p,
                                        const ScenarioConfig& cfg);

// Value + gradient at unconstrained coordinates v; the workhorse for the
// optimizer and the HMC potential.  `physical` is false (value = -inf,
// gradient empty) when the decoded state violates PSD.
struct LogLikEval {
    double value = 0;
    std::vector<double> grad_v;
    bool physical = false;
};
LogLikEval eval_log_likelihood_v(const CountRecord& d, const std::vector<double>& v,
                                 const ScenarioConfig& cfg, bool want_gradient = true);

// Expected (Fisher) information of the Poisson count model in unconstrained
// coordinates, I_ab = sum_k dmu_a dmu_b / mu_k over the 24 recorded rates
// mu_k = nu p_k, transformed by the diagonal coordinate Jacobian.  Row-major
// dim x dim, positive semidefinite; data-independent.  Drives the scoring
// steps of the optimizer.
std::vector<double> fisher_information_v(const std::vector<double>& v, const ScenarioConfig& cfg);

// --- ratio-marginalized likelihood -------------------------------------------

// Distribution over the per-side efficiency-ratio vectors used when ratios are
// calibrated only up to a distribution.
struct RatioPrior {
    struct Atom {
        std::array<double, 4> left;
        std::array<double, 4> right;
        double weight = 1.0;
    };
    // finite mixture of explicit ratio pairs; empty means "uniform box"
    std::vector<Atom> atoms;
    // uniform box: each ratio drawn U(lo, hi), then the side is renormalized
    // so its max ratio is 1
    std::array<double, 4> lo_left{}, hi_left{}, lo_right{}, hi_right{};
    bool use_box = false;

    static RatioPrior point_mass(const std::array<double, 4>& left,
                                 const std::array<double, 4>& right);
    static RatioPrior two_point(const Atom& a, const Atom& b);
    static RatioPrior uniform_box(double lo, double hi);

    std::pair<std::array<double, 4>, std::array<double, 4>> sample(std::uint64_t seed,
                                                                   std::uint64_t index) const;
};

// log of the ratio-prior average of the likelihood at fixed state, scales and
// nu: log (1/m) sum_i L(D | s, k_i), draws k_i fixed by `seed` (log-sum-exp
// stabilized).  `s` supplies state, both scales, and nu; its ratio entries are
// replaced by the draws.
double marginal_log_likelihood(const CountRecord& d, const JointPoint& s,
                               const ScenarioConfig& cfg, const RatioPrior& ratio_prior, int m,
                               std::uint64_t seed);

}  // namespace selfcal
