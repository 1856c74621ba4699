#pragma once

#include <array>
#include <vector>

#include "selfcal/model.hpp"

namespace selfcal {

// Single-qubit operator in the (1, sigma_x, sigma_z) coefficient basis.
struct PauliCoeff {
    double c0 = 0, cx = 0, cz = 0;
};

// The five POM elements of one side: detectors 1..4 then the null element.
// Detector k carries its efficiency: element k = eta_k * Pi_k with
// Pi_1 = (1+sigma_z)/4, Pi_2 = (1-sigma_z)/4, Pi_3 = (1+sigma_x)/4,
// Pi_4 = (1-sigma_x)/4 (the 1/4 includes the basis-choice beam splitter, so
// the five elements resolve the identity).
std::array<PauliCoeff, 5> crosshair_elements(const DetectorSide& side);

// Joint outcome probabilities.  Slots 0..23 follow the count-table order
// (left detector row-major over right detector and right-null, then the
// left-null row over right detectors); slot 24 is the unobserved double-null.
struct OutcomeTable {
    std::array<double, 25> p{};

    static constexpr int kDoubleNull = 24;
    // left outcome j in 0..4 (4 = null), right outcome k in 0..4 (4 = null)
    static int index(int left, int right);
    double double_null() const { return p[kDoubleNull]; }
    double sum() const;
};

// <E_left (x) E_right> via the bilinear correlator expansion; no matrix
// algebra involved.
double pair_expectation(const PauliCoeff& left, const PauliCoeff& right,
                        const CorrelationVector& q);

// All 25 outcome probabilities of a physical point; the double-null entry is
// 1 minus the sum of the 24 recorded ones.  Throws std::domain_error on a
// non-physical state.
OutcomeTable outcome_probabilities(const JointPoint& p, double tol_psd = kTolPsd);

// Probabilities plus partial derivatives with respect to the physical
// parameter layout minus the nu coordinate (probabilities do not depend on
// nu): columns = [q1..q8 | left efficiency params | right efficiency params].
struct OutcomeTablePartials {
    OutcomeTable table;
    int cols = 0;
    std::array<double, 25 * 16> dp{};  // dp[outcome * cols + param]
    double d(int outcome, int param) const { return dp[static_cast<std::size_t>(outcome * cols + param)]; }
};
OutcomeTablePartials outcome_probabilities_with_partials(const JointPoint& p,
                                                         const ScenarioConfig& cfg);

// --- physicality -------------------------------------------------------------

struct PhysicalityResult {
    bool physical = false;
    double min_eigenvalue = 0;
};

// Smallest eigenvalue of the y-zeroed completion matrix M(q); physical iff
// min_eig >= -tol_psd.
PhysicalityResult physicality_check(const CorrelationVector& q, double tol_psd = kTolPsd);

// Fast yes/no physicality predicate (Cholesky of M + tol*1).
bool is_physical(const CorrelationVector& q, double tol_psd = kTolPsd);

// Row-major 4x4 y-zeroed completion matrix M(q).
std::array<double, 16> completion_matrix(const CorrelationVector& q);

// Largest interval of one correlator coordinate keeping M(q) PSD with all
// other fields fixed; endpoints by bisection to `resolution`.  Throws if q
// itself is not physical.
std::array<double, 2> physical_range(const CorrelationVector& q, StateField coord,
                                     double tol_psd = kTolPsd, double resolution = 1e-8);

// Smallest (and second-smallest) eigenpair of M(q); drives the active-set
// handling at the PSD boundary.
struct MinEigenPair {
    double value = 0;
    double second_value = 0;
    std::array<double, 4> vector{};
    std::array<double, 4> second_vector{};
};
MinEigenPair completion_min_eigen(const CorrelationVector& q);

// d(u' M(q) u)/dq_i for fixed u: the gradient of an eigenvalue constraint.
std::array<double, 8> completion_form_gradient(const std::array<double, 4>& u);

// log det M(q) with gradient and (negated, PSD) curvature; false when M is
// not positive definite.  Used by the interior-point barrier of the fitter.
bool completion_logdet(const CorrelationVector& q, double* logdet,
                       std::array<double, 8>* grad, std::array<double, 64>* neg_hess);

}  // namespace selfcal
