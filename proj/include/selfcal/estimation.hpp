#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "selfcal/likelihood.hpp"
#include "selfcal/model.hpp"

namespace selfcal {

struct MLResult {
    JointPoint estimate;
    double logL_max = 0;
    bool converged = false;
    int iterations = 0;
    double gradient_norm = 0;
    int start_index = 0;
    // coordinates driven to a box boundary (eta -> 0/1, |q| -> 1); such runs
    // are legitimate for degenerate data and are reported, not failed
    std::vector<std::string> boundary_flags;
};

// Local maximizer of the scenario log-likelihood from `start`, by L-BFGS
// ascent in unconstrained coordinates with backtracking line search; steps
// into the non-physical (PSD-violating) set are rejected by the line search.
// Deterministic given (d, cfg, start).
MLResult fit_ml(const CountRecord& d, const ScenarioConfig& cfg, const JointPoint& start);

struct ClusterInfo {
    MLResult representative;  // highest logL member
    int members = 0;
    double max_spread = 0;  // max pairwise distance within the cluster (unconstrained coords)
};

struct ModeReport {
    std::vector<ClusterInfo> clusters;  // ordered by descending logL
    // pairwise comparisons of cluster representatives, row-major over clusters
    std::vector<double> pair_fidelity;      // F(rho_i, rho_j)
    std::vector<double> pair_eta_distance;  // Euclidean over the 8 per-detector efficiencies
    std::vector<MLResult> runs;             // every start, by start index
    int failed_starts = 0;

    const MLResult& best() const;
    double fidelity_between(std::size_t i, std::size_t j) const;
    double eta_distance_between(std::size_t i, std::size_t j) const;
};

// Runs fit_ml from n_starts prior-sampled starts (seeded) and single-linkage
// clusters the converged endpoints at cfg.tol.cluster_distance.
ModeReport multi_start_ml(const CountRecord& d, const ScenarioConfig& cfg, int n_starts,
                          std::uint64_t seed);

// Uhlmann fidelity tr|sqrt(rho1) sqrt(rho2)| of the y-zeroed completions.
double fidelity(const CorrelationVector& q1, const CorrelationVector& q2,
                double tol_psd = kTolPsd);

// Euclidean distance between the two points' 8-vectors of per-detector
// efficiencies (left then right).
double efficiency_distance(const JointPoint& a, const JointPoint& b);

}  // namespace selfcal
