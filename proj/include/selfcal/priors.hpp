#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "selfcal/model.hpp"

namespace selfcal {

// log density of one scalar prior at x.  `normalized` yields the true beta /
// gamma log-pdf; otherwise the normalization constant is dropped.  Outside the
// support this returns -inf (not an error).
double scalar_log_prior(const PriorSpec& spec, double x, bool normalized = true);

// d/dx of the scalar log density (interior of support only).
double scalar_dlog_prior(const PriorSpec& spec, double x);

// Joint prior of a point under the scenario's prior block: scalar parameters
// plus the constrained-uniform state block (0 inside the physical set, -inf
// outside).  In free-efficiency mode the side's scalar prior applies to each
// of its four efficiencies.
double log_prior_density(const JointPoint& p, const ScenarioConfig& cfg, bool normalized = true);

// Gradient of the joint log prior with respect to the physical parameter
// vector (state block contributes zeros inside the physical set).
std::vector<double> grad_log_prior_theta(const std::vector<double>& theta,
                                         const ScenarioConfig& cfg);

// Analytic mean and sd, plus the shortest interval of prior content `gamma`
// (equal-density endpoints, bisection-refined).  Beta and gamma specs only;
// throws std::invalid_argument for other tags.
struct PriorStats {
    double mean = 0;
    double sd = 0;
    double interval_lo = 0;
    double interval_hi = 0;
};
PriorStats prior_stats(const PriorSpec& spec, double gamma_content = 0.95);

// One scalar draw.
double sample_scalar_prior(const PriorSpec& spec, std::mt19937_64& rng);

// A state block drawn uniformly from the physical set ([-1,1]^8 with PSD
// rejection); `trials` reports how many candidates were consumed.
CorrelationVector sample_state_uniform_constrained(std::mt19937_64& rng, double tol_psd,
                                                   std::int64_t* trials = nullptr);

// n independent prior draws of the full joint point.  Deterministic for a
// fixed seed independent of thread count (block-seeded streams).  Reports the
// state-block acceptance rate if requested.
std::vector<JointPoint> sample_prior(const ScenarioConfig& cfg, int n, std::uint64_t seed,
                                     double* state_acceptance_rate = nullptr);

}  // namespace selfcal
