#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "selfcal/estimation.hpp"
#include "selfcal/likelihood.hpp"
#include "selfcal/model.hpp"

namespace selfcal {

enum class SampleProvenance { PriorDirect, PosteriorHmc };

// Joint-space draws with their likelihood ratios lambda_i = L_i / L_max.
struct SampleSet {
    std::vector<JointPoint> points;
    std::vector<double> log_likelihood;  // scenario log-likelihood per draw
    std::vector<double> lambda;          // exp(logL_i - logL_max), in [0, 1]
    SampleProvenance provenance = SampleProvenance::PriorDirect;
    std::uint64_t seed = 0;
    int chains = 0;  // 0 for direct prior draws
    double logL_max = 0;
    double state_acceptance_rate = 0;  // PSD rejection acceptance (prior draws)

    std::size_t size() const { return points.size(); }
};

struct ChainDiagnostics {
    double acceptance_rate = 0;
    double step_size = 0;
    std::vector<double> split_rhat;  // per unconstrained coordinate
    std::vector<double> ess;         // per unconstrained coordinate
    bool rhat_ok = true;             // all split-Rhat <= 1.05
};

// --- generic HMC core ---------------------------------------------------------

// Potential = -log target density in unconstrained coordinates.  +inf marks a
// forbidden point (gradient then unused).
class Target {
  public:
    virtual ~Target() = default;
    virtual int dim() const = 0;
    virtual double potential(const std::vector<double>& v, std::vector<double>* grad) const = 0;
};

struct HmcOptions {
    int chains = 8;
    int warmup = 1000;
    int leapfrog_steps = 20;
    double target_accept = 0.8;
    double initial_step_size = 0.1;
};

struct HmcDraws {
    std::vector<std::vector<double>> draws;  // pooled post-warmup, chain-major
    ChainDiagnostics diagnostics;
};

// Leapfrog HMC with dual-averaged step size (warm-up only, discarded) and a
// diagonal mass matrix estimated from warm-up variances.  Deterministic per
// (seed, chains, n); chains run on independent seed streams.
HmcDraws hmc_sample(const Target& target, const std::vector<double>& init, int n_total,
                    const HmcOptions& opt, std::uint64_t seed);

// --- scenario-level samplers ----------------------------------------------------

// n direct prior draws with lambda computed against logL_max from a converged
// fit (multi-start when `ml` is not supplied).  `log_lik_override` replaces
// the scenario likelihood (test hook; e.g. a flat likelihood).
SampleSet sample_prior_set(const CountRecord& d, const ScenarioConfig& cfg, int n,
                           std::uint64_t seed, const MLResult* ml = nullptr,
                           const std::function<double(const JointPoint&)>* log_lik_override = nullptr);

// Posterior draws by HMC in unconstrained coordinates: potential =
// -(logL + log prior + log transform Jacobian), PSD violations rejected.
std::pair<SampleSet, ChainDiagnostics> sample_posterior_hmc(const CountRecord& d,
                                                            const ScenarioConfig& cfg, int n,
                                                            int chains, std::uint64_t seed,
                                                            const MLResult* ml = nullptr);

// Importance-refined size estimate for the tiny-region regime:
//   s(thr) = lambda_crit_hat * E_post[ lambda^{-1} 1(lambda >= thr) ],
// the prior = posterior * L(D)/L identity.  Variance by the delta method,
// combining both Monte Carlo averages.
struct RefinedSize {
    double s = 0;
    double sd = 0;
    double lambda_crit_hat = 0;
    std::int64_t n_above = 0;  // posterior draws above threshold
};
RefinedSize importance_size_refinement(const SampleSet& prior_set, const SampleSet& posterior_set,
                                       double lambda_thr);

}  // namespace selfcal
