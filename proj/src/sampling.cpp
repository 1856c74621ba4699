#include "selfcal/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "selfcal/kernels.hpp"
#include "selfcal/priors.hpp"
#include "selfcal/probability.hpp"
#include "selfcal/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace selfcal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ChainOutput {
    std::vector<std::vector<double>> draws;
    double acceptance = 0;
    double step_size = 0;
};

// one leapfrog trajectory; returns false when the potential is infinite at
// the endpoint (always rejected)
bool leapfrog(const Target& target, std::vector<double>& v, std::vector<double>& p,
              std::vector<double>& grad, double& energy, const std::vector<double>& inv_mass,
              double eps, int steps) {
    const std::size_t dim = v.size();
    for (int s = 0; s < steps; ++s) {
        for (std::size_t i = 0; i < dim; ++i) p[i] -= 0.5 * eps * grad[i];
        for (std::size_t i = 0; i < dim; ++i) v[i] += eps * p[i] * inv_mass[i];
        energy = target.potential(v, &grad);
        if (!std::isfinite(energy)) return false;
        for (std::size_t i = 0; i < dim; ++i) p[i] -= 0.5 * eps * grad[i];
    }
    return true;
}

ChainOutput run_chain(const Target& target, const std::vector<double>& init, int n_draws,
                      const HmcOptions& opt, std::uint64_t seed, std::uint64_t chain_index) {
    const std::size_t dim = static_cast<std::size_t>(target.dim());
    auto rng = make_rng(seed, chain_index);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::vector<double> v = init;
    // small per-chain jitter decorrelates identical starting points
    for (double& x : v) x += 0.05 * gauss(rng);
    std::vector<double> grad(dim), grad_try(dim);
    double u_cur = target.potential(v, &grad);
    if (!std::isfinite(u_cur)) {
        v = init;
        u_cur = target.potential(v, &grad);
        if (!std::isfinite(u_cur)) throw std::invalid_argument("hmc: infinite potential at init");
    }

    std::vector<double> mass(dim, 1.0), inv_mass(dim, 1.0);

    // dual averaging state (Hoffman & Gelman scheme)
    double eps = opt.initial_step_size;
    double mu = std::log(10.0 * eps);
    double log_eps_bar = std::log(eps);
    double h_bar = 0;
    int adapt_t = 0;
    const double gamma = 0.05, t0 = 10.0, kappa = 0.75;
    auto adapt_step = [&](double alpha) {
        ++adapt_t;
        const double t = static_cast<double>(adapt_t);
        h_bar = (1.0 - 1.0 / (t + t0)) * h_bar + (opt.target_accept - alpha) / (t + t0);
        const double log_eps = mu - std::sqrt(t) / gamma * h_bar;
        eps = std::exp(log_eps);
        const double w = std::pow(t, -kappa);
        log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
    };
    auto reset_adaptation = [&]() {
        mu = std::log(10.0 * eps);
        log_eps_bar = std::log(eps);
        h_bar = 0;
        adapt_t = 0;
    };

    const int warmup = opt.warmup;
    const int mass_win_lo = warmup * 2 / 5, mass_win_hi = warmup * 4 / 5;
    std::vector<double> mean(dim, 0.0), m2(dim, 0.0);
    int mass_n = 0;

    ChainOutput out;
    out.draws.reserve(static_cast<std::size_t>(n_draws));
    std::int64_t accept_count = 0, post_total = 0;

    std::vector<double> p(dim), v_try(dim);
    for (int iter = 0; iter < warmup + n_draws; ++iter) {
        const bool in_warmup = iter < warmup;
        for (std::size_t i = 0; i < dim; ++i) p[i] = gauss(rng) * std::sqrt(mass[i]);
        double kin = 0;
        for (std::size_t i = 0; i < dim; ++i) kin += 0.5 * p[i] * p[i] * inv_mass[i];
        const double h0 = u_cur + kin;

        v_try = v;
        grad_try = grad;
        double u_try = u_cur;
        std::vector<double> p_try = p;
        const bool ok = leapfrog(target, v_try, p_try, grad_try, u_try, inv_mass, eps,
                                 opt.leapfrog_steps);
        double alpha = 0;
        if (ok) {
            double kin_try = 0;
            for (std::size_t i = 0; i < dim; ++i) kin_try += 0.5 * p_try[i] * p_try[i] * inv_mass[i];
            alpha = std::min(1.0, std::exp(h0 - (u_try + kin_try)));
        }
        bool accepted_move = false;
        if (ok && unif(rng) < alpha) {
            v = v_try;
            grad = grad_try;
            u_cur = u_try;
            accepted_move = true;
        }

        if (in_warmup) {
            adapt_step(alpha);
            if (iter >= mass_win_lo && iter < mass_win_hi) {
                ++mass_n;
                for (std::size_t i = 0; i < dim; ++i) {
                    const double delta = v[i] - mean[i];
                    mean[i] += delta / mass_n;
                    m2[i] += delta * (v[i] - mean[i]);
                }
            }
            if (iter + 1 == mass_win_hi && mass_n > 10) {
                for (std::size_t i = 0; i < dim; ++i) {
                    const double var = m2[i] / (mass_n - 1);
                    if (var > 1e-12) {
                        inv_mass[i] = var;  // kinetic uses inverse mass = posterior variance
                        mass[i] = 1.0 / var;
                    }
                }
                reset_adaptation();  // retune the step for the new metric
            }
            if (iter + 1 == warmup) eps = std::exp(log_eps_bar);
        } else {
            ++post_total;
            if (accepted_move) ++accept_count;
            out.draws.push_back(v);
        }
    }
    out.acceptance = post_total > 0 ? static_cast<double>(accept_count) / static_cast<double>(post_total) : 0;
    out.step_size = eps;
    return out;
}

// split-Rhat over chains for one coordinate
double split_rhat(const std::vector<std::vector<double>>& chains_coord) {
    std::vector<std::vector<double>> halves;
    for (const auto& c : chains_coord) {
        const std::size_t h = c.size() / 2;
        if (h < 2) return 1.0;
        halves.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(h));
        halves.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(h), c.begin() + static_cast<std::ptrdiff_t>(2 * h));
    }
    const double m = static_cast<double>(halves.size());
    const double n = static_cast<double>(halves.front().size());
    std::vector<double> means;
    double w = 0;
    for (const auto& h : halves) {
        const double mu = std::accumulate(h.begin(), h.end(), 0.0) / n;
        means.push_back(mu);
        double var = 0;
        for (double x : h) var += (x - mu) * (x - mu);
        w += var / (n - 1);
    }
    w /= m;
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
    double b = 0;
    for (double mu : means) b += (mu - grand) * (mu - grand);
    b *= n / (m - 1);
    if (w <= 0) return 1.0;
    return std::sqrt(((n - 1) / n * w + b / n) / w);
}

// effective sample size via Geyer initial-positive-sequence truncation
double effective_sample_size(const std::vector<std::vector<double>>& chains_coord) {
    const std::size_t m = chains_coord.size();
    const std::size_t n = chains_coord.front().size();
    if (n < 4) return static_cast<double>(m * n);
    std::vector<double> mu(m), var(m);
    double w = 0;
    for (std::size_t c = 0; c < m; ++c) {
        mu[c] = std::accumulate(chains_coord[c].begin(), chains_coord[c].end(), 0.0) / static_cast<double>(n);
        double s = 0;
        for (double x : chains_coord[c]) s += (x - mu[c]) * (x - mu[c]);
        var[c] = s / static_cast<double>(n - 1);
        w += var[c] / static_cast<double>(m);
    }
    if (w <= 0) return static_cast<double>(m * n);
    double tau = 1.0;  // 1 + 2 sum rho_t
    for (std::size_t t = 1; t + 1 < n; t += 2) {
        double rho_a = 0, rho_b = 0;
        for (std::size_t c = 0; c < m; ++c) {
            double acov_a = 0, acov_b = 0;
            for (std::size_t i = 0; i + t < n; ++i)
                acov_a += (chains_coord[c][i] - mu[c]) * (chains_coord[c][i + t] - mu[c]);
            for (std::size_t i = 0; i + t + 1 < n; ++i)
                acov_b += (chains_coord[c][i] - mu[c]) * (chains_coord[c][i + t + 1] - mu[c]);
            rho_a += acov_a / static_cast<double>(n) / static_cast<double>(m);
            rho_b += acov_b / static_cast<double>(n) / static_cast<double>(m);
        }
        rho_a /= w;
        rho_b /= w;
        if (rho_a + rho_b < 0) break;
        tau += 2.0 * (rho_a + rho_b);
        if (t > 200) break;  // cap the window for long chains
    }
    return static_cast<double>(m * n) / std::max(tau, 1e-12);
}

}  // namespace

HmcDraws hmc_sample(const Target& target, const std::vector<double>& init, int n_total,
                    const HmcOptions& opt, std::uint64_t seed) {
    if (opt.chains < 1) throw std::invalid_argument("hmc_sample: chains must be >= 1");
    if (n_total < opt.chains) throw std::invalid_argument("hmc_sample: need n_total >= chains");
    const int per_chain = (n_total + opt.chains - 1) / opt.chains;

    std::vector<ChainOutput> outs(static_cast<std::size_t>(opt.chains));
#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < opt.chains; ++c)
        outs[static_cast<std::size_t>(c)] =
            run_chain(target, init, per_chain, opt, seed, static_cast<std::uint64_t>(c));

    HmcDraws result;
    result.draws.reserve(static_cast<std::size_t>(per_chain * opt.chains));
    double acc = 0, step = 0;
    for (const auto& o : outs) {
        acc += o.acceptance / opt.chains;
        step += o.step_size / opt.chains;
        for (const auto& d : o.draws) result.draws.push_back(d);
    }
    result.diagnostics.acceptance_rate = acc;
    result.diagnostics.step_size = step;

    const std::size_t dim = static_cast<std::size_t>(target.dim());
    result.diagnostics.split_rhat.resize(dim);
    result.diagnostics.ess.resize(dim);
    for (std::size_t k = 0; k < dim; ++k) {
        std::vector<std::vector<double>> per_chain_coord;
        for (const auto& o : outs) {
            std::vector<double> col;
            col.reserve(o.draws.size());
            for (const auto& d : o.draws) col.push_back(d[k]);
            per_chain_coord.push_back(std::move(col));
        }
        result.diagnostics.split_rhat[k] = opt.chains > 1 ? split_rhat(per_chain_coord) : 1.0;
        result.diagnostics.ess[k] = effective_sample_size(per_chain_coord);
        if (result.diagnostics.split_rhat[k] > 1.05) result.diagnostics.rhat_ok = false;
    }
    return result;
}

namespace {

class PosteriorTarget final : public Target {
  public:
    PosteriorTarget(const CountRecord& d, const ScenarioConfig& cfg) : d_(d), cfg_(cfg) {}

    int dim() const override { return parameter_dimension(cfg_); }

    double potential(const std::vector<double>& v, std::vector<double>* grad) const override {
        LogLikEval lik = eval_log_likelihood_v(d_, v, cfg_, grad != nullptr);
        if (!lik.physical || !std::isfinite(lik.value)) return kInf;
        const TransformEval tr = eval_transform(v, cfg_);
        const auto gp = grad_log_prior_theta(tr.theta, cfg_);
        double log_prior = 0;
        {
            const JointPoint p = unpack_physical(tr.theta, cfg_);
            log_prior = log_prior_density(p, cfg_, false);
            if (!std::isfinite(log_prior)) return kInf;
        }
        if (grad) {
            grad->resize(v.size());
            for (std::size_t i = 0; i < v.size(); ++i)
                (*grad)[i] = -(lik.grad_v[i] + gp[i] * tr.dtheta_dv[i] + tr.dlogjac_dv[i]);
        }
        return -(lik.value + log_prior + tr.log_jacobian);
    }

  private:
    const CountRecord& d_;
    const ScenarioConfig& cfg_;
};

MLResult fit_for_lambda(const CountRecord& d, const ScenarioConfig& cfg, std::uint64_t seed,
                        const MLResult* ml) {
    if (ml) {
        if (!ml->converged) throw std::invalid_argument("supplied ML fit did not converge");
        return *ml;
    }
    ModeReport report = multi_start_ml(d, cfg, 8, splitmix64(seed ^ 0xf17f17ULL));
    const MLResult& best = report.best();
    if (!best.converged) throw std::runtime_error("sampling: maximum-likelihood fit did not converge");
    return best;
}

std::vector<double> lambdas_from_logl(const std::vector<double>& logl, double logl_max) {
    std::vector<double> lam(logl.size());
    for (std::size_t i = 0; i < logl.size(); ++i) {
        const double l = std::exp(logl[i] - logl_max);
        lam[i] = std::clamp(l, 0.0, 1.0);
    }
    return lam;
}

}  // namespace

SampleSet sample_prior_set(const CountRecord& d, const ScenarioConfig& cfg, int n,
                           std::uint64_t seed, const MLResult* ml,
                           const std::function<double(const JointPoint&)>* log_lik_override) {
    if (n < 1000) throw std::invalid_argument("sample_prior_set: need n >= 1000");
    SampleSet set;
    set.provenance = SampleProvenance::PriorDirect;
    set.seed = seed;
    set.points = sample_prior(cfg, n, seed, &set.state_acceptance_rate);

    if (log_lik_override) {
        set.log_likelihood.resize(set.points.size());
        double mx = -kInf;
        for (std::size_t i = 0; i < set.points.size(); ++i) {
            set.log_likelihood[i] = (*log_lik_override)(set.points[i]);
            mx = std::max(mx, set.log_likelihood[i]);
        }
        set.logL_max = mx;
    } else {
        const MLResult best = fit_for_lambda(d, cfg, seed, ml);
        set.logL_max = best.logL_max;
        set.log_likelihood = kernels::log_likelihood_batch(d, cfg, set.points);
    }
    set.lambda = lambdas_from_logl(set.log_likelihood, set.logL_max);
    return set;
}

std::pair<SampleSet, ChainDiagnostics> sample_posterior_hmc(const CountRecord& d,
                                                            const ScenarioConfig& cfg, int n,
                                                            int chains, std::uint64_t seed,
                                                            const MLResult* ml) {
    if (n < 1000) throw std::invalid_argument("sample_posterior_hmc: need n >= 1000");
    if (chains < 2) throw std::invalid_argument("sample_posterior_hmc: need chains >= 2");
    const MLResult best = fit_for_lambda(d, cfg, seed, ml);

    PosteriorTarget target(d, cfg);
    HmcOptions opt;
    opt.chains = chains;
    opt.warmup = cfg.sampler.warmup;
    opt.leapfrog_steps = cfg.sampler.leapfrog_steps;
    opt.target_accept = cfg.sampler.target_accept;
    opt.initial_step_size = cfg.sampler.initial_step_size;

    const auto init = to_unconstrained(best.estimate, cfg);
    HmcDraws hmc = hmc_sample(target, init, n, opt, seed);

    SampleSet set;
    set.provenance = SampleProvenance::PosteriorHmc;
    set.seed = seed;
    set.chains = chains;
    set.logL_max = best.logL_max;
    set.points.reserve(hmc.draws.size());
    set.log_likelihood.reserve(hmc.draws.size());
    for (const auto& v : hmc.draws) {
        set.points.push_back(from_unconstrained(v, cfg));
        set.log_likelihood.push_back(eval_log_likelihood_v(d, v, cfg, false).value);
    }
    set.lambda = lambdas_from_logl(set.log_likelihood, set.logL_max);
    return {std::move(set), std::move(hmc.diagnostics)};
}

RefinedSize importance_size_refinement(const SampleSet& prior_set, const SampleSet& posterior_set,
                                       double lambda_thr) {
    if (prior_set.provenance != SampleProvenance::PriorDirect)
        throw std::invalid_argument("importance_size_refinement: first set must hold prior draws");
    if (!(lambda_thr > 0 && lambda_thr <= 1))
        throw std::invalid_argument("importance_size_refinement: threshold outside (0, 1]");
    const std::size_t n = prior_set.size(), m = posterior_set.size();
    if (n == 0 || m == 0) throw std::invalid_argument("importance_size_refinement: empty sample set");

    double lam_mean = 0;
    for (double l : prior_set.lambda) lam_mean += l;
    lam_mean /= static_cast<double>(n);
    double lam_var = 0;
    for (double l : prior_set.lambda) lam_var += (l - lam_mean) * (l - lam_mean);
    lam_var /= static_cast<double>(n) * static_cast<double>(n > 1 ? n - 1 : 1);

    RefinedSize out;
    out.lambda_crit_hat = lam_mean;
    double x_mean = 0;
    for (double l : posterior_set.lambda)
        if (l >= lambda_thr) {
            x_mean += 1.0 / l;
            ++out.n_above;
        }
    if (out.n_above == 0)
        throw std::runtime_error("importance_size_refinement: no posterior draw above threshold");
    x_mean /= static_cast<double>(m);
    double x_var = 0;
    for (double l : posterior_set.lambda) {
        const double x = l >= lambda_thr ? 1.0 / l : 0.0;
        x_var += (x - x_mean) * (x - x_mean);
    }
    x_var /= static_cast<double>(m) * static_cast<double>(m > 1 ? m - 1 : 1);

    out.s = lam_mean * x_mean;
    out.sd = std::sqrt(lam_mean * lam_mean * x_var + x_mean * x_mean * lam_var);
    return out;
}

}  // namespace selfcal
