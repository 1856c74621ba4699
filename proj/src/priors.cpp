#include "selfcal/priors.hpp"

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "selfcal/probability.hpp"
#include "selfcal/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace selfcal {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_beta_norm(double a, double b) {
    // log 1/B(a,b)
    return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
}

double log_gamma_norm(double shape, double scale) {
    // log 1/(Gamma(k) theta^k)
    return -std::lgamma(shape) - shape * std::log(scale);
}
}  // namespace

double scalar_log_prior(const PriorSpec& spec, double x, bool normalized) {
    switch (spec.kind) {
        case PriorSpec::Kind::Uniform01:
            return (x >= 0 && x <= 1) ? 0.0 : kNegInf;
        case PriorSpec::Kind::UniformStateConstrained:
            throw std::invalid_argument("state prior is not a scalar density");
        case PriorSpec::Kind::Beta: {
            if (!(x > 0 && x < 1)) return kNegInf;
            const double v = (spec.a - 1) * std::log(x) + (spec.b - 1) * std::log1p(-x);
            return normalized ? v + log_beta_norm(spec.a, spec.b) : v;
        }
        case PriorSpec::Kind::Gamma: {
            if (!(x > 0)) return kNegInf;
            const double v = (spec.a - 1) * std::log(x) - x / spec.b;
            return normalized ? v + log_gamma_norm(spec.a, spec.b) : v;
        }
    }
    return kNegInf;
}

double scalar_dlog_prior(const PriorSpec& spec, double x) {
    switch (spec.kind) {
        case PriorSpec::Kind::Uniform01:
            return 0.0;
        case PriorSpec::Kind::UniformStateConstrained:
            throw std::invalid_argument("state prior is not a scalar density");
        case PriorSpec::Kind::Beta:
            return (spec.a - 1) / x - (spec.b - 1) / (1 - x);
        case PriorSpec::Kind::Gamma:
            return (spec.a - 1) / x - 1.0 / spec.b;
    }
    return 0.0;
}

double log_prior_density(const JointPoint& p, const ScenarioConfig& cfg, bool normalized) {
    if (!is_physical(p.state, cfg.tol.tol_psd)) return kNegInf;
    double lp = 0.0;  // state block: constant inside the physical set
    auto add_side = [&](const DetectorSide& s, const PriorSpec& spec, bool free) {
        if (free)
            for (double e : s.efficiencies()) lp += scalar_log_prior(spec, e, normalized);
        else
            lp += scalar_log_prior(spec, s.scale, normalized);
    };
    add_side(p.left, cfg.eta_left_prior, cfg.left_free());
    add_side(p.right, cfg.eta_right_prior, cfg.right_free());
    if (cfg.unknown_nu()) lp += scalar_log_prior(cfg.nu_prior, p.nu, normalized);
    return lp;
}

std::vector<double> grad_log_prior_theta(const std::vector<double>& theta,
                                         const ScenarioConfig& cfg) {
    if (static_cast<int>(theta.size()) != parameter_dimension(cfg))
        throw std::invalid_argument("grad_log_prior_theta: wrong dimension");
    std::vector<double> g(theta.size(), 0.0);
    std::size_t i = 8;
    auto side = [&](const PriorSpec& spec, bool free) {
        const int n = free ? 4 : 1;
        for (int k = 0; k < n; ++k, ++i) g[i] = scalar_dlog_prior(spec, theta[i]);
    };
    side(cfg.eta_left_prior, cfg.left_free());
    side(cfg.eta_right_prior, cfg.right_free());
    if (cfg.unknown_nu()) g[i] = scalar_dlog_prior(cfg.nu_prior, theta[i]);
    return g;
}

namespace {

// Shortest interval of content `gamma` for a unimodal density: the optimal
// [l, u(l)] with u(l) = Q(F(l) + gamma) has equal densities at both endpoints;
// find that l by bisection on pdf(l) - pdf(u(l)).
template <class Dist>
std::pair<double, double> shortest_interval(const Dist& dist, double gamma_content,
                                            double mode) {
    auto upper = [&](double l) {
        // keep strictly below 1 so the quantile stays finite for pdf evaluation
        const double c = std::min(boost::math::cdf(dist, l) + gamma_content, 1.0 - 1e-16);
        return boost::math::quantile(dist, c);
    };
    const double l_max = boost::math::quantile(dist, 1.0 - gamma_content);
    if (mode <= 0.0) return {0.0, upper(0.0)};  // nonincreasing density
    auto g = [&](double l) { return boost::math::pdf(dist, l) - boost::math::pdf(dist, upper(l)); };
    double lo = 0.0, hi = std::min(mode, l_max);
    if (g(lo) >= 0) return {lo, upper(lo)};
    for (int it = 0; it < 200 && hi - lo > 0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (g(mid) < 0 ? lo : hi) = mid;
    }
    const double l = 0.5 * (lo + hi);
    return {l, upper(l)};
}

}  // namespace

PriorStats prior_stats(const PriorSpec& spec, double gamma_content) {
    if (!(gamma_content > 0 && gamma_content < 1))
        throw std::invalid_argument("prior_stats: content must be in (0,1)");
    PriorStats st;
    if (spec.kind == PriorSpec::Kind::Beta) {
        boost::math::beta_distribution<double> dist(spec.a, spec.b);
        st.mean = spec.a / (spec.a + spec.b);
        st.sd = std::sqrt(spec.a * spec.b /
                          ((spec.a + spec.b) * (spec.a + spec.b) * (spec.a + spec.b + 1)));
        const double mode = spec.a > 1 ? (spec.a - 1) / (spec.a + spec.b - 2) : 0.0;
        std::tie(st.interval_lo, st.interval_hi) = shortest_interval(dist, gamma_content, mode);
        return st;
    }
    if (spec.kind == PriorSpec::Kind::Gamma) {
        boost::math::gamma_distribution<double> dist(spec.a, spec.b);
        st.mean = spec.a * spec.b;
        st.sd = std::sqrt(spec.a) * spec.b;
        const double mode = spec.a > 1 ? (spec.a - 1) * spec.b : 0.0;
        std::tie(st.interval_lo, st.interval_hi) = shortest_interval(dist, gamma_content, mode);
        return st;
    }
    throw std::invalid_argument("prior_stats: unsupported for " + spec.describe());
}

double sample_scalar_prior(const PriorSpec& spec, std::mt19937_64& rng) {
    switch (spec.kind) {
        case PriorSpec::Kind::Uniform01: {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            return u(rng);
        }
        case PriorSpec::Kind::Beta: {
            std::gamma_distribution<double> ga(spec.a, 1.0), gb(spec.b, 1.0);
            const double x = ga(rng), y = gb(rng);
            return x / (x + y);
        }
        case PriorSpec::Kind::Gamma: {
            std::gamma_distribution<double> g(spec.a, spec.b);
            return g(rng);
        }
        case PriorSpec::Kind::UniformStateConstrained:
            break;
    }
    throw std::invalid_argument("sample_scalar_prior: unsupported for " + spec.describe());
}

CorrelationVector sample_state_uniform_constrained(std::mt19937_64& rng, double tol_psd,
                                                   std::int64_t* trials) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::int64_t count = 0;
    for (;;) {
        ++count;
        std::array<double, 8> q;
        for (double& x : q) x = u(rng);
        const CorrelationVector cv = CorrelationVector::from_array(q);
        if (is_physical(cv, tol_psd)) {
            if (trials) *trials = count;
            return cv;
        }
    }
}

std::vector<JointPoint> sample_prior(const ScenarioConfig& cfg, int n, std::uint64_t seed,
                                     double* state_acceptance_rate) {
    if (n < 1) throw std::invalid_argument("sample_prior: n must be >= 1");
    std::vector<JointPoint> out(static_cast<std::size_t>(n));
    std::vector<std::int64_t> trials(static_cast<std::size_t>(n), 0);

    // one RNG stream per draw index: the result is independent of scheduling
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        auto rng = make_rng(seed, static_cast<std::uint64_t>(i));
        JointPoint p;
        p.state = sample_state_uniform_constrained(rng, cfg.tol.tol_psd,
                                                   &trials[static_cast<std::size_t>(i)]);
        auto draw_side = [&](const std::optional<std::array<double, 4>>& ratios,
                             const PriorSpec& spec) {
            DetectorSide s;
            if (ratios) {
                s.ratios = *ratios;
                s.scale = sample_scalar_prior(spec, rng);
            } else {
                std::array<double, 4> eta;
                for (double& e : eta) e = sample_scalar_prior(spec, rng);
                s = DetectorSide::from_efficiencies(eta);
            }
            return s;
        };
        p.left = draw_side(cfg.ratios_left, cfg.eta_left_prior);
        p.right = draw_side(cfg.ratios_right, cfg.eta_right_prior);
        if (cfg.unknown_nu()) p.nu = sample_scalar_prior(cfg.nu_prior, rng);
        out[static_cast<std::size_t>(i)] = p;
    }
    if (state_acceptance_rate) {
        std::int64_t total = 0;
        for (auto t : trials) total += t;
        *state_acceptance_rate = total > 0 ? static_cast<double>(n) / static_cast<double>(total) : 0.0;
    }
    return out;
}

}  // namespace selfcal
