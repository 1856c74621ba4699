#include "selfcal/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "selfcal/rng.hpp"

namespace selfcal {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// sum_k n_k log p_k with the 0 * log 0 = 0 convention; -inf when a recorded
// outcome has zero probability.
double count_log_prob_sum(const CountRecord& d, const OutcomeTable& t) {
    double s = 0;
    for (int k = 0; k < 24; ++k) {
        const auto nk = d.n[static_cast<std::size_t>(k)];
        if (nk == 0) continue;
        const double pk = t.p[static_cast<std::size_t>(k)];
        if (pk <= 0) return kNegInf;
        s += static_cast<double>(nk) * std::log(pk);
    }
    return s;
}
}  // namespace

std::int64_t CountRecord::total() const {
    std::int64_t s = 0;
    for (auto v : n) s += v;
    return s;
}

std::int64_t CountRecord::left_only() const { return n[4] + n[9] + n[14] + n[19]; }

std::int64_t CountRecord::right_only() const { return n[20] + n[21] + n[22] + n[23]; }

void CountRecord::validate() const {
    for (std::size_t k = 0; k < n.size(); ++k)
        if (n[k] < 0)
            throw std::invalid_argument("CountRecord: negative count at entry " +
                                        std::to_string(k + 1));
}

double log_likelihood_known_nu(const CountRecord& d, const JointPoint& p, double nu,
                               double tol_psd) {
    if (!(nu > 0)) throw std::invalid_argument("log_likelihood_known_nu: nu must be > 0");
    const OutcomeTable t = outcome_probabilities(p, tol_psd);
    const double s = count_log_prob_sum(d, t);
    return s == kNegInf ? kNegInf : nu * t.double_null() + s;
}

double log_likelihood_unknown_nu(const CountRecord& d, const JointPoint& p, double tol_psd) {
    const double nu = p.nu;
    if (!(nu > 0)) throw std::invalid_argument("log_likelihood_unknown_nu: p.nu must be > 0");
    const OutcomeTable t = outcome_probabilities(p, tol_psd);
    const double s = count_log_prob_sum(d, t);
    if (s == kNegInf) return kNegInf;
    const double N = static_cast<double>(d.total());
    return N * std::log(nu) + s - nu * (1.0 - t.double_null());
}

double log_likelihood(const CountRecord& d, const JointPoint& p, const ScenarioConfig& cfg) {
    return cfg.unknown_nu() ? log_likelihood_unknown_nu(d, p, cfg.tol.tol_psd)
                            : log_likelihood_known_nu(d, p, cfg.known_nu(), cfg.tol.tol_psd);
}

double dropped_constant_known_nu(const CountRecord& d, double nu) {
    double lfact = 0;
    for (auto nk : d.n) lfact += std::lgamma(static_cast<double>(nk) + 1.0);
    return static_cast<double>(d.total()) * std::log(nu) - nu - lfact;
}

double dropped_constant_unknown_nu(const CountRecord& d) {
    double lfact = 0;
    for (auto nk : d.n) lfact += std::lgamma(static_cast<double>(nk) + 1.0);
    return -lfact;
}

double appendix_log_likelihood(const CountRecord& d, const JointPoint& p, double nu,
                               int n0_max) {
    if (!(nu > 0)) throw std::invalid_argument("appendix_log_likelihood: nu must be > 0");
    if (n0_max < 0) throw std::invalid_argument("appendix_log_likelihood: n0_max < 0");
    const OutcomeTable t = outcome_probabilities(p);
    const double N = static_cast<double>(d.total());
    const double log_nu = std::log(nu);
    const double p0 = t.double_null();
    const double log_p0 = p0 > 0 ? std::log(p0) : kNegInf;

    double multinom = std::lgamma(N + 1.0);
    for (auto nk : d.n) multinom -= std::lgamma(static_cast<double>(nk) + 1.0);
    const double counts_term = count_log_prob_sum(d, t);
    if (counts_term == kNegInf) return kNegInf;

    // log-sum-exp over the unobserved double-null count
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(n0_max) + 1);
    for (int n0 = 0; n0 <= n0_max; ++n0) {
        if (n0 > 0 && p0 <= 0) break;
        const double m = N + static_cast<double>(n0);
        const double log_poisson = m * log_nu - nu - std::lgamma(m + 1.0);
        const double log_seq_count =
            std::lgamma(m + 1.0) - std::lgamma(N + 1.0) - std::lgamma(static_cast<double>(n0) + 1.0);
        const double null_term = n0 > 0 ? static_cast<double>(n0) * log_p0 : 0.0;
        terms.push_back(log_poisson + log_seq_count + multinom + counts_term + null_term);
    }
    const double mx = *std::max_element(terms.begin(), terms.end());
    if (mx == kNegInf) return kNegInf;
    double acc = 0;
    for (double v : terms) acc += std::exp(v - mx);
    return mx + std::log(acc);
}

LogLikEval eval_log_likelihood_v(const CountRecord& d, const std::vector<double>& v,
                                 const ScenarioConfig& cfg, bool want_gradient) {
    LogLikEval out;
    const TransformEval tr = eval_transform(v, cfg);
    const JointPoint p = unpack_physical(tr.theta, cfg);
    if (!is_physical(p.state, cfg.tol.tol_psd)) {
        out.value = kNegInf;
        return out;
    }
    out.physical = true;
    const double nu = cfg.unknown_nu() ? p.nu : cfg.known_nu();
    const double N = static_cast<double>(d.total());

    if (!want_gradient) {
        out.value = log_likelihood(d, p, cfg);
        return out;
    }

    const OutcomeTablePartials pt = outcome_probabilities_with_partials(p, cfg);
    const OutcomeTable& t = pt.table;
    const double s = count_log_prob_sum(d, t);
    if (s == kNegInf) {
        out.value = kNegInf;
        return out;
    }
    out.value = cfg.unknown_nu() ? N * std::log(nu) + s - nu * (1.0 - t.double_null())
                                 : nu * t.double_null() + s;

    // d logL / d theta_c = sum_k (n_k/p_k - nu) dp_k/dtheta_c over recorded k;
    // identical for both modes since nu dp0 = -nu sum_k dp_k.
    const int cols = pt.cols;
    std::vector<double> grad_theta(static_cast<std::size_t>(parameter_dimension(cfg)), 0.0);
    for (int k = 0; k < 24; ++k) {
        const auto nk = d.n[static_cast<std::size_t>(k)];
        const double pk = t.p[static_cast<std::size_t>(k)];
        const double w = (nk > 0 ? static_cast<double>(nk) / pk : 0.0) - nu;
        if (w == 0) continue;
        for (int c = 0; c < cols; ++c) grad_theta[static_cast<std::size_t>(c)] += w * pt.d(k, c);
    }
    if (cfg.unknown_nu()) grad_theta[static_cast<std::size_t>(cols)] = N / nu - (1.0 - t.double_null());

    out.grad_v.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out.grad_v[i] = grad_theta[i] * tr.dtheta_dv[i];
    return out;
}

std::vector<double> fisher_information_v(const std::vector<double>& v, const ScenarioConfig& cfg) {
    const TransformEval tr = eval_transform(v, cfg);
    const JointPoint p = unpack_physical(tr.theta, cfg);
    const int dim = parameter_dimension(cfg);
    std::vector<double> info(static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim), 0.0);
    if (!is_physical(p.state, cfg.tol.tol_psd)) return info;

    const OutcomeTablePartials pt = outcome_probabilities_with_partials(p, cfg);
    const double nu = cfg.unknown_nu() ? p.nu : cfg.known_nu();
    const int cols = pt.cols;

    // dmu_k/dtheta = nu dp_k (state/efficiency block) and p_k (nu coordinate)
    std::vector<double> dmu(static_cast<std::size_t>(dim));
    for (int k = 0; k < 24; ++k) {
        const double pk = pt.table.p[static_cast<std::size_t>(k)];
        if (pk <= 0) continue;
        for (int c = 0; c < cols; ++c) dmu[static_cast<std::size_t>(c)] = nu * pt.d(k, c);
        if (cfg.unknown_nu()) dmu[static_cast<std::size_t>(cols)] = pk;
        const double inv_mu = 1.0 / (nu * pk);
        for (int a = 0; a < dim; ++a) {
            const double fa = dmu[static_cast<std::size_t>(a)] * inv_mu;
            if (fa == 0) continue;
            for (int b = a; b < dim; ++b)
                info[static_cast<std::size_t>(a * dim + b)] += fa * dmu[static_cast<std::size_t>(b)];
        }
    }
    // symmetrize and apply the coordinate Jacobian on both sides
    for (int a = 0; a < dim; ++a)
        for (int b = 0; b < a; ++b)
            info[static_cast<std::size_t>(a * dim + b)] = info[static_cast<std::size_t>(b * dim + a)];
    for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b)
            info[static_cast<std::size_t>(a * dim + b)] *=
                tr.dtheta_dv[static_cast<std::size_t>(a)] * tr.dtheta_dv[static_cast<std::size_t>(b)];
    return info;
}

std::vector<double> grad_log_likelihood(const CountRecord& d, const JointPoint& p,
                                        const ScenarioConfig& cfg) {
    const auto v = to_unconstrained(p, cfg);
    LogLikEval e = eval_log_likelihood_v(d, v, cfg, true);
    if (!e.physical) throw std::domain_error("grad_log_likelihood: point is not physical");
    return e.grad_v;
}

RatioPrior RatioPrior::point_mass(const std::array<double, 4>& left,
                                  const std::array<double, 4>& right) {
    RatioPrior r;
    r.atoms.push_back({left, right, 1.0});
    return r;
}

RatioPrior RatioPrior::two_point(const Atom& a, const Atom& b) {
    RatioPrior r;
    r.atoms = {a, b};
    return r;
}

RatioPrior RatioPrior::uniform_box(double lo, double hi) {
    if (!(lo > 0 && hi <= 1 && lo <= hi)) throw std::invalid_argument("ratio box needs 0 < lo <= hi <= 1");
    RatioPrior r;
    r.use_box = true;
    r.lo_left.fill(lo);
    r.hi_left.fill(hi);
    r.lo_right.fill(lo);
    r.hi_right.fill(hi);
    return r;
}

std::pair<std::array<double, 4>, std::array<double, 4>> RatioPrior::sample(
    std::uint64_t seed, std::uint64_t index) const {
    auto rng = make_rng(seed, index);
    if (!use_box) throw std::logic_error("RatioPrior::sample: finite mixtures are averaged exactly");
    auto draw_side = [&rng](const std::array<double, 4>& lo, const std::array<double, 4>& hi) {
        std::array<double, 4> r;
        for (int k = 0; k < 4; ++k) {
            std::uniform_real_distribution<double> u(lo[static_cast<std::size_t>(k)], hi[static_cast<std::size_t>(k)]);
            r[static_cast<std::size_t>(k)] = u(rng);
        }
        const double m = *std::max_element(r.begin(), r.end());
        for (double& x : r) x /= m;
        return r;
    };
    auto left = draw_side(lo_left, hi_left);
    auto right = draw_side(lo_right, hi_right);
    return {left, right};
}

double marginal_log_likelihood(const CountRecord& d, const JointPoint& s,
                               const ScenarioConfig& cfg, const RatioPrior& ratio_prior, int m,
                               std::uint64_t seed) {
    if (m < 1) throw std::invalid_argument("marginal_log_likelihood: m must be >= 1");
    auto eval_with_ratios = [&](const std::array<double, 4>& rl, const std::array<double, 4>& rr) {
        JointPoint p = s;
        p.left.ratios = rl;
        p.right.ratios = rr;
        return log_likelihood(d, p, cfg);
    };

    std::vector<double> logs;
    std::vector<double> weights;
    if (!ratio_prior.use_box) {
        if (ratio_prior.atoms.empty())
            throw std::invalid_argument("marginal_log_likelihood: empty ratio prior");
        double wsum = 0;
        for (const auto& a : ratio_prior.atoms) {
            if (!(a.weight > 0)) throw std::invalid_argument("ratio prior weights must be > 0");
            logs.push_back(eval_with_ratios(a.left, a.right));
            weights.push_back(a.weight);
            wsum += a.weight;
        }
        for (double& w : weights) w /= wsum;
    } else {
        for (int i = 0; i < m; ++i) {
            const auto [rl, rr] = ratio_prior.sample(seed, static_cast<std::uint64_t>(i));
            logs.push_back(eval_with_ratios(rl, rr));
            weights.push_back(1.0 / static_cast<double>(m));
        }
    }
    const double mx = *std::max_element(logs.begin(), logs.end());
    if (mx == kNegInf)
        throw std::invalid_argument(
            "marginal_log_likelihood: every ratio draw has zero likelihood (degenerate prior)");
    double acc = 0;
    for (std::size_t i = 0; i < logs.size(); ++i) acc += weights[i] * std::exp(logs[i] - mx);
    return mx + std::log(acc);
}

}  // namespace selfcal
