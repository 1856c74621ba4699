#include "selfcal/estimation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "selfcal/priors.hpp"
#include "selfcal/probability.hpp"
#include "selfcal/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace selfcal {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double norm2(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Scoring direction d solving (I + ridge diag(I)) d = g; the information
// matrix is PSD, the ridge keeps uninformative coordinates tame.
Eigen::VectorXd scoring_direction(const Eigen::MatrixXd& info, const Eigen::VectorXd& grad,
                                  double ridge) {
    const int dim = static_cast<int>(grad.size());
    Eigen::MatrixXd m = info;
    double mean_diag = m.trace() / dim;
    if (!(mean_diag > 0)) mean_diag = 1.0;
    for (int a = 0; a < dim; ++a) m(a, a) += ridge * std::max(m(a, a), 1e-8 * mean_diag);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
    if (ldlt.info() != Eigen::Success) return Eigen::VectorXd::Zero(dim);
    return ldlt.solve(grad);
}

// The objective of one barrier stage: logL(v) + mu log det M(q(v)) with its
// gradient and a PSD curvature proxy (Fisher + barrier curvature).
struct StageEval {
    double value = kNegInf;
    Eigen::VectorXd grad;
    bool feasible = false;
};

StageEval eval_stage(const CountRecord& d, const std::vector<double>& v,
                     const ScenarioConfig& cfg, double mu, Eigen::MatrixXd* info_out) {
    StageEval out;
    const int dim = parameter_dimension(cfg);
    LogLikEval lik = eval_log_likelihood_v(d, v, cfg, true);
    if (!lik.physical || !std::isfinite(lik.value)) return out;

    const TransformEval tr = eval_transform(v, cfg);
    const JointPoint p = unpack_physical(tr.theta, cfg);

    double logdet = 0;
    std::array<double, 8> bgrad{};
    std::array<double, 64> bcurv{};
    if (mu > 0) {
        if (!completion_logdet(p.state, &logdet, &bgrad, &bcurv)) return out;  // barrier needs PD
    }
    out.feasible = true;
    out.value = lik.value + mu * logdet;
    out.grad = Eigen::VectorXd(dim);
    for (int i = 0; i < dim; ++i) out.grad(i) = lik.grad_v[static_cast<std::size_t>(i)];
    if (mu > 0)
        for (int i = 0; i < 8; ++i)
            out.grad(i) += mu * bgrad[static_cast<std::size_t>(i)] * tr.dtheta_dv[static_cast<std::size_t>(i)];

    if (info_out) {
        const auto fisher = fisher_information_v(v, cfg);
        Eigen::MatrixXd m(dim, dim);
        for (int a = 0; a < dim; ++a)
            for (int b = 0; b < dim; ++b) m(a, b) = fisher[static_cast<std::size_t>(a * dim + b)];
        if (mu > 0)
            for (int a = 0; a < 8; ++a)
                for (int b = 0; b < 8; ++b)
                    m(a, b) += mu * bcurv[static_cast<std::size_t>(a * 8 + b)] *
                               tr.dtheta_dv[static_cast<std::size_t>(a)] * tr.dtheta_dv[static_cast<std::size_t>(b)];
        *info_out = std::move(m);
    }
    return out;
}

// Active PSD eigen-constraints at v (up to two near-zero eigenvalues of the
// completion matrix), as rows of constraint gradients in v coordinates.
Eigen::MatrixXd active_constraints(const std::vector<double>& v, const ScenarioConfig& cfg,
                                   double threshold) {
    const TransformEval tr = eval_transform(v, cfg);
    const JointPoint p = unpack_physical(tr.theta, cfg);
    const MinEigenPair me = completion_min_eigen(p.state);
    const int dim = parameter_dimension(cfg);
    std::vector<std::array<double, 4>> active;
    if (me.value < threshold) active.push_back(me.vector);
    if (me.second_value < threshold) active.push_back(me.second_vector);
    Eigen::MatrixXd a(static_cast<int>(active.size()), dim);
    for (std::size_t r = 0; r < active.size(); ++r) {
        const auto g = completion_form_gradient(active[r]);
        for (int i = 0; i < dim; ++i)
            a(static_cast<int>(r), i) =
                i < 8 ? g[static_cast<std::size_t>(i)] * tr.dtheta_dv[static_cast<std::size_t>(i)] : 0.0;
    }
    return a;
}

// KKT-projected gradient: subtract the outward components along active
// constraint normals with nonnegative multipliers.
Eigen::VectorXd project_gradient(const Eigen::VectorXd& g, const Eigen::MatrixXd& a) {
    if (a.rows() == 0) return g;
    // try multiplier subsets; keep the projection with all multipliers >= 0
    const int r = static_cast<int>(a.rows());
    Eigen::VectorXd best = g;
    double best_norm = g.norm();
    for (int mask = 1; mask < (1 << r); ++mask) {
        std::vector<int> rows;
        for (int j = 0; j < r; ++j)
            if (mask & (1 << j)) rows.push_back(j);
        Eigen::MatrixXd sub(static_cast<int>(rows.size()), a.cols());
        for (std::size_t k = 0; k < rows.size(); ++k) sub.row(static_cast<int>(k)) = a.row(rows[k]);
        const Eigen::MatrixXd gram = sub * sub.transpose();
        Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
        if (ldlt.info() != Eigen::Success) continue;
        const Eigen::VectorXd kappa = ldlt.solve(sub * g);
        if ((kappa.array() < 0).any()) continue;
        const Eigen::VectorXd proj = g - sub.transpose() * kappa;
        if (proj.norm() < best_norm) {
            best_norm = proj.norm();
            best = proj;
        }
    }
    return best;
}

// Newton retraction onto the PSD face: tangential steps leave the curved
// boundary at second order, so push the smallest eigenvalue back to the
// target slack along its constraint gradient.
void retract_to_face(std::vector<double>& v, const ScenarioConfig& cfg, double target) {
    for (int pass = 0; pass < 3; ++pass) {
        const TransformEval tr = eval_transform(v, cfg);
        const JointPoint p = unpack_physical(tr.theta, cfg);
        const MinEigenPair me = completion_min_eigen(p.state);
        if (me.value >= target) return;
        const auto gq = completion_form_gradient(me.vector);
        double norm2_a = 0;
        std::array<double, 8> a{};
        for (int i = 0; i < 8; ++i) {
            a[static_cast<std::size_t>(i)] = gq[static_cast<std::size_t>(i)] * tr.dtheta_dv[static_cast<std::size_t>(i)];
            norm2_a += a[static_cast<std::size_t>(i)] * a[static_cast<std::size_t>(i)];
        }
        if (!(norm2_a > 0)) return;
        const double s = (target - me.value) / norm2_a;
        for (int i = 0; i < 8; ++i) v[static_cast<std::size_t>(i)] += s * a[static_cast<std::size_t>(i)];
    }
}

void flag_boundaries(const JointPoint& p, const ScenarioConfig& cfg, MLResult& r) {
    const auto names = parameter_names(cfg);
    const auto theta = pack_physical(p, cfg);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const bool is_nu = cfg.unknown_nu() && i + 1 == theta.size();
        if (is_nu) continue;
        const double margin = i < 8 ? 1.0 - std::abs(theta[i]) : std::min(theta[i], 1.0 - theta[i]);
        if (margin < 1e-6) r.boundary_flags.push_back(names[i]);
    }
}

}  // namespace

MLResult fit_ml(const CountRecord& d, const ScenarioConfig& cfg, const JointPoint& start) {
    d.validate();
    cfg.validate();
    constexpr double kActiveThreshold = 1e-5;
    MLResult result;

    // pull a start sitting on the PSD boundary slightly toward the maximally
    // mixed state so the barrier is defined
    JointPoint s = start;
    if (completion_min_eigen(s.state).value < 1e-6) {
        auto q = s.state.to_array();
        for (double& x : q) x *= 0.999;
        s.state = CorrelationVector::from_array(q);
    }
    std::vector<double> v = to_unconstrained(s, cfg);
    if (!eval_log_likelihood_v(d, v, cfg, false).physical ||
        !std::isfinite(eval_log_likelihood_v(d, v, cfg, false).value))
        throw std::invalid_argument("fit_ml: start point has zero likelihood");

    const double grad_tol = cfg.tol.grad_tol;
    const double n_scale = std::max(1.0, static_cast<double>(d.total()));

    // barrier continuation: mu walks down to 0, where convergence is judged
    // by the KKT-projected gradient
    std::vector<double> mu_stages;
    for (double mu = n_scale / 100.0; mu > 1e-9; mu *= 1e-2) mu_stages.push_back(mu);
    mu_stages.push_back(0.0);

    int total_it = 0;
    Eigen::MatrixXd info;
    double final_norm = std::numeric_limits<double>::infinity();
    for (double mu : mu_stages) {
        const bool final_stage = mu == 0.0;
        const double stage_tol = final_stage ? grad_tol : std::max(grad_tol, 1e-5 * std::max(mu, 1.0));
        double ridge = 1e-8;
        StageEval cur = eval_stage(d, v, cfg, mu, &info);
        if (!cur.feasible) continue;  // stage skipped (e.g. barrier at boundary start)

        for (int it = 0; it < cfg.tol.max_iterations && total_it < 100000; ++it, ++total_it) {
            Eigen::MatrixXd active(0, 0);
            Eigen::VectorXd g_eff = cur.grad;
            if (final_stage) {
                active = active_constraints(v, cfg, kActiveThreshold);
                g_eff = project_gradient(cur.grad, active);
            }
            final_norm = g_eff.norm();
            if (final_norm < stage_tol) break;

            Eigen::VectorXd dir = scoring_direction(info, g_eff, ridge);
            if (active.rows() > 0) {  // keep the step in the active tangent space
                const Eigen::MatrixXd gram = active * active.transpose();
                Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
                if (ldlt.info() == Eigen::Success)
                    dir -= active.transpose() * ldlt.solve(active * dir);
            }
            double dg = dir.dot(g_eff);
            if (!(dg > 0)) {
                dir = g_eff;
                dg = g_eff.squaredNorm();
            }

            // pass 1: Armijo on the stage objective; pass 2 (final stage):
            // accept on projected-gradient decrease, the value deltas being
            // below one ulp of |logL| near the optimum
            const bool on_face = active.rows() > 0;
            auto propose = [&](double step, std::vector<double>& v_next) {
                for (std::size_t k = 0; k < v.size(); ++k) v_next[k] = v[k] + step * dir(static_cast<int>(k));
                if (on_face) retract_to_face(v_next, cfg, -0.5 * cfg.tol.tol_psd);
            };
            double step = 1.0;
            bool accepted = false;
            std::vector<double> v_next(v.size());
            StageEval next;
            for (int ls = 0; ls < 40 && !accepted; ++ls) {
                propose(step, v_next);
                next = eval_stage(d, v_next, cfg, mu, nullptr);
                if (next.feasible && next.value > cur.value + 1e-4 * step * dg)
                    accepted = true;
                else
                    step *= 0.5;
            }
            if (!accepted && final_stage) {
                step = 1.0;
                for (int ls = 0; ls < 40 && !accepted; ++ls) {
                    propose(step, v_next);
                    next = eval_stage(d, v_next, cfg, mu, nullptr);
                    if (next.feasible) {
                        const Eigen::VectorXd g_eff_next =
                            project_gradient(next.grad, active_constraints(v_next, cfg, kActiveThreshold));
                        if (g_eff_next.norm() < final_norm) accepted = true;
                    }
                    if (!accepted) step *= 0.5;
                }
            }
            if (!accepted) {
                if (ridge < 1e8) {
                    ridge *= 100;
                    continue;
                }
                break;
            }
            ridge = std::max(ridge * 0.25, 1e-8);
            v = v_next;
            cur = eval_stage(d, v, cfg, mu, &info);
        }
    }

    result.iterations = total_it;
    result.estimate = from_unconstrained(v, cfg);
    result.logL_max = eval_log_likelihood_v(d, v, cfg, false).value;
    result.gradient_norm = final_norm;
    result.converged = final_norm < grad_tol;
    flag_boundaries(result.estimate, cfg, result);
    if (completion_min_eigen(result.estimate.state).value < kActiveThreshold)
        result.boundary_flags.push_back("state(psd)");
    return result;
}

const MLResult& ModeReport::best() const {
    if (clusters.empty()) throw std::logic_error("ModeReport: no clusters");
    return clusters.front().representative;
}

double ModeReport::fidelity_between(std::size_t i, std::size_t j) const {
    return pair_fidelity[i * clusters.size() + j];
}

double ModeReport::eta_distance_between(std::size_t i, std::size_t j) const {
    return pair_eta_distance[i * clusters.size() + j];
}

ModeReport multi_start_ml(const CountRecord& d, const ScenarioConfig& cfg, int n_starts,
                          std::uint64_t seed) {
    if (n_starts < 2) throw std::invalid_argument("multi_start_ml: need n_starts >= 2");
    const auto starts = sample_prior(cfg, n_starts, seed);
    ModeReport report;
    report.runs.resize(static_cast<std::size_t>(n_starts));

#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n_starts; ++i) {
        MLResult r;
        try {
            r = fit_ml(d, cfg, starts[static_cast<std::size_t>(i)]);
        } catch (const std::exception&) {
            // e.g. a prior start sitting on a zero-likelihood ridge
            r.converged = false;
            r.logL_max = kNegInf;
        }
        r.start_index = i;
        report.runs[static_cast<std::size_t>(i)] = std::move(r);
    }

    std::vector<const MLResult*> converged;
    for (const auto& r : report.runs)
        if (r.converged)
            converged.push_back(&r);
        else
            ++report.failed_starts;
    if (converged.empty()) throw std::runtime_error("multi_start_ml: no start converged");

    // single-linkage clustering at the configured distance threshold
    const std::size_t n = converged.size();
    std::vector<std::vector<double>> coords(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = to_unconstrained(converged[i]->estimate, cfg);
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    auto dist = [&](std::size_t i, std::size_t j) {
        double s = 0;
        for (std::size_t k = 0; k < coords[i].size(); ++k) {
            const double dxy = coords[i][k] - coords[j][k];
            s += dxy * dxy;
        }
        return std::sqrt(s);
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (dist(i, j) < cfg.tol.cluster_distance) parent[find(i)] = find(j);

    std::vector<std::vector<std::size_t>> groups;
    std::vector<std::size_t> root_of(n);
    for (std::size_t i = 0; i < n; ++i) root_of[i] = find(i);
    for (std::size_t i = 0; i < n; ++i) {
        bool placed = false;
        for (auto& g : groups)
            if (root_of[g.front()] == root_of[i]) {
                g.push_back(i);
                placed = true;
                break;
            }
        if (!placed) groups.push_back({i});
    }

    for (const auto& g : groups) {
        ClusterInfo info;
        std::size_t best = g.front();
        for (std::size_t idx : g)
            if (converged[idx]->logL_max > converged[best]->logL_max) best = idx;
        info.representative = *converged[best];
        info.members = static_cast<int>(g.size());
        for (std::size_t i = 0; i < g.size(); ++i)
            for (std::size_t j = i + 1; j < g.size(); ++j)
                info.max_spread = std::max(info.max_spread, dist(g[i], g[j]));
        report.clusters.push_back(std::move(info));
    }
    std::sort(report.clusters.begin(), report.clusters.end(),
              [](const ClusterInfo& a, const ClusterInfo& b) {
                  return a.representative.logL_max > b.representative.logL_max;
              });

    const std::size_t nc = report.clusters.size();
    report.pair_fidelity.assign(nc * nc, 1.0);
    report.pair_eta_distance.assign(nc * nc, 0.0);
    for (std::size_t i = 0; i < nc; ++i)
        for (std::size_t j = 0; j < nc; ++j) {
            if (i == j) continue;
            const auto& a = report.clusters[i].representative.estimate;
            const auto& b = report.clusters[j].representative.estimate;
            report.pair_fidelity[i * nc + j] = fidelity(a.state, b.state, cfg.tol.tol_psd);
            report.pair_eta_distance[i * nc + j] = efficiency_distance(a, b);
        }
    return report;
}

double fidelity(const CorrelationVector& q1, const CorrelationVector& q2, double tol_psd) {
    for (const auto* q : {&q1, &q2})
        if (!is_physical(*q, tol_psd)) throw std::domain_error("fidelity: non-physical state");
    auto sqrt_of = [](const CorrelationVector& q) {
        const auto m = completion_matrix(q);
        Eigen::Matrix4d rho;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) rho(i, j) = m[static_cast<std::size_t>(i * 4 + j)];
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(rho);
        Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        return Eigen::Matrix4d(es.eigenvectors() * ev.asDiagonal() *
                               es.eigenvectors().transpose());
    };
    const Eigen::Matrix4d prod = sqrt_of(q1) * sqrt_of(q2);
    // tr|A| = sum of singular values
    const double f = prod.jacobiSvd().singularValues().sum();
    return std::min(f, 1.0);
}

double efficiency_distance(const JointPoint& a, const JointPoint& b) {
    double s = 0;
    const auto al = a.left.efficiencies(), ar = a.right.efficiencies();
    const auto bl = b.left.efficiencies(), br = b.right.efficiencies();
    for (int k = 0; k < 4; ++k) {
        const double dl = al[static_cast<std::size_t>(k)] - bl[static_cast<std::size_t>(k)];
        const double dr = ar[static_cast<std::size_t>(k)] - br[static_cast<std::size_t>(k)];
        s += dl * dl + dr * dr;
    }
    return std::sqrt(s);
}

}  // namespace selfcal
