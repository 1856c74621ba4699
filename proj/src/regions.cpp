#include "selfcal/regions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "selfcal/kernels.hpp"
#include "selfcal/probability.hpp"
#include "selfcal/rng.hpp"

namespace selfcal {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

std::size_t LambdaCurve::index_near_crit() const {
    const double target = std::log(lambda_crit);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < log_lambda.size(); ++j) {
        const double d = std::abs(log_lambda[j] - target);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

LambdaCurve curve_from_samples(const SampleSet& prior_set, int grid_points,
                               int bootstrap_resamples, std::uint64_t seed) {
    if (prior_set.provenance != SampleProvenance::PriorDirect)
        throw std::invalid_argument(
            "curve_from_samples: size/credibility estimators need prior draws, got a "
            "posterior-provenance sample set");
    const std::size_t n = prior_set.size();
    if (n < 1000) throw std::invalid_argument("curve_from_samples: need at least 1000 draws");
    if (grid_points < 2) throw std::invalid_argument("curve_from_samples: need >= 2 grid points");

    std::vector<double> log_lam(n);
    double lam_sum = 0;
    double min_finite = 0;
    for (std::size_t i = 0; i < n; ++i) {
        log_lam[i] = prior_set.log_likelihood[i] - prior_set.logL_max;
        if (log_lam[i] > 0) log_lam[i] = 0;
        lam_sum += prior_set.lambda[i];
        if (std::isfinite(log_lam[i])) min_finite = std::min(min_finite, log_lam[i]);
    }

    LambdaCurve curve;
    curve.lambda_crit = lam_sum / static_cast<double>(n);

    const double lo = std::min(min_finite, -1e-9);
    curve.log_lambda.resize(static_cast<std::size_t>(grid_points));
    for (int j = 0; j < grid_points; ++j)
        curve.log_lambda[static_cast<std::size_t>(j)] =
            lo + (0.0 - lo) * static_cast<double>(j) / static_cast<double>(grid_points - 1);

    const auto bands = kernels::bootstrap_survival(log_lam, curve.log_lambda,
                                                   bootstrap_resamples, seed);
    curve.s = bands.s;
    curve.s_lo = bands.lo;
    curve.s_hi = bands.hi;

    // credibility through the size link: c = (lambda s + E[(lambda_i-lambda)+]) / lambda_crit
    const double inv_n = 1.0 / static_cast<double>(n);
    auto credibility_at = [&](double log_lambda_j, double s_j) {
        const double lam_j = std::exp(log_lambda_j);
        double excess = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double li = prior_set.lambda[i];
            if (li > lam_j) excess += li - lam_j;
        }
        const double c = (lam_j * s_j + excess * inv_n) / curve.lambda_crit;
        return std::min(c, 1.0);
    };
    curve.c = kernels::indexed_map(grid_points, [&](int j) {
        return credibility_at(curve.log_lambda[static_cast<std::size_t>(j)],
                              curve.s[static_cast<std::size_t>(j)]);
    });

    // plausible-region summaries evaluated at lambda_crit itself
    const double log_crit = std::log(curve.lambda_crit);
    std::int64_t above = 0;
    for (double l : log_lam)
        if (l >= log_crit) ++above;
    curve.s_at_crit = static_cast<double>(above) * inv_n;
    curve.c_at_crit = credibility_at(log_crit, curve.s_at_crit);
    return curve;
}

Membership membership(const JointPoint& p, const CountRecord& d, const ScenarioConfig& cfg,
                      double lambda, double logL_max) {
    Membership m;
    const double logl = log_likelihood(d, p, cfg);
    m.log_lambda_p = logl - logL_max;
    m.lambda_p = std::exp(std::min(m.log_lambda_p, 0.0));
    m.inside = m.log_lambda_p >= std::log(lambda);
    return m;
}

RegionReport plausible_region_report(const CountRecord& d, const ScenarioConfig& cfg,
                                     std::uint64_t seed, const RegionReportOptions& opt,
                                     const std::vector<NamedPoint>& references) {
    RegionReport report;
    report.modes = multi_start_ml(d, cfg, opt.n_starts, splitmix64(seed ^ 0xabcdefULL));
    report.ml = report.modes.best();
    if (!report.ml.converged)
        throw std::runtime_error("plausible_region_report: ML fit did not converge");

    report.prior_set = sample_prior_set(d, cfg, opt.n_prior_samples, seed, &report.ml);
    report.state_acceptance_rate = report.prior_set.state_acceptance_rate;
    report.curve = curve_from_samples(report.prior_set, opt.curve_grid, opt.bootstrap_resamples,
                                      splitmix64(seed ^ 0x5151ULL));
    report.lambda_crit = report.curve.lambda_crit;
    report.s_plausible = report.curve.s_at_crit;
    report.c_plausible = report.curve.c_at_crit;

    for (const auto& ref : references)
        report.references.emplace_back(
            ref.label, membership(ref.point, d, cfg, report.lambda_crit, report.ml.logL_max));

    if (opt.refine_size) {
        auto [posterior, diag] = sample_posterior_hmc(d, cfg, opt.n_posterior_samples, opt.chains,
                                                      splitmix64(seed ^ 0x9e9e9eULL), &report.ml);
        report.hmc_diagnostics = diag;
        report.refined_size =
            importance_size_refinement(report.prior_set, posterior, report.lambda_crit);
    }
    return report;
}

// --- marching squares -----------------------------------------------------------

namespace {

struct SegmentPoint {
    double x, y;
};

std::uint64_t quantize_key(double x, double y, double sx, double sy) {
    const auto qx = static_cast<std::int64_t>(std::llround(x / sx * 1e7));
    const auto qy = static_cast<std::int64_t>(std::llround(y / sy * 1e7));
    return (static_cast<std::uint64_t>(qx) << 32) ^ (static_cast<std::uint64_t>(qy) & 0xffffffffULL);
}

}  // namespace

std::vector<std::vector<std::array<double, 2>>> contour_polylines(
    const std::vector<double>& field, const std::vector<double>& xs,
    const std::vector<double>& ys, double level) {
    const std::size_t nx = xs.size(), ny = ys.size();
    if (field.size() != nx * ny) throw std::invalid_argument("contour_polylines: size mismatch");
    auto at = [&](std::size_t ix, std::size_t iy) { return field[iy * nx + ix]; };

    std::vector<std::array<std::array<double, 2>, 2>> segments;
    auto interp = [&](double xa, double ya, double va, double xb, double yb, double vb) {
        const double t = vb == va ? 0.5 : (level - va) / (vb - va);
        return std::array<double, 2>{xa + t * (xb - xa), ya + t * (yb - ya)};
    };

    for (std::size_t iy = 0; iy + 1 < ny; ++iy)
        for (std::size_t ix = 0; ix + 1 < nx; ++ix) {
            const double v00 = at(ix, iy), v10 = at(ix + 1, iy);
            const double v11 = at(ix + 1, iy + 1), v01 = at(ix, iy + 1);
            int idx = 0;
            if (v00 >= level) idx |= 1;
            if (v10 >= level) idx |= 2;
            if (v11 >= level) idx |= 4;
            if (v01 >= level) idx |= 8;
            if (idx == 0 || idx == 15) continue;
            const double x0 = xs[ix], x1 = xs[ix + 1], y0 = ys[iy], y1 = ys[iy + 1];
            const auto bottom = [&] { return interp(x0, y0, v00, x1, y0, v10); };
            const auto right = [&] { return interp(x1, y0, v10, x1, y1, v11); };
            const auto top = [&] { return interp(x0, y1, v01, x1, y1, v11); };
            const auto left = [&] { return interp(x0, y0, v00, x0, y1, v01); };
            auto add = [&](std::array<double, 2> a, std::array<double, 2> b) {
                segments.push_back({a, b});
            };
            switch (idx) {
                case 1: add(left(), bottom()); break;
                case 2: add(bottom(), right()); break;
                case 3: add(left(), right()); break;
                case 4: add(right(), top()); break;
                case 5: {  // saddle: split on the cell-center value
                    const double center = 0.25 * (v00 + v10 + v11 + v01);
                    if (center >= level) {
                        add(left(), top());
                        add(bottom(), right());
                    } else {
                        add(left(), bottom());
                        add(right(), top());
                    }
                    break;
                }
                case 6: add(bottom(), top()); break;
                case 7: add(left(), top()); break;
                case 8: add(top(), left()); break;
                case 9: add(top(), bottom()); break;
                case 10: {
                    const double center = 0.25 * (v00 + v10 + v11 + v01);
                    if (center >= level) {
                        add(top(), right());
                        add(bottom(), left());
                    } else {
                        add(top(), left());
                        add(bottom(), right());
                    }
                    break;
                }
                case 11: add(top(), right()); break;
                case 12: add(right(), left()); break;
                case 13: add(right(), bottom()); break;
                case 14: add(bottom(), left()); break;
                default: break;
            }
        }

    // chain segments into polylines via quantized endpoint matching
    const double sx = std::max(std::abs(xs.back() - xs.front()), 1e-300);
    const double sy = std::max(std::abs(ys.back() - ys.front()), 1e-300);
    std::multimap<std::uint64_t, std::size_t> by_endpoint;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        by_endpoint.emplace(quantize_key(segments[i][0][0], segments[i][0][1], sx, sy), i);
        by_endpoint.emplace(quantize_key(segments[i][1][0], segments[i][1][1], sx, sy), i);
    }
    std::vector<bool> used(segments.size(), false);
    std::vector<std::vector<std::array<double, 2>>> polylines;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (used[i]) continue;
        used[i] = true;
        std::vector<std::array<double, 2>> line{segments[i][0], segments[i][1]};
        bool extended = true;
        while (extended) {
            extended = false;
            const auto key = quantize_key(line.back()[0], line.back()[1], sx, sy);
            auto [lo_it, hi_it] = by_endpoint.equal_range(key);
            for (auto it = lo_it; it != hi_it; ++it) {
                const std::size_t j = it->second;
                if (used[j]) continue;
                const auto k0 = quantize_key(segments[j][0][0], segments[j][0][1], sx, sy);
                used[j] = true;
                line.push_back(k0 == key ? segments[j][1] : segments[j][0]);
                extended = true;
                break;
            }
        }
        polylines.push_back(std::move(line));
    }
    return polylines;
}

namespace {

int theta_index_of(const std::string& name, const ScenarioConfig& cfg) {
    const auto names = parameter_names(cfg);
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    throw std::invalid_argument("slice_contour: unknown coordinate '" + name + "'");
}

std::array<double, 2> default_extent(int theta_idx, const JointPoint& fixed,
                                     const ScenarioConfig& cfg) {
    if (theta_idx < 8) {
        const auto r = physical_range(fixed.state, static_cast<StateField>(theta_idx),
                                      cfg.tol.tol_psd);
        return {r[0], r[1]};
    }
    const bool is_nu = cfg.unknown_nu() && theta_idx == parameter_dimension(cfg) - 1;
    if (is_nu) {
        const double nu0 = fixed.nu > 0 ? fixed.nu : cfg.nu_ref;
        return {0.5 * nu0, 2.0 * nu0};
    }
    return {1e-4, 1.0 - 1e-4};
}

}  // namespace

SliceContour slice_contour(const CountRecord& d, const ScenarioConfig& cfg,
                           const std::array<std::string, 2>& varied, const JointPoint& fixed,
                           double level, const MLResult& ml, const SliceOptions& opt) {
    if (!(level > 0 && level <= 1))
        throw std::invalid_argument("slice_contour: level must be in (0, 1]");
    if (!is_physical(fixed.state, cfg.tol.tol_psd))
        throw std::domain_error("slice_contour: fixed point is not physical");

    SliceContour sc;
    sc.varied = varied;
    sc.level = level;
    sc.grid_n = opt.grid_n;
    const int i0 = theta_index_of(varied[0], cfg);
    const int i1 = theta_index_of(varied[1], cfg);
    if (i0 == i1) throw std::invalid_argument("slice_contour: varied coordinates must differ");

    const auto e0 = opt.range_first ? *opt.range_first : default_extent(i0, fixed, cfg);
    const auto e1 = opt.range_second ? *opt.range_second : default_extent(i1, fixed, cfg);
    sc.lo = {e0[0], e1[0]};
    sc.hi = {e0[1], e1[1]};
    for (int k = 0; k < 2; ++k) {
        const int idx = k == 0 ? i0 : i1;
        if (idx < 8) {
            const auto r = physical_range(fixed.state, static_cast<StateField>(idx), cfg.tol.tol_psd);
            sc.physical_lo[static_cast<std::size_t>(k)] = r[0];
            sc.physical_hi[static_cast<std::size_t>(k)] = r[1];
        } else {
            sc.physical_lo[static_cast<std::size_t>(k)] = sc.lo[static_cast<std::size_t>(k)];
            sc.physical_hi[static_cast<std::size_t>(k)] = sc.hi[static_cast<std::size_t>(k)];
        }
    }

    const int n = opt.grid_n;
    std::vector<double> xs(static_cast<std::size_t>(n)), ys(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        xs[static_cast<std::size_t>(i)] = sc.lo[0] + (sc.hi[0] - sc.lo[0]) * i / (n - 1.0);
        ys[static_cast<std::size_t>(i)] = sc.lo[1] + (sc.hi[1] - sc.lo[1]) * i / (n - 1.0);
    }

    const auto theta_fixed = pack_physical(fixed, cfg);
    sc.lambda_grid = kernels::indexed_map(n * n, [&](int flat) {
        const int iy = flat / n, ix = flat % n;
        auto theta = theta_fixed;
        theta[static_cast<std::size_t>(i0)] = xs[static_cast<std::size_t>(ix)];
        theta[static_cast<std::size_t>(i1)] = ys[static_cast<std::size_t>(iy)];
        const JointPoint p = unpack_physical(theta, cfg);
        if (!is_physical(p.state, cfg.tol.tol_psd)) return 0.0;
        const double logl = log_likelihood(d, p, cfg);
        return std::exp(std::min(logl - ml.logL_max, 0.0));
    });

    sc.grid_max_lambda = 0;
    for (int flat = 0; flat < n * n; ++flat)
        if (sc.lambda_grid[static_cast<std::size_t>(flat)] > sc.grid_max_lambda) {
            sc.grid_max_lambda = sc.lambda_grid[static_cast<std::size_t>(flat)];
            sc.grid_max_at = {xs[static_cast<std::size_t>(flat % n)], ys[static_cast<std::size_t>(flat / n)]};
        }

    const auto theta_ml = pack_physical(ml.estimate, cfg);
    sc.ml_marker = {theta_ml[static_cast<std::size_t>(i0)], theta_ml[static_cast<std::size_t>(i1)]};
    sc.reference_marker = {theta_fixed[static_cast<std::size_t>(i0)], theta_fixed[static_cast<std::size_t>(i1)]};

    if (level > sc.grid_max_lambda) {
        sc.empty_contour = true;
        return sc;
    }
    sc.polylines = contour_polylines(sc.lambda_grid, xs, ys, level);
    return sc;
}

}  // namespace selfcal
