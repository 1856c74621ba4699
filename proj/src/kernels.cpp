#include "selfcal/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include "selfcal/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace selfcal::kernels {

namespace {
std::atomic<Exec> g_exec{
#ifdef _OPENMP
    Exec::Parallel
#else
    Exec::Serial
#endif
};

double one_log_likelihood(const CountRecord& d, const ScenarioConfig& cfg, const JointPoint& p) {
    return log_likelihood(d, p, cfg);
}

// single bootstrap resample of the survival curve, via bin counts on the grid
void resample_survival(const std::vector<int>& bin_of, int n_bins, std::uint64_t seed,
                       std::uint64_t index, std::vector<double>& s_out) {
    auto rng = make_rng(seed, index);
    const std::size_t n = bin_of.size();
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::int64_t> hist(static_cast<std::size_t>(n_bins) + 1, 0);
    for (std::size_t i = 0; i < n; ++i) ++hist[static_cast<std::size_t>(bin_of[pick(rng)])];
    // survival at grid_j = fraction of values with bin >= j+1... bins count
    // values in [grid_j, grid_{j+1}); suffix sums give counts >= grid_j
    std::int64_t acc = 0;
    s_out.assign(static_cast<std::size_t>(n_bins), 0.0);
    for (int j = n_bins - 1; j >= 0; --j) {
        acc += hist[static_cast<std::size_t>(j) + 1];
        s_out[static_cast<std::size_t>(j)] = static_cast<double>(acc) / static_cast<double>(n);
    }
}
}  // namespace

Exec default_exec() { return g_exec.load(); }
void set_default_exec(Exec e) { g_exec.store(e); }

std::vector<double> log_likelihood_batch_serial(const CountRecord& d, const ScenarioConfig& cfg,
                                                const std::vector<JointPoint>& points) {
    std::vector<double> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = one_log_likelihood(d, cfg, points[i]);
    return out;
}

std::vector<double> log_likelihood_batch_parallel(const CountRecord& d, const ScenarioConfig& cfg,
                                                  const std::vector<JointPoint>& points) {
    std::vector<double> out(points.size());
    const std::int64_t n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = one_log_likelihood(d, cfg, points[static_cast<std::size_t>(i)]);
    return out;
}

std::vector<double> log_likelihood_batch(const CountRecord& d, const ScenarioConfig& cfg,
                                         const std::vector<JointPoint>& points, Exec exec) {
    return exec == Exec::Serial ? log_likelihood_batch_serial(d, cfg, points)
                                : log_likelihood_batch_parallel(d, cfg, points);
}

std::vector<double> indexed_map_serial(int n, const std::function<double(int)>& fn) {
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = fn(i);
    return out;
}

std::vector<double> indexed_map_parallel(int n, const std::function<double(int)>& fn) {
    std::vector<double> out(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = fn(i);
    return out;
}

std::vector<double> indexed_map(int n, const std::function<double(int)>& fn, Exec exec) {
    return exec == Exec::Serial ? indexed_map_serial(n, fn) : indexed_map_parallel(n, fn);
}

namespace {

SurvivalBands bootstrap_survival_impl(const std::vector<double>& values,
                                      const std::vector<double>& grid, int resamples,
                                      std::uint64_t seed, bool parallel) {
    if (values.empty() || grid.empty()) throw std::invalid_argument("bootstrap_survival: empty input");
    const int n_bins = static_cast<int>(grid.size());
    // bin 0 = below grid[0]; bin j+1 = in [grid_j, grid_{j+1})
    std::vector<int> bin_of(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto it = std::upper_bound(grid.begin(), grid.end(), values[i]);
        bin_of[i] = static_cast<int>(it - grid.begin());
    }

    SurvivalBands out;
    out.s.assign(static_cast<std::size_t>(n_bins), 0.0);
    {
        std::vector<std::int64_t> hist(static_cast<std::size_t>(n_bins) + 1, 0);
        for (int b : bin_of) ++hist[static_cast<std::size_t>(b)];
        std::int64_t acc = 0;
        for (int j = n_bins - 1; j >= 0; --j) {
            acc += hist[static_cast<std::size_t>(j) + 1];
            out.s[static_cast<std::size_t>(j)] = static_cast<double>(acc) / static_cast<double>(values.size());
        }
    }
    if (resamples <= 0) {
        out.lo = out.s;
        out.hi = out.s;
        return out;
    }

    std::vector<std::vector<double>> boot(static_cast<std::size_t>(resamples));
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (int r = 0; r < resamples; ++r)
            resample_survival(bin_of, n_bins, seed, static_cast<std::uint64_t>(r),
                              boot[static_cast<std::size_t>(r)]);
    } else {
        for (int r = 0; r < resamples; ++r)
            resample_survival(bin_of, n_bins, seed, static_cast<std::uint64_t>(r),
                              boot[static_cast<std::size_t>(r)]);
    }

    out.lo.resize(static_cast<std::size_t>(n_bins));
    out.hi.resize(static_cast<std::size_t>(n_bins));
    std::vector<double> col(static_cast<std::size_t>(resamples));
    for (int j = 0; j < n_bins; ++j) {
        for (int r = 0; r < resamples; ++r)
            col[static_cast<std::size_t>(r)] = boot[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)];
        std::sort(col.begin(), col.end());
        const auto quantile = [&](double q) {
            const double pos = q * static_cast<double>(resamples - 1);
            const std::size_t k = static_cast<std::size_t>(pos);
            const double frac = pos - static_cast<double>(k);
            return k + 1 < col.size() ? col[k] * (1 - frac) + col[k + 1] * frac : col[k];
        };
        out.lo[static_cast<std::size_t>(j)] = quantile(0.025);
        out.hi[static_cast<std::size_t>(j)] = quantile(0.975);
    }
    return out;
}

}  // namespace

SurvivalBands bootstrap_survival_serial(const std::vector<double>& values,
                                        const std::vector<double>& grid, int resamples,
                                        std::uint64_t seed) {
    return bootstrap_survival_impl(values, grid, resamples, seed, false);
}

SurvivalBands bootstrap_survival_parallel(const std::vector<double>& values,
                                          const std::vector<double>& grid, int resamples,
                                          std::uint64_t seed) {
    return bootstrap_survival_impl(values, grid, resamples, seed, true);
}

SurvivalBands bootstrap_survival(const std::vector<double>& values, const std::vector<double>& grid,
                                 int resamples, std::uint64_t seed, Exec exec) {
    return bootstrap_survival_impl(values, grid, resamples, seed, exec == Exec::Parallel);
}

}  // namespace selfcal::kernels
