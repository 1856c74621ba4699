#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "selfcal/likelihood.hpp"
#include "selfcal/model.hpp"

namespace selfcal::kernels {

// Every kernel has a serial reference implementation and an OpenMP one.  Both
// produce bit-identical output (each index owns its RNG stream and output
// slot; reductions run in fixed block order), so the serial variant doubles
// as the test oracle for the parallel one.
enum class Exec { Serial, Parallel };

Exec default_exec();
void set_default_exec(Exec e);

// --- batch log-likelihood -----------------------------------------------------

std::vector<double> log_likelihood_batch_serial(const CountRecord& d, const ScenarioConfig& cfg,
                                                const std::vector<JointPoint>& points);
std::vector<double> log_likelihood_batch_parallel(const CountRecord& d, const ScenarioConfig& cfg,
                                                  const std::vector<JointPoint>& points);
std::vector<double> log_likelihood_batch(const CountRecord& d, const ScenarioConfig& cfg,
                                         const std::vector<JointPoint>& points,
                                         Exec exec = default_exec());

// --- generic indexed map ------------------------------------------------------

// out[i] = fn(i) for i in [0, n); used for grid sweeps and repetition sweeps.
std::vector<double> indexed_map_serial(int n, const std::function<double(int)>& fn);
std::vector<double> indexed_map_parallel(int n, const std::function<double(int)>& fn);
std::vector<double> indexed_map(int n, const std::function<double(int)>& fn,
                                Exec exec = default_exec());

// --- empirical survival curve with bootstrap bands -----------------------------

// Survival s(grid_j) = (1/n) sum_i 1(values_i >= grid_j) plus percentile
// bootstrap bands from `resamples` resamples.  `values` and `grid` are on a
// common (e.g. log) scale; `grid` must be ascending.
struct SurvivalBands {
    std::vector<double> s;     // point estimate per grid value
    std::vector<double> lo;    // 2.5% bootstrap percentile
    std::vector<double> hi;    // 97.5% bootstrap percentile
};
SurvivalBands bootstrap_survival_serial(const std::vector<double>& values,
                                        const std::vector<double>& grid, int resamples,
                                        std::uint64_t seed);
SurvivalBands bootstrap_survival_parallel(const std::vector<double>& values,
                                          const std::vector<double>& grid, int resamples,
                                          std::uint64_t seed);
SurvivalBands bootstrap_survival(const std::vector<double>& values,
                                 const std::vector<double>& grid, int resamples,
                                 std::uint64_t seed, Exec exec = default_exec());

}  // namespace selfcal::kernels
