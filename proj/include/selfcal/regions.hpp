#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "selfcal/estimation.hpp"
#include "selfcal/sampling.hpp"

namespace selfcal {

// Size and credibility of the bounded-likelihood regions R_lambda as a
// function of lambda, from direct prior draws:
//   s_j = (1/n) sum_i 1(lambda_i >= lambda_j)
//   lambda_crit = (1/n) sum_i lambda_i          (= integral of s d lambda)
//   c_j = [lambda_j s_j + (1/n) sum_i max(lambda_i - lambda_j, 0)] / lambda_crit
// The grid is log-spaced; lambda values are carried as logs so curves with
// astronomically small lambda stay representable.
struct LambdaCurve {
    std::vector<double> log_lambda;  // natural log, ascending, last entry 0
    std::vector<double> s, c;
    std::vector<double> s_lo, s_hi;  // bootstrap band for s
    double lambda_crit = 0;
    double s_at_crit = 0;
    double c_at_crit = 0;

    std::size_t grid_size() const { return log_lambda.size(); }
    std::size_t index_near_crit() const;  // grid index closest to lambda_crit
};

LambdaCurve curve_from_samples(const SampleSet& prior_set, int grid_points = 400,
                               int bootstrap_resamples = 200, std::uint64_t seed = 1);

// Bounded-likelihood membership test: inside R_lambda iff
// L(D|p) >= lambda * L_max.
struct Membership {
    bool inside = false;
    double lambda_p = 0;  // exp(logL(p) - logL_max)
    double log_lambda_p = 0;
};
Membership membership(const JointPoint& p, const CountRecord& d, const ScenarioConfig& cfg,
                      double lambda, double logL_max);

// Full pipeline: multi-start fit -> prior sampling -> curve -> report.
struct RegionReportOptions {
    int n_prior_samples = 100000;
    int n_starts = 10;
    int curve_grid = 400;
    int bootstrap_resamples = 200;
    // optional posterior importance refinement of the plausible-region size
    bool refine_size = false;
    int n_posterior_samples = 20000;
    int chains = 8;
};

struct NamedPoint {
    std::string label;
    JointPoint point;
};

struct RegionReport {
    MLResult ml;
    ModeReport modes;
    LambdaCurve curve;
    SampleSet prior_set;
    double lambda_crit = 0;
    double s_plausible = 0;
    double c_plausible = 0;
    double state_acceptance_rate = 0;
    std::vector<std::pair<std::string, Membership>> references;  // vs lambda_crit
    std::optional<RefinedSize> refined_size;
    std::optional<ChainDiagnostics> hmc_diagnostics;
};

RegionReport plausible_region_report(const CountRecord& d, const ScenarioConfig& cfg,
                                     std::uint64_t seed, const RegionReportOptions& opt = {},
                                     const std::vector<NamedPoint>& references = {});

// --- 2-D slices ----------------------------------------------------------------

// Level set of lambda(.) on a 2-D slice through `fixed`, varying two named
// physical coordinates on an n x n grid (marching squares with bilinear
// interpolation).  State coordinates are clipped to their physical range.
struct SliceContour {
    std::array<std::string, 2> varied;
    std::array<double, 2> lo, hi;          // grid extents per varied coordinate
    std::array<double, 2> physical_lo, physical_hi;  // PSD bounds (state coords)
    double level = 0;                       // lambda level
    int grid_n = 0;
    std::vector<double> lambda_grid;        // row-major, first coordinate fastest
    std::vector<std::vector<std::array<double, 2>>> polylines;
    bool empty_contour = false;             // level above the in-slice maximum
    std::array<double, 2> ml_marker{};      // varied coords of the global ML point
    std::array<double, 2> reference_marker{};  // varied coords of `fixed`
    std::array<double, 2> grid_max_at{};    // in-slice argmax of lambda
    double grid_max_lambda = 0;
};

struct SliceOptions {
    int grid_n = 101;
    // explicit extents override the defaults (physical range / unit box /
    // factor-2 window around nu)
    std::optional<std::array<double, 2>> range_first, range_second;
};

SliceContour slice_contour(const CountRecord& d, const ScenarioConfig& cfg,
                           const std::array<std::string, 2>& varied, const JointPoint& fixed,
                           double level, const MLResult& ml, const SliceOptions& opt = {});

// Marching-squares extraction on an arbitrary scalar field (row-major,
// x fastest); exposed for reuse and testing.
std::vector<std::vector<std::array<double, 2>>> contour_polylines(
    const std::vector<double>& field, const std::vector<double>& xs,
    const std::vector<double>& ys, double level);

}  // namespace selfcal
