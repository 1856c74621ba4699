#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace selfcal {

// Default tolerance on the smallest eigenvalue of the completion matrix:
// a state is physical iff min_eig >= -kTolPsd.
inline constexpr double kTolPsd = 1e-9;

// Identifiers for the eight measurable two-qubit expectation values.
// First tensor slot = left apparatus, second slot = right apparatus,
// fixed project-wide.
enum class StateField : int {
    bx = 0,  // <1 (x) sigma_x>   right-side single
    bz = 1,  // <1 (x) sigma_z>
    ax = 2,  // <sigma_x (x) 1>   left-side single
    az = 3,  // <sigma_z (x) 1>
    cxx = 4,  // <sigma_x (x) sigma_x>
    cxz = 5,  // <sigma_x (x) sigma_z>
    czx = 6,  // <sigma_z (x) sigma_x>
    czz = 7,  // <sigma_z (x) sigma_z>
};

const char* state_field_name(StateField f);
std::optional<StateField> parse_state_field(const std::string& name);

// The eight x/z-sector Pauli expectation values of the two-qubit state.
// The sigma_y sector is not measurable by the double-crosshair setup; the
// "y-zeroed completion" density matrix sets those coefficients to zero.
struct CorrelationVector {
    double b_x = 0, b_z = 0;  // <1 (x) sigma_{x,z}>
    double a_x = 0, a_z = 0;  // <sigma_{x,z} (x) 1>
    double c_xx = 0, c_xz = 0, c_zx = 0, c_zz = 0;

    double get(StateField f) const;
    void set(StateField f, double v);
    std::array<double, 8> to_array() const;
    static CorrelationVector from_array(const std::array<double, 8>& a);

    bool operator==(const CorrelationVector&) const = default;
};

// One apparatus side: four detector-efficiency ratios (max equals 1) and the
// overall efficiency scale eta_max.  Per-detector efficiency is
// scale * ratios[k].  For the satellite scenario the left scale houses the
// product T*eta_left; the atmospheric transmission T is never a separate
// parameter.
struct DetectorSide {
    std::array<double, 4> ratios{1.0, 1.0, 1.0, 1.0};
    double scale = 1.0;

    double efficiency(int k) const { return scale * ratios[static_cast<std::size_t>(k)]; }
    std::array<double, 4> efficiencies() const;

    // Builds a side from four raw efficiencies (ratios normalized to max 1).
    static DetectorSide from_efficiencies(const std::array<double, 4>& eta);

    void validate(const std::string& label) const;  // throws std::invalid_argument
};

// A point in the joint state-device parameter space.  `nu` (mean photon-pair
// number per data-taking period) is a free coordinate only in UNKNOWN_NU mode;
// in KNOWN_NU mode it is carried by the scenario configuration instead.
struct JointPoint {
    CorrelationVector state;
    DetectorSide left;
    DetectorSide right;
    double nu = 0.0;
};

// Prior specification for one scalar parameter (or the constrained-uniform
// state block).  Beta uses (a, b); gamma uses (shape, scale) stored in (a, b).
struct PriorSpec {
    enum class Kind { Uniform01, UniformStateConstrained, Beta, Gamma };
    Kind kind = Kind::Uniform01;
    double a = 0, b = 0;

    static PriorSpec uniform01() { return {Kind::Uniform01, 0, 0}; }
    static PriorSpec uniform_state_constrained() { return {Kind::UniformStateConstrained, 0, 0}; }
    static PriorSpec beta(double a, double b);
    static PriorSpec gamma(double shape, double scale);

    std::string describe() const;
};

struct SamplerSettings {
    int chains = 8;
    int warmup = 1000;
    int leapfrog_steps = 20;
    double target_accept = 0.8;
    double initial_step_size = 0.1;
};

struct Tolerances {
    double tol_psd = kTolPsd;
    double grad_tol = 1e-8;
    int max_iterations = 4000;
    double cluster_distance = 1e-2;  // in unconstrained coordinates
};

// Scenario description: estimation mode, efficiency-ratio constraints, priors,
// sampler settings.  A side with no ratio vector has all four of its detector
// efficiencies free (the multimodal regime); with a ratio vector only the
// scale is free.
struct ScenarioConfig {
    enum class Mode { KnownNu, UnknownNu };

    Mode mode = Mode::KnownNu;
    std::optional<double> nu;  // required for KnownNu at use time
    double nu_ref = 1.0;       // unconstrained-space origin for the nu coordinate

    std::optional<std::array<double, 4>> ratios_left;
    std::optional<std::array<double, 4>> ratios_right;

    PriorSpec state_prior = PriorSpec::uniform_state_constrained();
    PriorSpec eta_left_prior = PriorSpec::uniform01();
    PriorSpec eta_right_prior = PriorSpec::uniform01();
    PriorSpec nu_prior = PriorSpec::uniform01();  // used only in UnknownNu mode

    SamplerSettings sampler;
    Tolerances tol;

    bool unknown_nu() const { return mode == Mode::UnknownNu; }
    bool left_free() const { return !ratios_left.has_value(); }
    bool right_free() const { return !ratios_right.has_value(); }
    double known_nu() const;  // throws if absent

    void validate() const;  // throws std::invalid_argument
};

// --- parameter-vector layout -----------------------------------------------
//
// Physical coordinate vector theta and its unconstrained image v share the
// layout [q1..q8 | left efficiencies (1 or 4) | right efficiencies (1 or 4)
// | nu (UnknownNu only)].  Correlators map through tanh, efficiencies through
// the logistic function, nu through nu_ref * exp(v).  The PSD constraint on
// the state block is NOT encoded in the map; callers enforce it by
// rejection or barrier.

int parameter_dimension(const ScenarioConfig& cfg);
std::vector<std::string> parameter_names(const ScenarioConfig& cfg);

std::vector<double> pack_physical(const JointPoint& p, const ScenarioConfig& cfg);
JointPoint unpack_physical(const std::vector<double>& theta, const ScenarioConfig& cfg);

// Maps a strictly interior point to unconstrained coordinates.  Throws
// std::domain_error naming the coordinate when a parameter sits on its
// boundary (|q| = 1, eta = 0 or 1, nu <= 0).
std::vector<double> to_unconstrained(const JointPoint& p, const ScenarioConfig& cfg);

// Inverse map.  Box constraints hold by construction; PSD may be violated.
// Throws std::invalid_argument on wrong dimension or non-finite entries.
JointPoint from_unconstrained(const std::vector<double>& v, const ScenarioConfig& cfg);

// Diagonal transform data at v: theta values, dtheta/dv, and the
// log-Jacobian log|dtheta/dv| with its v-gradient (needed by HMC).
struct TransformEval {
    std::vector<double> theta;
    std::vector<double> dtheta_dv;
    double log_jacobian = 0;
    std::vector<double> dlogjac_dv;
};
TransformEval eval_transform(const std::vector<double>& v, const ScenarioConfig& cfg);

}  // namespace selfcal
