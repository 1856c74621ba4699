#include "selfcal/model.hpp"

#include <algorithm>
#include <cmath>

namespace selfcal {

namespace {

const std::array<const char*, 8> kFieldNames = {"b_x", "b_z", "a_x", "a_z",
                                                "c_xx", "c_xz", "c_zx", "c_zz"};

double logit(double p) { return std::log(p / (1.0 - p)); }
double logistic(double v) {
    // evaluated symmetrically so huge |v| saturates without overflow
    if (v >= 0) {
        const double e = std::exp(-v);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(v);
    return e / (1.0 + e);
}

void require_interior(double x, double lo, double hi, const std::string& name) {
    if (!(x > lo && x < hi))
        throw std::domain_error("to_unconstrained: coordinate '" + name + "' = " +
                                std::to_string(x) + " is on or outside its open interval (" +
                                std::to_string(lo) + ", " + std::to_string(hi) + ")");
}

}  // namespace

const char* state_field_name(StateField f) { return kFieldNames[static_cast<std::size_t>(f)]; }

std::optional<StateField> parse_state_field(const std::string& name) {
    for (int i = 0; i < 8; ++i)
        if (name == kFieldNames[static_cast<std::size_t>(i)]) return static_cast<StateField>(i);
    return std::nullopt;
}

double CorrelationVector::get(StateField f) const { return to_array()[static_cast<std::size_t>(f)]; }

void CorrelationVector::set(StateField f, double v) {
    auto a = to_array();
    a[static_cast<std::size_t>(f)] = v;
    *this = from_array(a);
}

std::array<double, 8> CorrelationVector::to_array() const {
    return {b_x, b_z, a_x, a_z, c_xx, c_xz, c_zx, c_zz};
}

CorrelationVector CorrelationVector::from_array(const std::array<double, 8>& a) {
    CorrelationVector q;
    q.b_x = a[0];
    q.b_z = a[1];
    q.a_x = a[2];
    q.a_z = a[3];
    q.c_xx = a[4];
    q.c_xz = a[5];
    q.c_zx = a[6];
    q.c_zz = a[7];
    return q;
}

std::array<double, 4> DetectorSide::efficiencies() const {
    return {efficiency(0), efficiency(1), efficiency(2), efficiency(3)};
}

DetectorSide DetectorSide::from_efficiencies(const std::array<double, 4>& eta) {
    const double m = *std::max_element(eta.begin(), eta.end());
    if (!(m > 0)) throw std::invalid_argument("DetectorSide: all efficiencies are zero");
    DetectorSide s;
    s.scale = m;
    for (int k = 0; k < 4; ++k) s.ratios[static_cast<std::size_t>(k)] = eta[static_cast<std::size_t>(k)] / m;
    return s;
}

void DetectorSide::validate(const std::string& label) const {
    double m = 0;
    for (double r : ratios) {
        if (!(r > 0 && r <= 1))
            throw std::invalid_argument(label + ": ratio " + std::to_string(r) +
                                        " outside (0, 1]");
        m = std::max(m, r);
    }
    if (std::abs(m - 1.0) > 1e-12)
        throw std::invalid_argument(label + ": max ratio must equal 1, got " + std::to_string(m));
    if (!(scale >= 0 && scale <= 1))
        throw std::invalid_argument(label + ": scale " + std::to_string(scale) +
                                    " outside [0, 1]");
}

PriorSpec PriorSpec::beta(double a, double b) {
    if (!(a > 0 && b > 0)) throw std::invalid_argument("beta prior needs a, b > 0");
    return {Kind::Beta, a, b};
}

PriorSpec PriorSpec::gamma(double shape, double scale) {
    if (!(shape > 0 && scale > 0)) throw std::invalid_argument("gamma prior needs shape, scale > 0");
    return {Kind::Gamma, shape, scale};
}

std::string PriorSpec::describe() const {
    switch (kind) {
        case Kind::Uniform01: return "uniform01";
        case Kind::UniformStateConstrained: return "uniform_state_constrained";
        case Kind::Beta: return "beta(" + std::to_string(a) + ", " + std::to_string(b) + ")";
        case Kind::Gamma: return "gamma(" + std::to_string(a) + ", " + std::to_string(b) + ")";
    }
    return "?";
}

double ScenarioConfig::known_nu() const {
    if (mode != Mode::KnownNu) throw std::logic_error("known_nu() called in unknown-nu mode");
    if (!nu.has_value())
        throw std::invalid_argument("scenario has no nu value; pass --nu or set it in the config");
    return *nu;
}

void ScenarioConfig::validate() const {
    if (mode == Mode::KnownNu && nu.has_value() && !(*nu > 0))
        throw std::invalid_argument("known nu must be > 0");
    if (!(nu_ref > 0)) throw std::invalid_argument("nu_ref must be > 0");
    auto check_ratios = [](const std::optional<std::array<double, 4>>& r, const char* label) {
        if (!r) return;
        DetectorSide s;
        s.ratios = *r;
        s.scale = 1.0;
        s.validate(label);
    };
    check_ratios(ratios_left, "ratios_left");
    check_ratios(ratios_right, "ratios_right");
    auto check_prior = [](const PriorSpec& p, const char* label) {
        if ((p.kind == PriorSpec::Kind::Beta || p.kind == PriorSpec::Kind::Gamma) &&
            !(p.a > 0 && p.b > 0))
            throw std::invalid_argument(std::string(label) + ": hyperparameters must be positive");
    };
    check_prior(eta_left_prior, "eta_left prior");
    check_prior(eta_right_prior, "eta_right prior");
    if (mode == Mode::UnknownNu) check_prior(nu_prior, "nu prior");
    if (sampler.chains < 1 || sampler.warmup < 0 || sampler.leapfrog_steps < 1)
        throw std::invalid_argument("bad sampler settings");
    if (!(tol.tol_psd >= 0) || !(tol.grad_tol > 0))
        throw std::invalid_argument("bad tolerances");
}

int parameter_dimension(const ScenarioConfig& cfg) {
    return 8 + (cfg.left_free() ? 4 : 1) + (cfg.right_free() ? 4 : 1) + (cfg.unknown_nu() ? 1 : 0);
}

std::vector<std::string> parameter_names(const ScenarioConfig& cfg) {
    std::vector<std::string> names(kFieldNames.begin(), kFieldNames.end());
    if (cfg.left_free())
        for (int k = 1; k <= 4; ++k) names.push_back("eta_left_" + std::to_string(k));
    else
        names.push_back("eta_left");
    if (cfg.right_free())
        for (int k = 1; k <= 4; ++k) names.push_back("eta_right_" + std::to_string(k));
    else
        names.push_back("eta_right");
    if (cfg.unknown_nu()) names.push_back("nu");
    return names;
}

std::vector<double> pack_physical(const JointPoint& p, const ScenarioConfig& cfg) {
    std::vector<double> theta;
    theta.reserve(static_cast<std::size_t>(parameter_dimension(cfg)));
    for (double q : p.state.to_array()) theta.push_back(q);
    auto push_side = [&theta](const DetectorSide& s, bool free) {
        if (free)
            for (double e : s.efficiencies()) theta.push_back(e);
        else
            theta.push_back(s.scale);
    };
    push_side(p.left, cfg.left_free());
    push_side(p.right, cfg.right_free());
    if (cfg.unknown_nu()) theta.push_back(p.nu);
    return theta;
}

JointPoint unpack_physical(const std::vector<double>& theta, const ScenarioConfig& cfg) {
    if (static_cast<int>(theta.size()) != parameter_dimension(cfg))
        throw std::invalid_argument("unpack_physical: expected dimension " +
                                    std::to_string(parameter_dimension(cfg)) + ", got " +
                                    std::to_string(theta.size()));
    JointPoint p;
    std::array<double, 8> q;
    std::size_t i = 0;
    for (int k = 0; k < 8; ++k) q[static_cast<std::size_t>(k)] = theta[i++];
    p.state = CorrelationVector::from_array(q);
    auto pop_side = [&theta, &i](bool free, const std::optional<std::array<double, 4>>& ratios) {
        DetectorSide s;
        if (free) {
            std::array<double, 4> eta;
            for (int k = 0; k < 4; ++k) eta[static_cast<std::size_t>(k)] = theta[i++];
            s = DetectorSide::from_efficiencies(eta);
        } else {
            s.ratios = *ratios;
            s.scale = theta[i++];
        }
        return s;
    };
    p.left = pop_side(cfg.left_free(), cfg.ratios_left);
    p.right = pop_side(cfg.right_free(), cfg.ratios_right);
    if (cfg.unknown_nu()) p.nu = theta[i++];
    return p;
}

std::vector<double> to_unconstrained(const JointPoint& p, const ScenarioConfig& cfg) {
    const auto names = parameter_names(cfg);
    const auto theta = pack_physical(p, cfg);
    std::vector<double> v(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (!std::isfinite(theta[i]))
            throw std::domain_error("to_unconstrained: coordinate '" + names[i] + "' is not finite");
        if (i < 8) {
            require_interior(theta[i], -1.0, 1.0, names[i]);
            v[i] = std::atanh(theta[i]);
        } else if (i + 1 == theta.size() && cfg.unknown_nu()) {
            if (!(theta[i] > 0))
                throw std::domain_error("to_unconstrained: coordinate 'nu' must be positive");
            v[i] = std::log(theta[i] / cfg.nu_ref);
        } else {
            require_interior(theta[i], 0.0, 1.0, names[i]);
            v[i] = logit(theta[i]);
        }
    }
    return v;
}

JointPoint from_unconstrained(const std::vector<double>& v, const ScenarioConfig& cfg) {
    const int dim = parameter_dimension(cfg);
    if (static_cast<int>(v.size()) != dim)
        throw std::invalid_argument("from_unconstrained: expected dimension " +
                                    std::to_string(dim) + ", got " + std::to_string(v.size()));
    std::vector<double> theta(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]))
            throw std::invalid_argument("from_unconstrained: non-finite entry at index " +
                                        std::to_string(i));
        if (i < 8)
            theta[i] = std::tanh(v[i]);
        else if (static_cast<int>(i) == dim - 1 && cfg.unknown_nu())
            theta[i] = cfg.nu_ref * std::exp(v[i]);
        else
            theta[i] = logistic(v[i]);
    }
    return unpack_physical(theta, cfg);
}

TransformEval eval_transform(const std::vector<double>& v, const ScenarioConfig& cfg) {
    const int dim = parameter_dimension(cfg);
    if (static_cast<int>(v.size()) != dim)
        throw std::invalid_argument("eval_transform: wrong dimension");
    TransformEval t;
    t.theta.resize(v.size());
    t.dtheta_dv.resize(v.size());
    t.dlogjac_dv.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i < 8) {
            const double q = std::tanh(v[i]);
            t.theta[i] = q;
            t.dtheta_dv[i] = 1.0 - q * q;
            t.dlogjac_dv[i] = -2.0 * q;
        } else if (static_cast<int>(i) == dim - 1 && cfg.unknown_nu()) {
            const double nu = cfg.nu_ref * std::exp(v[i]);
            t.theta[i] = nu;
            t.dtheta_dv[i] = nu;
            t.dlogjac_dv[i] = 1.0;
        } else {
            const double e = logistic(v[i]);
            t.theta[i] = e;
            t.dtheta_dv[i] = e * (1.0 - e);
            t.dlogjac_dv[i] = 1.0 - 2.0 * e;
        }
        t.log_jacobian += std::log(t.dtheta_dv[i]);
    }
    return t;
}

}  // namespace selfcal
