#include "selfcal/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace selfcal::io {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

PriorSpec parse_prior(const json& j, const std::string& label) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "uniform01") return PriorSpec::uniform01();
        if (s == "uniform_constrained" || s == "uniform_state_constrained")
            return PriorSpec::uniform_state_constrained();
        throw std::invalid_argument(label + ": unknown prior '" + s + "'");
    }
    const std::string type = j.at("type").get<std::string>();
    if (type == "uniform01") return PriorSpec::uniform01();
    if (type == "uniform_constrained" || type == "uniform_state_constrained")
        return PriorSpec::uniform_state_constrained();
    if (type == "beta") return PriorSpec::beta(j.at("a").get<double>(), j.at("b").get<double>());
    if (type == "gamma")
        return PriorSpec::gamma(j.at("shape").get<double>(), j.at("scale").get<double>());
    throw std::invalid_argument(label + ": unknown prior type '" + type + "'");
}

std::optional<std::array<double, 4>> parse_ratios(const json& j, const std::string& label) {
    if (j.is_null()) return std::nullopt;
    if (!j.is_array() || j.size() != 4)
        throw std::invalid_argument(label + ": expected an array of 4 ratios or null");
    std::array<double, 4> r;
    for (int k = 0; k < 4; ++k) r[static_cast<std::size_t>(k)] = j[static_cast<std::size_t>(k)].get<double>();
    return r;
}

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config parse error: ") + e.what());
    }
    ScenarioConfig cfg;
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "known_nu")
        cfg.mode = ScenarioConfig::Mode::KnownNu;
    else if (mode == "unknown_nu")
        cfg.mode = ScenarioConfig::Mode::UnknownNu;
    else
        throw std::invalid_argument("config: mode must be 'known_nu' or 'unknown_nu'");

    if (j.contains("nu") && !j["nu"].is_null()) cfg.nu = j["nu"].get<double>();
    if (j.contains("nu_ref")) cfg.nu_ref = j["nu_ref"].get<double>();
    if (j.contains("ratios_left")) cfg.ratios_left = parse_ratios(j["ratios_left"], "ratios_left");
    if (j.contains("ratios_right")) cfg.ratios_right = parse_ratios(j["ratios_right"], "ratios_right");

    if (j.contains("priors")) {
        const auto& pr = j["priors"];
        if (pr.contains("state")) cfg.state_prior = parse_prior(pr["state"], "priors.state");
        if (pr.contains("eta_left")) cfg.eta_left_prior = parse_prior(pr["eta_left"], "priors.eta_left");
        if (pr.contains("eta_right"))
            cfg.eta_right_prior = parse_prior(pr["eta_right"], "priors.eta_right");
        if (pr.contains("nu")) cfg.nu_prior = parse_prior(pr["nu"], "priors.nu");
    }
    if (j.contains("sampler")) {
        const auto& s = j["sampler"];
        if (s.contains("chains")) cfg.sampler.chains = s["chains"].get<int>();
        if (s.contains("warmup")) cfg.sampler.warmup = s["warmup"].get<int>();
        if (s.contains("leapfrog_steps")) cfg.sampler.leapfrog_steps = s["leapfrog_steps"].get<int>();
        if (s.contains("target_accept")) cfg.sampler.target_accept = s["target_accept"].get<double>();
        if (s.contains("initial_step_size"))
            cfg.sampler.initial_step_size = s["initial_step_size"].get<double>();
    }
    if (j.contains("tolerances")) {
        const auto& t = j["tolerances"];
        if (t.contains("tol_psd")) cfg.tol.tol_psd = t["tol_psd"].get<double>();
        if (t.contains("grad_tol")) cfg.tol.grad_tol = t["grad_tol"].get<double>();
        if (t.contains("max_iterations")) cfg.tol.max_iterations = t["max_iterations"].get<int>();
        if (t.contains("cluster_distance"))
            cfg.tol.cluster_distance = t["cluster_distance"].get<double>();
    }
    // nu_ref defaults to the prior mean in unknown-nu mode (transform origin)
    if (!j.contains("nu_ref") && cfg.unknown_nu() &&
        cfg.nu_prior.kind == PriorSpec::Kind::Gamma)
        cfg.nu_ref = cfg.nu_prior.a * cfg.nu_prior.b;
    cfg.validate();
    return cfg;
}

ScenarioConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

CountRecord parse_counts(const std::string& text, const std::string& origin) {
    CountRecord rec;
    int found = 0;
    int line = 1, col = 1;
    std::size_t i = 0;
    const std::size_t n = text.size();
    auto fail = [&](const std::string& msg) {
        throw std::invalid_argument(origin + ":" + std::to_string(line) + ":" +
                                    std::to_string(col) + ": " + msg);
    };
    while (i < n) {
        const char ch = text[i];
        if (ch == '#') {  // comment to end of line
            while (i < n && text[i] != '\n') ++i;
            continue;
        }
        if (ch == '\n') {
            ++line;
            col = 1;
            ++i;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(ch))) {
            ++col;
            ++i;
            continue;
        }
        // token start
        const int tok_col = col;
        std::string tok;
        while (i < n && !std::isspace(static_cast<unsigned char>(text[i])) && text[i] != '#') {
            tok += text[i];
            ++i;
            ++col;
        }
        col = tok_col;
        if (found >= 24) fail("expected exactly 24 counts, found more (extra token '" + tok + "')");
        std::size_t used = 0;
        long long value = 0;
        try {
            value = std::stoll(tok, &used);
        } catch (const std::exception&) {
            fail("entry " + std::to_string(found + 1) + ": '" + tok + "' is not an integer");
        }
        if (used != tok.size())
            fail("entry " + std::to_string(found + 1) + ": '" + tok + "' is not an integer");
        if (value < 0) fail("entry " + std::to_string(found + 1) + ": counts must be nonnegative");
        rec.n[static_cast<std::size_t>(found)] = value;
        ++found;
        col = tok_col + static_cast<int>(tok.size());
    }
    if (found != 24)
        throw std::invalid_argument(origin + ": expected exactly 24 counts, found " +
                                    std::to_string(found));
    return rec;
}

CountRecord load_counts(const std::string& path) { return parse_counts(read_file(path), path); }

void save_counts(const std::string& path, const CountRecord& d, const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    if (!comment.empty()) out << "# " << comment << "\n";
    for (int k = 0; k < 24; ++k) out << d.n[static_cast<std::size_t>(k)] << (k == 23 ? "\n" : " ");
}

JointPoint parse_point(const std::string& text, const ScenarioConfig& cfg) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("point parse error: ") + e.what());
    }
    JointPoint p;
    const auto& st = j.at("state");
    std::array<double, 8> q;
    for (int f = 0; f < 8; ++f) {
        const char* name = state_field_name(static_cast<StateField>(f));
        q[static_cast<std::size_t>(f)] = st.at(name).get<double>();
    }
    p.state = CorrelationVector::from_array(q);

    auto parse_side = [&](const char* key, const char* ratios_key,
                          const std::optional<std::array<double, 4>>& cfg_ratios) {
        DetectorSide s;
        if (j.contains(ratios_key)) {
            auto r = parse_ratios(j[ratios_key], ratios_key);
            if (!r) throw std::invalid_argument(std::string(ratios_key) + " must not be null");
            s.ratios = *r;
        } else if (cfg_ratios) {
            s.ratios = *cfg_ratios;
        }
        const auto& v = j.at(key);
        if (v.is_number()) {
            s.scale = v.get<double>();
        } else {
            // four explicit efficiencies
            std::array<double, 4> eta;
            for (int k = 0; k < 4; ++k) eta[static_cast<std::size_t>(k)] = v.at(static_cast<std::size_t>(k)).get<double>();
            s = DetectorSide::from_efficiencies(eta);
        }
        return s;
    };
    p.left = parse_side("eta_left", "ratios_left", cfg.ratios_left);
    p.right = parse_side("eta_right", "ratios_right", cfg.ratios_right);
    if (j.contains("nu") && !j["nu"].is_null()) p.nu = j["nu"].get<double>();
    if (cfg.unknown_nu() && !(p.nu > 0))
        throw std::invalid_argument("point: unknown-nu scenario requires a positive 'nu' entry");
    return p;
}

JointPoint load_point(const std::string& path, const ScenarioConfig& cfg) {
    return parse_point(read_file(path), cfg);
}

std::string point_to_json(const JointPoint& p, const ScenarioConfig& cfg) {
    json st;
    const auto q = p.state.to_array();
    for (int f = 0; f < 8; ++f)
        st[state_field_name(static_cast<StateField>(f))] = q[static_cast<std::size_t>(f)];
    json j{{"state", st}};
    j["eta_left"] = p.left.scale;
    j["eta_right"] = p.right.scale;
    j["ratios_left"] = p.left.ratios;
    j["ratios_right"] = p.right.ratios;
    if (cfg.unknown_nu()) j["nu"] = p.nu;
    return j.dump(2) + "\n";
}

void write_samples(const std::string& path, const SampleSet& set, const ScenarioConfig& cfg,
                   const std::string& provenance) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "# " << provenance << "\n";
    out << "# provenance="
        << (set.provenance == SampleProvenance::PriorDirect ? "prior-direct" : "posterior-hmc")
        << " seed=" << set.seed << " chains=" << set.chains << " logL_max=" << std::setprecision(17)
        << set.logL_max << "\n";
    out << "# columns:";
    for (const auto& name : parameter_names(cfg)) out << ' ' << name;
    out << " logL lambda\n";
    out << std::setprecision(12);
    for (std::size_t i = 0; i < set.size(); ++i) {
        for (double x : pack_physical(set.points[i], cfg)) out << x << ' ';
        out << set.log_likelihood[i] << ' ' << set.lambda[i] << "\n";
    }
}

void write_curve(const std::string& path, const LambdaCurve& curve, const std::string& provenance) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "# " << provenance << "\n";
    out << std::setprecision(12);
    out << "# lambda_crit= " << curve.lambda_crit << " s(crit)= " << curve.s_at_crit
        << " c(crit)= " << curve.c_at_crit << "\n";
    out << "# columns: lambda log10_lambda s c s_lo s_hi\n";
    constexpr double kLog10 = 2.302585092994046;
    for (std::size_t j = 0; j < curve.grid_size(); ++j) {
        const double log10_lambda = curve.log_lambda[j] / kLog10;
        out << std::exp(curve.log_lambda[j]) << ' ' << log10_lambda << ' ' << curve.s[j] << ' '
            << curve.c[j] << ' ' << curve.s_lo[j] << ' ' << curve.s_hi[j] << "\n";
    }
}

void write_slice(const std::string& path, const SliceContour& slice, const std::string& provenance) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "# " << provenance << "\n";
    out << std::setprecision(12);
    out << "# varied: " << slice.varied[0] << ' ' << slice.varied[1] << "\n";
    out << "# level= " << slice.level << " empty_contour= " << (slice.empty_contour ? 1 : 0)
        << "\n";
    out << "# extents: [" << slice.lo[0] << ", " << slice.hi[0] << "] x [" << slice.lo[1] << ", "
        << slice.hi[1] << "]\n";
    out << "# physical_range: [" << slice.physical_lo[0] << ", " << slice.physical_hi[0] << "] x ["
        << slice.physical_lo[1] << ", " << slice.physical_hi[1] << "]\n";
    out << "# ml_marker: " << slice.ml_marker[0] << ' ' << slice.ml_marker[1] << "\n";
    out << "# reference_marker: " << slice.reference_marker[0] << ' ' << slice.reference_marker[1]
        << "\n";
    out << "GRID " << slice.grid_n << ' ' << slice.grid_n << "\n";
    for (int iy = 0; iy < slice.grid_n; ++iy) {
        for (int ix = 0; ix < slice.grid_n; ++ix)
            out << slice.lambda_grid[static_cast<std::size_t>(iy * slice.grid_n + ix)]
                << (ix + 1 == slice.grid_n ? "" : " ");
        out << "\n";
    }
    for (const auto& line : slice.polylines) {
        out << "POLYLINE " << line.size() << "\n";
        for (const auto& pt : line) out << pt[0] << ' ' << pt[1] << "\n";
    }
}

std::string format_report(const RegionReport& report, const ScenarioConfig& cfg,
                          const std::vector<NamedPoint>& references) {
    std::ostringstream out;
    out << std::setprecision(6);
    out << "== joint state-device estimate ==\n";
    out << "log L_max          : " << std::setprecision(12) << report.ml.logL_max << "\n"
        << std::setprecision(6);
    out << "converged          : " << (report.ml.converged ? "yes" : "NO") << " ("
        << report.ml.iterations << " iterations, |grad| = " << report.ml.gradient_norm << ")\n";
    if (!report.ml.boundary_flags.empty()) {
        out << "boundary-seeking   :";
        for (const auto& f : report.ml.boundary_flags) out << ' ' << f;
        out << "\n";
    }
    out << "clusters found     : " << report.modes.clusters.size() << " ("
        << report.modes.failed_starts << " failed starts)\n";
    if (report.modes.clusters.size() > 1) {
        out << "  !! multiple likelihood maxima; representatives:\n";
        for (std::size_t i = 0; i < report.modes.clusters.size(); ++i) {
            const auto& c = report.modes.clusters[i];
            out << "  cluster " << i << ": logL = " << std::setprecision(12)
                << c.representative.logL_max << std::setprecision(6) << ", members = " << c.members
                << "\n";
        }
        out << "  fidelity(0,1) = " << report.modes.fidelity_between(0, 1)
            << ", |eta_0 - eta_1| = " << report.modes.eta_distance_between(0, 1) << "\n";
    }

    out << "\nParameter            ML estimate";
    const bool have_ref = !references.empty();
    if (have_ref) out << "    reference (" << references.front().label << ")";
    out << "\n";
    const auto names = parameter_names(cfg);
    const auto theta = pack_physical(report.ml.estimate, cfg);
    std::vector<double> ref_theta;
    if (have_ref) ref_theta = pack_physical(references.front().point, cfg);
    for (std::size_t i = 0; i < names.size(); ++i) {
        out << "  " << std::left << std::setw(18) << names[i] << ' ' << std::right << std::setw(12)
            << theta[i];
        if (have_ref) out << "   " << std::setw(12) << ref_theta[i];
        out << "\n";
    }

    out << "\n== optimal error regions ==\n";
    out << "prior draws        : " << report.prior_set.size()
        << " (state acceptance " << report.state_acceptance_rate << ")\n";
    out << "lambda_crit        : " << report.lambda_crit << "\n";
    out << "plausible size s   : " << report.s_plausible << "\n";
    out << "plausible cred c   : " << report.c_plausible << "\n";
    if (report.refined_size) {
        out << "refined size       : " << report.refined_size->s << " (sd "
            << report.refined_size->sd << ", " << report.refined_size->n_above
            << " posterior draws above threshold)\n";
    }
    if (report.hmc_diagnostics) {
        const auto& d = *report.hmc_diagnostics;
        double max_rhat = 0;
        for (double r : d.split_rhat) max_rhat = std::max(max_rhat, r);
        out << "hmc                : accept " << d.acceptance_rate << ", step " << d.step_size
            << ", max split-Rhat " << max_rhat << (d.rhat_ok ? "" : "  !! Rhat > 1.05") << "\n";
    }
    for (const auto& [label, m] : report.references) {
        out << "reference '" << label << "': lambda = " << m.lambda_p << " -> "
            << (m.inside ? "inside" : "OUTSIDE") << " the plausible region\n";
    }
    if (report.s_plausible < 0.05 && report.c_plausible > 0.95)
        out << "verdict            : small size, large credibility -- the data pin the "
               "parameters down well\n";
    return out.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << text;
}

std::string file_hash(const std::string& path) {
    const std::string bytes = read_file(path);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << h;
    return ss.str();
}

}  // namespace selfcal::io
