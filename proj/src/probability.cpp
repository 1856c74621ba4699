#include "selfcal/probability.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace selfcal {

namespace {

// Bare crosshair projectors (1 +- sigma_{z,x})/4 in (1, sx, sz) coefficients.
constexpr std::array<PauliCoeff, 4> kProjector = {{
    {0.25, 0.0, 0.25},   // detector 1: (1 + sigma_z)/4
    {0.25, 0.0, -0.25},  // detector 2: (1 - sigma_z)/4
    {0.25, 0.25, 0.0},   // detector 3: (1 + sigma_x)/4
    {0.25, -0.25, 0.0},  // detector 4: (1 - sigma_x)/4
}};

Eigen::Matrix4d completion_eigen(const CorrelationVector& q) {
    Eigen::Matrix4d m;
    const double az = q.a_z, bz = q.b_z;
    m(0, 0) = 1 + az + bz + q.c_zz;
    m(1, 1) = 1 + az - bz - q.c_zz;
    m(2, 2) = 1 - az + bz - q.c_zz;
    m(3, 3) = 1 - az - bz + q.c_zz;
    m(0, 1) = m(1, 0) = q.b_x + q.c_zx;
    m(2, 3) = m(3, 2) = q.b_x - q.c_zx;
    m(0, 2) = m(2, 0) = q.a_x + q.c_xz;
    m(1, 3) = m(3, 1) = q.a_x - q.c_xz;
    m(0, 3) = m(3, 0) = q.c_xx;
    m(1, 2) = m(2, 1) = q.c_xx;
    return 0.25 * m;
}

}  // namespace

std::array<PauliCoeff, 5> crosshair_elements(const DetectorSide& side) {
    std::array<PauliCoeff, 5> e{};
    PauliCoeff total{};
    for (int k = 0; k < 4; ++k) {
        const double eta = side.efficiency(k);
        const auto& pi = kProjector[static_cast<std::size_t>(k)];
        e[static_cast<std::size_t>(k)] = {eta * pi.c0, eta * pi.cx, eta * pi.cz};
        total.c0 += e[static_cast<std::size_t>(k)].c0;
        total.cx += e[static_cast<std::size_t>(k)].cx;
        total.cz += e[static_cast<std::size_t>(k)].cz;
    }
    e[4] = {1.0 - total.c0, -total.cx, -total.cz};
    return e;
}

int OutcomeTable::index(int left, int right) {
    if (left < 0 || left > 4 || right < 0 || right > 4)
        throw std::out_of_range("OutcomeTable::index: outcome outside 0..4");
    if (left < 4) return left * 5 + right;        // rows 1'..4' incl. right-null column
    if (right < 4) return 20 + right;             // left-null row
    return kDoubleNull;
}

double OutcomeTable::sum() const {
    double s = 0;
    for (double v : p) s += v;
    return s;
}

double pair_expectation(const PauliCoeff& l, const PauliCoeff& r, const CorrelationVector& q) {
    return l.c0 * r.c0 + l.c0 * (r.cx * q.b_x + r.cz * q.b_z) +
           (l.cx * q.a_x + l.cz * q.a_z) * r.c0 + l.cx * r.cx * q.c_xx + l.cx * r.cz * q.c_xz +
           l.cz * r.cx * q.c_zx + l.cz * r.cz * q.c_zz;
}

OutcomeTable outcome_probabilities(const JointPoint& p, double tol_psd) {
    if (!is_physical(p.state, tol_psd))
        throw std::domain_error("outcome_probabilities: state is not physical");
    const auto el = crosshair_elements(p.left);
    const auto er = crosshair_elements(p.right);
    OutcomeTable t;
    double recorded = 0;
    for (int j = 0; j < 5; ++j)
        for (int k = 0; k < 5; ++k) {
            if (j == 4 && k == 4) continue;
            double v = pair_expectation(el[static_cast<std::size_t>(j)],
                                        er[static_cast<std::size_t>(k)], p.state);
            if (v < 0 && v > -1e-14) v = 0;  // rounding fuzz on exact zeros
            t.p[static_cast<std::size_t>(OutcomeTable::index(j, k))] = v;
            recorded += v;
        }
    t.p[OutcomeTable::kDoubleNull] = 1.0 - recorded;
    return t;
}

OutcomeTablePartials outcome_probabilities_with_partials(const JointPoint& p,
                                                         const ScenarioConfig& cfg) {
    const auto el = crosshair_elements(p.left);
    const auto er = crosshair_elements(p.right);
    const int n_left = cfg.left_free() ? 4 : 1;
    const int n_right = cfg.right_free() ? 4 : 1;

    // Derivative of each side's five elements wrt that side's parameters.
    auto side_derivs = [](const DetectorSide& s, bool free, int n) {
        std::array<std::array<PauliCoeff, 5>, 4> d{};
        if (free) {
            for (int m = 0; m < n; ++m) {
                d[static_cast<std::size_t>(m)][static_cast<std::size_t>(m)] = kProjector[static_cast<std::size_t>(m)];
                auto& null_d = d[static_cast<std::size_t>(m)][4];
                null_d.c0 = -kProjector[static_cast<std::size_t>(m)].c0;
                null_d.cx = -kProjector[static_cast<std::size_t>(m)].cx;
                null_d.cz = -kProjector[static_cast<std::size_t>(m)].cz;
            }
        } else {
            PauliCoeff total{};
            for (int k = 0; k < 4; ++k) {
                const double r = s.ratios[static_cast<std::size_t>(k)];
                const auto& pi = kProjector[static_cast<std::size_t>(k)];
                d[0][static_cast<std::size_t>(k)] = {r * pi.c0, r * pi.cx, r * pi.cz};
                total.c0 += r * pi.c0;
                total.cx += r * pi.cx;
                total.cz += r * pi.cz;
            }
            d[0][4] = {-total.c0, -total.cx, -total.cz};
        }
        return d;
    };
    const auto dl = side_derivs(p.left, cfg.left_free(), n_left);
    const auto dr = side_derivs(p.right, cfg.right_free(), n_right);

    OutcomeTablePartials out;
    out.cols = 8 + n_left + n_right;
    out.table = outcome_probabilities(p, cfg.tol.tol_psd);
    const auto& q = p.state;

    for (int j = 0; j < 5; ++j)
        for (int k = 0; k < 5; ++k) {
            if (j == 4 && k == 4) continue;
            const int idx = OutcomeTable::index(j, k);
            const auto& a = el[static_cast<std::size_t>(j)];
            const auto& b = er[static_cast<std::size_t>(k)];
            double* row = &out.dp[static_cast<std::size_t>(idx * out.cols)];
            row[0] = a.c0 * b.cx;  // b_x
            row[1] = a.c0 * b.cz;  // b_z
            row[2] = a.cx * b.c0;  // a_x
            row[3] = a.cz * b.c0;  // a_z
            row[4] = a.cx * b.cx;  // c_xx
            row[5] = a.cx * b.cz;  // c_xz
            row[6] = a.cz * b.cx;  // c_zx
            row[7] = a.cz * b.cz;  // c_zz
            for (int m = 0; m < n_left; ++m)
                row[8 + m] = pair_expectation(dl[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)], b, q);
            for (int m = 0; m < n_right; ++m)
                row[8 + n_left + m] = pair_expectation(a, dr[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)], q);
        }
    // double-null partials follow from normalization
    double* null_row = &out.dp[static_cast<std::size_t>(OutcomeTable::kDoubleNull * out.cols)];
    for (int c = 0; c < out.cols; ++c) {
        double s = 0;
        for (int idx = 0; idx < 24; ++idx) s += out.d(idx, c);
        null_row[c] = -s;
    }
    return out;
}

PhysicalityResult physicality_check(const CorrelationVector& q, double tol_psd) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(completion_eigen(q),
                                                      Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues().minCoeff();
    return {min_eig >= -tol_psd, min_eig};
}

bool is_physical(const CorrelationVector& q, double tol_psd) {
    Eigen::Matrix4d m = completion_eigen(q);
    for (int i = 0; i < 4; ++i) {
        if (m(i, i) < -tol_psd) return false;
        m(i, i) += tol_psd;
    }
    return Eigen::LLT<Eigen::Matrix4d>(m).info() == Eigen::Success;
}

std::array<double, 16> completion_matrix(const CorrelationVector& q) {
    const Eigen::Matrix4d m = completion_eigen(q);
    std::array<double, 16> out;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) out[static_cast<std::size_t>(i * 4 + j)] = m(i, j);
    return out;
}

namespace {

// Pauli-product basis matrices B_i with M(q) = (1/4)(1 + sum_i q_i B_i),
// ordered as StateField.
const std::array<Eigen::Matrix4d, 8>& state_basis() {
    static const std::array<Eigen::Matrix4d, 8> basis = [] {
        Eigen::Matrix2d I = Eigen::Matrix2d::Identity(), X, Z;
        X << 0, 1, 1, 0;
        Z << 1, 0, 0, -1;
        auto kron = [](const Eigen::Matrix2d& a, const Eigen::Matrix2d& b) {
            Eigen::Matrix4d k;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) k.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
            return k;
        };
        return std::array<Eigen::Matrix4d, 8>{kron(I, X), kron(I, Z), kron(X, I), kron(Z, I),
                                              kron(X, X), kron(X, Z), kron(Z, X), kron(Z, Z)};
    }();
    return basis;
}

}  // namespace

MinEigenPair completion_min_eigen(const CorrelationVector& q) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(completion_eigen(q));
    MinEigenPair out;
    out.value = es.eigenvalues()(0);
    out.second_value = es.eigenvalues()(1);
    for (int i = 0; i < 4; ++i) {
        out.vector[static_cast<std::size_t>(i)] = es.eigenvectors()(i, 0);
        out.second_vector[static_cast<std::size_t>(i)] = es.eigenvectors()(i, 1);
    }
    return out;
}

std::array<double, 8> completion_form_gradient(const std::array<double, 4>& u) {
    Eigen::Vector4d v(u[0], u[1], u[2], u[3]);
    std::array<double, 8> g;
    for (int i = 0; i < 8; ++i)
        g[static_cast<std::size_t>(i)] = 0.25 * v.dot(state_basis()[static_cast<std::size_t>(i)] * v);
    return g;
}

bool completion_logdet(const CorrelationVector& q, double* logdet,
                       std::array<double, 8>* grad, std::array<double, 64>* neg_hess) {
    const Eigen::Matrix4d m = completion_eigen(q);
    Eigen::LLT<Eigen::Matrix4d> llt(m);
    if (llt.info() != Eigen::Success) return false;
    if (logdet) {
        double ld = 0;
        const Eigen::Matrix4d l = llt.matrixL();
        for (int i = 0; i < 4; ++i) ld += 2.0 * std::log(l(i, i));
        *logdet = ld;
    }
    if (grad || neg_hess) {
        const Eigen::Matrix4d inv = llt.solve(Eigen::Matrix4d::Identity());
        std::array<Eigen::Matrix4d, 8> w;  // M^{-1} B_i / 4
        for (int i = 0; i < 8; ++i) w[static_cast<std::size_t>(i)] = 0.25 * inv * state_basis()[static_cast<std::size_t>(i)];
        if (grad)
            for (int i = 0; i < 8; ++i) (*grad)[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)].trace();
        if (neg_hess)
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 8; ++j)
                    (*neg_hess)[static_cast<std::size_t>(i * 8 + j)] =
                        (w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(j)]).trace();
    }
    return true;
}

std::array<double, 2> physical_range(const CorrelationVector& q, StateField coord,
                                     double tol_psd, double resolution) {
    if (!is_physical(q, tol_psd))
        throw std::domain_error("physical_range: reference point is not physical");
    const double center = q.get(coord);
    auto physical_at = [&](double value) {
        CorrelationVector trial = q;
        trial.set(coord, value);
        return is_physical(trial, tol_psd);
    };
    // The PSD set is convex, so along one coordinate it is an interval
    // containing `center`; bisect each boundary.
    auto boundary = [&](double outer) {
        if (physical_at(outer)) return outer;
        double in = center, out = outer;
        while (std::abs(out - in) > resolution) {
            const double mid = 0.5 * (in + out);
            (physical_at(mid) ? in : out) = mid;
        }
        return in;
    };
    return {boundary(-1.0), boundary(1.0)};
}

}  // namespace selfcal
