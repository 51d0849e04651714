#pragma once

#include "homognet/polar.hpp"
#include "homognet/zoo.hpp"

#include <cmath>

namespace homognet {

/// Every constant entering the master generalization bound, filled per family.
/// `teacher_fro` / `teacher_op` are the teacher-map norms the closed forms
/// consume (Frobenius-type and spectral-type respectively; for the ReLU family
/// teacher_fro is the product ||U*||_F ||V*||_F).
struct ConstantsLedger {
    Family family = Family::MatrixSensing;
    double gamma = 0.0;
    double sigma_x = 1.0;
    double sigma_y_given_x = 0.0;
    double g_lip = 0.0;  // ||g||_Lip of the teacher map
    double L = 1.0;
    double alpha = 0.0;
    double omega_up = 0.0;  // upper bound on Omega(f*_mu)
    double L_phi = 1.0;
    double r_theta = 0.0;
    double B_phi = 0.0;
    double B_ell = 0.0;
    double Lt_Phi = 0.0;  // parameter-Lipschitz constant of the full network
    double Lt_phi = 0.0;  // parameter-Lipschitz constant of one factor
    double eps0 = 0.0;
    double eps1 = 0.0;
    double eps2 = 0.0;
    double g_radius = 0.0;
    double delta_C = 0.0;
    double B_C = 0.0;
    long R = 1;
    long dim_w = 0;
    double B_u = 0.0;  // per-factor left bound (B_V for attention)
    double B_v = 0.0;  // per-factor right bound (1 for attention)
    double C_mult = 1.0;  // C_UV or C_V
    double bernstein_c = 0.125;
    double teacher_fro = 0.0;
    double teacher_op = 0.0;
    Index tokens = 1;
    Index n_x = 0;
};

/// Upper bound on the induced regularizer at the population optimum,
/// Omega(f*_mu) <= theta-cost of the teacher's own factorization.
inline double omega_upper(const TeacherSpec& t) {
    check_teacher(t);
    switch (t.tag.kind) {
        case Family::MatrixSensing:
            return nuclear_norm(teacher_matrix(t));
        case Family::StructuredMatrixSensing: {
            double s = 0.0;
            for (Index j = 0; j < t.U.cols(); ++j)
                s += t.tag.gauge.value(t.U.col(j)) * t.V.col(j).norm();
            return s;
        }
        case Family::TwoLayerLinear:
        case Family::TwoLayerReLU:
            return 0.5 * (t.U.squaredNorm() + t.V.squaredNorm());
        case Family::MultiHeadAttention:
            return t.U.norm();
    }
    return 0.0;
}

/// eps1 = 16 gamma^2 sigma_X^2 max{1, (L/4)[1 + (||g||_Lip^2/gamma^2)(1 +
/// sigma_{Y|X}^2/sigma_X^2)]}; eps0 is the min variant of the same bracket.
inline double epsilon1_value(double gamma, double sigma_x, double L, double g_lip,
                             double sigma_y_given_x) {
    const double ratio = gamma > 0.0 ? (g_lip * g_lip) / (gamma * gamma) : 0.0;
    const double bracket =
        0.25 * L * (1.0 + ratio * (1.0 + (sigma_y_given_x * sigma_y_given_x) / (sigma_x * sigma_x)));
    return 16.0 * gamma * gamma * sigma_x * sigma_x * std::max(1.0, bracket);
}

inline double epsilon0_value(double gamma, double sigma_x, double L, double g_lip,
                             double sigma_y_given_x) {
    const double ratio = gamma > 0.0 ? (g_lip * g_lip) / (gamma * gamma) : 0.0;
    const double bracket =
        0.25 * L * (1.0 + ratio * (1.0 + (sigma_y_given_x * sigma_y_given_x) / (sigma_x * sigma_x)));
    return 16.0 * gamma * gamma * sigma_x * sigma_x * std::min(1.0, bracket);
}

/// Gaussian ball projection tail g e^{-g^2/2} * norm, valid for g >= 1.
inline double projection_tail(double g, double norm) {
    if (!(g >= 1.0)) throw ConstraintError("projection_tail needs g >= 1");
    return g * std::exp(-0.5 * g * g) * norm;
}

/// delta_C = 2 N exp(-c n_X (g-1)^2); vacuous (2N) at g = 1.
inline double delta_C(long N, Index n_x, double g, double c) {
    if (!(g >= 1.0)) throw ConstraintError("delta_C needs g >= 1");
    if (!(c > 0.0)) throw ConstraintError("delta_C needs c > 0");
    return 2.0 * static_cast<double>(N) *
           std::exp(-c * static_cast<double>(n_x) * (g - 1.0) * (g - 1.0));
}

/// Per-family closed form for B(C), the projection bias of the good event.
inline double b_of_C(Family family, double g, const ConstantsLedger& led) {
    if (!(g >= 1.0)) throw ConstraintError("b_of_C needs g >= 1");
    const double tail = g * std::exp(-0.5 * g * g);
    const double R = static_cast<double>(led.R);
    switch (family) {
        case Family::MatrixSensing:
        case Family::StructuredMatrixSensing: {
            const double base = led.teacher_fro + R * led.B_u * led.B_v;
            return 4.0 * tail * base * base;
        }
        case Family::TwoLayerLinear:
            return tail * (1.0 + led.gamma) * (led.teacher_op + led.gamma);
        case Family::TwoLayerReLU:
            return 4.0 * R * tail * led.gamma * (led.teacher_fro + led.gamma);
        case Family::MultiHeadAttention: {
            const double T = static_cast<double>(led.tokens);
            return 4.0 * R * std::sqrt(std::log(T) / std::pow(T, 5)) * g * std::exp(-g * g) *
                   led.gamma * (led.teacher_op + led.gamma);
        }
    }
    return 0.0;
}

/// Per-family default g-radius schedule (the proofs' choices, universal
/// constants set to 1), clamped to the g >= 1 regime.
inline double default_g_radius(Family family, long N, long R, double delta) {
    const double nn = static_cast<double>(N);
    const double rr = static_cast<double>(std::max<long>(R, 1));
    double g = 1.0;
    switch (family) {
        case Family::MatrixSensing:
        case Family::StructuredMatrixSensing:
            g = 1.0 + std::sqrt(std::log(std::sqrt(nn * std::pow(rr, 100.0))) +
                                std::log(1.0 / delta));
            break;
        case Family::TwoLayerLinear:
            g = 1.0 + std::sqrt(std::log(nn) + std::log(1.0 / delta));
            break;
        case Family::TwoLayerReLU:
            g = 1.0 + std::sqrt(std::log(nn * rr) + std::log(1.0 / delta));
            break;
        case Family::MultiHeadAttention:
            g = 1.0 + std::sqrt(std::log(nn) + std::log(1.0 / delta));
            break;
    }
    if (!(g >= 1.0) || !std::isfinite(g)) g = 1.0;
    return g;
}

/// Per-factor hypothesis-class bounds: ||u_j|| <= B_u, ||v_j|| <= B_v
/// (||V_j||_F <= B_u and B_v = 1 for attention) and the gamma multiplier
/// gamma = C * Omega_up.
struct HypothesisBounds {
    double B_u = 1.0;
    double B_v = 1.0;
    double C = 1.0;
};

/// Fill every ledger entry from the per-family closed forms.
inline ConstantsLedger master_constants(const FamilyTag& tag, const Dims& dims,
                                        const TeacherSpec& teacher, const HypothesisBounds& hyp,
                                        long R, double g, long N, double bernstein_c = 0.125,
                                        double alpha = 0.0) {
    check_teacher(teacher);
    if (R < 1) throw ConstraintError("width bound violated: R >= 1");
    if (!(hyp.C >= 1.0))
        throw ConstraintError("precondition violated: gamma >= Omega_up * L_phi needs C >= 1");
    if (!(hyp.B_u > 0.0) || !(hyp.B_v > 0.0))
        throw ConstraintError("hypothesis bounds violated: B_u, B_v > 0");
    if (!(g >= 1.0)) throw ConstraintError("good-event radius violated: g >= 1");

    ConstantsLedger led;
    led.family = tag.kind;
    led.alpha = alpha;
    led.L = 1.0;
    led.sigma_x = 1.0;
    led.sigma_y_given_x = teacher.sigma;
    led.R = R;
    led.B_u = hyp.B_u;
    led.B_v = tag.kind == Family::MultiHeadAttention ? 1.0 : hyp.B_v;
    led.C_mult = hyp.C;
    led.g_radius = g;
    led.bernstein_c = bernstein_c;
    led.tokens = dims.T;
    led.n_x = input_dim(tag, dims);
    led.dim_w = factor_dim(tag, dims);
    led.omega_up = omega_upper(teacher);
    led.gamma = hyp.C * led.omega_up;
    led.L_phi = 1.0;
    led.r_theta = tag.kind == Family::MultiHeadAttention ? std::sqrt(2.0) : 1.0 / std::sqrt(2.0);

    const Matrix tm = teacher_matrix(teacher);
    led.teacher_op = spectral_norm(tm);
    switch (tag.kind) {
        case Family::MatrixSensing:
        case Family::StructuredMatrixSensing:
            led.teacher_fro = tm.norm();
            led.g_lip = led.teacher_op;
            break;
        case Family::TwoLayerLinear:
            led.teacher_fro = tm.norm();
            led.g_lip = led.teacher_op;
            break;
        case Family::TwoLayerReLU:
            led.teacher_fro = teacher.U.norm() * teacher.V.norm();
            led.g_lip = spectral_norm(teacher.U) * spectral_norm(teacher.V);
            break;
        case Family::MultiHeadAttention:
            led.teacher_fro = teacher.U.norm();
            led.g_lip = teacher.U.norm();
            break;
    }

    led.eps0 = epsilon0_value(led.gamma, led.sigma_x, led.L, led.g_lip, led.sigma_y_given_x);
    led.eps1 = epsilon1_value(led.gamma, led.sigma_x, led.L, led.g_lip, led.sigma_y_given_x);

    const double rt = static_cast<double>(R);
    const double sqT = std::sqrt(static_cast<double>(dims.T));
    switch (tag.kind) {
        case Family::MatrixSensing:
        case Family::StructuredMatrixSensing:
            led.B_phi = g * led.B_u * led.B_v * rt;
            led.B_ell = g * (led.teacher_fro + led.B_u * led.B_v * rt);
            led.Lt_Phi = g * std::sqrt(led.B_u * led.B_u + led.B_v * led.B_v) * rt;
            break;
        case Family::TwoLayerLinear:
            led.B_phi = g * led.gamma;
            led.B_ell = g * (led.teacher_op + led.gamma);
            led.Lt_Phi = g * std::sqrt(led.B_u * led.B_u + led.B_v * led.B_v) * rt;
            break;
        case Family::TwoLayerReLU:
            led.B_phi = g * led.gamma;
            led.B_ell = 2.0 * g * led.gamma;
            led.Lt_Phi = g * std::sqrt(led.B_u * led.B_u + led.B_v * led.B_v) * rt;
            break;
        case Family::MultiHeadAttention:
            led.B_phi = g * rt * led.B_u / sqT;
            led.B_ell = g * (rt * led.B_u + led.teacher_fro) / sqT;
            led.Lt_Phi = g * rt * std::sqrt(led.B_u * led.B_u + 1.0) / sqT;
            break;
    }
    led.Lt_phi = led.Lt_Phi / rt;

    led.eps2 = 4.0 * led.Lt_Phi * led.B_phi *
               std::max({1.0, 2.0 * led.L + 2.0 * led.B_ell / led.B_phi,
                         8.0 * led.omega_up * led.B_ell * led.Lt_phi / (led.Lt_Phi * led.B_phi),
                         8.0 * led.L * led.omega_up});

    led.delta_C = delta_C(N, led.n_x, g, bernstein_c);
    led.B_C = b_of_C(tag.kind, g, led);

    if (!(led.eps1 >= led.eps0)) throw ConstraintError("ledger invariant violated: eps1 >= eps0");
    return led;
}

/// Theorem statistical-error term:
/// eps1 * sqrt((R dim(W) log(gamma eps2 r_theta / L_phi) log N + log(1/delta)) / N).
inline double statistical_error(const ConstantsLedger& led, long N, double delta) {
    if (N < 2) throw ConstraintError("statistical_error needs N >= 2");
    if (!(delta > 0.0 && delta <= 1.0)) throw ConstraintError("delta must lie in (0, 1]");
    const double arg = led.gamma * led.eps2 * led.r_theta / led.L_phi;
    if (!(arg > 1.0))
        throw ConstraintError("degenerate constants: log argument gamma*eps2*r_theta/L_phi <= 1");
    const double nn = static_cast<double>(N);
    const double inner = (static_cast<double>(led.R) * static_cast<double>(led.dim_w) *
                              std::log(arg) * std::log(nn) +
                          std::log(1.0 / delta)) /
                         nn;
    return (1.0 + led.alpha) * led.eps1 * std::sqrt(inner);
}

/// Optimization-error + statistical-error bound for one trained model.
struct BoundReport {
    Family family = Family::MatrixSensing;
    long N = 0;
    double delta = 0.05;
    ConstantsLedger ledger;
    double optimization_error = 0.0;  // raw (lambda/n_Y) Omega_up (polar - 1); may be <= 0
    double statistical_error = 0.0;
    double total = 0.0;  // positive part of the optimization error + statistical error
    Index n_y = 1;
    double polar_value = 0.0;
    double lambda = 0.0;
};

/// Build the report from a trainer-stationary model and its certificate. The
/// hypothesis-class bounds are measured from the model itself (the tightest
/// admissible choice); gamma's multiplier is clamped to the C >= 1 regime.
/// Reported "up to universal constants" (all hidden constants set to 1).
inline BoundReport bound_report(const Dataset& ds, const ParallelModel& model,
                                const PolarCertificate& cert, double delta,
                                double g_radius = -1.0, double bernstein_c = 0.125,
                                double alpha = 0.0) {
    const double stationarity = max_stationarity_residual(ds, model);
    if (stationarity > 1e-3)
        throw ArgumentError("bound_report precondition: model must be trainer-stationary "
                            "(max residual <= 1e-3)");

    const TeacherSpec& teacher = ds.meta.teacher;
    HypothesisBounds hyp;  // width 0 keeps the neutral unit-scale class
    if (model.width() >= 1) {
        hyp.B_u = 0.0;
        hyp.B_v = 0.0;
        for (const auto& f : model.factors) {
            hyp.B_u = std::max(hyp.B_u, f.left.norm());
            hyp.B_v = std::max(hyp.B_v, f.right.norm());
        }
        hyp.B_u = std::max(hyp.B_u, 1e-8);
        hyp.B_v = std::max(hyp.B_v, 1e-8);
        const double omega = omega_upper(teacher);
        hyp.C = std::max(1.0, omega > 0.0 ? lipschitz_upper_bound(model) / omega : 1.0);
    }

    const long N = ds.size();
    const long R = std::max(model.width(), 1);
    if (g_radius <= 0.0) g_radius = default_g_radius(model.tag.kind, N, R, delta);

    BoundReport rep;
    rep.family = model.tag.kind;
    rep.N = N;
    rep.delta = delta;
    rep.lambda = model.lambda;
    rep.polar_value = cert.value;
    rep.n_y = output_dim(model.tag, model.dims);
    rep.ledger = master_constants(model.tag, model.dims, teacher, hyp, R, g_radius, N,
                                  bernstein_c, alpha);
    rep.optimization_error = model.lambda / static_cast<double>(rep.n_y) * rep.ledger.omega_up *
                             (cert.value - 1.0);
    rep.statistical_error = statistical_error(rep.ledger, N, delta);
    rep.total = std::max(rep.optimization_error, 0.0) + rep.statistical_error;
    return rep;
}

// ---- variational nuclear norm -----------------------------------------------------

struct NuclearVariationalResult {
    double value = 0.0;
    bool converged = true;
    double fit_residual = 0.0;  // ||U V^T - M||_F relative to ||M||_F
    long sweeps = 0;
};

/// Value of the induced-regularizer program inf sum_j ||u_j|| ||v_j|| subject
/// to U V^T = M with width R, via alternating ridge least squares under an
/// increasing penalty. Converges to ||M||_* for R >= rank(M); the reported
/// value includes the residual penalty, so an infeasible restricted program
/// (R < rank) lands strictly above the nuclear norm and flags non-convergence.
inline NuclearVariationalResult nuclear_variational(const Matrix& M, int R, long iters = 2000,
                                                    std::uint64_t seed = 0x6e75636cull) {
    if (R < 1) throw ArgumentError("nuclear_variational needs R >= 1");
    NuclearVariationalResult out;
    if (M.norm() == 0.0) return out;

    std::mt19937_64 gen(seed);
    const double mscale = M.norm();
    Matrix U = std::sqrt(mscale / std::sqrt(static_cast<double>(R))) *
               gaussian(M.rows(), R, gen) / std::sqrt(static_cast<double>(M.rows()));
    Matrix V = std::sqrt(mscale / std::sqrt(static_cast<double>(R))) *
               gaussian(M.cols(), R, gen) / std::sqrt(static_cast<double>(M.cols()));

    const Matrix I = Matrix::Identity(R, R);
    double beta = 16.0 / mscale;
    const double beta_max = 1e12 / mscale;
    const long stages = 32;
    long sweeps = 0;
    for (long s = 0; s < stages && beta <= beta_max; ++s, beta *= 4.0) {
        for (long k = 0; k < iters; ++k) {
            ++sweeps;
            U = beta * M * V * (beta * V.transpose() * V + I).inverse();
            const Matrix Vnew =
                beta * M.transpose() * U * (beta * U.transpose() * U + I).inverse();
            const double move = (Vnew - V).norm() / std::max(1.0, V.norm());
            V = Vnew;
            if (move < 1e-13) break;
        }
        if ((U * V.transpose() - M).norm() <= 1e-10 * mscale && beta >= 1e9 / mscale) break;
    }
    out.sweeps = sweeps;
    const double resid = (U * V.transpose() - M).norm();
    out.fit_residual = resid / mscale;

    double value = 0.0;
    for (int j = 0; j < R; ++j) value += U.col(j).norm() * V.col(j).norm();
    out.value = value + 0.5 * beta * resid * resid;
    out.converged = out.fit_residual <= 1e-4;
    return out;
}

}  // namespace homognet
