#pragma once

#include "homognet/model.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace homognet {

namespace detail {

/// Process-wide cap on restart parallelism (CLI --threads). Restarts are
/// independent seeded computations reduced in index order, so the result is
/// identical for any cap.
inline int& thread_cap() {
    static int cap = 1;
    return cap;
}

template <class F>
inline void parallel_for(int n, F&& f) {
    const int tc = std::max(1, std::min(thread_cap(), n));
    if (tc <= 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(tc);
    for (int t = 0; t < tc; ++t)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) f(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace detail

enum class PolarMethod { Exact, Search, UpperBound };
enum class Verdict { CertifiedGlobal, HeuristicStationaryGlobal, NotOptimal, Indeterminate };

inline const char* polar_method_name(PolarMethod m) {
    switch (m) {
        case PolarMethod::Exact: return "exact";
        case PolarMethod::Search: return "search";
        case PolarMethod::UpperBound: return "upper-bound";
    }
    return "?";
}

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::CertifiedGlobal: return "certified-global";
        case Verdict::HeuristicStationaryGlobal: return "heuristic-stationary-global";
        case Verdict::NotOptimal: return "not-optimal";
        case Verdict::Indeterminate: return "indeterminate";
    }
    return "?";
}

constexpr double kDefaultPolarTolerance = 1e-3;

/// Estimate of the polar of the scaled negative loss gradient, with the
/// factor achieving (or best found for) the supremum.
struct PolarCertificate {
    double value = 0.0;
    PolarMethod method = PolarMethod::Search;
    FactorParams witness;
    Verdict verdict = Verdict::Indeterminate;
    double tolerance = kDefaultPolarTolerance;
};

/// Verdict rules: exact values certify, search values are lower bounds and
/// may only claim a heuristic verdict, any value above 1 + tau refutes
/// optimality, and everything else stays indeterminate.
inline Verdict certify(const PolarCertificate& cert, double tau) {
    if (cert.method == PolarMethod::Exact && cert.value <= 1.0 + tau)
        return Verdict::CertifiedGlobal;
    if (cert.method == PolarMethod::Search && cert.value <= 1.0 + tau)
        return Verdict::HeuristicStationaryGlobal;
    if (cert.value > 1.0 + tau) return Verdict::NotOptimal;
    return Verdict::Indeterminate;
}

// ---- aggregates ----------------------------------------------------------------

/// (1/N) sum_i r_i X_i for the scalar-output sensing families.
inline Matrix sensing_aggregate(const Dataset& ds, const ParallelModel& m) {
    Matrix a = Matrix::Zero(m.dims.m, m.dims.n);
    const auto res = residuals(ds, m);
    for (long i = 0; i < ds.size(); ++i) a += res[i](0) * ds.inputs[i];
    return a / static_cast<double>(ds.size());
}

/// (1/N) sum_i r_i x_i^T for the linear two-layer family.
inline Matrix linear_aggregate(const Dataset& ds, const ParallelModel& m) {
    Matrix a = Matrix::Zero(m.dims.m, m.dims.n);
    const auto res = residuals(ds, m);
    for (long i = 0; i < ds.size(); ++i)
        a.noalias() += res[i] * ds.inputs[i].col(0).transpose();
    return a / static_cast<double>(ds.size());
}

// ---- top singular pair -----------------------------------------------------------

struct TopPair {
    double sigma = 0.0;
    Vector u, v;
    bool converged = true;
    long iterations = 0;
};

/// Deflation-free alternating power iteration for the top singular pair.
/// Residual-based stopping; random seeded start.
inline TopPair power_top_pair(const Matrix& a, double tol = 1e-10, long max_iter = 10000,
                              std::uint64_t seed = 0x706f6c6172ull) {
    TopPair out;
    out.u = Vector::Zero(a.rows());
    out.v = Vector::Zero(a.cols());
    if (a.rows() > 0) out.u(0) = 1.0;
    if (a.cols() > 0) out.v(0) = 1.0;
    if (a.size() == 0 || a.norm() == 0.0) return out;

    std::mt19937_64 gen(seed);
    Vector v = gaussian_vector(a.cols(), gen);
    v /= v.norm();
    Vector u = Vector::Zero(a.rows());
    double sigma = 0.0;
    out.converged = false;
    for (long k = 0; k < max_iter; ++k) {
        Vector au = a * v;
        const double nu = au.norm();
        if (nu == 0.0) {  // v landed in the null space; nudge
            v = gaussian_vector(a.cols(), gen);
            v /= v.norm();
            continue;
        }
        u = au / nu;
        Vector av = a.transpose() * u;
        sigma = av.norm();
        v = av / sigma;
        out.iterations = k + 1;
        const double r1 = (a * v - sigma * u).norm();
        const double r2 = (a.transpose() * u - sigma * v).norm();
        if (std::max(r1, r2) <= tol * std::max(sigma, 1e-300)) {
            out.converged = true;
            break;
        }
    }
    out.sigma = sigma;
    out.u = u;
    out.v = v;
    return out;
}

// ---- per-family polar evaluators ---------------------------------------------------

/// Exact polar for matrix sensing and the linear two-layer net:
/// ||aggregate||_2 / lambda, witness = top singular pair scaled to theta = 1.
inline PolarCertificate polar_exact_sensing(const Dataset& ds, const ParallelModel& m,
                                            double lambda,
                                            double tau = kDefaultPolarTolerance) {
    if (m.tag.kind != Family::MatrixSensing && m.tag.kind != Family::TwoLayerLinear)
        throw ArgumentError("polar_exact_sensing applies to matrix sensing and linear nets");
    if (!(lambda > 0.0)) throw ArgumentError("lambda must be > 0");

    const Matrix a = m.tag.kind == Family::MatrixSensing ? sensing_aggregate(ds, m)
                                                         : linear_aggregate(ds, m);
    const TopPair top = power_top_pair(a);

    PolarCertificate cert;
    cert.method = PolarMethod::Exact;
    cert.tolerance = tau;
    cert.value = top.sigma / lambda;
    cert.witness.left = top.u;
    cert.witness.right = top.v;  // unit pair: theta = 1 for both families
    cert.verdict = top.converged ? certify(cert, tau) : Verdict::Indeterminate;
    return cert;
}

/// Projected ascent of f(u) = ||A^T u||_2 over the gauge ball, feasibility kept
/// by radial rescaling. Returns the best found value (a lower bound).
inline PolarCertificate structured_polar_search(const Matrix& a, const GaugeSpec& gauge,
                                                double lambda, int restarts, std::uint64_t seed,
                                                double tau) {
    PolarCertificate best;
    best.method = PolarMethod::Search;
    best.tolerance = tau;
    best.value = 0.0;
    best.witness.left = Vector::Zero(a.rows());
    best.witness.right = Vector::Zero(a.cols());
    if (best.witness.left.size() > 0) best.witness.left(0) = 1.0;
    if (best.witness.right.size() > 0) best.witness.right(0) = 1.0;
    if (a.norm() == 0.0) {
        best.verdict = certify(best, tau);
        return best;
    }

    std::vector<Vector> found(restarts, Vector::Zero(a.rows()));
    detail::parallel_for(restarts, [&](int r) {
        std::mt19937_64 gen(derive_seed(seed, static_cast<std::uint64_t>(r)));
        Vector u;
        if (r == 0) {
            u = power_top_pair(a).u;  // warm start from the unstructured optimum
        } else {
            u = gaussian_vector(a.rows(), gen);
        }
        double gu = gauge.value(u);
        if (gu > 0.0) u /= gu;
        double fu = (a.transpose() * u).norm();
        double step = 0.5;
        for (int it = 0; it < 300 && step > 1e-12; ++it) {
            const Vector av = a.transpose() * u;
            const double nav = av.norm();
            if (nav == 0.0) break;
            const Vector grad = a * (av / nav);
            Vector cand = u + step * grad / std::max(grad.norm(), 1e-300);
            const double gc = gauge.value(cand);
            if (gc > 1.0) cand /= gc;
            const double fc = (a.transpose() * cand).norm();
            if (fc > fu) {
                u = cand;
                fu = fc;
                step *= 1.25;
            } else {
                step *= 0.5;
            }
        }
        found[r] = u;
    });
    for (const Vector& u : found) {  // index-ordered reduction: deterministic
        const double gu = gauge.value(u);
        if (!(gu > 0.0)) continue;
        const Vector uu = u / gu;
        const double val = (a.transpose() * uu).norm() / lambda;
        if (val > best.value) {
            Vector vv = a.transpose() * uu;
            const double nv = vv.norm();
            if (nv > 0.0) vv /= nv;
            best.value = val;
            best.witness.left = uu;   // gauge(u) = 1
            best.witness.right = vv;  // ||v|| = 1, so theta = 1
        }
    }
    best.verdict = certify(best, tau);
    return best;
}

struct StructuredPolar {
    PolarCertificate upper;   // K2 * ||aggregate||_2 / lambda (conservative)
    PolarCertificate search;  // projected-ascent lower bound
};

inline StructuredPolar polar_structured(const Dataset& ds, const ParallelModel& m, double lambda,
                                        const GaugeSpec& gauge, int restarts = 16,
                                        std::uint64_t seed = 0x736d73ull,
                                        double tau = kDefaultPolarTolerance) {
    if (m.tag.kind != Family::StructuredMatrixSensing)
        throw ArgumentError("polar_structured applies to structured matrix sensing");
    if (!(lambda > 0.0)) throw ArgumentError("lambda must be > 0");
    const Matrix a = sensing_aggregate(ds, m);

    StructuredPolar out;
    out.search = structured_polar_search(a, gauge, lambda, restarts, seed, tau);
    out.upper.method = PolarMethod::UpperBound;
    out.upper.tolerance = tau;
    out.upper.value = gauge.k2(m.dims.m) * power_top_pair(a).sigma / lambda;
    out.upper.witness = out.search.witness;
    out.upper.verdict = certify(out.upper, tau);
    return out;
}

/// Multi-start projected ascent over the unit sphere of
/// h(v) = ||sum_i r_i [v^T x_i]_+||_2 / (N lambda); witness u* is the
/// normalized weighted residual sum.
inline PolarCertificate polar_search_relu(const Dataset& ds, const ParallelModel& m,
                                          double lambda, int restarts = 32,
                                          std::uint64_t seed = 0x72656c75ull,
                                          double tau = kDefaultPolarTolerance) {
    if (m.tag.kind != Family::TwoLayerReLU)
        throw ArgumentError("polar_search_relu applies to two-layer ReLU nets");
    if (restarts < 1) throw ArgumentError("restarts must be >= 1");
    if (!(lambda > 0.0)) throw ArgumentError("lambda must be > 0");

    const auto res = residuals(ds, m);
    const long n = ds.size();
    const double scale = 1.0 / (static_cast<double>(n) * lambda);

    auto weighted_sum = [&](const Vector& v) {
        Vector w = Vector::Zero(m.dims.m);
        for (long i = 0; i < n; ++i) {
            const double a = v.dot(ds.inputs[i].col(0));
            if (a > 0.0) w += a * res[i];
        }
        return w;
    };

    PolarCertificate best;
    best.method = PolarMethod::Search;
    best.tolerance = tau;
    best.witness.left = Vector::Zero(m.dims.m);
    best.witness.right = Vector::Zero(m.dims.n);
    best.witness.left(0) = 1.0;
    best.witness.right(0) = 1.0;

    // data-driven starts first, then seeded Gaussian restarts
    std::vector<Vector> starts;
    starts.push_back(power_top_pair(linear_aggregate(ds, m)).v);
    for (long i = 0; i < std::min<long>(n, 4); ++i) {
        const Vector x = ds.inputs[i].col(0);
        if (x.norm() > 0.0) starts.push_back(x / x.norm());
    }
    for (int r = static_cast<int>(starts.size()); r < restarts; ++r) {
        std::mt19937_64 gen(derive_seed(seed, static_cast<std::uint64_t>(r)));
        Vector v = gaussian_vector(m.dims.n, gen);
        starts.push_back(v / v.norm());
    }

    std::vector<Vector> found(starts.size(), Vector::Zero(m.dims.n));
    detail::parallel_for(static_cast<int>(starts.size()), [&](int r) {
        Vector v = starts[r];
        double fv = weighted_sum(v).norm();
        double step = 0.5;
        for (int it = 0; it < 300 && step > 1e-12; ++it) {
            const Vector w = weighted_sum(v);
            const double nw = w.norm();
            if (nw == 0.0) break;
            const Vector what = w / nw;
            Vector grad = Vector::Zero(m.dims.n);
            for (long i = 0; i < n; ++i) {
                const double a = v.dot(ds.inputs[i].col(0));
                if (a > 0.0) grad += what.dot(res[i]) * ds.inputs[i].col(0);
            }
            const double ng = grad.norm();
            if (ng == 0.0) break;
            Vector cand = v + step * grad / ng;
            cand /= cand.norm();
            const double fc = weighted_sum(cand).norm();
            if (fc > fv) {
                v = cand;
                fv = fc;
                step *= 1.25;
            } else {
                step *= 0.5;
            }
        }
        found[r] = v;
    });
    for (const Vector& v : found) {
        const Vector w = weighted_sum(v);
        const double fv = w.norm();
        if (fv * scale > best.value) {
            best.value = fv * scale;
            best.witness.left = w / fv;  // ||u|| = ||v|| = 1: theta = 1
            best.witness.right = v;
        }
    }
    best.verdict = certify(best, tau);
    return best;
}

/// Ascent over the z unit ball of the closed-form inner value
/// q(z) = ||sum_i r_i (X_i sigma_t(X_i^T z))^T||_F / (N lambda).
inline PolarCertificate polar_search_attention(const Dataset& ds, const ParallelModel& m,
                                               double lambda, int restarts = 32,
                                               std::uint64_t seed = 0x6d686174ull,
                                               double tau = kDefaultPolarTolerance) {
    if (m.tag.kind != Family::MultiHeadAttention)
        throw ArgumentError("polar_search_attention applies to attention");
    if (restarts < 1) throw ArgumentError("restarts must be >= 1");
    if (!(lambda > 0.0)) throw ArgumentError("lambda must be > 0");

    const auto res = residuals(ds, m);
    const long n = ds.size();
    const double t = m.tag.temperature;
    const double scale = 1.0 / (static_cast<double>(n) * lambda);

    auto inner_matrix = [&](const Vector& z) {
        Matrix w = Matrix::Zero(m.dims.m, m.dims.n);
        for (long i = 0; i < n; ++i) {
            const Vector s = softmax(ds.inputs[i].transpose() * z, t);
            w.noalias() += res[i] * (ds.inputs[i] * s).transpose();
        }
        return w;
    };

    PolarCertificate best;
    best.method = PolarMethod::Search;
    best.tolerance = tau;
    best.witness.left = Matrix::Zero(m.dims.m, m.dims.n);
    best.witness.right = Vector::Zero(m.dims.n);
    best.witness.left(0, 0) = 1.0;

    std::vector<Vector> found(restarts, Vector::Zero(m.dims.n));
    detail::parallel_for(restarts, [&](int r) {
        std::mt19937_64 gen(derive_seed(seed, static_cast<std::uint64_t>(r)));
        Vector z;
        if (r == 0) {
            z = Vector::Zero(m.dims.n);  // uniform-weights start
        } else {
            z = gaussian_vector(m.dims.n, gen);
            z /= std::max(1.0, z.norm());
        }
        Matrix w = inner_matrix(z);
        double fz = w.norm();
        double step = 0.5;
        for (int it = 0; it < 200 && step > 1e-12; ++it) {
            const double nw = w.norm();
            if (nw == 0.0) break;
            const Matrix what = w / nw;
            Vector grad = Vector::Zero(m.dims.n);
            for (long i = 0; i < n; ++i) {
                const Vector s = softmax(ds.inputs[i].transpose() * z, t);
                const Vector c = ds.inputs[i].transpose() * (what.transpose() * res[i]);
                grad += ds.inputs[i] * softmax_jvp(s, t, c);
            }
            const double ng = grad.norm();
            if (ng == 0.0) break;
            Vector cand = z + step * grad / ng;
            cand /= std::max(1.0, cand.norm());
            const Matrix wc = inner_matrix(cand);
            if (wc.norm() > fz) {
                z = cand;
                w = wc;
                fz = w.norm();
                step *= 1.25;
            } else {
                step *= 0.5;
            }
        }
        found[r] = z;
    });
    for (const Vector& z : found) {
        const Matrix w = inner_matrix(z);
        const double fz = w.norm();
        if (fz * scale > best.value) {
            best.value = fz * scale;
            best.witness.left = w / std::max(fz, 1e-300);  // ||V||_F = 1: theta = 1
            best.witness.right = z;
        }
    }
    best.verdict = certify(best, tau);
    return best;
}

/// Cauchy-Schwarz upper bound (1/(N lambda)) sum_i ||r_i||_2 ||x_i||_2, with the
/// spectral norm of X_i for attention.
inline double polar_upper_bound(const Dataset& ds, const ParallelModel& m, double lambda) {
    if (m.tag.kind == Family::MatrixSensing || m.tag.kind == Family::StructuredMatrixSensing)
        throw ArgumentError("polar_upper_bound applies to the vector-output families");
    if (!(lambda > 0.0)) throw ArgumentError("lambda must be > 0");
    const auto res = residuals(ds, m);
    double s = 0.0;
    for (long i = 0; i < ds.size(); ++i) {
        const double xn = m.tag.kind == Family::MultiHeadAttention
                              ? spectral_norm(ds.inputs[i])
                              : ds.inputs[i].col(0).norm();
        s += res[i].norm() * xn;
    }
    return s / (static_cast<double>(ds.size()) * lambda);
}

/// Family dispatch used by the meta-trainer. For structured sensing the
/// conservative upper bound drives the stopping rule.
inline PolarCertificate compute_polar(const Dataset& ds, const ParallelModel& m,
                                      double tau = kDefaultPolarTolerance, int restarts = 32,
                                      std::uint64_t seed = 0x706c72ull) {
    switch (m.tag.kind) {
        case Family::MatrixSensing:
        case Family::TwoLayerLinear:
            return polar_exact_sensing(ds, m, m.lambda, tau);
        case Family::StructuredMatrixSensing: {
            StructuredPolar sp = polar_structured(ds, m, m.lambda, m.tag.gauge, restarts, seed, tau);
            PolarCertificate cert = sp.upper;
            cert.witness = sp.search.witness;
            return cert;
        }
        case Family::TwoLayerReLU:
            return polar_search_relu(ds, m, m.lambda, restarts, seed, tau);
        case Family::MultiHeadAttention:
            return polar_search_attention(ds, m, m.lambda, restarts, seed, tau);
    }
    throw ArgumentError("unknown family");
}

}  // namespace homognet
