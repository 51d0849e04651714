#pragma once

#include "homognet/family.hpp"
#include "homognet/teacher.hpp"

#include <vector>

namespace homognet {

/// A parallel positively homogeneous network: width-many factors sharing one
/// family, plus the regularization weight of the training objective.
struct ParallelModel {
    FamilyTag tag;
    Dims dims;
    double lambda = 1e-3;
    std::vector<FactorParams> factors;

    int width() const { return static_cast<int>(factors.size()); }
};

inline void check_model(const ParallelModel& m) {
    check_tag(m.tag, m.dims);
    if (!(m.lambda > 0.0)) throw ArgumentError("lambda must be > 0");
    for (const auto& f : m.factors) check_factor_shape(m.tag, m.dims, f);
}

/// Sampling record kept with a dataset so bound calculators and sweeps can
/// reproduce it.
struct DataMeta {
    TeacherSpec teacher;
    double sigma_x = 1.0;
    std::uint64_t seed = 0;
};

struct Dataset {
    std::vector<Matrix> inputs;
    std::vector<Vector> targets;
    DataMeta meta;

    long size() const { return static_cast<long>(inputs.size()); }
};

inline void check_dataset(const Dataset& ds, const FamilyTag& tag, const Dims& dims) {
    if (ds.size() < 1) throw ArgumentError("dataset must hold at least one sample");
    if (ds.inputs.size() != ds.targets.size())
        throw DimensionError("inputs and targets differ in length");
    const Index ny = output_dim(tag, dims);
    for (std::size_t i = 0; i < ds.inputs.size(); ++i) {
        check_input_shape(tag, dims, ds.inputs[i]);
        if (ds.targets[i].size() != ny)
            throw DimensionError("target size does not match family output dim");
    }
}

// ---- model-core operations ----------------------------------------------------

/// Phi_r(X) = sum_j phi(W_j)(X); width 0 gives the zero output.
inline Vector predict(const ParallelModel& m, const Matrix& x) {
    check_input_shape(m.tag, m.dims, x);
    Vector out = Vector::Zero(output_dim(m.tag, m.dims));
    for (const auto& f : m.factors) out += predict_factor(m.tag, m.dims, f, x);
    return out;
}

/// Theta_r = sum_j theta(W_j) >= 0.
inline double theta_total(const ParallelModel& m) {
    double s = 0.0;
    for (const auto& f : m.factors) s += theta(m.tag, f);
    return s;
}

/// Empirical objective NC_{muN} = (1/2N) sum_i ||Y_i - Phi_r(X_i)||^2
/// + lambda * Theta_r. Squared loss throughout (L = 1).
inline double objective(const Dataset& ds, const ParallelModel& m) {
    check_model(m);
    check_dataset(ds, m.tag, m.dims);
    const long n = ds.size();
    double loss = 0.0;
    for (long i = 0; i < n; ++i) {
        const Vector r = ds.targets[i] - predict(m, ds.inputs[i]);
        const double term = 0.5 * r.squaredNorm();
        if (!std::isfinite(term)) throw NumericError("non-finite loss term", i);
        loss += term;
    }
    const double value = loss / static_cast<double>(n) + m.lambda * theta_total(m);
    if (!std::isfinite(value)) throw NumericError("non-finite objective");
    return value;
}

/// Per-sample residuals r_i = Y_i - Phi_r(X_i).
inline std::vector<Vector> residuals(const Dataset& ds, const ParallelModel& m) {
    check_dataset(ds, m.tag, m.dims);
    std::vector<Vector> out;
    out.reserve(ds.inputs.size());
    for (long i = 0; i < ds.size(); ++i)
        out.push_back(ds.targets[i] - predict(m, ds.inputs[i]));
    return out;
}

/// Gradient of the loss term alone, -(1/N) sum_i d<r_i, phi_j(X_i)>/dW_j.
inline std::vector<FactorParams> loss_gradient(const Dataset& ds, const ParallelModel& m) {
    check_model(m);
    check_dataset(ds, m.tag, m.dims);
    const long n = ds.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    std::vector<FactorParams> grad;
    grad.reserve(m.factors.size());
    for (const auto& f : m.factors)
        grad.push_back({Matrix::Zero(f.left.rows(), f.left.cols()),
                        Matrix::Zero(f.right.rows(), f.right.cols())});

    for (long i = 0; i < n; ++i) {
        const Vector r = ds.targets[i] - predict(m, ds.inputs[i]);
        for (std::size_t j = 0; j < m.factors.size(); ++j)
            add_adjoint(m.tag, m.dims, m.factors[j], ds.inputs[i], r, -inv_n, grad[j]);
    }
    return grad;
}

/// Gradient of the empirical objective, shaped like the factor blocks.
inline std::vector<FactorParams> gradient(const Dataset& ds, const ParallelModel& m) {
    std::vector<FactorParams> grad = loss_gradient(ds, m);
    for (std::size_t j = 0; j < m.factors.size(); ++j) {
        const FactorParams tg = theta_subgradient(m.tag, m.factors[j]);
        grad[j].left += m.lambda * tg.left;
        grad[j].right += m.lambda * tg.right;
        if (!grad[j].left.allFinite() || !grad[j].right.allFinite())
            throw NumericError("non-finite gradient block", static_cast<long>(j));
    }
    return grad;
}

inline double gradient_norm(const std::vector<FactorParams>& g) {
    double s = 0.0;
    for (const auto& b : g) s += b.left.squaredNorm() + b.right.squaredNorm();
    return std::sqrt(s);
}

/// Stationarity residuals rho_j = |<-(1/lambda) grad_Y ell, phi(W_j)>_{muN}
/// - theta(W_j)|; all zero at first-order points.
inline std::vector<double> stationarity_residuals(const Dataset& ds, const ParallelModel& m) {
    if (m.width() < 1) throw ArgumentError("stationarity residuals need width >= 1");
    check_model(m);
    check_dataset(ds, m.tag, m.dims);
    const long n = ds.size();
    const double scale = 1.0 / (static_cast<double>(n) * m.lambda);

    std::vector<double> inner(m.factors.size(), 0.0);
    for (long i = 0; i < n; ++i) {
        const Vector r = ds.targets[i] - predict(m, ds.inputs[i]);
        for (std::size_t j = 0; j < m.factors.size(); ++j)
            inner[j] += r.dot(predict_factor(m.tag, m.dims, m.factors[j], ds.inputs[i]));
    }
    std::vector<double> rho(m.factors.size());
    for (std::size_t j = 0; j < m.factors.size(); ++j)
        rho[j] = std::abs(scale * inner[j] - theta(m.tag, m.factors[j]));
    return rho;
}

inline double max_stationarity_residual(const Dataset& ds, const ParallelModel& m) {
    if (m.width() < 1) return 0.0;
    const auto rho = stationarity_residuals(ds, m);
    double mx = 0.0;
    for (double r : rho) mx = std::max(mx, r);
    return mx;
}

}  // namespace homognet
