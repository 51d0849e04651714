#pragma once

#include "homognet/model.hpp"

namespace homognet {

/// Random model with factors drawn i.i.d. Gaussian, each rescaled so its
/// theta equals init_scale. Deterministic given the seed.
inline ParallelModel make_model(const FamilyTag& tag, const Dims& dims, int width,
                                double init_scale, double lambda, std::uint64_t seed) {
    if (width < 0) throw ArgumentError("width must be >= 0");
    if (!(init_scale > 0.0)) throw ArgumentError("init scale must be > 0");
    ParallelModel m;
    m.tag = tag;
    m.dims = dims;
    m.lambda = lambda;
    std::mt19937_64 gen(seed);
    const double p = homogeneity_degree(tag);
    for (int j = 0; j < width; ++j) {
        FactorParams f = random_factor(tag, dims, gen);
        double th = theta(tag, f);
        while (!(th > 0.0)) {  // measure-zero redraw
            f = random_factor(tag, dims, gen);
            th = theta(tag, f);
        }
        m.factors.push_back(scale_homogeneous(tag, f, std::pow(init_scale / th, 1.0 / p)));
    }
    return m;
}

/// Family-specific upper bound on the Lipschitz constant of the input-output
/// map: ||U V^T||_2 for the sensing families, ||U||_2 ||V||_2 for the
/// two-layer nets, sum_j ||V_j||_2 for attention.
inline double lipschitz_upper_bound(const ParallelModel& m) {
    if (m.width() < 1) throw ArgumentError("lipschitz bound needs width >= 1");
    switch (m.tag.kind) {
        case Family::MatrixSensing:
        case Family::StructuredMatrixSensing: {
            Matrix prod = Matrix::Zero(m.dims.m, m.dims.n);
            for (const auto& f : m.factors)
                prod.noalias() += f.left.col(0) * f.right.col(0).transpose();
            return spectral_norm(prod);
        }
        case Family::TwoLayerLinear:
        case Family::TwoLayerReLU: {
            Matrix u(m.dims.m, m.width()), v(m.dims.n, m.width());
            for (int j = 0; j < m.width(); ++j) {
                u.col(j) = m.factors[j].left.col(0);
                v.col(j) = m.factors[j].right.col(0);
            }
            return spectral_norm(u) * spectral_norm(v);
        }
        case Family::MultiHeadAttention: {
            double s = 0.0;
            for (const auto& f : m.factors) s += spectral_norm(f.left);
            return s;
        }
    }
    return 0.0;
}

/// The teacher's own Lipschitz upper bound under the same convention.
inline double teacher_lipschitz_bound(const TeacherSpec& t) {
    switch (t.tag.kind) {
        case Family::MatrixSensing:
        case Family::StructuredMatrixSensing:
            return spectral_norm(teacher_matrix(t));
        case Family::TwoLayerLinear:
        case Family::TwoLayerReLU:
            return spectral_norm(t.U) * spectral_norm(t.V);
        case Family::MultiHeadAttention:
            return spectral_norm(t.U);
    }
    return 0.0;
}

}  // namespace homognet
