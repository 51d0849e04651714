#pragma once

#include "homognet/common.hpp"
#include "homognet/gauge.hpp"

#include <cmath>
#include <string>

namespace homognet {

enum class Family {
    MatrixSensing,
    StructuredMatrixSensing,
    TwoLayerLinear,
    TwoLayerReLU,
    MultiHeadAttention,
};

inline const char* family_name(Family f) {
    switch (f) {
        case Family::MatrixSensing: return "matrix-sensing";
        case Family::StructuredMatrixSensing: return "structured-matrix-sensing";
        case Family::TwoLayerLinear: return "two-layer-linear";
        case Family::TwoLayerReLU: return "two-layer-relu";
        case Family::MultiHeadAttention: return "multi-head-attention";
    }
    return "?";
}

inline Family family_from_name(const std::string& s) {
    if (s == "matrix-sensing") return Family::MatrixSensing;
    if (s == "structured-matrix-sensing") return Family::StructuredMatrixSensing;
    if (s == "two-layer-linear") return Family::TwoLayerLinear;
    if (s == "two-layer-relu") return Family::TwoLayerReLU;
    if (s == "multi-head-attention") return Family::MultiHeadAttention;
    throw ArgumentError("unknown family: " + s);
}

/// Family selector plus the parameters of the (phi, theta) pair itself:
/// softmax temperature for attention, gauge for structured sensing.
struct FamilyTag {
    Family kind = Family::MatrixSensing;
    double temperature = 1.0;
    GaugeSpec gauge = GaugeSpec::sparse_bounded(1.0);
};

/// Problem sizes. Inputs are m x n matrices (sensing), vectors in R^n
/// (two-layer nets), or n x T token matrices (attention); outputs live in
/// R^1 (sensing) or R^m.
struct Dims {
    Index m = 1;
    Index n = 1;
    Index T = 1;
};

inline void check_tag(const FamilyTag& tag, const Dims& d) {
    if (d.m < 1 || d.n < 1 || d.T < 1) throw ArgumentError("dims must be >= 1");
    if (tag.kind == Family::MultiHeadAttention &&
        !(tag.temperature > 0.0 && std::isfinite(tag.temperature)))
        throw ArgumentError("attention temperature must be finite and positive");
}

inline Index input_rows(const FamilyTag& tag, const Dims& d) {
    switch (tag.kind) {
        case Family::MatrixSensing:
        case Family::StructuredMatrixSensing: return d.m;
        case Family::TwoLayerLinear:
        case Family::TwoLayerReLU: return d.n;
        case Family::MultiHeadAttention: return d.n;
    }
    return 0;
}

inline Index input_cols(const FamilyTag& tag, const Dims& d) {
    switch (tag.kind) {
        case Family::MatrixSensing:
        case Family::StructuredMatrixSensing: return d.n;
        case Family::TwoLayerLinear:
        case Family::TwoLayerReLU: return 1;
        case Family::MultiHeadAttention: return d.T;
    }
    return 0;
}

/// Flattened input dimension n_X.
inline Index input_dim(const FamilyTag& tag, const Dims& d) {
    return input_rows(tag, d) * input_cols(tag, d);
}

/// Output dimension n_Y.
inline Index output_dim(const FamilyTag& tag, const Dims& d) {
    switch (tag.kind) {
        case Family::MatrixSensing:
        case Family::StructuredMatrixSensing: return 1;
        default: return d.m;
    }
}

/// Parameter count of one factor, dim(W).
inline Index factor_dim(const FamilyTag& tag, const Dims& d) {
    switch (tag.kind) {
        case Family::MultiHeadAttention: return d.m * d.n + d.n;
        default: return d.m + d.n;
    }
}

/// One factor: (u, v) column pair for the rank-one families, (V, z) for
/// attention. `left` is m x 1 (or m x n for attention), `right` is n x 1.
struct FactorParams {
    Matrix left;
    Matrix right;
};

inline void check_factor_shape(const FamilyTag& tag, const Dims& d, const FactorParams& f) {
    const bool attn = tag.kind == Family::MultiHeadAttention;
    const Index lr = d.m;
    const Index lc = attn ? d.n : 1;
    if (f.left.rows() != lr || f.left.cols() != lc || f.right.rows() != d.n || f.right.cols() != 1)
        throw DimensionError("factor blocks do not match family dims");
    if (!f.left.allFinite() || !f.right.allFinite())
        throw NumericError("non-finite factor entry");
}

inline void check_input_shape(const FamilyTag& tag, const Dims& d, const Matrix& x) {
    if (x.rows() != input_rows(tag, d) || x.cols() != input_cols(tag, d))
        throw DimensionError("input shape does not match family dims");
}

// ---- softmax ----------------------------------------------------------------

/// Softmax with temperature: sigma_t(w)_k = exp(t w_k) / sum_l exp(t w_l).
inline Vector softmax(const Vector& w, double t) {
    Vector e = (t * (w.array() - w.maxCoeff())).exp().matrix();
    return e / e.sum();
}

/// J^T c for the softmax Jacobian J = t (diag(s) - s s^T); J is symmetric.
inline Vector softmax_jvp(const Vector& s, double t, const Vector& c) {
    return t * (s.cwiseProduct(c) - s * s.dot(c));
}

// ---- factor map and regularizer ----------------------------------------------

/// phi(W)(X): the prediction of one factor.
inline Vector predict_factor(const FamilyTag& tag, const Dims& d, const FactorParams& f,
                             const Matrix& x) {
    switch (tag.kind) {
        case Family::MatrixSensing:
        case Family::StructuredMatrixSensing: {
            Vector out(1);
            out(0) = (f.left.col(0).transpose() * x * f.right.col(0)).value();
            return out;
        }
        case Family::TwoLayerLinear: {
            const double a = f.right.col(0).dot(x.col(0));
            return a * f.left.col(0);
        }
        case Family::TwoLayerReLU: {
            const double a = std::max(f.right.col(0).dot(x.col(0)), 0.0);
            return a * f.left.col(0);
        }
        case Family::MultiHeadAttention: {
            const Vector s = softmax(x.transpose() * f.right.col(0), tag.temperature);
            return f.left * (x * s);
        }
    }
    return Vector();
}

/// theta(W): the per-factor regularizer. Throws for an attention factor with
/// ||z||_2 > 1 (the indicator is +inf there).
inline double theta(const FamilyTag& tag, const FactorParams& f) {
    switch (tag.kind) {
        case Family::MatrixSensing:
            return f.left.norm() * f.right.norm();
        case Family::StructuredMatrixSensing:
            return tag.gauge.value(f.left.col(0)) * f.right.norm();
        case Family::TwoLayerLinear:
        case Family::TwoLayerReLU:
            return 0.5 * (f.left.squaredNorm() + f.right.squaredNorm());
        case Family::MultiHeadAttention: {
            if (f.right.norm() > 1.0 + 1e-9)
                throw InfeasibleRegularizerError("attention factor with ||z||_2 > 1");
            return f.left.norm();
        }
    }
    return 0.0;
}

/// A subgradient of theta; 0 is used on the non-differentiable rays
/// (u = 0 or v = 0 for the product families, V = 0 for attention).
inline FactorParams theta_subgradient(const FamilyTag& tag, const FactorParams& f) {
    FactorParams g{Matrix::Zero(f.left.rows(), f.left.cols()),
                   Matrix::Zero(f.right.rows(), f.right.cols())};
    switch (tag.kind) {
        case Family::MatrixSensing: {
            const double nu = f.left.norm(), nv = f.right.norm();
            if (nu > 0.0 && nv > 0.0) {
                g.left = (nv / nu) * f.left;
                g.right = (nu / nv) * f.right;
            }
            break;
        }
        case Family::StructuredMatrixSensing: {
            const double gu = tag.gauge.value(f.left.col(0));
            const double nv = f.right.norm();
            if (nv > 0.0) g.left.col(0) = nv * tag.gauge.subgradient(f.left.col(0));
            if (gu > 0.0 && nv > 0.0) g.right = (gu / nv) * f.right;
            break;
        }
        case Family::TwoLayerLinear:
        case Family::TwoLayerReLU:
            g.left = f.left;
            g.right = f.right;
            break;
        case Family::MultiHeadAttention: {
            const double nv = f.left.norm();
            if (nv > 0.0) g.left = f.left / nv;
            // z carries the indicator; handled by projection, no gradient
            break;
        }
    }
    return g;
}

/// Accumulate scale * d<w, phi(f)(x)>/df into g. ReLU subgradient at the kink
/// is 0.
inline void add_adjoint(const FamilyTag& tag, const Dims&, const FactorParams& f,
                        const Matrix& x, const Vector& w, double scale, FactorParams& g) {
    switch (tag.kind) {
        case Family::MatrixSensing:
        case Family::StructuredMatrixSensing: {
            const double c = scale * w(0);
            g.left.col(0).noalias() += c * (x * f.right.col(0));
            g.right.col(0).noalias() += c * (x.transpose() * f.left.col(0));
            break;
        }
        case Family::TwoLayerLinear: {
            const double a = f.right.col(0).dot(x.col(0));
            g.left.col(0).noalias() += (scale * a) * w;
            g.right.col(0).noalias() += (scale * f.left.col(0).dot(w)) * x.col(0);
            break;
        }
        case Family::TwoLayerReLU: {
            const double a = f.right.col(0).dot(x.col(0));
            if (a > 0.0) {
                g.left.col(0).noalias() += (scale * a) * w;
                g.right.col(0).noalias() += (scale * f.left.col(0).dot(w)) * x.col(0);
            }
            break;
        }
        case Family::MultiHeadAttention: {
            const Vector s = softmax(x.transpose() * f.right.col(0), tag.temperature);
            g.left.noalias() += scale * w * (x * s).transpose();
            const Vector c = x.transpose() * (f.left.transpose() * w);
            g.right.col(0).noalias() += scale * (x * softmax_jvp(s, tag.temperature, c));
            break;
        }
    }
}

/// Degree p of the balanced homogeneity (phi and theta scale as beta^p when
/// the homogeneous sub-block is scaled by beta >= 0).
inline double homogeneity_degree(const FamilyTag& tag) {
    return tag.kind == Family::MultiHeadAttention ? 1.0 : 2.0;
}

/// Scale the homogeneous sub-block by beta >= 0: both (u, v) for the rank-one
/// families, only V for attention.
inline FactorParams scale_homogeneous(const FamilyTag& tag, const FactorParams& f, double beta) {
    if (beta < 0.0) throw ArgumentError("homogeneous scaling needs beta >= 0");
    FactorParams out = f;
    out.left *= beta;
    if (tag.kind != Family::MultiHeadAttention) out.right *= beta;
    return out;
}

/// Unscaled random factor; attention z is drawn on the unit sphere.
inline FactorParams random_factor(const FamilyTag& tag, const Dims& d, std::mt19937_64& gen) {
    FactorParams f;
    if (tag.kind == Family::MultiHeadAttention) {
        f.left = gaussian(d.m, d.n, gen);
        f.right = gaussian(d.n, 1, gen);
        const double nz = f.right.norm();
        if (nz > 0.0) f.right /= nz;
    } else {
        f.left = gaussian(d.m, 1, gen);
        f.right = gaussian(d.n, 1, gen);
    }
    return f;
}

}  // namespace homognet
