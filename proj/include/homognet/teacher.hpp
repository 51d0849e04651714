#pragma once

#include "homognet/family.hpp"

namespace homognet {

/// Ground-truth data-generating model. For the rank-one families the teacher
/// map is U* V*^T (U* is m x r*, V* is n x r*); for attention it is
/// y = A* X b* with A* = U (m x n) and b* = V (T x 1), ||b*||_2 = 1.
struct TeacherSpec {
    FamilyTag tag;
    Dims dims;
    int rank = 1;
    Matrix U;
    Matrix V;
    double sigma = 0.0;  // noise scale, per-corollary variance convention
};

inline void check_teacher(const TeacherSpec& t) {
    check_tag(t.tag, t.dims);
    if (t.tag.kind == Family::MultiHeadAttention) {
        if (t.U.rows() != t.dims.m || t.U.cols() != t.dims.n || t.V.rows() != t.dims.T ||
            t.V.cols() != 1)
            throw DimensionError("attention teacher blocks do not match dims");
        if (std::abs(t.V.norm() - 1.0) > 1e-9)
            throw ArgumentError("attention teacher needs ||b*||_2 = 1");
    } else {
        if (t.U.rows() != t.dims.m || t.V.rows() != t.dims.n || t.U.cols() != t.V.cols() ||
            t.U.cols() != t.rank)
            throw DimensionError("teacher factor blocks do not match dims/rank");
    }
    if (!(t.sigma >= 0.0)) throw ArgumentError("teacher noise scale must be >= 0");
}

/// The teacher's linear map as a matrix: M* = U* V*^T, or A* for attention.
inline Matrix teacher_matrix(const TeacherSpec& t) {
    if (t.tag.kind == Family::MultiHeadAttention) return t.U;
    return t.U * t.V.transpose();
}

/// Clean (noiseless) teacher prediction.
inline Vector apply_teacher(const TeacherSpec& t, const Matrix& x) {
    switch (t.tag.kind) {
        case Family::MatrixSensing:
        case Family::StructuredMatrixSensing: {
            Vector out(1);
            out(0) = (t.U.transpose() * x * t.V).trace();
            return out;
        }
        case Family::TwoLayerLinear:
            return t.U * (t.V.transpose() * x.col(0));
        case Family::TwoLayerReLU:
            return t.U * (t.V.transpose() * x.col(0)).cwiseMax(0.0);
        case Family::MultiHeadAttention:
            return t.U * (x * t.V.col(0));
    }
    return Vector();
}

/// Random teacher with N(0,1) factor entries; the attention b* is drawn on the
/// unit sphere. Deterministic given the seed.
inline TeacherSpec make_teacher(const FamilyTag& tag, const Dims& dims, int rank, double sigma,
                                std::uint64_t seed) {
    if (rank < 1) throw ArgumentError("teacher rank must be >= 1");
    std::mt19937_64 gen(seed);
    TeacherSpec t;
    t.tag = tag;
    t.dims = dims;
    t.rank = rank;
    t.sigma = sigma;
    if (tag.kind == Family::MultiHeadAttention) {
        t.U = gaussian(dims.m, dims.n, gen);
        t.V = gaussian(dims.T, 1, gen);
        t.V /= t.V.norm();
    } else {
        t.U = gaussian(dims.m, rank, gen);
        t.V = gaussian(dims.n, rank, gen);
    }
    check_teacher(t);
    return t;
}

}  // namespace homognet
