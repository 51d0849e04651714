#pragma once

#include "homognet/common.hpp"

#include <cmath>

namespace homognet {

/// Covering query for the hypothesis class: per-factor radius and resolution,
/// ambient parameter dimension, width, and the Lipschitz ratio L_phi / gamma.
struct CoveringQuery {
    double r_theta = 1.0;
    double nu = 1.0;
    Index n = 1;
    Index R = 1;
    double lip_ratio = 1.0;  // L_phi / gamma

    void validate() const {
        if (!(r_theta > 0.0) || !(nu > 0.0) || n < 1 || R < 1 || !(lip_ratio > 0.0))
            throw ArgumentError("covering query fields must be positive");
    }
};

/// log N(B(r), ||.||_2, nu) <= n log(1 + 2r/nu). Log domain: raw covering
/// numbers overflow at realistic R*n.
inline double ball_covering_log(double r, double nu, Index n) {
    if (!(r > 0.0) || !(nu > 0.0) || n < 1)
        throw ArgumentError("ball covering needs r, nu > 0 and n >= 1");
    return static_cast<double>(n) * std::log1p(2.0 * r / nu);
}

/// log of the class bound (C_theta(L_phi nu / gamma))^R.
inline double class_covering_log(const CoveringQuery& q) {
    q.validate();
    return static_cast<double>(q.R) * ball_covering_log(q.r_theta, q.lip_ratio * q.nu, q.n);
}

}  // namespace homognet
