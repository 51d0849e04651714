#pragma once

#include "homognet/common.hpp"

#include <cmath>
#include <functional>
#include <utility>

namespace homognet {

/// Gauge (Minkowski functional) of an atomic set; regularizes the left factor
/// of structured matrix sensing. Positively homogeneous with gauge(0) = 0.
///
/// Two stock gauges are provided; anything else plugs in through the three
/// callables.
struct GaugeSpec {
    std::string name = "l2";
    double s = 1.0;  // l1 budget of the sparse_bounded gauge

    std::function<double(const Vector&)> value_fn;
    std::function<double(Index)> k2_fn;  // K2 = sup_{||u||_2 <= 1} gauge(u)
    std::function<Vector(const Vector&)> subgrad_fn;

    double value(const Vector& u) const { return value_fn(u); }
    double k2(Index n) const { return k2_fn(n); }
    Vector subgradient(const Vector& u) const { return subgrad_fn(u); }

    /// Plain l2 norm: the degenerate gauge with K2 = 1. The structured polar
    /// then coincides with the unstructured one.
    static GaugeSpec l2() {
        GaugeSpec g;
        g.name = "l2";
        g.s = 0.0;
        g.value_fn = [](const Vector& u) { return u.norm(); };
        g.k2_fn = [](Index) { return 1.0; };
        g.subgrad_fn = [](const Vector& u) -> Vector {
            const double n = u.norm();
            if (n == 0.0) return Vector::Zero(u.size());
            return u / n;
        };
        return g;
    }

    /// gauge(u) = max(||u||_2, ||u||_1 / s): atoms are the intersection of the
    /// l2 unit ball with s times the l1 unit ball (low-rank + sparse columns).
    /// K2 = max(1, sqrt(n)/s).
    static GaugeSpec sparse_bounded(double s) {
        if (!(s > 0.0)) throw ArgumentError("sparse_bounded gauge needs s > 0");
        GaugeSpec g;
        g.name = "sparse_bounded";
        g.s = s;
        g.value_fn = [s](const Vector& u) {
            return std::max(u.norm(), u.lpNorm<1>() / s);
        };
        g.k2_fn = [s](Index n) {
            return std::max(1.0, std::sqrt(static_cast<double>(n)) / s);
        };
        g.subgrad_fn = [s](const Vector& u) -> Vector {
            const double n2 = u.norm();
            if (n2 == 0.0) return Vector::Zero(u.size());
            if (n2 >= u.lpNorm<1>() / s) return u / n2;
            // l1 branch; sign(0) taken as 0
            Vector out(u.size());
            for (Index i = 0; i < u.size(); ++i)
                out(i) = (u(i) > 0.0 ? 1.0 : (u(i) < 0.0 ? -1.0 : 0.0)) / s;
            return out;
        };
        return g;
    }
};

}  // namespace homognet
