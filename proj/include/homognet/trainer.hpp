#pragma once

#include "homognet/polar.hpp"
#include "homognet/zoo.hpp"

#include <utility>

namespace homognet {

struct TrainOptions {
    long max_iterations = 200000;
    double grad_tolerance = 1e-6;
    double initial_step = 1.0;
    double backtrack = 0.5;
    double armijo_c = 1e-4;
    int max_width = 8;
    double tau_polar = kDefaultPolarTolerance;
    double growth_scale = 1e-4;  // theta of a newborn factor
    double init_scale = 1e-4;    // theta of the width-1 start
    int polar_restarts = 32;
    long trace_every = 25;
    // Stop when a full window of iterations gains less than 1e-8 relative
    // objective progress; 0 disables. Subgradient oscillation at ReLU kinks
    // can park the first-order residual above tolerance while the objective
    // is done to machine precision.
    long stall_window = 2000;

    void validate() const {
        if (max_iterations < 1 || max_width < 1) throw ArgumentError("bad iteration/width caps");
        if (!(grad_tolerance > 0.0) || !(initial_step > 0.0) || !(tau_polar > 0.0) ||
            !(growth_scale > 0.0) || !(init_scale > 0.0))
            throw ArgumentError("tolerances and scales must be > 0");
        if (!(backtrack > 0.0 && backtrack < 1.0) || !(armijo_c > 0.0 && armijo_c < 1.0))
            throw ArgumentError("backtracking parameters must lie in (0, 1)");
    }
};

struct TraceEntry {
    long iteration = 0;
    double objective = 0.0;
    double grad_norm = 0.0;
    double max_residual = 0.0;
};

struct WidthEvent {
    long iteration = 0;
    int width = 0;
    double polar = 0.0;
};

struct TrainTrace {
    std::vector<TraceEntry> iterates;
    std::vector<WidthEvent> width_events;
    bool hit_iteration_cap = false;
    bool hit_width_cap = false;
    bool hit_objective_floor = false;  // stall_window fired before grad_tolerance
};

/// Line search could not find decrease after 60 halvings.
struct StalledDescentError : std::runtime_error {
    TrainTrace trace;
    StalledDescentError(const std::string& msg, TrainTrace t)
        : std::runtime_error(msg), trace(std::move(t)) {}
};

namespace detail {

/// Keep attention z-blocks inside the unit ball; identity elsewhere.
inline void project_feasible(ParallelModel& m) {
    if (m.tag.kind != Family::MultiHeadAttention) return;
    for (auto& f : m.factors) {
        const double nz = f.right.norm();
        if (nz > 1.0) f.right /= nz;
    }
}

/// One candidate step. Smooth families take a plain gradient step on the full
/// objective gradient. Attention takes a proximal step: gradient of the loss,
/// then block soft-thresholding of V (prox of step*lambda*||.||_F, which the
/// nonsmooth theta demands) and projection of z.
inline ParallelModel stepped(const ParallelModel& m, const std::vector<FactorParams>& g,
                             double step) {
    ParallelModel out = m;
    const bool attention = m.tag.kind == Family::MultiHeadAttention;
    for (std::size_t j = 0; j < out.factors.size(); ++j) {
        out.factors[j].left -= step * g[j].left;
        out.factors[j].right -= step * g[j].right;
        if (attention) {
            const double nv = out.factors[j].left.norm();
            const double shrink = nv > 0.0 ? std::max(0.0, 1.0 - step * m.lambda / nv) : 0.0;
            out.factors[j].left *= shrink;
        }
    }
    project_feasible(out);
    return out;
}

inline double displacement_sq(const ParallelModel& a, const ParallelModel& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.factors.size(); ++j) {
        s += (a.factors[j].left - b.factors[j].left).squaredNorm();
        s += (a.factors[j].right - b.factors[j].right).squaredNorm();
    }
    return s;
}

/// The gradient driving the step: full objective gradient for the smooth
/// families, loss-only for attention (theta enters through the prox).
inline std::vector<FactorParams> step_gradient(const Dataset& ds, const ParallelModel& m) {
    return m.tag.kind == Family::MultiHeadAttention ? loss_gradient(ds, m) : gradient(ds, m);
}

/// First-order residual used as the stopping rule: the gradient norm on the
/// smooth families, the unit-step gradient-mapping norm for attention.
inline double first_order_residual(const Dataset& ds, const ParallelModel& m,
                                   const std::vector<FactorParams>& g) {
    if (m.tag.kind != Family::MultiHeadAttention) return gradient_norm(g);
    const ParallelModel mapped = stepped(m, g, 1.0);
    (void)ds;
    return std::sqrt(displacement_sq(mapped, m));
}

}  // namespace detail

/// Gradient descent with Armijo backtracking (proximal/projected steps where
/// the family's theta demands them). Objective is non-increasing along the
/// trace up to an ulp-level slack; stops at grad_tolerance or the iteration
/// cap (flagged).
inline std::pair<ParallelModel, TrainTrace> descend(const Dataset& ds, ParallelModel model,
                                                    const TrainOptions& opts,
                                                    long iteration_offset = 0) {
    opts.validate();
    if (model.width() < 1) throw ArgumentError("descend needs width >= 1");
    detail::project_feasible(model);

    TrainTrace trace;
    double obj = objective(ds, model);
    double step = opts.initial_step;

    auto record = [&](long it, double gn) {
        trace.iterates.push_back(
            {iteration_offset + it, obj, gn, max_stationarity_residual(ds, model)});
    };

    std::vector<FactorParams> grad = detail::step_gradient(ds, model);
    double gn = detail::first_order_residual(ds, model, grad);
    record(0, gn);

    double window_obj = obj;
    long window_start = 0;
    long it = 0;
    while (gn > opts.grad_tolerance) {
        if (it >= opts.max_iterations) {
            trace.hit_iteration_cap = true;
            break;
        }
        if (opts.stall_window > 0 && it - window_start >= opts.stall_window) {
            if (window_obj - obj <= 1e-8 * (1.0 + std::abs(obj))) {
                trace.hit_objective_floor = true;
                break;
            }
            window_obj = obj;
            window_start = it;
        }
        ++it;

        // sufficient decrease up to a few ulps of the objective: improvements
        // below double precision count as converged progress, not failure
        const double slack = 4e-16 * (1.0 + std::abs(obj));
        bool accepted = false;
        bool pinned = false;
        for (int h = 0; h < 60; ++h) {
            ParallelModel cand = detail::stepped(model, grad, step);
            const double dist_sq = detail::displacement_sq(cand, model);
            if (dist_sq == 0.0) {  // projection/prox absorbed the whole step
                pinned = true;
                break;
            }
            const double cand_obj = objective(ds, cand);
            if (cand_obj <= obj - (opts.armijo_c / step) * dist_sq + slack) {
                model = std::move(cand);
                obj = cand_obj;
                step *= 2.0;
                accepted = true;
                break;
            }
            step *= opts.backtrack;
        }
        if (pinned) break;  // first-order point of the constrained problem
        if (!accepted) {
            record(it, gn);
            throw StalledDescentError("line search stalled after 60 halvings", trace);
        }

        grad = detail::step_gradient(ds, model);
        gn = detail::first_order_residual(ds, model, grad);
        if (it % opts.trace_every == 0 || gn <= opts.grad_tolerance) record(it, gn);
    }
    if (trace.iterates.empty() || trace.iterates.back().iteration != iteration_offset + it)
        record(it, gn);
    return {std::move(model), std::move(trace)};
}

/// Append the witness rescaled so its theta equals `scale`; existing factors
/// are untouched.
inline ParallelModel grow_width(const ParallelModel& model, const FactorParams& witness,
                                double scale) {
    if (scale < 0.0) throw ArgumentError("growth scale must be >= 0");
    check_factor_shape(model.tag, model.dims, witness);
    const double th = theta(model.tag, witness);
    if (th > 1.0 + 1e-9) throw ArgumentError("witness infeasible: theta > 1");

    ParallelModel out = model;
    if (scale == 0.0) {
        out.factors.push_back(scale_homogeneous(model.tag, witness, 0.0));
        return out;
    }
    if (!(th > 0.0)) throw ArgumentError("cannot rescale a theta-zero witness to positive scale");
    const double beta = std::pow(scale / th, 1.0 / homogeneity_degree(model.tag));
    out.factors.push_back(scale_homogeneous(model.tag, witness, beta));
    return out;
}

struct MetaTrainResult {
    ParallelModel model;
    PolarCertificate certificate;
    TrainTrace trace;
};

/// Width-growing meta-algorithm: descend to a stationary point, evaluate the
/// polar, stop once it drops below 1 + tau, otherwise append the polar
/// witness at small scale and repeat. Hard stop at max_width (flagged).
inline MetaTrainResult meta_train(const Dataset& ds, const FamilyTag& tag, const Dims& dims,
                                  double lambda, const TrainOptions& opts, std::uint64_t seed) {
    opts.validate();
    if (!(lambda > 0.0)) throw ArgumentError("lambda must be > 0");

    MetaTrainResult out;
    out.model = make_model(tag, dims, 1, opts.init_scale, lambda, seed);
    long iter_base = 0;
    while (true) {
        auto [trained, t] = descend(ds, out.model, opts, iter_base);
        out.model = std::move(trained);
        out.trace.hit_iteration_cap |= t.hit_iteration_cap;
        for (auto& e : t.iterates) out.trace.iterates.push_back(e);
        const long last_iter = out.trace.iterates.back().iteration;
        iter_base = last_iter + 1;

        out.certificate = compute_polar(ds, out.model, opts.tau_polar, opts.polar_restarts,
                                        derive_seed(seed, 0x9e1ull + out.model.width()));
        if (out.certificate.value <= 1.0 + opts.tau_polar) break;
        if (out.model.width() >= opts.max_width) {
            out.trace.hit_width_cap = true;
            break;
        }
        out.model = grow_width(out.model, out.certificate.witness, opts.growth_scale);
        out.trace.width_events.push_back({last_iter, out.model.width(), out.certificate.value});
    }
    out.certificate.verdict = certify(out.certificate, opts.tau_polar);
    return out;
}

}  // namespace homognet
