#pragma once

#include "homognet/bounds.hpp"
#include "homognet/trainer.hpp"

#include <Eigen/SVD>

#include <optional>
#include <vector>

namespace homognet {

/// Draw N samples from the teacher with the corollary input variances
/// (1/(mn), 1/n, 1/(nT) per entry) and the per-corollary noise convention.
/// Deterministic per seed.
inline Dataset generate(const FamilyTag& tag, const TeacherSpec& teacher, long N,
                        std::uint64_t seed) {
    if (teacher.tag.kind != tag.kind) throw ArgumentError("teacher family does not match tag");
    check_teacher(teacher);
    if (N < 1) throw ArgumentError("N must be >= 1");

    const Dims& d = teacher.dims;
    std::mt19937_64 gen(seed);
    Dataset ds;
    ds.meta.teacher = teacher;
    ds.meta.sigma_x = 1.0;
    ds.meta.seed = seed;
    ds.inputs.reserve(N);
    ds.targets.reserve(N);

    const Index rows = input_rows(tag, d);
    const Index cols = input_cols(tag, d);
    const double xscale = 1.0 / std::sqrt(static_cast<double>(rows * cols));
    const Index ny = output_dim(tag, d);
    const bool scalar_out = ny == 1 && (tag.kind == Family::MatrixSensing ||
                                        tag.kind == Family::StructuredMatrixSensing);
    const double noise_scale =
        scalar_out ? teacher.sigma : teacher.sigma / std::sqrt(static_cast<double>(ny));

    for (long i = 0; i < N; ++i) {
        Matrix x = xscale * gaussian(rows, cols, gen);
        Vector y = apply_teacher(teacher, x);
        if (teacher.sigma > 0.0) y += noise_scale * gaussian_vector(ny, gen);
        ds.inputs.push_back(std::move(x));
        ds.targets.push_back(std::move(y));
    }
    return ds;
}

/// Defaults for the experiment harness; M >= N by construction.
struct ExperimentConfig {
    FamilyTag tag;
    Dims dims;
    TeacherSpec teacher;
    long N = 100;
    long M = 0;  // held-out size; 0 means max(10 N, 1e5) capped at 1e6
    double lambda = 1e-3;
    double delta = 0.05;
    std::uint64_t seed = 0;
    std::vector<int> widths;
    std::vector<long> n_grid;
    int repetitions = 1;
    TrainOptions train;
    double g_radius = -1.0;
    double bernstein_c = 0.125;

    long held_out_size() const {
        if (M > 0) return std::max(M, N);
        return std::min<long>(std::max<long>(10 * N, 100000), 1000000);
    }
};

/// Held-out estimate of the generalization gap. The regularizer cancels
/// between the two objectives, so only the loss terms enter.
struct GapEstimate {
    double gap = 0.0;         // mean |heldout loss - training loss| over repetitions
    double std_error = 0.0;   // standard error over repetitions
    double bound_total = 0.0; // matching BoundReport total, when computed
};

inline double mean_loss(const Dataset& ds, const ParallelModel& m) {
    double loss = 0.0;
    for (long i = 0; i < ds.size(); ++i)
        loss += 0.5 * (ds.targets[i] - predict(m, ds.inputs[i])).squaredNorm();
    return loss / static_cast<double>(ds.size());
}

/// Monte-Carlo generalization gap against fresh held-out draws from the same
/// teacher; NC_mu is estimated, never computed, and the estimation spread is
/// reported as a standard error.
inline GapEstimate monte_carlo_gap(const ExperimentConfig& cfg, const ParallelModel& model) {
    const Dataset train_ds = generate(cfg.tag, cfg.teacher, cfg.N, cfg.seed);
    if (max_stationarity_residual(train_ds, model) > 1e-3)
        throw ArgumentError("monte_carlo_gap precondition: model must be stationary on the "
                            "training set");
    const double train_loss = mean_loss(train_ds, model);
    const long M = cfg.held_out_size();
    const int reps = std::max(cfg.repetitions, 1);

    std::vector<double> gaps(reps);
    for (int k = 0; k < reps; ++k) {
        const Dataset held =
            generate(cfg.tag, cfg.teacher, M, derive_seed(cfg.seed, 0xbeefull + k));
        gaps[k] = std::abs(mean_loss(held, model) - train_loss);
    }
    GapEstimate est;
    for (double gp : gaps) est.gap += gp;
    est.gap /= reps;
    if (reps > 1) {
        double ss = 0.0;
        for (double gp : gaps) ss += (gp - est.gap) * (gp - est.gap);
        est.std_error = std::sqrt(ss / (reps - 1)) / std::sqrt(static_cast<double>(reps));
    }
    return est;
}

// ---- convex oracle (matrix sensing) -----------------------------------------------

struct ConvexOracleResult {
    double value = 0.0;    // C_{muN}(f*) at the solution
    Matrix solution;       // the minimizing matrix M-hat
    bool converged = true;
    double fixed_point_residual = 0.0;
    long iterations = 0;
};

namespace detail {

/// Singular value thresholding: prox of t ||.||_*.
inline Matrix svt(const Matrix& z, double t) {
    Eigen::JacobiSVD<Matrix> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector s = (svd.singularValues().array() - t).max(0.0).matrix();
    return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

/// Largest eigenvalue of the measurement operator M -> (1/N) sum <M,X_i> X_i
/// by power iteration; the Lipschitz constant of the smooth part.
inline double measurement_lipschitz(const Dataset& ds, Index m, Index n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    Matrix w = gaussian(m, n, gen);
    w /= w.norm();
    double lam = 0.0;
    for (int it = 0; it < 200; ++it) {
        Matrix aw = Matrix::Zero(m, n);
        for (long i = 0; i < ds.size(); ++i)
            aw += (ds.inputs[i].cwiseProduct(w)).sum() * ds.inputs[i];
        aw /= static_cast<double>(ds.size());
        const double nl = aw.norm();
        if (nl == 0.0) return 0.0;
        const double change = std::abs(nl - lam);
        lam = nl;
        w = aw / nl;
        if (change <= 1e-12 * std::max(lam, 1e-300)) break;
    }
    return lam;
}

}  // namespace detail

/// Global value of min_M (1/2N) sum (y_i - <M, X_i>)^2 + lambda ||M||_* by
/// proximal gradient with singular value thresholding; step 1 / L-hat with
/// L-hat estimated by power iteration on the measurement operator.
inline ConvexOracleResult convex_oracle_sensing(const Dataset& ds, double lambda,
                                                long max_iter = 20000) {
    if (!(lambda > 0.0)) throw ArgumentError("lambda must be > 0");
    if (ds.size() < 1) throw ArgumentError("dataset must be non-empty");
    const Index m = ds.inputs[0].rows(), n = ds.inputs[0].cols();
    for (const auto& x : ds.inputs)
        if (x.rows() != m || x.cols() != n) throw DimensionError("ragged sensing inputs");

    const double lip = detail::measurement_lipschitz(ds, m, n, 0x535654ull);
    const double step = lip > 0.0 ? 1.0 / lip : 1.0;
    const double inv_n = 1.0 / static_cast<double>(ds.size());

    auto smooth_grad = [&](const Matrix& M) {
        Matrix g = Matrix::Zero(m, n);
        for (long i = 0; i < ds.size(); ++i)
            g -= (ds.targets[i](0) - (ds.inputs[i].cwiseProduct(M)).sum()) * ds.inputs[i];
        return Matrix(g * inv_n);
    };
    auto value_at = [&](const Matrix& M) {
        double loss = 0.0;
        for (long i = 0; i < ds.size(); ++i) {
            const double r = ds.targets[i](0) - (ds.inputs[i].cwiseProduct(M)).sum();
            loss += 0.5 * r * r;
        }
        return loss * inv_n + lambda * nuclear_norm(M);
    };

    ConvexOracleResult out;
    Matrix M = Matrix::Zero(m, n);
    // FISTA with a plain fixed-point polish at the end
    Matrix Z = M, M_prev = M;
    double tk = 1.0;
    out.converged = false;
    for (long k = 0; k < max_iter; ++k) {
        M_prev = M;
        M = detail::svt(Z - step * smooth_grad(Z), step * lambda);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
        Z = M + ((tk - 1.0) / t_next) * (M - M_prev);
        tk = t_next;
        out.iterations = k + 1;
        const Matrix fp = detail::svt(M - step * smooth_grad(M), step * lambda);
        out.fixed_point_residual = (fp - M).norm() / step;
        if (out.fixed_point_residual <= 1e-8) {
            M = fp;
            out.converged = true;
            break;
        }
    }
    out.solution = M;
    out.value = value_at(M);
    return out;
}

// ---- Theorem-1 sandwich -------------------------------------------------------------

struct SandwichReport {
    double convex_value = 0.0;  // C_{muN}(f*) from the SVT oracle
    double nonconvex_value = 0.0;
    double upper_bound = 0.0;  // convex_value + lambda Omega(f*) (polar - 1)_+ + slack
    double polar = 0.0;
    double omega_star = 0.0;  // ||M-hat||_*
    double slack = 0.0;
    bool lower_ok = false;
    bool upper_ok = false;
    bool ok() const { return lower_ok && upper_ok; }
};

/// Verify C_{muN}(f*) <= NC_{muN}(model) <= C_{muN}(f*) + lambda Omega(f*)
/// (polar - 1)_+ within slack 1e-4 (1 + |NC_{muN}|).
inline SandwichReport sandwich_check(const Dataset& ds, const ParallelModel& model,
                                     double lambda) {
    if (model.tag.kind != Family::MatrixSensing)
        throw ArgumentError("sandwich_check applies to matrix sensing");
    if (model.width() < 1) throw ArgumentError("sandwich_check needs a trained model");
    if (std::abs(lambda - model.lambda) > 1e-15 * std::max(1.0, model.lambda))
        throw ArgumentError("lambda differs from the model's training lambda");
    if (max_stationarity_residual(ds, model) > 1e-3)
        throw ArgumentError("sandwich_check precondition: model must be stationary");

    SandwichReport rep;
    const ConvexOracleResult oracle = convex_oracle_sensing(ds, lambda);
    rep.convex_value = oracle.value;
    rep.omega_star = nuclear_norm(oracle.solution);
    rep.nonconvex_value = objective(ds, model);
    rep.polar = polar_exact_sensing(ds, model, lambda).value;
    rep.slack = 1e-4 * (1.0 + std::abs(rep.nonconvex_value));
    rep.upper_bound = rep.convex_value +
                      lambda * rep.omega_star * std::max(rep.polar - 1.0, 0.0) + rep.slack;
    rep.lower_ok = rep.convex_value <= rep.nonconvex_value + rep.slack;
    rep.upper_ok = rep.nonconvex_value <= rep.upper_bound;
    return rep;
}

// ---- sweeps ---------------------------------------------------------------------------

struct LipschitzRow {
    int width = 0;
    double bound = 0.0;
    double teacher_bound = 0.0;
    bool converged = false;
    bool failed = false;
};

/// Fixed-width training runs over the width grid, recording the converged
/// Lipschitz upper bound per cell. Cell failures are flagged, not fatal.
inline std::vector<LipschitzRow> lipschitz_sweep(const ExperimentConfig& cfg) {
    if (cfg.widths.empty()) throw ArgumentError("width grid must be non-empty");
    for (std::size_t i = 1; i < cfg.widths.size(); ++i)
        if (cfg.widths[i] <= cfg.widths[i - 1])
            throw ArgumentError("width grid must be ascending");

    const double teacher_bound = teacher_lipschitz_bound(cfg.teacher);
    std::vector<LipschitzRow> rows;
    for (std::size_t c = 0; c < cfg.widths.size(); ++c) {
        LipschitzRow row;
        row.width = cfg.widths[c];
        row.teacher_bound = teacher_bound;
        try {
            const std::uint64_t cell_seed = derive_seed(cfg.seed, c);
            const Dataset ds = generate(cfg.tag, cfg.teacher, cfg.N, cell_seed);
            ParallelModel m0 = make_model(cfg.tag, cfg.dims, row.width, cfg.train.init_scale,
                                          cfg.lambda, derive_seed(cell_seed, 1));
            auto [trained, trace] = descend(ds, m0, cfg.train);
            row.bound = lipschitz_upper_bound(trained);
            row.converged = !trace.hit_iteration_cap;
        } catch (const std::exception&) {
            row.failed = true;
        }
        rows.push_back(row);
    }
    return rows;
}

struct RateRow {
    long N = 0;
    double mean_gap = 0.0;
    double std_error = 0.0;
    double bound_total = 0.0;
    bool failed = false;
};

/// Per grid point: regenerate data, meta-train, measure the Monte-Carlo gap,
/// and evaluate the bound report.
inline std::vector<RateRow> rate_sweep(const ExperimentConfig& cfg) {
    if (cfg.n_grid.size() < 4) throw ArgumentError("rate sweep needs an ascending grid, >= 4 points");
    for (std::size_t i = 1; i < cfg.n_grid.size(); ++i)
        if (cfg.n_grid[i] <= cfg.n_grid[i - 1]) throw ArgumentError("N grid must be ascending");

    std::vector<RateRow> rows;
    for (std::size_t c = 0; c < cfg.n_grid.size(); ++c) {
        RateRow row;
        row.N = cfg.n_grid[c];
        try {
            const int reps = std::max(cfg.repetitions, 1);
            double gap_sum = 0.0, gap_sq = 0.0, bound_sum = 0.0;
            for (int k = 0; k < reps; ++k) {
                const std::uint64_t cell_seed = derive_seed(cfg.seed, 101 * c + k);
                ExperimentConfig cell = cfg;
                cell.N = row.N;
                cell.seed = cell_seed;
                cell.repetitions = 1;
                const Dataset ds = generate(cell.tag, cell.teacher, cell.N, cell_seed);
                MetaTrainResult res =
                    meta_train(ds, cell.tag, cell.dims, cell.lambda, cell.train, cell_seed);
                const GapEstimate est = monte_carlo_gap(cell, res.model);
                const BoundReport rep = bound_report(ds, res.model, res.certificate, cell.delta,
                                                     cell.g_radius, cell.bernstein_c);
                gap_sum += est.gap;
                gap_sq += est.gap * est.gap;
                bound_sum += rep.total;
            }
            row.mean_gap = gap_sum / reps;
            row.bound_total = bound_sum / reps;
            if (reps > 1) {
                const double var = (gap_sq - reps * row.mean_gap * row.mean_gap) / (reps - 1);
                row.std_error = std::sqrt(std::max(var, 0.0) / reps);
            }
        } catch (const std::exception&) {
            row.failed = true;
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace homognet
