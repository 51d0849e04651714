#include "homognet/homognet.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace homognet;

namespace {

FamilyTag sensing_tag() {
    FamilyTag tag;
    tag.kind = Family::MatrixSensing;
    return tag;
}

TrainOptions tight_options() {
    TrainOptions o;
    o.grad_tolerance = 1e-8;
    o.max_iterations = 80000;
    return o;
}

}  // namespace

TEST_CASE("generate: determinism, noiseless manifold, input second moment") {
    for (Family k : {Family::MatrixSensing, Family::TwoLayerLinear, Family::TwoLayerReLU,
                     Family::MultiHeadAttention}) {
        FamilyTag tag;
        tag.kind = k;
        tag.temperature = 1.3;
        const Dims d = k == Family::MultiHeadAttention ? Dims{3, 4, 5} : Dims{4, 5, 1};

        // sigma = 0: targets sit exactly on the teacher manifold
        const TeacherSpec clean = make_teacher(tag, d, 2, 0.0, 3);
        const Dataset ds = generate(tag, clean, 50, 7);
        for (long i = 0; i < ds.size(); ++i)
            REQUIRE((ds.targets[i] - apply_teacher(clean, ds.inputs[i])).norm() <= 1e-14);

        // seed determinism
        const Dataset a = generate(tag, clean, 20, 11);
        const Dataset b = generate(tag, clean, 20, 11);
        for (long i = 0; i < a.size(); ++i) {
            REQUIRE(a.inputs[i] == b.inputs[i]);
            REQUIRE(a.targets[i] == b.targets[i]);
        }
    }

    // vectorized input second moment is ~1 (5% at N = 1e4)
    FamilyTag tag = sensing_tag();
    const Dims d{4, 5, 1};
    const TeacherSpec t = make_teacher(tag, d, 1, 0.0, 5);
    const Dataset big = generate(tag, t, 10000, 13);
    double second = 0.0;
    for (const auto& x : big.inputs) second += x.squaredNorm();
    second /= static_cast<double>(big.size());
    REQUIRE(second == Catch::Approx(1.0).epsilon(0.05));
}

TEST_CASE("monte_carlo_gap: identical data gives zero gap; stderr shrinks with M") {
    FamilyTag tag = sensing_tag();
    const Dims d{5, 5, 1};
    const TeacherSpec teacher = make_teacher(tag, d, 1, 0.2, 17);
    Dataset ds = generate(tag, teacher, 80, 19);
    MetaTrainResult res = meta_train(ds, tag, d, 1e-2, tight_options(), 23);

    // evaluating the training objective against an identical regeneration of
    // the training set gives exactly zero gap (the regularizer cancels)
    const Dataset same = generate(tag, teacher, 80, 19);
    REQUIRE(std::abs(mean_loss(same, res.model) - mean_loss(ds, res.model)) == 0.0);

    ExperimentConfig cfg;
    cfg.tag = tag;
    cfg.dims = d;
    cfg.teacher = teacher;
    cfg.N = 80;
    cfg.lambda = 1e-2;
    cfg.seed = 19;
    cfg.repetitions = 8;

    cfg.M = 400;
    const GapEstimate small = monte_carlo_gap(cfg, res.model);
    cfg.M = 6400;  // 16x the held-out budget: stderr should drop roughly 4x
    const GapEstimate large = monte_carlo_gap(cfg, res.model);
    REQUIRE(small.gap > 0.0);
    REQUIRE(large.std_error < small.std_error);
}

TEST_CASE("convex_oracle_sensing: thresholding regime, recovery, lower bound") {
    FamilyTag tag = sensing_tag();
    const Dims d{6, 6, 1};
    TeacherSpec teacher = make_teacher(tag, d, 2, 0.0, 29);
    Dataset ds = generate(tag, teacher, 120, 31);

    // huge lambda: full thresholding, M-hat = 0, value = (1/2N) sum y^2
    {
        double ysq = 0.0;
        for (const auto& y : ds.targets) ysq += y.squaredNorm();
        ysq /= 2.0 * static_cast<double>(ds.size());
        const ConvexOracleResult res = convex_oracle_sensing(ds, 1e3);
        REQUIRE(res.converged);
        REQUIRE(res.solution.norm() == 0.0);
        REQUIRE(res.value == Catch::Approx(ysq).epsilon(1e-12));
    }

    // noiseless identifiable instance: solution close to the teacher (lambda bias)
    {
        const ConvexOracleResult res = convex_oracle_sensing(ds, 1e-4);
        REQUIRE(res.converged);
        const Matrix truth = teacher_matrix(teacher);
        REQUIRE((res.solution - truth).norm() / truth.norm() <= 2e-2);
    }

    // C_{muN}(f*) lower-bounds the factored objective on the same data
    for (int trial = 0; trial < 5; ++trial) {
        const double lambda = 1e-3;
        const ConvexOracleResult oracle = convex_oracle_sensing(ds, lambda);
        ParallelModel m = make_model(tag, d, 1 + trial % 3, 0.8, lambda, trial);
        REQUIRE(oracle.value <= objective(ds, m) + 1e-9);
    }
}

TEST_CASE("sandwich_check: holds end-to-end, preconditions enforced") {
    FamilyTag tag = sensing_tag();
    const Dims d{6, 6, 1};
    TeacherSpec teacher = make_teacher(tag, d, 2, 0.0, 37);
    Dataset ds = generate(tag, teacher, 120, 41);

    MetaTrainResult res = meta_train(ds, tag, d, 1e-3, tight_options(), 43);
    const SandwichReport rep = sandwich_check(ds, res.model, res.model.lambda);
    REQUIRE(rep.lower_ok);
    REQUIRE(rep.upper_ok);
    REQUIRE(rep.convex_value <= rep.nonconvex_value + rep.slack);

    // width-0 "stationary" edge is excluded
    ParallelModel empty;
    empty.tag = tag;
    empty.dims = d;
    empty.lambda = 1e-3;
    REQUIRE_THROWS_AS(sandwich_check(ds, empty, 1e-3), ArgumentError);

    // inflating lambda post-hoc breaks the precondition
    REQUIRE_THROWS_AS(sandwich_check(ds, res.model, 1e-2), ArgumentError);
}

TEST_CASE("lipschitz_sweep: single-width cell reproduces one training run") {
    FamilyTag tag = sensing_tag();
    const Dims d{5, 5, 1};
    ExperimentConfig cfg;
    cfg.tag = tag;
    cfg.dims = d;
    cfg.teacher = make_teacher(tag, d, 2, 0.05, 47);
    cfg.N = 60;
    cfg.lambda = 1e-2;
    cfg.seed = 51;
    cfg.widths = {1};
    cfg.train = tight_options();

    const auto rows = lipschitz_sweep(cfg);
    REQUIRE(rows.size() == 1);
    REQUIRE_FALSE(rows[0].failed);
    REQUIRE(rows[0].converged);

    // the same cell, run by hand
    const std::uint64_t cell_seed = derive_seed(cfg.seed, 0);
    const Dataset ds = generate(tag, cfg.teacher, cfg.N, cell_seed);
    ParallelModel m0 = make_model(tag, d, 1, cfg.train.init_scale, cfg.lambda,
                                  derive_seed(cell_seed, 1));
    auto [trained, trace] = descend(ds, m0, cfg.train);
    REQUIRE(rows[0].bound == Catch::Approx(lipschitz_upper_bound(trained)).epsilon(1e-14));

    // determinism of the whole sweep
    const auto again = lipschitz_sweep(cfg);
    REQUIRE(again[0].bound == rows[0].bound);
}

TEST_CASE("rate_sweep: smoke run emits complete, monotone bound rows") {
    FamilyTag tag = sensing_tag();
    const Dims d{4, 4, 1};
    ExperimentConfig cfg;
    cfg.tag = tag;
    cfg.dims = d;
    cfg.teacher = make_teacher(tag, d, 1, 0.3, 53);
    cfg.N = 0;
    cfg.lambda = 2e-2;
    cfg.delta = 0.05;
    cfg.seed = 57;
    cfg.n_grid = {40, 80, 160, 320};
    cfg.repetitions = 2;
    cfg.M = 2000;
    cfg.train = tight_options();

    const auto rows = rate_sweep(cfg);
    REQUIRE(rows.size() == 4);
    for (const auto& r : rows) {
        REQUIRE_FALSE(r.failed);
        REQUIRE(r.mean_gap >= 0.0);
        REQUIRE(r.bound_total > 0.0);
        REQUIRE(r.mean_gap <= r.bound_total);  // order-of-magnitude convention
    }
    for (std::size_t i = 1; i < rows.size(); ++i)
        REQUIRE(rows[i].bound_total < rows[i - 1].bound_total);
}
