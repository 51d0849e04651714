#include "homognet/homognet.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace homognet;

namespace {

FamilyTag tag_for(Family k) {
    FamilyTag tag;
    tag.kind = k;
    tag.temperature = 2.0;
    tag.gauge = GaugeSpec::sparse_bounded(1.5);
    return tag;
}

Dims dims_for(Family k) {
    if (k == Family::MultiHeadAttention) return {3, 4, 5};
    return {4, 5, 1};
}

const Family kAll[] = {Family::MatrixSensing, Family::StructuredMatrixSensing,
                       Family::TwoLayerLinear, Family::TwoLayerReLU,
                       Family::MultiHeadAttention};

Matrix random_input(const FamilyTag& tag, const Dims& d, std::mt19937_64& gen) {
    return gaussian(input_rows(tag, d), input_cols(tag, d), gen);
}

}  // namespace

TEST_CASE("predict and theta agree with the naive transcription") {
    for (Family k : kAll) {
        const FamilyTag tag = tag_for(k);
        const Dims d = dims_for(k);
        for (int trial = 0; trial < 50; ++trial) {
            std::mt19937_64 gen(derive_seed(11, trial + 1000 * static_cast<int>(k)));
            std::vector<FactorParams> factors;
            const int width = 1 + trial % 3;
            for (int j = 0; j < width; ++j) factors.push_back(random_factor(tag, d, gen));
            const Matrix x = random_input(tag, d, gen);

            Vector mine = Vector::Zero(output_dim(tag, d));
            for (const auto& f : factors) mine += predict_factor(tag, d, f, x);
            const Vector naive = oracles::naive_predict(tag, d, factors, x);
            REQUIRE((mine - naive).norm() <= 1e-12 * (1.0 + naive.norm()));

            for (const auto& f : factors)
                REQUIRE(theta(tag, f) ==
                        Catch::Approx(oracles::naive_theta(tag, f)).epsilon(1e-12));
        }
    }
}

TEST_CASE("balanced homogeneity: phi and theta scale together") {
    for (Family k : kAll) {
        const FamilyTag tag = tag_for(k);
        const Dims d = dims_for(k);
        const double p = homogeneity_degree(tag);
        std::mt19937_64 gen(7);
        const FactorParams f = random_factor(tag, d, gen);
        const Matrix x = random_input(tag, d, gen);
        const Vector base_phi = predict_factor(tag, d, f, x);
        const double base_theta = theta(tag, f);
        for (double beta : {0.0, 0.5, 2.0}) {
            const FactorParams fs = scale_homogeneous(tag, f, beta);
            const double want = std::pow(beta, p);
            REQUIRE((predict_factor(tag, d, fs, x) - want * base_phi).norm() <=
                    1e-12 * (1.0 + base_phi.norm()));
            REQUIRE(theta(tag, fs) == Catch::Approx(want * base_theta).margin(1e-12));
        }
    }
}

TEST_CASE("attention prediction tends to uniform averaging as t -> 0") {
    FamilyTag tag = tag_for(Family::MultiHeadAttention);
    tag.temperature = 1e-8;
    const Dims d = dims_for(Family::MultiHeadAttention);
    std::mt19937_64 gen(21);
    const FactorParams f = random_factor(tag, d, gen);
    const Matrix x = random_input(tag, d, gen);
    const Vector pred = predict_factor(tag, d, f, x);
    const Vector ones = Vector::Ones(d.T);
    const Vector avg = f.left * (x * ones) / static_cast<double>(d.T);
    REQUIRE((pred - avg).norm() <= 1e-6 * (1.0 + avg.norm()));
}

TEST_CASE("attention theta rejects an infeasible z") {
    const FamilyTag tag = tag_for(Family::MultiHeadAttention);
    const Dims d = dims_for(Family::MultiHeadAttention);
    std::mt19937_64 gen(3);
    FactorParams f = random_factor(tag, d, gen);
    f.right *= 2.0;
    REQUIRE_THROWS_AS(theta(tag, f), InfeasibleRegularizerError);
}

TEST_CASE("gauge: examples and invariants") {
    const GaugeSpec g1 = GaugeSpec::sparse_bounded(1.0);
    Vector zero = Vector::Zero(4);
    REQUIRE(g1.value(zero) == 0.0);

    Vector e1 = Vector::Zero(4);
    e1(0) = 1.0;
    REQUIRE(g1.value(e1) == Catch::Approx(1.0));
    REQUIRE(g1.k2(4) == Catch::Approx(2.0));  // sqrt(4)/1

    // positive homogeneity and domination of the l2 norm
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Vector u = gaussian_vector(4, gen);
        for (double beta : {0.0, 0.3, 2.5})
            REQUIRE(g1.value(beta * u) == Catch::Approx(beta * g1.value(u)).margin(1e-12));
        REQUIRE(g1.value(u) >= u.norm() - 1e-12);
    }

    const GaugeSpec l2 = GaugeSpec::l2();
    REQUIRE(l2.k2(17) == 1.0);
}

TEST_CASE("make_model: determinism, width 0, init scale") {
    for (Family k : kAll) {
        const FamilyTag tag = tag_for(k);
        const Dims d = dims_for(k);

        const ParallelModel empty = make_model(tag, d, 0, 1e-3, 1e-2, 5);
        REQUIRE(empty.width() == 0);

        const ParallelModel a = make_model(tag, d, 3, 1e-3, 1e-2, 42);
        const ParallelModel b = make_model(tag, d, 3, 1e-3, 1e-2, 42);
        for (int j = 0; j < 3; ++j) {
            REQUIRE(a.factors[j].left == b.factors[j].left);
            REQUIRE(a.factors[j].right == b.factors[j].right);
            REQUIRE(theta(tag, a.factors[j]) == Catch::Approx(1e-3).margin(1e-12));
        }
    }
    REQUIRE_THROWS_AS(make_model(tag_for(Family::MatrixSensing), dims_for(Family::MatrixSensing),
                                 -1, 1e-3, 1e-2, 0),
                      ArgumentError);
}

TEST_CASE("lipschitz_upper_bound: worked examples") {
    // sensing: single factor u = e1, v = e2 -> rank-one spectral norm 1
    FamilyTag tag;
    tag.kind = Family::MatrixSensing;
    Dims d{3, 3, 1};
    ParallelModel m;
    m.tag = tag;
    m.dims = d;
    m.lambda = 1.0;
    FactorParams f{Matrix::Zero(3, 1), Matrix::Zero(3, 1)};
    f.left(0, 0) = 1.0;
    f.right(1, 0) = 1.0;
    m.factors.push_back(f);
    REQUIRE(lipschitz_upper_bound(m) == Catch::Approx(1.0));

    // all-zero factor -> 0
    m.factors[0].left.setZero();
    REQUIRE(lipschitz_upper_bound(m) == Catch::Approx(0.0).margin(1e-15));

    // ReLU with U = V = I2 -> 1
    FamilyTag rt;
    rt.kind = Family::TwoLayerReLU;
    Dims rd{2, 2, 1};
    ParallelModel rm;
    rm.tag = rt;
    rm.dims = rd;
    rm.lambda = 1.0;
    for (int j = 0; j < 2; ++j) {
        FactorParams rf{Matrix::Zero(2, 1), Matrix::Zero(2, 1)};
        rf.left(j, 0) = 1.0;
        rf.right(j, 0) = 1.0;
        rm.factors.push_back(rf);
    }
    REQUIRE(lipschitz_upper_bound(rm) == Catch::Approx(1.0));
}

TEST_CASE("teacher: shapes and determinism") {
    for (Family k : kAll) {
        const FamilyTag tag = tag_for(k);
        const Dims d = dims_for(k);
        const TeacherSpec t1 = make_teacher(tag, d, 2, 0.1, 9);
        const TeacherSpec t2 = make_teacher(tag, d, 2, 0.1, 9);
        REQUIRE(t1.U == t2.U);
        REQUIRE(t1.V == t2.V);
        if (k == Family::MultiHeadAttention)
            REQUIRE(t1.V.norm() == Catch::Approx(1.0).margin(1e-12));
    }
}
