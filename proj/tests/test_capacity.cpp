#include "homognet/homognet.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace homognet;

TEST_CASE("ball_covering_log: worked values and scaling") {
    // r=1, nu=2, n=3 -> 3 log 2
    REQUIRE(ball_covering_log(1.0, 2.0, 3) == Catch::Approx(3.0 * std::log(2.0)));

    // nu -> infinity drives the value to 0
    REQUIRE(ball_covering_log(1.0, 1e12, 3) == Catch::Approx(0.0).margin(1e-10));

    // doubling n doubles the value
    REQUIRE(ball_covering_log(0.7, 0.3, 10) ==
            Catch::Approx(2.0 * ball_covering_log(0.7, 0.3, 5)));

    REQUIRE_THROWS_AS(ball_covering_log(-1.0, 1.0, 3), ArgumentError);
}

TEST_CASE("class_covering_log: reduction, monotonicity, worked value") {
    CoveringQuery q;
    q.r_theta = 1.0 / std::sqrt(2.0);
    q.nu = 0.25;
    q.n = 7;
    q.R = 1;
    q.lip_ratio = 0.5;

    // R = 1 reduces to the ball bound at the rescaled resolution
    REQUIRE(class_covering_log(q) ==
            Catch::Approx(ball_covering_log(q.r_theta, q.lip_ratio * q.nu, q.n)));

    // monotone decreasing in nu
    CoveringQuery coarse = q;
    coarse.nu = 0.5;
    REQUIRE(class_covering_log(coarse) < class_covering_log(q));

    // R=2, r_theta = 1/sqrt(2), nu chosen so the inner log equals 1 -> 2n
    CoveringQuery w;
    w.r_theta = 1.0 / std::sqrt(2.0);
    w.R = 2;
    w.n = 5;
    w.lip_ratio = 1.0;
    w.nu = 2.0 * w.r_theta / (std::exp(1.0) - 1.0);  // 1 + 2r/nu = e
    REQUIRE(class_covering_log(w) == Catch::Approx(2.0 * 5.0).epsilon(1e-12));
}

TEST_CASE("closed form upper-bounds a greedy packing oracle (n <= 3)") {
    // a nu-separated packing of B(r) is at most the (nu/2)-covering number,
    // which the closed form upper-bounds
    for (int n = 1; n <= 3; ++n) {
        for (double nu : {0.5, 0.8}) {
            const double r = 1.0;
            const long packing = oracles::greedy_ball_packing(r, nu, n);
            REQUIRE(std::log(static_cast<double>(packing)) <=
                    ball_covering_log(r, nu / 2.0, n) + 1e-12);
        }
    }
}
