#include "cdma/numeric/quadrature.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

using Catch::Approx;
namespace num = cdma::numeric;

TEST_CASE("gauss-legendre rules integrate polynomials exactly") {
    for (int n : {2, 4, 16}) {
        const auto rule = num::gauss_legendre(n);
        for (int degree = 0; degree <= 2 * n - 1; ++degree) {
            double s = 0.0;
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * std::pow(rule.nodes[i], degree);
            const double exact = degree % 2 ? 0.0 : 2.0 / (degree + 1);
            CHECK(s == Approx(exact).margin(1e-14));
        }
    }
}

TEST_CASE("composite rule over panels") {
    double s = 0.0;
    num::composite_nodes(0.0, std::numbers::pi, 8, num::gauss_legendre_16(), [&](double x, double w) {
        s += w * std::sin(x);
    });
    CHECK(s == Approx(2.0).epsilon(1e-15));
}

TEST_CASE("adaptive integration and failure reporting") {
    CHECK(num::integrate([](double x) { return std::exp(-x * x); }, -8.0, 8.0) ==
          Approx(std::sqrt(std::numbers::pi)).epsilon(1e-14));
    CHECK(num::integrate([](double) { return 1.0; }, 2.0, 2.0) == 0.0);
    CHECK_THROWS_AS(num::integrate([](double x) { return 1.0 / x; }, 0.0, 1.0), cdma::NumericError);
}

TEST_CASE("pairwise sum and log-sum-exp") {
    std::vector<double> v(1000, 0.1);
    CHECK(num::pairwise_sum(v) == Approx(100.0).epsilon(1e-15));
    std::vector<double> e{-1000.0, -1000.0};
    CHECK(num::log_sum_exp(e) == Approx(-1000.0 + std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("spaced grids") {
    const auto g = num::log_spaced(0.01, 100.0, 5);
    REQUIRE(g.size() == 5);
    CHECK(g.front() == 0.01);
    CHECK(g.back() == 100.0);
    CHECK(g[2] == Approx(1.0).epsilon(1e-14));
    const auto n = num::log_spaced(-5.0, -1e-3, 10);
    CHECK(n.front() == -5.0);
    CHECK(n.back() == -1e-3);
    CHECK_THROWS_AS(num::log_spaced(-1.0, 1.0, 3), cdma::DomainError);
    const auto l = num::linear_spaced(0.0, 1.0, 11);
    CHECK(l[5] == Approx(0.5));
}
