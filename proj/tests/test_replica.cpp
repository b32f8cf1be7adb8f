#include "cdma/replica.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

using Catch::Approx;
using namespace cdma;
using channel::InputPrior;
using replica::SystemSpec;

namespace {

double wbe_gaussian_capacity(double beta, double sigma2) { return std::log1p(beta / sigma2) / (2.0 * beta); }

double noise_term(double beta, double sigma2) {
    return (1.0 + std::log(2.0 * std::numbers::pi * sigma2)) / (2.0 * beta);
}

} // namespace

TEST_CASE("Gaussian inputs reproduce the log-det capacities") {
    SECTION("WBE, beta = 1.5, sigma2 = 0.5") {
        const SystemSpec spec{InputPrior::gaussian(), spectra::make_wbe_law(1.5), 0.5};
        const auto sols = replica::solve_saddle(spec);
        REQUIRE(sols.size() == 1);
        CHECK(sols[0].mutual_information == Approx(std::log(4.0) / 3.0).margin(1e-6));
        CHECK(sols[0].free_energy ==
              Approx(std::log(4.0) / 3.0 + (1.0 + std::log(std::numbers::pi)) / 3.0).margin(1e-6));
    }
    SECTION("across noise levels and loads") {
        for (double beta : {1.2, 1.5, 2.0}) {
            for (double sigma2 : {0.1, 0.25, 0.5, 1.0, 2.0}) {
                const auto wbe = replica::mutual_information({InputPrior::gaussian(), spectra::make_wbe_law(beta), sigma2});
                CHECK(wbe.mutual_information == Approx(wbe_gaussian_capacity(beta, sigma2)).margin(1e-6));
                const auto mp = replica::mutual_information({InputPrior::gaussian(), spectra::make_mp_law(beta), sigma2});
                CHECK(mp.mutual_information == Approx(oracle::verdu_shamai(beta, sigma2)).margin(1e-6));
                CHECK(mp.mutual_information == Approx(oracle::mp_logdet(beta, sigma2)).margin(1e-6));
            }
        }
    }
    SECTION("generic inversion path agrees with the closed form") {
        const auto mp = replica::mutual_information({InputPrior::gaussian(), spectra::make_mp_law(1.5).as_generic(), 0.5});
        CHECK(mp.mutual_information == Approx(oracle::verdu_shamai(1.5, 0.5)).margin(1e-6));
    }
}

TEST_CASE("fixed points satisfy the saddle-point equations") {
    const std::vector<SystemSpec> systems{
        {InputPrior::binary(), spectra::make_mp_law(1.5), 0.125},
        {InputPrior::binary(), spectra::make_wbe_law(1.5), 0.5},
        {InputPrior::binary(), spectra::make_mp_law(2.0), 0.1},
        {InputPrior::normalized_discrete({{-3, 1}, {-1, 1}, {1, 1}, {3, 1}}), spectra::make_mp_law(1.2), 0.3},
    };
    for (const auto& spec : systems) {
        for (const auto& s : replica::solve_saddle(spec)) {
            CHECK(std::abs(s.E - channel::mmse(spec.prior, s.theta)) <= 1e-12);
            const double rhs = spectra::r_transform(spec.spectrum, -s.E / spec.sigma2) / spec.sigma2;
            CHECK(std::abs(rhs - s.theta) <= 1e-10 * std::max(1.0, s.theta));
            CHECK(s.E >= 0.0);
            CHECK(s.E <= 1.0);
            CHECK(s.theta > 0.0);
            CHECK(s.mutual_information >= 0.0);
        }
    }
}

TEST_CASE("solutions match a dense grid scan of the residual") {
    SECTION("binary, MP, beta = 1.5, sigma2 = 0.125") {
        const SystemSpec spec{InputPrior::binary(), spectra::make_mp_law(1.5), 0.125};
        const auto roots = oracle::scan_roots([&](double t) { return replica::saddle_map(spec, t) - t; }, 1e-3, 1e3, 4000);
        const auto sols = replica::solve_saddle(spec);
        REQUIRE(roots.size() == 1);
        REQUIRE(sols.size() == 1);
        CHECK(sols[0].theta == Approx(roots[0]).epsilon(1e-8));
    }
    SECTION("binary, MP, beta = 2, sigma2 = 0.1 has coexisting solutions") {
        const SystemSpec spec{InputPrior::binary(), spectra::make_mp_law(2.0), 0.1};
        const auto roots = oracle::scan_roots([&](double t) { return replica::saddle_map(spec, t) - t; }, 1e-3, 1e3, 4000);
        REQUIRE(roots.size() == 3);
        const auto sols = replica::solve_saddle(spec);
        // Damped iteration reaches the two outer (stable) roots; the middle one repels.
        REQUIRE(sols.size() == 2);
        std::vector<double> thetas{sols[0].theta, sols[1].theta};
        std::sort(thetas.begin(), thetas.end());
        CHECK(thetas[0] == Approx(roots[0]).epsilon(1e-8));
        CHECK(thetas[1] == Approx(roots[2]).epsilon(1e-8));
        CHECK(sols[0].free_energy <= sols[1].free_energy);
        CHECK(replica::mutual_information(spec).theta == sols[0].theta);
    }
}

TEST_CASE("free energy and mutual information") {
    SECTION("decomposition holds at every solution") {
        for (double sigma2 : {0.1, 0.5, 2.0}) {
            const SystemSpec spec{InputPrior::binary(), spectra::make_mp_law(1.5), sigma2};
            for (const auto& s : replica::solve_saddle(spec)) {
                CHECK(replica::free_energy(spec, s.E, s.theta) - noise_term(1.5, sigma2) ==
                      Approx(s.mutual_information).margin(1e-10));
            }
        }
    }
    SECTION("no-information limit") {
        const double sigma2 = 1e6;
        const SystemSpec spec{InputPrior::binary(), spectra::make_mp_law(1.5), sigma2};
        const auto s = replica::mutual_information(spec);
        CHECK(s.E > 1.0 - 1e-5);
        CHECK(s.theta == Approx(1.0 / sigma2).epsilon(1e-5));
        CHECK(s.mutual_information < 1e-6);
        const double theta = spectra::r_transform(spec.spectrum, -1.0 / sigma2) / sigma2;
        CHECK(replica::free_energy(spec, 1.0, theta) == Approx(noise_term(1.5, sigma2)).margin(1e-6));
    }
    SECTION("bounded by the prior entropy and monotone in the noise") {
        const auto quad = InputPrior::normalized_discrete({{-3, 1}, {-1, 1}, {1, 1}, {3, 1}});
        for (const auto& prior : {InputPrior::binary(), quad}) {
            for (double beta : {1.2, 2.0}) {
                double prev = prior.entropy() + 1.0;
                for (double sigma2 : numeric::log_spaced(0.02, 10.0, 15)) {
                    const double c = replica::mutual_information({prior, spectra::make_mp_law(beta), sigma2})
                                         .mutual_information;
                    CHECK(c >= 0.0);
                    CHECK(c <= prior.entropy() + 1e-10);
                    CHECK(c <= prev + 1e-10);
                    prev = c;
                }
            }
        }
    }
    SECTION("preconditions") {
        const SystemSpec spec{InputPrior::binary(), spectra::make_mp_law(1.5), 0.5};
        CHECK_THROWS_AS(replica::free_energy(spec, 1.5, 1.0), DomainError);
        CHECK_THROWS_AS(replica::free_energy(spec, 0.5, 0.0), DomainError);
        CHECK_THROWS_AS(replica::solve_saddle({InputPrior::binary(), spectra::make_mp_law(1.5), 0.0}), DomainError);
    }
}

TEST_CASE("WBE beats random spreading for binary inputs") {
    for (double beta : {1.2, 1.5, 2.0}) {
        for (double sigma2 : numeric::log_spaced(0.03, 5.0, 20)) {
            const double wbe =
                replica::mutual_information({InputPrior::binary(), spectra::make_wbe_law(beta), sigma2}).mutual_information;
            const double mp =
                replica::mutual_information({InputPrior::binary(), spectra::make_mp_law(beta), sigma2}).mutual_information;
            CHECK(wbe >= mp - 1e-12);
        }
    }
}

TEST_CASE("solver options") {
    const SystemSpec spec{InputPrior::binary(), spectra::make_mp_law(2.0), 0.1};
    SECTION("selection does not depend on the order of the starts") {
        replica::SolverOptions forward;
        replica::SolverOptions reversed;
        std::reverse(reversed.initial_theta_scales.begin(), reversed.initial_theta_scales.end());
        CHECK(replica::mutual_information(spec, forward).mutual_information ==
              Approx(replica::mutual_information(spec, reversed).mutual_information).margin(1e-10));
    }
    SECTION("non-convergence is reported") {
        replica::SolverOptions opt;
        opt.max_iterations = 2;
        try {
            (void)replica::solve_saddle(spec, opt);
            FAIL("expected a numeric error");
        } catch (const NumericError& e) {
            CHECK(std::string(e.what()).find("start") != std::string::npos);
        }
    }
    SECTION("invalid options") {
        replica::SolverOptions opt;
        opt.damping = 0.0;
        CHECK_THROWS_AS(replica::solve_saddle(spec, opt), DomainError);
    }
}
