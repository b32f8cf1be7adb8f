#include "cdma/montecarlo.hpp"
#include "cdma/replica.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

using Catch::Approx;
using namespace cdma;
using namespace cdma::montecarlo;
using channel::InputPrior;

namespace {

double max_norm_deviation(const SpreadingMatrix& s) {
    return (s.entries.colwise().norm().array() - 1.0).abs().maxCoeff();
}

double tight_frame_deviation(const SpreadingMatrix& s) {
    const Eigen::MatrixXd g = s.entries * s.entries.transpose();
    return (g - s.beta() * Eigen::MatrixXd::Identity(s.L(), s.L())).cwiseAbs().maxCoeff();
}

SpreadingMatrix scalar_matrix() { return {Eigen::MatrixXd::Ones(1, 1), SpreadingKind::iid, 0}; }

} // namespace

TEST_CASE("i.i.d. spreading") {
    const auto s = gen_iid_spreading(7, 4, 2);
    CHECK(s.K() == 4);
    CHECK(s.L() == 2);
    CHECK(max_norm_deviation(s) <= 1e-12);
    CHECK(gen_iid_spreading(7, 4, 2).entries == s.entries);
    CHECK_FALSE(gen_iid_spreading(8, 4, 2).entries == s.entries);
    CHECK_THROWS_AS(gen_iid_spreading(1, 0, 2), DomainError);

    SECTION("empirical spectrum follows Marcenko-Pastur") {
        const auto big = gen_iid_spreading(2024, 512, 256);
        const auto mp = empirical_spectrum(big, spectra::make_mp_law(2.0));
        REQUIRE(mp.eigenvalues.size() == 512);
        CHECK(std::is_sorted(mp.eigenvalues.begin(), mp.eigenvalues.end()));
        CHECK(mp.ks_distance <= 0.05);
        const auto wbe = empirical_spectrum(big, spectra::make_wbe_law(2.0));
        CHECK(wbe.ks_distance > 5.0 * mp.ks_distance);
        CHECK(wbe.ks_distance > 0.2);
        // The same statistic against an independently integrated CDF.
        const double n = static_cast<double>(mp.eigenvalues.size());
        double ks = 0.0;
        for (std::size_t i = 0; i < mp.eigenvalues.size(); ++i) {
            const double x = mp.eigenvalues[i];
            if (x < 1e-9) continue; // the atom at 0 is matched exactly by the zero eigenvalues
            const double f = oracle::mp_cdf(2.0, x);
            ks = std::max({ks, std::abs(static_cast<double>(i + 1) / n - f), std::abs(static_cast<double>(i) / n - f)});
        }
        CHECK(mp.ks_distance == Approx(ks).margin(1e-8));
    }
}

TEST_CASE("WBE spreading") {
    SECTION("K = 6, L = 4: two-valued spectrum") {
        const auto s = gen_wbe_spreading(3, 6, 4);
        const auto ev = correlation_eigenvalues(s);
        for (int i = 0; i < 2; ++i) CHECK(std::abs(ev[i]) <= 1e-10);
        for (int i = 2; i < 6; ++i) CHECK(std::abs(ev[i] - 1.5) <= 1e-10);
        CHECK(empirical_spectrum(s, spectra::make_wbe_law(1.5)).ks_distance <= 1e-9);
    }
    SECTION("K = 3, L = 2: unit norms and tight frame") {
        const auto s = gen_wbe_spreading(11, 3, 2);
        CHECK(max_norm_deviation(s) <= 1e-10);
        CHECK(tight_frame_deviation(s) <= 1e-12);
    }
    SECTION("trace identity over seeds") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto s = gen_wbe_spreading(seed, 64, 32);
            CHECK(std::abs((s.entries.transpose() * s.entries).trace() - 64.0) <= 1e-8);
            CHECK(max_norm_deviation(s) <= 1e-10);
            CHECK(tight_frame_deviation(s) <= 1e-12);
        }
    }
    SECTION("determinism and preconditions") {
        CHECK(gen_wbe_spreading(5, 12, 8).entries == gen_wbe_spreading(5, 12, 8).entries);
        CHECK_THROWS_AS(gen_wbe_spreading(1, 4, 4), DomainError);
        CHECK_THROWS_AS(gen_wbe_spreading(1, 3, 4), DomainError);
    }
    SECTION("Haar seed is orthogonal") {
        std::mt19937_64 rng(9);
        const Eigen::MatrixXd q = haar_orthogonal(rng, 20);
        CHECK((q.transpose() * q - Eigen::MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff() <= 1e-13);
    }
}

TEST_CASE("Gaussian-input mutual information") {
    SECTION("WBE closed form") {
        const auto s = gen_wbe_spreading(4, 6, 4);
        CHECK(gaussian_exact_mi(s, 0.5) == Approx(std::log(4.0) / 3.0).margin(1e-10));
        for (double sigma2 : {0.1, 1.0, 3.0}) {
            CHECK(gaussian_exact_mi(s, sigma2) == Approx(std::log1p(1.5 / sigma2) / 3.0).margin(1e-10));
        }
        const auto ev = gram_eigenvalues(s);
        CHECK(gaussian_exact_mi(ev, s.K(), 0.5) == Approx(gaussian_exact_mi(s, 0.5)).margin(1e-12));
    }
    SECTION("vanishes with the signal-to-noise ratio") { CHECK(gaussian_exact_mi(gen_iid_spreading(1, 6, 4), 1e12) < 1e-11); }
    SECTION("i.i.d. 512 x 256 is close to the large-system value") {
        const auto s = gen_iid_spreading(77, 512, 256);
        const double replica_c =
            replica::mutual_information({InputPrior::gaussian(), spectra::make_mp_law(2.0), 0.5}).mutual_information;
        CHECK(std::abs(gaussian_exact_mi(s, 0.5) - replica_c) <= 0.02 * replica_c);
    }
}

TEST_CASE("exact mutual information by enumeration") {
    const auto binary = InputPrior::binary();
    SECTION("single user reduces to the scalar channel") {
        const auto est = exact_mutual_information(scalar_matrix(), binary, 1.0, 200000, 5);
        const double scalar = channel::scalar_mutual_information(binary, 1.0);
        CHECK(std::abs(est.value - scalar) <= 3.0 * est.std_error);
        CHECK(est.n_samples == 200000);
        CHECK(est.std_error > 0.0);
    }
    SECTION("no information at huge noise") {
        const auto est = exact_mutual_information(gen_wbe_spreading(1, 6, 4), binary, 1e8, 5000, 3);
        CHECK(std::abs(est.value) <= 3.0 * est.std_error + 1e-12);
    }
    SECTION("bounded by the prior entropy") {
        const auto est = exact_mutual_information(gen_wbe_spreading(2, 6, 4), binary, 0.05, 5000, 4);
        CHECK(est.value <= std::log(2.0) + 3.0 * est.std_error);
        CHECK(est.value >= 0.0);
    }
    SECTION("bit-identical for any worker count") {
        const auto s = gen_wbe_spreading(6, 6, 4);
        const auto one = exact_mutual_information(s, binary, 0.5, 3000, 17, 1);
        const auto three = exact_mutual_information(s, binary, 0.5, 3000, 17, 3);
        CHECK(one.value == three.value);
        CHECK(one.std_error == three.std_error);
    }
    SECTION("exchangeable users") {
        const auto s = gen_wbe_spreading(8, 6, 4);
        SpreadingMatrix permuted = s;
        const std::vector<int> order{3, 0, 5, 1, 4, 2};
        for (int k = 0; k < 6; ++k) permuted.entries.col(k) = s.entries.col(order[k]);
        const auto a = exact_mutual_information(s, binary, 0.5, 20000, 31);
        const auto b = exact_mutual_information(permuted, binary, 0.5, 20000, 32);
        CHECK(std::abs(a.value - b.value) <= 3.0 * std::hypot(a.std_error, b.std_error));
    }
    SECTION("increases as the noise decreases") {
        const auto s = gen_iid_spreading(12, 6, 4);
        double prev = -1.0;
        double prev_se = 0.0;
        for (double sigma2 : {4.0, 1.0, 0.25, 0.0625}) {
            const auto est = exact_mutual_information(s, binary, sigma2, 20000, 41);
            CHECK(est.value >= prev - 3.0 * std::hypot(est.std_error, prev_se));
            prev = est.value;
            prev_se = est.std_error;
        }
    }
    SECTION("a four-level alphabet") {
        const auto quad = InputPrior::normalized_discrete({{-3, 1}, {-1, 1}, {1, 1}, {3, 1}});
        const auto est = exact_mutual_information(scalar_matrix(), quad, 0.5, 100000, 9);
        CHECK(std::abs(est.value - channel::scalar_mutual_information(quad, 2.0)) <= 3.0 * est.std_error);
    }
    SECTION("preconditions") {
        CHECK_THROWS_AS(exact_mutual_information(scalar_matrix(), InputPrior::gaussian(), 1.0, 1000, 1), DomainError);
        CHECK_THROWS_AS(exact_mutual_information(scalar_matrix(), binary, 1.0, 999, 1), DomainError);
        CHECK_THROWS_AS(exact_mutual_information(scalar_matrix(), binary, 0.0, 1000, 1), DomainError);
        CHECK_THROWS_AS(exact_mutual_information(gen_iid_spreading(1, 21, 8), binary, 1.0, 1000, 1), CapabilityError);
    }
}

TEST_CASE("ensemble averages") {
    const auto binary = InputPrior::binary();
    const auto a = ensemble_mutual_information(SpreadingKind::wbe, 6, 4, binary, 0.5, 4, 2000, 99);
    const auto b = ensemble_mutual_information(SpreadingKind::wbe, 6, 4, binary, 0.5, 4, 2000, 99);
    CHECK(a.value == b.value);
    CHECK(a.n_samples == 8000);
    CHECK(a.std_error > 0.0);
    CHECK_THROWS_AS(ensemble_mutual_information(SpreadingKind::wbe, 6, 4, binary, 0.5, 0, 2000, 99), DomainError);
}

TEST_CASE("matrix dump round trip") {
    const auto s = gen_wbe_spreading(21, 5, 3);
    std::stringstream io;
    write_matrix(io, s);
    const auto back = read_matrix(io);
    CHECK(back.K() == 5);
    CHECK(back.L() == 3);
    CHECK(back.kind == SpreadingKind::wbe);
    CHECK(back.seed == 21);
    CHECK(back.entries == s.entries);

    std::stringstream bad("K 2 L 2 kind iid seed 1\n0.5 0.5\n");
    CHECK_THROWS_AS(read_matrix(bad), DomainError);
    std::stringstream bad_kind("K 1 L 1 kind xyz seed 1\n1\n");
    CHECK_THROWS_AS(read_matrix(bad_kind), DomainError);
}
