#pragma once

// Finite-size CDMA systems y = S x + sigma n with explicit spreading matrices.

#include "cdma/channel.hpp"
#include "cdma/errors.hpp"
#include "cdma/numeric/quadrature.hpp"
#include "cdma/parallel.hpp"
#include "cdma/spectra.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace cdma::montecarlo {

enum class SpreadingKind { iid, wbe };

inline const char* to_string(SpreadingKind k) { return k == SpreadingKind::iid ? "iid" : "wbe"; }

inline SpreadingKind parse_spreading_kind(const std::string& s) {
    if (s == "iid") return SpreadingKind::iid;
    if (s == "wbe") return SpreadingKind::wbe;
    throw DomainError("unknown spreading kind '" + s + "' (expected iid or wbe)");
}

/// L x K matrix whose columns are the (already 1/sqrt(L)-scaled) spreading
/// sequences; every column has unit norm.
struct SpreadingMatrix {
    Eigen::MatrixXd entries;
    SpreadingKind kind = SpreadingKind::iid;
    std::uint64_t seed = 0;

    [[nodiscard]] int K() const { return static_cast<int>(entries.cols()); }
    [[nodiscard]] int L() const { return static_cast<int>(entries.rows()); }
    [[nodiscard]] double beta() const { return static_cast<double>(K()) / L(); }
};

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of diag(R) folded into Q.
inline Eigen::MatrixXd haar_orthogonal(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> normal;
    Eigen::MatrixXd g(n, n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) g(i, j) = normal(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd& r = qr.matrixQR();
    for (int j = 0; j < n; ++j) {
        if (r(j, j) < 0.0) q.col(j) *= -1.0;
    }
    return q;
}

inline SpreadingMatrix gen_iid_spreading(std::uint64_t seed, int K, int L) {
    if (K < 1 || L < 1) throw DomainError("gen_iid_spreading: K and L must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    SpreadingMatrix s{Eigen::MatrixXd(L, K), SpreadingKind::iid, seed};
    for (int k = 0; k < K; ++k) {
        double norm = 0.0;
        do {
            for (int mu = 0; mu < L; ++mu) s.entries(mu, k) = normal(rng);
            norm = s.entries.col(k).norm();
        } while (norm == 0.0);
        s.entries.col(k) /= norm;
    }
    return s;
}

/// Rotates column pairs (right Givens rotations, which keep S S^T fixed)
/// until every column has unit norm. Each rotation sets one column exactly
/// to unit norm, so at most K - 1 rotations are needed.
inline void equalize_column_norms(Eigen::MatrixXd& s) {
    const int K = static_cast<int>(s.cols());
    for (int step = 0; step < 2 * K; ++step) {
        Eigen::VectorXd d = s.colwise().squaredNorm().transpose();
        Eigen::Index i = 0;
        Eigen::Index j = 0;
        d.minCoeff(&i);
        d.maxCoeff(&j);
        if (std::max(1.0 - d(i), d(j) - 1.0) <= 1e-14) return;
        const double alpha = d(i);
        const double gamma = d(j);
        const double c = s.col(i).dot(s.col(j));
        const double A = gamma - 1.0;
        const double B = alpha - 1.0;
        const double disc = c * c - A * B;
        const double tau = B / (c + std::copysign(std::sqrt(disc), c));
        const double cs = 1.0 / std::sqrt(1.0 + tau * tau);
        const double sn = tau * cs;
        const Eigen::VectorXd a = s.col(i);
        const Eigen::VectorXd b = s.col(j);
        s.col(i) = cs * a - sn * b;
        s.col(j) = sn * a + cs * b;
    }
}

/// WBE spreading: sqrt(beta) times L rows of a Haar orthogonal K x K matrix
/// (so S S^T = beta I), followed by norm equalization.
inline SpreadingMatrix gen_wbe_spreading(std::uint64_t seed, int K, int L) {
    if (L < 1 || K <= L) throw DomainError("gen_wbe_spreading: need K > L >= 1");
    std::mt19937_64 rng(seed);
    const double beta = static_cast<double>(K) / L;
    SpreadingMatrix s{std::sqrt(beta) * haar_orthogonal(rng, K).topRows(L), SpreadingKind::wbe, seed};
    equalize_column_norms(s.entries);
    return s;
}

inline SpreadingMatrix gen_spreading(SpreadingKind kind, std::uint64_t seed, int K, int L) {
    return kind == SpreadingKind::iid ? gen_iid_spreading(seed, K, L) : gen_wbe_spreading(seed, K, L);
}

/// Eigenvalues attributed to an atom when within this (relative) distance.
inline constexpr double atom_snap_tol = 1e-9;

/// Kolmogorov-Smirnov distance between the empirical law of `eigenvalues`
/// and `reference`. Both one-sided limits are compared at every eigenvalue
/// and every atom of the reference.
inline double ks_distance(std::vector<double> eigenvalues, const spectra::EigenDistribution& reference) {
    if (eigenvalues.empty()) throw DomainError("ks_distance: no eigenvalues");
    const auto atoms = reference.atoms();
    for (double& e : eigenvalues) {
        for (const auto& a : atoms) {
            if (std::abs(e - a.location) <= atom_snap_tol * std::max(1.0, a.location)) e = a.location;
        }
    }
    std::sort(eigenvalues.begin(), eigenvalues.end());
    std::vector<double> events = eigenvalues;
    for (const auto& a : atoms) events.push_back(a.location);
    std::sort(events.begin(), events.end());
    events.erase(std::unique(events.begin(), events.end()), events.end());

    const double n = static_cast<double>(eigenvalues.size());
    double worst = 0.0;
    for (double x : events) {
        const auto below = std::lower_bound(eigenvalues.begin(), eigenvalues.end(), x) - eigenvalues.begin();
        const auto upto = std::upper_bound(eigenvalues.begin(), eigenvalues.end(), x) - eigenvalues.begin();
        double jump = 0.0;
        for (const auto& a : atoms) {
            if (a.location == x) jump += a.weight;
        }
        const double f = reference.cdf(x);
        worst = std::max(worst, std::abs(static_cast<double>(upto) / n - f));
        worst = std::max(worst, std::abs(static_cast<double>(below) / n - (f - jump)));
    }
    return worst;
}

struct EmpiricalSpectrum {
    std::vector<double> eigenvalues; ///< of S^T S, ascending
    double ks_distance;
};

inline std::vector<double> correlation_eigenvalues(const SpreadingMatrix& s) {
    const Eigen::MatrixXd r = s.entries.transpose() * s.entries;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(r, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericError("empirical_spectrum: eigensolver failed");
    std::vector<double> ev(solver.eigenvalues().data(), solver.eigenvalues().data() + solver.eigenvalues().size());
    std::sort(ev.begin(), ev.end());
    return ev;
}

inline EmpiricalSpectrum empirical_spectrum(const SpreadingMatrix& s, const spectra::EigenDistribution& reference) {
    auto ev = correlation_eigenvalues(s);
    const double ks = ks_distance(ev, reference);
    return {std::move(ev), ks};
}

/// Monte Carlo estimate in nats per user.
struct MiEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
};

/// Largest number of input vectors enumerated when evaluating p(y | S).
inline constexpr double enumeration_bound = 1048576.0; // 2^20

namespace detail {

inline MiEstimate summarize(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    const double mean = numeric::pairwise_sum(values) / n;
    std::vector<double> dev(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) dev[i] = (values[i] - mean) * (values[i] - mean);
    std::sort(dev.begin(), dev.end());
    const double var = values.size() > 1 ? numeric::pairwise_sum(dev) / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n), values.size()};
}

} // namespace detail

/// (1/K) E[log p(y | x, S) - log p(y | S)] for a discrete prior, with p(y | S)
/// summed exactly over all M^K inputs (log-sum-exp). Each sample draws from
/// its own seed derived from (seed, sample index), so the result does not
/// depend on the worker count.
inline MiEstimate exact_mutual_information(const SpreadingMatrix& s, const channel::InputPrior& prior, double sigma2,
                                           std::size_t n_samples, std::uint64_t seed,
                                           unsigned workers = worker_count()) {
    if (!prior.is_discrete()) {
        throw DomainError("exact_mutual_information: needs a discrete prior (use gaussian_exact_mi for Gaussian)");
    }
    if (!(sigma2 > 0.0)) throw DomainError("exact_mutual_information: sigma2 must be positive");
    if (n_samples < 1000) throw DomainError("exact_mutual_information: need at least 1000 samples");
    const auto& alphabet = prior.alphabet();
    const int K = s.K();
    const int L = s.L();
    const double M = static_cast<double>(alphabet.size());
    const double combos = std::pow(M, K);
    if (combos > enumeration_bound) {
        std::ostringstream msg;
        msg << "exact_mutual_information: M^K = " << combos << " exceeds the enumeration bound 2^20";
        throw CapabilityError(msg.str());
    }
    const auto n_combos = static_cast<Eigen::Index>(std::llround(combos));

    // Noise-free outputs S x and log-priors of every input vector.
    Eigen::MatrixXd outputs(L, n_combos);
    Eigen::VectorXd log_prior(n_combos);
    {
        Eigen::VectorXd x(K);
        for (Eigen::Index j = 0; j < n_combos; ++j) {
            auto code = j;
            double lp = 0.0;
            for (int k = 0; k < K; ++k) {
                const auto& sym = alphabet[static_cast<std::size_t>(code % static_cast<Eigen::Index>(alphabet.size()))];
                code /= static_cast<Eigen::Index>(alphabet.size());
                x(k) = sym.value;
                lp += std::log(sym.probability);
            }
            outputs.col(j) = s.entries * x;
            log_prior(j) = lp;
        }
    }
    const Eigen::VectorXd output_norms = outputs.colwise().squaredNorm().transpose();
    std::vector<double> cumulative;
    double acc = 0.0;
    for (const auto& sym : alphabet) cumulative.push_back(acc += sym.probability);

    const double sigma = std::sqrt(sigma2);
    std::vector<double> contributions(n_samples);
    constexpr std::size_t chunk = 256;
    const std::size_t n_chunks = (n_samples + chunk - 1) / chunk;
    parallel_for(
        n_chunks,
        [&](std::size_t c) {
            Eigen::VectorXd x(K);
            Eigen::VectorXd noise(L);
            Eigen::VectorXd exponents(n_combos);
            std::uniform_real_distribution<double> uniform;
            std::normal_distribution<double> normal;
            const std::size_t end = std::min(n_samples, (c + 1) * chunk);
            for (std::size_t i = c * chunk; i < end; ++i) {
                std::mt19937_64 rng(derive_seed(seed, i));
                for (int k = 0; k < K; ++k) {
                    const double u = uniform(rng);
                    auto pos = std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin();
                    pos = std::min<std::ptrdiff_t>(pos, static_cast<std::ptrdiff_t>(alphabet.size()) - 1);
                    x(k) = alphabet[static_cast<std::size_t>(pos)].value;
                }
                for (int mu = 0; mu < L; ++mu) noise(mu) = normal(rng);
                const Eigen::VectorXd y = s.entries * x + sigma * noise;
                const double yy = y.squaredNorm();
                exponents.noalias() = outputs.transpose() * y;
                exponents = log_prior.array() - (yy - 2.0 * exponents.array() + output_norms.array()) / (2.0 * sigma2);
                const double lse =
                    numeric::log_sum_exp(std::span<const double>(exponents.data(), static_cast<std::size_t>(n_combos)));
                contributions[i] = (-0.5 * noise.squaredNorm() - lse) / K;
            }
        },
        workers);
    return detail::summarize(std::move(contributions));
}

/// Average of exact_mutual_information over independently drawn matrices.
/// The standard error is taken from the spread of the per-matrix values
/// (for a single matrix, from its own samples).
inline MiEstimate ensemble_mutual_information(SpreadingKind kind, int K, int L, const channel::InputPrior& prior,
                                              double sigma2, std::size_t n_matrices, std::size_t samples_per_matrix,
                                              std::uint64_t seed, unsigned workers = worker_count()) {
    if (n_matrices == 0) throw DomainError("ensemble_mutual_information: need at least one matrix");
    std::vector<double> per_matrix;
    MiEstimate single;
    for (std::size_t m = 0; m < n_matrices; ++m) {
        const auto s = gen_spreading(kind, derive_seed(seed, 2 * m), K, L);
        single = exact_mutual_information(s, prior, sigma2, samples_per_matrix, derive_seed(seed, 2 * m + 1), workers);
        per_matrix.push_back(single.value);
    }
    if (n_matrices == 1) return single;
    auto est = detail::summarize(std::move(per_matrix));
    est.n_samples = n_matrices * samples_per_matrix;
    return est;
}

/// Gaussian-input mutual information from the eigenvalues of S S^T:
/// (1/(2K)) sum log(1 + lambda / sigma2).
inline double gaussian_exact_mi(std::span<const double> gram_eigenvalues, int K, double sigma2) {
    if (!(sigma2 > 0.0)) throw DomainError("gaussian_exact_mi: sigma2 must be positive");
    double s = 0.0;
    for (double l : gram_eigenvalues) s += std::log1p(std::max(l, 0.0) / sigma2);
    return s / (2.0 * K);
}

/// (1/(2K)) log det(I + S S^T / sigma2) in nats per user.
inline double gaussian_exact_mi(const SpreadingMatrix& s, double sigma2) {
    if (!(sigma2 > 0.0)) throw DomainError("gaussian_exact_mi: sigma2 must be positive");
    const int L = s.L();
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(L, L);
    m.selfadjointView<Eigen::Lower>().rankUpdate(s.entries, 1.0 / sigma2);
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw NumericError("gaussian_exact_mi: Cholesky failed");
    const Eigen::MatrixXd& factor = llt.matrixLLT();
    double logdet = 0.0;
    for (int i = 0; i < L; ++i) logdet += 2.0 * std::log(factor(i, i));
    return logdet / (2.0 * s.K());
}

/// Eigenvalues of the L x L matrix S S^T, ascending.
inline std::vector<double> gram_eigenvalues(const SpreadingMatrix& s) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(s.L(), s.L());
    g.selfadjointView<Eigen::Lower>().rankUpdate(s.entries, 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericError("gram_eigenvalues: eigensolver failed");
    return {solver.eigenvalues().data(), solver.eigenvalues().data() + solver.eigenvalues().size()};
}

/// Text dump: "K <K> L <L> kind <kind> seed <seed>" then L rows of K values.
inline void write_matrix(std::ostream& out, const SpreadingMatrix& s) {
    const auto old = out.precision(17);
    out << "K " << s.K() << " L " << s.L() << " kind " << to_string(s.kind) << " seed " << s.seed << '\n';
    for (int mu = 0; mu < s.L(); ++mu) {
        for (int k = 0; k < s.K(); ++k) out << (k ? " " : "") << s.entries(mu, k);
        out << '\n';
    }
    out.precision(old);
}

inline SpreadingMatrix read_matrix(std::istream& in) {
    std::string kw_k, kw_l, kw_kind, kw_seed, kind;
    int K = 0;
    int L = 0;
    std::uint64_t seed = 0;
    if (!(in >> kw_k >> K >> kw_l >> L >> kw_kind >> kind >> kw_seed >> seed) || kw_k != "K" || kw_l != "L" ||
        kw_kind != "kind" || kw_seed != "seed" || K < 1 || L < 1) {
        throw DomainError("read_matrix: malformed header");
    }
    SpreadingMatrix s{Eigen::MatrixXd(L, K), parse_spreading_kind(kind), seed};
    for (int mu = 0; mu < L; ++mu) {
        for (int k = 0; k < K; ++k) {
            if (!(in >> s.entries(mu, k))) throw DomainError("read_matrix: truncated body");
        }
    }
    return s;
}

} // namespace cdma::montecarlo
