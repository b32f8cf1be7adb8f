#pragma once

// Grid certificates that the WBE spectrum dominates an admissible candidate
// spectrum in R-transform, Hilbert transform and mutual information.

#include "cdma/errors.hpp"
#include "cdma/numeric/quadrature.hpp"
#include "cdma/replica.hpp"
#include "cdma/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <vector>

namespace cdma::optimality {

inline constexpr double dominance_tol = 1e-9;
inline constexpr std::size_t points_per_decade = 200;
/// Right end of the R-transform grid, -1e-6.
inline constexpr double r_grid_right = 1e-6;

/// reference - candidate on a grid; reference is the WBE law of equal load.
struct DominanceReport {
    std::vector<double> grid;
    std::vector<double> candidate_values;
    std::vector<double> reference_values;
    double min_margin = std::numeric_limits<double>::infinity();
    bool dominated = true;
};

inline DominanceReport make_report(std::vector<double> grid, std::vector<double> candidate,
                                   std::vector<double> reference) {
    if (grid.size() != candidate.size() || grid.size() != reference.size()) {
        throw DomainError("make_report: grid and value lists must be aligned");
    }
    DominanceReport r{std::move(grid), std::move(candidate), std::move(reference)};
    for (std::size_t i = 0; i < r.grid.size(); ++i) {
        r.min_margin = std::min(r.min_margin, r.reference_values[i] - r.candidate_values[i]);
    }
    r.dominated = r.min_margin >= -dominance_tol;
    return r;
}

/// CSV: grid_point,candidate_value,reference_value,margin
inline void write_csv(std::ostream& out, const DominanceReport& report) {
    const auto old_precision = out.precision(12);
    out << "grid_point,candidate_value,reference_value,margin\n";
    for (std::size_t i = 0; i < report.grid.size(); ++i) {
        out << report.grid[i] << ',' << report.candidate_values[i] << ',' << report.reference_values[i] << ','
            << (report.reference_values[i] - report.candidate_values[i]) << '\n';
    }
    out.precision(old_precision);
}

/// Negative grid from -hi to -lo (hi > lo > 0), log-spaced at 200 points per decade.
inline std::vector<double> negative_log_grid(double lo, double hi) {
    if (!(lo > 0.0 && hi > lo)) throw DomainError("negative_log_grid: need 0 < lo < hi");
    const double decades = std::log10(hi / lo);
    const auto n = std::max<std::size_t>(points_per_decade,
                                         static_cast<std::size_t>(std::ceil(decades * points_per_decade)) + 1);
    return numeric::log_spaced(-hi, -lo, n);
}

/// R_WBE(z) - R_candidate(z) on an explicit z-grid (z <= 0).
inline DominanceReport r_dominance_on_grid(const spectra::EigenDistribution& candidate,
                                           std::span<const double> z_grid) {
    const auto reference = spectra::make_wbe_law(candidate.beta());
    std::vector<double> cand;
    std::vector<double> ref;
    cand.reserve(z_grid.size());
    ref.reserve(z_grid.size());
    for (double z : z_grid) {
        cand.push_back(spectra::r_transform(candidate, z));
        ref.push_back(spectra::r_transform(reference, z));
    }
    return make_report({z_grid.begin(), z_grid.end()}, std::move(cand), std::move(ref));
}

/// R-dominance over the interval relevant to a system: both the candidate's
/// and the WBE system's residual MMSE are solved, and the grid spans
/// (-max(E_candidate, E_wbe) / sigma2, -1e-6), covering either reading of
/// which system sets the interval.
struct RDominance {
    DominanceReport report;
    double candidate_E;
    double reference_E;
};

inline RDominance r_dominance(const replica::SystemSpec& candidate_system,
                              const replica::SolverOptions& options = {}) {
    const auto& candidate = candidate_system.spectrum;
    const replica::SystemSpec reference_system{candidate_system.prior, spectra::make_wbe_law(candidate.beta()),
                                               candidate_system.sigma2};
    const double e_cand = replica::mutual_information(candidate_system, options).E;
    const double e_ref = replica::mutual_information(reference_system, options).E;
    const double left = std::max(e_cand, e_ref) / candidate_system.sigma2;
    std::vector<double> grid = left > r_grid_right ? negative_log_grid(r_grid_right, left)
                                                   : std::vector<double>{-r_grid_right};
    return {r_dominance_on_grid(candidate, grid), e_cand, e_ref};
}

/// C_WBE(gamma) - C_candidate(gamma) for gamma below both supports.
inline DominanceReport hilbert_dominance(const spectra::EigenDistribution& candidate,
                                         std::span<const double> gamma_grid) {
    const auto reference = spectra::make_wbe_law(candidate.beta());
    const double bound = std::min(candidate.support_min(), reference.support_min());
    std::vector<double> cand;
    std::vector<double> ref;
    for (double g : gamma_grid) {
        if (!(g < bound)) {
            std::ostringstream msg;
            msg << "hilbert_dominance: grid point " << g << " not below support minimum " << bound;
            throw DomainError(msg.str());
        }
        cand.push_back(spectra::hilbert(candidate, g));
        ref.push_back(spectra::hilbert(reference, g));
    }
    return make_report({gamma_grid.begin(), gamma_grid.end()}, std::move(cand), std::move(ref));
}

/// 1/(gamma - lambda) minus its tangent line at lambda = beta. Never positive;
/// zero only at lambda = beta.
inline double tangent_gap(double gamma, double beta, double lambda) {
    if (!(gamma < 0.0) || !(lambda >= 0.0) || !std::isfinite(gamma) || !std::isfinite(lambda)) {
        throw DomainError("tangent_gap: need gamma < 0 <= lambda");
    }
    if (!(beta > 0.0)) throw DomainError("tangent_gap: beta must be positive");
    const double g = gamma - beta;
    const double tangent = 1.0 / g + (lambda - beta) / (g * g);
    return 1.0 / (gamma - lambda) - tangent;
}

/// Random admissible law: n_atoms pi-atoms with positive weights summing to 1
/// and positive locations rescaled so that the pi-mean is exactly beta.
inline spectra::EigenDistribution sample_candidate_spectrum(std::uint64_t seed, double beta, int n_atoms) {
    if (n_atoms < 2) throw DomainError("sample_candidate_spectrum: need at least 2 atoms");
    if (!(beta > 1.0)) throw DomainError("sample_candidate_spectrum: beta must exceed 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> weight_draw(0.05, 1.0);
    std::uniform_real_distribution<double> location_draw(0.0, 1.0);

    std::vector<spectra::Atom> atoms(static_cast<std::size_t>(n_atoms));
    double mass = 0.0;
    for (auto& a : atoms) {
        a.weight = weight_draw(rng);
        // Squaring spreads locations toward 0 so that small eigenvalues get exercised.
        const double u = location_draw(rng);
        a.location = 1e-3 + u * u;
        mass += a.weight;
    }
    double power = 0.0;
    for (auto& a : atoms) {
        a.weight /= mass;
        power += a.weight * a.location;
    }
    for (auto& a : atoms) a.location *= beta / power;
    return spectra::make_discrete_law(std::move(atoms), beta);
}

} // namespace cdma::optimality
