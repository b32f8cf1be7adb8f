#pragma once

// Large-system mutual information of a randomly spread CDMA channel.
//
// The replica-symmetric solution couples the scalar channel to the spectrum
// through the saddle-point pair
//
//   E     = mmse(theta)
//   theta = R(-E / sigma2) / sigma2
//
// and the per-user mutual information at a solution is
//
//   C = -theta E / 2 - G(-E / sigma2) / 2 - log(2 pi / theta) / 2 - 1/2 + h(u; theta)
//
// with h the output entropy of the scalar channel. The free energy differs
// from C by the constant (1 + log(2 pi sigma2)) / (2 beta). Everything is in nats.

#include "cdma/channel.hpp"
#include "cdma/errors.hpp"
#include "cdma/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <vector>

namespace cdma::replica {

struct SystemSpec {
    channel::InputPrior prior;
    spectra::EigenDistribution spectrum;
    double sigma2; ///< AWGN variance
};

struct SolverOptions {
    double damping = 0.5;
    double tol = 1e-12;          ///< on successive iterates, relative to max(1, theta)
    double accept_tol = 1e-10;   ///< on |theta - R(-E/sigma2)/sigma2| / max(1, theta)
    std::size_t max_iterations = 100000;
    std::vector<double> initial_theta_scales{1e-3, 1.0, 10.0, 100.0}; ///< times 1/sigma2
    double dedup_tol = 1e-8;
};

struct SaddleSolution {
    double E = 1.0;
    double theta = 0.0;
    std::size_t iterations = 0;
    double residual = 0.0;
    double free_energy = 0.0;
    double mutual_information = 0.0;
};

inline void validate(const SystemSpec& spec) {
    if (!(spec.sigma2 > 0.0) || !std::isfinite(spec.sigma2)) {
        std::ostringstream msg;
        msg << "system spec: sigma2 must be positive and finite, got " << spec.sigma2;
        throw DomainError(msg.str());
    }
}

/// Right-hand side of the theta equation evaluated at mmse(theta).
inline double saddle_map(const SystemSpec& spec, double theta) {
    const double E = channel::mmse(spec.prior, theta);
    return spectra::r_transform(spec.spectrum, -E / spec.sigma2) / spec.sigma2;
}

/// (1 + log(2 pi sigma2)) / (2 beta): the conditional output entropy per user.
inline double noise_entropy_per_user(const SystemSpec& spec) {
    return (1.0 + std::log(2.0 * std::numbers::pi * spec.sigma2)) / (2.0 * spec.spectrum.beta());
}

/// The mutual-information functional at arbitrary (E, theta).
inline double mutual_information_at(const SystemSpec& spec, double E, double theta) {
    validate(spec);
    if (!(E >= 0.0 && E <= 1.0)) throw DomainError("mutual_information_at: E must lie in [0, 1]");
    if (!(theta > 0.0) || !std::isfinite(theta)) throw DomainError("mutual_information_at: theta must be > 0");
    const double G = spectra::g_integral(spec.spectrum, -E / spec.sigma2);
    // -log(2 pi/theta)/2 - 1/2 + h(u) = h(u) - log(2 pi e / theta)/2
    return -0.5 * theta * E - 0.5 * G + channel::scalar_mutual_information(spec.prior, theta);
}

/// Replica free energy at (E, theta); not required to be a fixed point.
inline double free_energy(const SystemSpec& spec, double E, double theta) {
    return mutual_information_at(spec, E, theta) + noise_entropy_per_user(spec);
}

namespace detail {

struct StartTrace {
    double start;
    double last_theta;
    double last_step;
    std::size_t iterations;
};

} // namespace detail

/// All distinct fixed points reached by damped iteration from the configured
/// starts, sorted by free energy (then theta).
inline std::vector<SaddleSolution> solve_saddle(const SystemSpec& spec, const SolverOptions& options = {}) {
    validate(spec);
    if (!(options.damping > 0.0 && options.damping <= 1.0)) throw DomainError("solve_saddle: damping in (0, 1]");
    if (options.initial_theta_scales.empty()) throw DomainError("solve_saddle: no initial theta values");

    const double d = options.damping;
    std::vector<SaddleSolution> found;
    std::vector<detail::StartTrace> trace;

    for (double scale : options.initial_theta_scales) {
        const double start = scale / spec.sigma2;
        double theta = start;
        double step = 0.0;
        bool converged = false;
        std::size_t it = 0;
        while (it < options.max_iterations) {
            ++it;
            const double next = (1.0 - d) * theta + d * saddle_map(spec, theta);
            step = std::abs(next - theta);
            theta = next;
            if (!std::isfinite(theta) || theta <= 0.0) break;
            if (step <= options.tol * std::max(1.0, theta)) {
                converged = true;
                break;
            }
        }
        trace.push_back({start, theta, step, it});
        if (!converged) continue;

        SaddleSolution sol;
        sol.theta = theta;
        sol.E = channel::mmse(spec.prior, theta);
        sol.iterations = it;
        sol.residual = std::abs(spectra::r_transform(spec.spectrum, -sol.E / spec.sigma2) / spec.sigma2 - theta) /
                       std::max(1.0, theta);
        if (sol.residual > options.accept_tol) continue;

        const bool duplicate = std::any_of(found.begin(), found.end(), [&](const SaddleSolution& s) {
            return std::abs(s.theta - theta) < options.dedup_tol * std::max(1.0, s.theta);
        });
        if (duplicate) continue;
        found.push_back(sol);
    }

    if (found.empty()) {
        std::ostringstream msg;
        msg << "solve_saddle: no start converged (sigma2=" << spec.sigma2 << ");";
        for (const auto& t : trace) {
            msg << " [start " << t.start << " -> theta " << t.last_theta << ", step " << t.last_step << ", "
                << t.iterations << " iterations]";
        }
        throw NumericError(msg.str());
    }

    for (SaddleSolution& s : found) {
        s.mutual_information = mutual_information_at(spec, s.E, s.theta);
        s.free_energy = s.mutual_information + noise_entropy_per_user(spec);
    }
    std::sort(found.begin(), found.end(), [](const SaddleSolution& a, const SaddleSolution& b) {
        if (a.free_energy != b.free_energy) return a.free_energy < b.free_energy;
        return a.theta < b.theta;
    });
    return found;
}

/// Mutual information at the fixed point of least free energy.
inline SaddleSolution mutual_information(const SystemSpec& spec, const SolverOptions& options = {}) {
    return solve_saddle(spec, options).front();
}

} // namespace cdma::replica
