#pragma once

// Decoupled scalar AWGN channel u = x + n / sqrt(theta), n ~ N(0, 1).
//
// theta is the inverse noise variance. The input x follows an InputPrior
// with zero mean and unit variance.

#include "cdma/errors.hpp"
#include "cdma/numeric/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace cdma::channel {

enum class PriorKind { gaussian, binary, discrete };

struct Symbol {
    double value;
    double probability;
};

/// Tolerance on the zero-mean / unit-variance / unit-mass constraints.
inline constexpr double prior_tol = 1e-12;

class InputPrior {
public:
    static InputPrior gaussian() { return InputPrior(PriorKind::gaussian, {}); }

    /// p(x) = (delta(x - 1) + delta(x + 1)) / 2
    static InputPrior binary() { return InputPrior(PriorKind::binary, {{-1.0, 0.5}, {1.0, 0.5}}); }

    /// Alphabet that already has zero mean, unit variance and unit mass.
    static InputPrior discrete(std::vector<Symbol> alphabet) {
        validate(alphabet);
        return InputPrior(PriorKind::discrete, std::move(alphabet));
    }

    /// Rescales probabilities to unit mass, then shifts and scales the values
    /// to zero mean and unit variance.
    static InputPrior normalized_discrete(std::vector<Symbol> alphabet) {
        if (alphabet.empty()) throw DomainError("discrete prior: empty alphabet");
        double mass = 0.0;
        for (const Symbol& s : alphabet) {
            if (!(s.probability > 0.0) || !std::isfinite(s.probability) || !std::isfinite(s.value)) {
                throw DomainError("discrete prior: probabilities must be positive and values finite");
            }
            mass += s.probability;
        }
        double mean = 0.0;
        for (Symbol& s : alphabet) {
            s.probability /= mass;
            mean += s.probability * s.value;
        }
        double var = 0.0;
        for (const Symbol& s : alphabet) var += s.probability * (s.value - mean) * (s.value - mean);
        if (!(var > 1e-24)) {
            throw ConstraintViolation("unit-variance",
                                      "discrete prior concentrated on a single point cannot be normalized");
        }
        const double sd = std::sqrt(var);
        for (Symbol& s : alphabet) s.value = (s.value - mean) / sd;
        return discrete(std::move(alphabet));
    }

    [[nodiscard]] PriorKind kind() const { return kind_; }
    [[nodiscard]] bool is_discrete() const { return kind_ != PriorKind::gaussian; }
    [[nodiscard]] const std::vector<Symbol>& alphabet() const { return alphabet_; }

    [[nodiscard]] double max_abs() const {
        double m = 0.0;
        for (const Symbol& s : alphabet_) m = std::max(m, std::abs(s.value));
        return m;
    }

    /// Shannon entropy in nats (discrete priors only).
    [[nodiscard]] double entropy() const {
        if (!is_discrete()) throw DomainError("entropy: prior has no finite alphabet");
        double h = 0.0;
        for (const Symbol& s : alphabet_) h -= s.probability * std::log(s.probability);
        return h;
    }

    [[nodiscard]] bool symmetric() const {
        if (!is_discrete()) return true;
        for (const Symbol& s : alphabet_) {
            const bool mirrored = std::any_of(alphabet_.begin(), alphabet_.end(), [&](const Symbol& t) {
                return std::abs(t.value + s.value) <= 1e-12 && std::abs(t.probability - s.probability) <= 1e-12;
            });
            if (!mirrored) return false;
        }
        return true;
    }

    [[nodiscard]] std::string describe() const {
        switch (kind_) {
        case PriorKind::gaussian: return "gaussian";
        case PriorKind::binary: return "binary";
        case PriorKind::discrete: break;
        }
        std::ostringstream out;
        out.precision(17);
        out << "discrete:[";
        for (std::size_t i = 0; i < alphabet_.size(); ++i) {
            if (i) out << ",";
            out << "[" << alphabet_[i].value << "," << alphabet_[i].probability << "]";
        }
        out << "]";
        return out.str();
    }

private:
    InputPrior(PriorKind kind, std::vector<Symbol> alphabet) : kind_(kind), alphabet_(std::move(alphabet)) {}

    static void validate(const std::vector<Symbol>& alphabet) {
        if (alphabet.size() < 2) {
            throw ConstraintViolation("unit-variance", "discrete prior needs at least two symbols");
        }
        double mass = 0.0;
        double mean = 0.0;
        double second = 0.0;
        for (const Symbol& s : alphabet) {
            if (!(s.probability > 0.0) || !std::isfinite(s.value)) {
                throw DomainError("discrete prior: probabilities must be positive and values finite");
            }
            mass += s.probability;
            mean += s.probability * s.value;
            second += s.probability * s.value * s.value;
        }
        if (std::abs(mass - 1.0) > prior_tol) throw ConstraintViolation("unit-mass", "probabilities do not sum to 1");
        if (std::abs(mean) > prior_tol) throw ConstraintViolation("zero-mean", "prior mean is not 0");
        if (std::abs(second - mean * mean - 1.0) > prior_tol) {
            throw ConstraintViolation("unit-variance", "prior variance is not 1");
        }
    }

    PriorKind kind_;
    std::vector<Symbol> alphabet_;
};

namespace detail {

inline void require_positive_theta(double theta, const char* who) {
    if (!(theta > 0.0) || !std::isfinite(theta)) {
        std::ostringstream msg;
        msg << who << ": theta must be positive and finite, got " << theta;
        throw DomainError(msg.str());
    }
}

/// Posterior over the alphabet given u, computed in log domain.
struct Posterior {
    double log_evidence; // log sum_i p_i exp(-theta (u - x_i)^2 / 2)
    double mean;
    double variance;
};

inline Posterior posterior(const InputPrior& prior, double theta, double u) {
    const auto& alpha = prior.alphabet();
    double peak = -std::numeric_limits<double>::infinity();
    for (const Symbol& s : alpha) {
        const double d = u - s.value;
        peak = std::max(peak, std::log(s.probability) - 0.5 * theta * d * d);
    }
    double z = 0.0;
    double m1 = 0.0;
    for (const Symbol& s : alpha) {
        const double d = u - s.value;
        const double w = std::exp(std::log(s.probability) - 0.5 * theta * d * d - peak);
        z += w;
        m1 += w * s.value;
    }
    const double mean = m1 / z;
    double var = 0.0;
    for (const Symbol& s : alpha) {
        const double d = u - s.value;
        const double w = std::exp(std::log(s.probability) - 0.5 * theta * d * d - peak);
        var += w * (s.value - mean) * (s.value - mean);
    }
    return {peak + std::log(z), mean, var / z};
}

/// Integration range +-(max|x| + 10/sqrt(theta)) split at symbols and midpoints.
inline std::vector<double> output_breakpoints(const InputPrior& prior, double theta) {
    const double reach = prior.max_abs() + 10.0 / std::sqrt(theta);
    std::vector<double> pts{-reach, reach};
    const auto& alpha = prior.alphabet();
    for (const Symbol& s : alpha) pts.push_back(s.value);
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        for (std::size_t j = i + 1; j < alpha.size(); ++j) pts.push_back(0.5 * (alpha[i].value + alpha[j].value));
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end(), [](double a, double b) { return std::abs(a - b) < 1e-14; }),
              pts.end());
    return pts;
}

inline numeric::IntegrationOptions channel_quadrature() {
    numeric::IntegrationOptions opt;
    opt.rel_tol = 1e-13;
    return opt;
}

} // namespace detail

/// log p(u; theta).
inline double log_output_density(const InputPrior& prior, double theta, double u) {
    detail::require_positive_theta(theta, "output_density");
    if (prior.kind() == PriorKind::gaussian) {
        const double var = 1.0 + 1.0 / theta;
        return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * u * u / var;
    }
    return detail::posterior(prior, theta, u).log_evidence + 0.5 * std::log(theta / (2.0 * std::numbers::pi));
}

/// p(u; theta) = int sqrt(theta / 2 pi) exp(-theta (u - x)^2 / 2) p(x) dx.
inline double output_density(const InputPrior& prior, double theta, double u) {
    return std::exp(log_output_density(prior, theta, u));
}

/// Posterior-mean estimate <x> of the input given output u.
inline double posterior_mean(const InputPrior& prior, double theta, double u) {
    detail::require_positive_theta(theta, "posterior_mean");
    switch (prior.kind()) {
    case PriorKind::gaussian: return u * theta / (1.0 + theta);
    case PriorKind::binary: return std::tanh(theta * u);
    case PriorKind::discrete: break;
    }
    return detail::posterior(prior, theta, u).mean;
}

/// Minimum mean-square error E{(x - <x>)^2} at inverse noise theta >= 0.
///
/// For finite alphabets this integrates p(u) Var(x | u) over u, which has
/// no cancellation when the error is small (large theta).
inline double mmse(const InputPrior& prior, double theta) {
    if (!(theta >= 0.0) || !std::isfinite(theta)) throw DomainError("mmse: theta must be finite and >= 0");
    if (theta == 0.0) return 1.0;
    if (prior.kind() == PriorKind::gaussian) return 1.0 / (1.0 + theta);

    const double norm = 0.5 * std::log(theta / (2.0 * std::numbers::pi));
    auto integrand = [&](double u) {
        const auto post = detail::posterior(prior, theta, u);
        return std::exp(post.log_evidence + norm) * post.variance;
    };
    const auto pts = detail::output_breakpoints(prior, theta);
    const double value = numeric::integrate_pieces(integrand, pts, detail::channel_quadrature());
    return std::clamp(value, 0.0, 1.0);
}

/// Differential entropy of u, -int p(u) log p(u) du, in nats.
inline double output_entropy(const InputPrior& prior, double theta) {
    detail::require_positive_theta(theta, "output_entropy");
    if (prior.kind() == PriorKind::gaussian) {
        return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * (1.0 + 1.0 / theta));
    }
    auto integrand = [&](double u) {
        const double lp = log_output_density(prior, theta, u);
        const double p = std::exp(lp);
        return p > 0.0 ? -p * lp : 0.0;
    };
    const auto pts = detail::output_breakpoints(prior, theta);
    return numeric::integrate_pieces(integrand, pts, detail::channel_quadrature());
}

/// Input-output mutual information of the scalar channel in nats:
/// output entropy minus the Gaussian noise entropy (1/2) log(2 pi e / theta).
inline double scalar_mutual_information(const InputPrior& prior, double theta) {
    detail::require_positive_theta(theta, "scalar_mutual_information");
    return output_entropy(prior, theta) - 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e / theta);
}

} // namespace cdma::channel
