#pragma once

// Quadrature and summation helpers shared by the spectral, channel and
// Monte Carlo code.

#include "cdma/errors.hpp"

#include <Eigen/Eigenvalues>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <vector>

namespace cdma::numeric {

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Golub-Welsch: eigen-decomposition of the Legendre Jacobi matrix.
inline GaussRule gauss_legendre(int n) {
    if (n < 1) throw DomainError("gauss_legendre: need at least one node");
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double off = k / std::sqrt(4.0 * k * k - 1.0);
        jacobi(k - 1, k) = off;
        jacobi(k, k - 1) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = solver.eigenvalues()(i);
        const double v0 = solver.eigenvectors()(0, i);
        rule.weights[i] = 2.0 * v0 * v0;
    }
    // Symmetrize to remove eigen-solver round-off.
    for (int i = 0; i < n / 2; ++i) {
        const int j = n - 1 - i;
        const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = rule.weights[j] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

/// Cached 16-point rule used for composite panels.
inline const GaussRule& gauss_legendre_16() {
    static const GaussRule rule = gauss_legendre(16);
    return rule;
}

/// Composite Gauss-Legendre: `panels` equal panels over [a, b], each with `rule`.
/// Calls sink(x, w) for every node.
template <class Sink>
void composite_nodes(double a, double b, int panels, const GaussRule& rule, Sink&& sink) {
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        const double mid = lo + 0.5 * h;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            sink(mid + 0.5 * h * rule.nodes[i], 0.5 * h * rule.weights[i]);
        }
    }
}

struct IntegrationOptions {
    double rel_tol = 1e-12;
    std::size_t max_intervals = 1000;
    /// Error estimates above fail_tol * |value| are reported as failures.
    double fail_tol = 1e-7;
};

namespace detail {

struct PieceResult {
    double value;
    double error;
};

template <class F>
double gsl_thunk(double x, void* params) {
    return (*static_cast<F*>(params))(x);
}

struct Workspace {
    static constexpr std::size_t limit = 2000;
    gsl_integration_workspace* ws = gsl_integration_workspace_alloc(limit);
    Workspace() { gsl_set_error_handler_off(); }
    ~Workspace() { gsl_integration_workspace_free(ws); }
    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;
};

inline gsl_integration_workspace* workspace() {
    thread_local Workspace w;
    return w.ws;
}

// GSL QAG with the 31-point Kronrod rule. Status codes are not fatal here:
// a roundoff or subdivision limit still returns the best estimate and its
// error, and the caller decides.
template <class F>
PieceResult gauss_kronrod_piece(F& f, double a, double b, const IntegrationOptions& opt) {
    if (a == b) return {0.0, 0.0};
    gsl_function g{&gsl_thunk<F>, &f};
    double value = 0.0;
    double error = 0.0;
    gsl_integration_qag(&g, a, b, 0.0, opt.rel_tol, std::min<std::size_t>(opt.max_intervals, Workspace::limit),
                        GSL_INTEG_GAUSS31, workspace(), &value, &error);
    return {value, error};
}

inline void check_result(double value, double error, double scale, double a, double b, const IntegrationOptions& opt) {
    if (!std::isfinite(value) || !std::isfinite(error) || error > opt.fail_tol * std::max(scale, 1e-300)) {
        std::ostringstream msg;
        msg << "adaptive quadrature on [" << a << ", " << b << "] failed: value=" << value << " error=" << error;
        throw NumericError(msg.str());
    }
}

} // namespace detail

/// Adaptive Gauss-Kronrod (31 points) on [a, b].
template <class F>
double integrate(F&& f, double a, double b, const IntegrationOptions& opt = {}) {
    const auto r = detail::gauss_kronrod_piece(f, a, b, opt);
    detail::check_result(r.value, r.error, std::abs(r.value), a, b, opt);
    return r.value;
}

/// Integrates over consecutive pieces [b0,b1], [b1,b2], ... of a sorted
/// breakpoint list. The failure test applies to the total, so a piece that
/// only carries a negligible tail cannot fail on its own.
template <class F>
double integrate_pieces(F&& f, std::span<const double> breakpoints, const IntegrationOptions& opt = {}) {
    if (breakpoints.size() < 2) return 0.0;
    double total = 0.0;
    double error = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        const auto r = detail::gauss_kronrod_piece(f, breakpoints[i], breakpoints[i + 1], opt);
        total += r.value;
        error += r.error;
        scale += std::abs(r.value);
    }
    detail::check_result(total, error, scale, breakpoints.front(), breakpoints.back(), opt);
    return total;
}

/// Pairwise (cascade) summation; O(eps log n) error growth.
inline double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

inline double log_sum_exp(std::span<const double> exponents) {
    if (exponents.empty()) return -std::numeric_limits<double>::infinity();
    const double peak = *std::max_element(exponents.begin(), exponents.end());
    if (!std::isfinite(peak)) return peak;
    double s = 0.0;
    for (double e : exponents) s += std::exp(e - peak);
    return peak + std::log(s);
}

/// n points from lo to hi inclusive, equally spaced in log|x| (lo, hi same sign).
inline std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
    if (n == 0) return {};
    if (n == 1) return {lo};
    if (lo == 0.0 || hi == 0.0 || (lo < 0) != (hi < 0)) {
        throw DomainError("log_spaced: endpoints must be non-zero with equal sign");
    }
    const double sign = lo < 0 ? -1.0 : 1.0;
    const double a = std::log(std::abs(lo));
    const double b = std::log(std::abs(hi));
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = sign * std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    out.front() = lo;
    out.back() = hi;
    return out;
}

inline std::vector<double> linear_spaced(double lo, double hi, std::size_t n) {
    if (n == 0) return {};
    if (n == 1) return {lo};
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    out.back() = hi;
    return out;
}

} // namespace cdma::numeric
