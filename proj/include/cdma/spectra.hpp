#pragma once

// Limiting eigenvalue laws of R = S^T S and their transforms.
//
// A law is a finite set of atoms plus an optional continuous part. The
// continuous part is discretized once, at construction, into weighted
// quadrature nodes, so every transform below is a weighted sum over
// (atoms + nodes):
//
//   hilbert(g)  = sum_i w_i / (g - l_i),        g below the support
//   R(z)        : hilbert(R(z) + 1/z) = z,      z <= 0
//   G(t)        = int_0^t R(z) dz
//
// Laws are immutable values; all functions here are pure.

#include "cdma/errors.hpp"
#include "cdma/numeric/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace cdma::spectra {

enum class LawTag { mp, wbe, generic };

inline const char* to_string(LawTag tag) {
    switch (tag) {
    case LawTag::mp: return "mp";
    case LawTag::wbe: return "wbe";
    case LawTag::generic: return "generic";
    }
    return "?";
}

/// Point mass: location lambda >= 0, weight in (0, 1].
struct Atom {
    double location;
    double weight;

    friend bool operator==(const Atom&, const Atom&) = default;
};

/// Tolerance on the mass and mean of a constructed law.
inline constexpr double construction_tol = 1e-10;
/// Tolerance applied to user-supplied pi-atoms before projection.
inline constexpr double pi_constraint_tol = 1e-8;

/// Piecewise-linear density tabulated on a uniform grid over [lo, hi];
/// zero outside the grid.
class TabulatedDensity {
public:
    TabulatedDensity(double lo, double hi, std::vector<double> values)
        : lo_(lo), hi_(hi), values_(std::move(values)) {
        if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi) || lo < 0.0) {
            throw DomainError("tabulated density: need 0 <= lo < hi");
        }
        if (values_.size() < 2) throw DomainError("tabulated density: need at least 2 points");
        for (double v : values_) {
            if (!(v >= 0.0) || !std::isfinite(v)) {
                throw DomainError("tabulated density: values must be finite and non-negative");
            }
        }
    }

    [[nodiscard]] double lo() const { return lo_; }
    [[nodiscard]] double hi() const { return hi_; }
    [[nodiscard]] std::span<const double> values() const { return values_; }
    [[nodiscard]] std::size_t cells() const { return values_.size() - 1; }
    [[nodiscard]] double cell_width() const { return (hi_ - lo_) / static_cast<double>(cells()); }

    [[nodiscard]] double operator()(double x) const {
        if (x < lo_ || x > hi_) return 0.0;
        const double pos = (x - lo_) / cell_width();
        const std::size_t i = std::min(static_cast<std::size_t>(pos), cells() - 1);
        const double frac = pos - static_cast<double>(i);
        return values_[i] + frac * (values_[i + 1] - values_[i]);
    }

    /// Exact integral of the interpolant over [lo, x].
    [[nodiscard]] double integral_to(double x) const {
        if (x <= lo_) return 0.0;
        x = std::min(x, hi_);
        const double h = cell_width();
        double total = 0.0;
        std::size_t i = 0;
        for (; i < cells() && lo_ + static_cast<double>(i + 1) * h <= x; ++i) {
            total += 0.5 * h * (values_[i] + values_[i + 1]);
        }
        if (i < cells()) {
            const double left = lo_ + static_cast<double>(i) * h;
            total += 0.5 * (x - left) * (values_[i] + (*this)(x));
        }
        return total;
    }

private:
    double lo_;
    double hi_;
    std::vector<double> values_;
};

class EigenDistribution;
EigenDistribution make_mp_law(double beta);
EigenDistribution make_wbe_law(double beta);
EigenDistribution make_discrete_law(std::vector<Atom> pi_atoms, double beta);
EigenDistribution make_tabulated_law(TabulatedDensity pi_density, double beta);

/// Limiting eigenvalue distribution rho(lambda) of S^T S at load beta = K/L.
class EigenDistribution {
public:
    [[nodiscard]] double beta() const { return beta_; }
    [[nodiscard]] LawTag tag() const { return tag_; }
    [[nodiscard]] std::span<const Atom> atoms() const { return atoms_; }
    /// Weighted quadrature nodes representing the continuous part.
    [[nodiscard]] std::span<const Atom> density_nodes() const { return nodes_; }
    [[nodiscard]] bool has_density() const { return !std::holds_alternative<std::monostate>(density_); }

    [[nodiscard]] double support_min() const { return support_min_; }
    [[nodiscard]] double support_max() const { return support_max_; }
    /// True when the infimum of the support carries a point mass.
    [[nodiscard]] bool atom_at_support_min() const {
        return std::any_of(atoms_.begin(), atoms_.end(),
                           [&](const Atom& a) { return a.location == support_min_; });
    }

    /// Sum of f over atoms and density nodes, i.e. the integral of f d(rho).
    template <class F>
    [[nodiscard]] double expect(F&& f) const {
        double s = 0.0;
        for (const Atom& a : atoms_) s += a.weight * f(a.location);
        for (const Atom& n : nodes_) s += n.weight * f(n.location);
        return s;
    }

    [[nodiscard]] double mass() const { return expect([](double) { return 1.0; }); }
    [[nodiscard]] double mean() const { return expect([](double l) { return l; }); }

    /// Density of the continuous part at x (0 where there is none).
    [[nodiscard]] double density(double x) const {
        if (const auto* mp = std::get_if<MpPart>(&density_)) {
            if (x <= mp->a || x >= mp->b) return 0.0;
            return std::sqrt((x - mp->a) * (mp->b - x)) / (2.0 * std::numbers::pi * beta_ * x);
        }
        if (const auto* tab = std::get_if<TabPart>(&density_)) {
            return tab->scale * tab->table(x);
        }
        return 0.0;
    }

    /// Cumulative distribution function F(x) = rho((-inf, x]).
    [[nodiscard]] double cdf(double x) const {
        double total = 0.0;
        for (const Atom& a : atoms_) {
            if (a.location <= x) total += a.weight;
        }
        if (const auto* mp = std::get_if<MpPart>(&density_)) {
            if (x >= mp->b) {
                total += mp->mass;
            } else if (x > mp->a) {
                const double ux = std::asin(std::sqrt((x - mp->a) / (mp->b - mp->a)));
                total += numeric::integrate([&](double u) { return mp_u_density(*mp, u); }, 0.0, ux);
            }
        } else if (const auto* tab = std::get_if<TabPart>(&density_)) {
            total += tab->scale * tab->table.integral_to(x);
        }
        return std::min(total, 1.0);
    }

    /// Same law with the closed-form fast paths disabled.
    [[nodiscard]] EigenDistribution as_generic() const {
        EigenDistribution copy = *this;
        copy.tag_ = LawTag::generic;
        return copy;
    }

    /// Hilbert transform at the infimum of the support when that limit is
    /// finite; -infinity otherwise.
    [[nodiscard]] double edge_hilbert() const {
        if (atom_at_support_min()) return -std::numeric_limits<double>::infinity();
        if (const auto* mp = std::get_if<MpPart>(&density_)) {
            // Density ~ lambda^{-1/2} at 0 when beta = 1: divergent.
            if (mp->a == 0.0) return -std::numeric_limits<double>::infinity();
        }
        if (const auto* tab = std::get_if<TabPart>(&density_)) {
            if (tab->table.values().front() > 0.0) return -std::numeric_limits<double>::infinity();
        }
        double s = 0.0;
        for (const Atom& a : atoms_) s += a.weight / (support_min_ - a.location);
        for (const Atom& n : nodes_) s += n.weight / (support_min_ - n.location);
        return s;
    }

    friend bool operator==(const EigenDistribution& x, const EigenDistribution& y) {
        return x.beta_ == y.beta_ && x.tag_ == y.tag_ && x.atoms_ == y.atoms_ && x.nodes_ == y.nodes_;
    }

private:
    struct MpPart {
        double a;
        double b;
        double mass;
    };
    struct TabPart {
        TabulatedDensity table;
        double scale;
    };

    EigenDistribution() = default;

    // MP density after lambda = a + (b - a) sin^2(u); smooth on [0, pi/2].
    [[nodiscard]] double mp_u_density(const MpPart& mp, double u) const {
        const double s = std::sin(u);
        const double c = std::cos(u);
        const double span = mp.b - mp.a;
        const double lambda = mp.a + span * s * s;
        if (lambda <= 0.0) return span * c * c / (std::numbers::pi * beta_); // a = 0, u -> 0 limit
        return span * span * s * s * c * c / (std::numbers::pi * beta_ * lambda);
    }

    void finalize_support() {
        support_min_ = std::numeric_limits<double>::infinity();
        support_max_ = -std::numeric_limits<double>::infinity();
        for (const Atom& a : atoms_) {
            support_min_ = std::min(support_min_, a.location);
            support_max_ = std::max(support_max_, a.location);
        }
        if (const auto* mp = std::get_if<MpPart>(&density_)) {
            support_min_ = std::min(support_min_, mp->a);
            support_max_ = std::max(support_max_, mp->b);
        } else if (const auto* tab = std::get_if<TabPart>(&density_)) {
            support_min_ = std::min(support_min_, tab->table.lo());
            support_max_ = std::max(support_max_, tab->table.hi());
        }
    }

    void check_invariants(const char* who) const {
        const double m0 = mass();
        const double m1 = mean();
        if (std::abs(m0 - 1.0) > construction_tol) {
            std::ostringstream msg;
            msg << who << ": total mass " << m0 << " differs from 1";
            throw ConstraintViolation("normalization", msg.str());
        }
        if (std::abs(m1 - 1.0) > construction_tol) {
            std::ostringstream msg;
            msg << who << ": mean eigenvalue " << m1 << " differs from 1";
            throw ConstraintViolation("power", msg.str());
        }
    }

    double beta_ = 1.0;
    LawTag tag_ = LawTag::generic;
    std::vector<Atom> atoms_;
    std::vector<Atom> nodes_;
    std::variant<std::monostate, MpPart, TabPart> density_;
    double support_min_ = 0.0;
    double support_max_ = 0.0;

    friend EigenDistribution make_mp_law(double beta);
    friend EigenDistribution make_wbe_law(double beta);
    friend EigenDistribution make_discrete_law(std::vector<Atom> pi_atoms, double beta);
    friend EigenDistribution make_tabulated_law(TabulatedDensity pi_density, double beta);
};

namespace detail {

inline constexpr int mp_panels = 128; // x 16 Gauss points = 2048 nodes

inline void require_overloaded(double beta, const char* who) {
    if (!(beta > 1.0) || !std::isfinite(beta)) {
        std::ostringstream msg;
        msg << who << ": load beta must exceed 1, got " << beta;
        throw DomainError(msg.str());
    }
}

} // namespace detail

/// Marcenko-Pastur law: atom (1 - 1/beta)^+ at 0 and density
/// sqrt((l - a)(b - l)) / (2 pi beta l) on [a, b], a,b = (1 -/+ sqrt(beta))^2.
inline EigenDistribution make_mp_law(double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta)) {
        throw DomainError("make_mp_law: beta must be positive and finite");
    }
    EigenDistribution law;
    law.beta_ = beta;
    law.tag_ = LawTag::mp;
    const double r = std::sqrt(beta);
    const double a = (1.0 - r) * (1.0 - r);
    const double b = (1.0 + r) * (1.0 + r);
    const double continuous_mass = beta > 1.0 ? 1.0 / beta : 1.0;
    if (beta > 1.0) law.atoms_.push_back({0.0, 1.0 - 1.0 / beta});
    law.density_ = EigenDistribution::MpPart{a, b, continuous_mass};
    const auto& mp = std::get<EigenDistribution::MpPart>(law.density_);

    // Panels in u are graded quadratically toward the lower edge, where
    // 1 / (gamma - lambda) sharpens as gamma approaches a from below.
    law.nodes_.reserve(detail::mp_panels * 16);
    const double span = mp.b - mp.a;
    for (int p = 0; p < detail::mp_panels; ++p) {
        const double t0 = static_cast<double>(p) / detail::mp_panels;
        const double t1 = static_cast<double>(p + 1) / detail::mp_panels;
        const double u0 = 0.5 * std::numbers::pi * t0 * t0;
        const double u1 = 0.5 * std::numbers::pi * t1 * t1;
        numeric::composite_nodes(u0, u1, 1, numeric::gauss_legendre_16(), [&](double u, double w) {
            const double s = std::sin(u);
            const double lambda = mp.a + span * s * s;
            law.nodes_.push_back({lambda, w * law.mp_u_density(mp, u)});
        });
    }
    law.finalize_support();
    law.check_invariants("make_mp_law");
    return law;
}

/// Welch-bound-equality law: atoms (0, 1 - 1/beta) and (beta, 1/beta).
inline EigenDistribution make_wbe_law(double beta) {
    detail::require_overloaded(beta, "make_wbe_law");
    EigenDistribution law;
    law.beta_ = beta;
    law.tag_ = LawTag::wbe;
    law.atoms_ = {{0.0, 1.0 - 1.0 / beta}, {beta, 1.0 / beta}};
    law.finalize_support();
    law.check_invariants("make_wbe_law");
    return law;
}

/// rho = (1 - 1/beta) delta_0 + (1/beta) pi, with pi given by point masses
/// (beta = 1 gives rho = pi, the orthogonal case). pi must have unit mass and mean beta (to pi_constraint_tol); residual
/// deviations below that are projected away before the law is built.
inline EigenDistribution make_discrete_law(std::vector<Atom> pi_atoms, double beta) {
    if (!(beta >= 1.0) || !std::isfinite(beta)) {
        std::ostringstream msg;
        msg << "make_discrete_law: load beta must be >= 1, got " << beta;
        throw DomainError(msg.str());
    }
    if (pi_atoms.empty()) throw DomainError("make_discrete_law: no pi-atoms given");
    double mass = 0.0;
    double power = 0.0;
    for (const Atom& a : pi_atoms) {
        if (!(a.location >= 0.0) || !std::isfinite(a.location)) {
            throw DomainError("make_discrete_law: atom locations must be finite and >= 0");
        }
        if (!(a.weight > 0.0 && a.weight <= 1.0)) {
            throw DomainError("make_discrete_law: atom weights must lie in (0, 1]");
        }
        mass += a.weight;
        power += a.weight * a.location;
    }
    if (std::abs(mass - 1.0) > pi_constraint_tol) {
        std::ostringstream msg;
        msg << "pi-atom weights sum to " << mass << ", expected 1";
        throw ConstraintViolation("pi-normalization", msg.str());
    }
    if (std::abs(power - beta) > pi_constraint_tol) {
        std::ostringstream msg;
        msg << "pi-mean is " << power << ", expected beta = " << beta;
        throw ConstraintViolation("pi-power", msg.str());
    }
    const bool all_at_beta = std::all_of(pi_atoms.begin(), pi_atoms.end(), [&](const Atom& a) {
        return std::abs(a.location - beta) <= 1e-12 * beta;
    });
    if (all_at_beta && beta > 1.0) return make_wbe_law(beta);

    for (Atom& a : pi_atoms) a.weight /= mass;
    const double scale = beta / (power / mass);
    EigenDistribution law;
    law.beta_ = beta;
    law.tag_ = LawTag::generic;
    if (beta > 1.0) law.atoms_.push_back({0.0, 1.0 - 1.0 / beta});
    for (const Atom& a : pi_atoms) law.atoms_.push_back({a.location * scale, a.weight / beta});
    law.finalize_support();
    law.check_invariants("make_discrete_law");
    return law;
}

/// rho = (1 - 1/beta) delta_0 + (1/beta) pi with a tabulated pi density.
/// The table must integrate to 1 with mean beta under linear interpolation.
inline EigenDistribution make_tabulated_law(TabulatedDensity pi_density, double beta) {
    detail::require_overloaded(beta, "make_tabulated_law");
    EigenDistribution law;
    law.beta_ = beta;
    law.tag_ = LawTag::generic;
    law.atoms_.push_back({0.0, 1.0 - 1.0 / beta});

    // At least 2048 panels, each inside one table cell; 4 Gauss points per panel.
    static const numeric::GaussRule rule = numeric::gauss_legendre(4);
    const std::size_t per_cell = std::max<std::size_t>(1, (2048 + pi_density.cells() - 1) / pi_density.cells());
    const double h = pi_density.cell_width();
    for (std::size_t c = 0; c < pi_density.cells(); ++c) {
        const double left = pi_density.lo() + static_cast<double>(c) * h;
        numeric::composite_nodes(left, left + h, static_cast<int>(per_cell), rule, [&](double x, double w) {
            const double v = pi_density(x);
            if (v > 0.0) law.nodes_.push_back({x, w * v / beta});
        });
    }
    law.density_ = EigenDistribution::TabPart{std::move(pi_density), 1.0 / beta};
    law.finalize_support();
    law.check_invariants("make_tabulated_law");
    return law;
}

/// Hilbert transform C(gamma) = int rho(l) / (gamma - l) dl for gamma below the support.
inline double hilbert(const EigenDistribution& dist, double gamma) {
    if (!std::isfinite(gamma) || !(gamma < dist.support_min())) {
        std::ostringstream msg;
        msg << "hilbert: gamma = " << gamma << " must lie strictly below the support minimum "
            << dist.support_min();
        throw DomainError(msg.str());
    }
    return dist.expect([gamma](double l) { return 1.0 / (gamma - l); });
}

/// Derivative of the Hilbert transform, -int rho(l) / (gamma - l)^2 dl.
inline double hilbert_derivative(const EigenDistribution& dist, double gamma) {
    if (!std::isfinite(gamma) || !(gamma < dist.support_min())) {
        throw DomainError("hilbert_derivative: gamma must lie strictly below the support");
    }
    return -dist.expect([gamma](double l) { return 1.0 / ((gamma - l) * (gamma - l)); });
}

/// z_min = lim C(gamma) as gamma rises to the support minimum. The
/// R-transform is defined on (z_min, 0].
inline double z_min(const EigenDistribution& dist) { return dist.edge_hilbert(); }

namespace detail {

inline double r_transform_closed_mp(double beta, double z) { return 1.0 / (1.0 - beta * z); }

inline double r_transform_closed_wbe(double beta, double z) {
    const double bz = beta * z - 1.0;
    return 2.0 / (1.0 - beta * z + std::sqrt(bz * bz + 4.0 * z));
}

// Solves C(gamma) = z for R = gamma - 1/z. With w = R the defining relation
// becomes psi(w) = sum_i rho_i (w - l_i) / (1 + z (w - l_i)) = 0, which is
// increasing in w on (0, l_min + 1/|z|) and free of the cancellation in
// gamma - 1/z.
inline double r_transform_inverted(const EigenDistribution& dist, double z) {
    const double zlim = z_min(dist);
    if (!(z > zlim)) {
        std::ostringstream msg;
        msg << "r_transform: z = " << z << " outside (z_min, 0) with z_min = " << zlim;
        throw DomainError(msg.str());
    }
    auto psi = [&](double w) {
        return dist.expect([&](double l) {
            const double d = w - l;
            return d / (1.0 + z * d);
        });
    };
    auto psi_prime = [&](double w) {
        return dist.expect([&](double l) {
            const double den = 1.0 + z * (w - l);
            return 1.0 / (den * den);
        });
    };

    double lo = 0.0;
    if (!(psi(lo) < 0.0)) throw NumericError("r_transform: degenerate law (all mass at 0)");
    const double cap = dist.support_min() + 1.0 / std::abs(z);
    double delta = 0.5 * cap;
    double hi = cap - delta;
    // Every term is positive once w exceeds the support, so for small |z| the
    // root lies far below the cap.
    if (const double above = dist.support_max() + 1.0; above < cap && psi(above) > 0.0) hi = above;
    int shrink = 0;
    while (!(psi(hi) > 0.0)) {
        lo = std::max(lo, hi);
        delta *= 0.5;
        hi = cap - delta;
        if (++shrink > 200 || !(hi > lo)) {
            std::ostringstream msg;
            msg << "r_transform: could not bracket root for z = " << z << " (cap " << cap << ")";
            throw DomainError(msg.str());
        }
    }

    constexpr int max_bisections = 400;
    int it = 0;
    while (hi - lo > 1e-15 * std::max(1.0, std::abs(lo))) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (psi(mid) < 0.0 ? lo : hi) = mid;
        if (++it > max_bisections) {
            std::ostringstream msg;
            msg << "r_transform: bisection did not converge for z = " << z << ", bracket [" << lo << ", "
                << hi << "]";
            throw NumericError(msg.str());
        }
    }
    double w = 0.5 * (lo + hi);
    for (int k = 0; k < 2; ++k) {
        const double step = psi(w) / psi_prime(w);
        const double next = w - step;
        if (next >= lo && next <= hi && std::isfinite(next)) w = next;
    }
    return w;
}

} // namespace detail

/// R-transform R(z), z <= 0; R(0) is the mean of the law.
inline double r_transform(const EigenDistribution& dist, double z) {
    if (!std::isfinite(z) || z > 0.0) {
        std::ostringstream msg;
        msg << "r_transform: z = " << z << " must be <= 0";
        throw DomainError(msg.str());
    }
    if (z == 0.0) return dist.mean();
    switch (dist.tag()) {
    case LawTag::mp: return detail::r_transform_closed_mp(dist.beta(), z);
    case LawTag::wbe: return detail::r_transform_closed_wbe(dist.beta(), z);
    case LawTag::generic: break;
    }
    return detail::r_transform_inverted(dist, z);
}

/// G(t) = int_0^t R(z) dz for t <= 0 (non-positive).
inline double g_integral(const EigenDistribution& dist, double t) {
    if (!std::isfinite(t) || t > 0.0) throw DomainError("g_integral: t must be <= 0");
    if (t == 0.0) return 0.0;
    return -numeric::integrate([&](double z) { return r_transform(dist, z); }, t, 0.0);
}

} // namespace cdma::spectra
