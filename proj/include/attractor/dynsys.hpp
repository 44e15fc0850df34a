#pragma once

// Polynomial dynamical systems and semialgebraic domains, plus the three
// benchmark systems shipped with explicit scalings.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "attractor/poly.hpp"

namespace attractor {

struct DynamicalSystem {
    std::string name;
    std::vector<Polynomial> f;  // published right-hand sides, all of dimension n
    int n = 0;
    double scale = 1.0;       // state substitution x -> x/scale before use
    double time_scale = 1.0;  // multiplies f

    void validate() const {
        if (n < 1 || f.size() != static_cast<size_t>(n))
            throw std::invalid_argument("DynamicalSystem: field length must equal dimension");
        for (const auto& fi : f)
            if (fi.dimension() != n)
                throw std::invalid_argument("DynamicalSystem: component dimension mismatch");
        if (!(scale > 0.0) || !(time_scale > 0.0))
            throw std::invalid_argument("DynamicalSystem: scale and time_scale must be positive");
    }
};

/// Omega = { x : g(x) >= 0 }, with boundary { g = 0 }.  The box is what
/// rejection sampling draws from; it must contain Omega.
struct Domain {
    Polynomial g{1};
    std::vector<std::array<double, 2>> bounding_box;

    int dimension() const { return g.dimension(); }

    void validate() const {
        if (bounding_box.size() != static_cast<size_t>(g.dimension()))
            throw std::invalid_argument("Domain: bounding box rank != dimension");
        for (const auto& [lo, hi] : bounding_box)
            if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
                throw std::invalid_argument("Domain: malformed bounding box interval");
    }

    bool contains(std::span<const double> x) const { return g.evaluate(x) >= 0.0; }
};

/// Substitute x -> s*x: each coefficient picks up s^degree.
inline Polynomial substitute_scaling(const Polynomial& p, double s) {
    Polynomial r(p.dimension());
    for (const auto& [m, c] : p.terms()) r.add_term(m, c * std::pow(s, m.degree()));
    return r;
}

/// Rewrites the dynamics in units y = x/scale and applies the time scaling:
/// the returned field is time_scale * f(scale*y)/scale, with both factors
/// folded in (scale = time_scale = 1 afterwards).  The attractor of the
/// result is the original attractor divided by scale.
inline DynamicalSystem apply_scaling(const DynamicalSystem& sys) {
    sys.validate();
    DynamicalSystem out = sys;
    for (auto& fi : out.f) fi = substitute_scaling(fi, sys.scale) * (sys.time_scale / sys.scale);
    out.scale = 1.0;
    out.time_scale = 1.0;
    return out;
}

// ---------------------------------------------------------------------------
// Benchmarks
// ---------------------------------------------------------------------------

/// lorenz    classic (sigma, rho, beta) = (10, 28, 8/3) field; domain is the
///           ball of radius 3 and the dynamics are meant to be used with the
///           default state scale 25 so the attractor fits inside it.
/// vanderpol unit-coefficient oscillator; the domain is the annulus
///           0.45 <= |x| <= 1 (the origin is a repelling equilibrium and must
///           stay outside).  Default scale 3 puts the limit cycle, whose
///           radius spans [1.53, 2.83], in the middle of the annulus.
/// ahmadi7   seventh-degree planar field that is globally asymptotically
///           stable about the origin but admits no polynomial Lyapunov
///           function; shipped with time_scale 1000.
inline std::pair<DynamicalSystem, Domain> builtin_system(const std::string& name) {
    auto var = [](int n, int i) { return Polynomial::variable(n, i); };
    if (name == "lorenz") {
        const int n = 3;
        const double sigma = 10.0, rho = 28.0, beta = 8.0 / 3.0;
        Polynomial x1 = var(n, 0), x2 = var(n, 1), x3 = var(n, 2);
        DynamicalSystem sys;
        sys.name = name;
        sys.n = n;
        sys.f = {sigma * (x2 - x1), rho * x1 - x2 - x1 * x3, x1 * x2 - beta * x3};
        sys.scale = 25.0;
        const double R = 3.0;
        Domain dom;
        dom.g = Polynomial::constant(n, R * R) - x1.pow(2) - x2.pow(2) - x3.pow(2);
        dom.bounding_box = {{-R, R}, {-R, R}, {-R, R}};
        return {sys, dom};
    }
    if (name == "vanderpol") {
        const int n = 2;
        Polynomial x1 = var(n, 0), x2 = var(n, 1);
        DynamicalSystem sys;
        sys.name = name;
        sys.n = n;
        sys.f = {x2, (Polynomial::constant(n, 1.0) - x1.pow(2)) * x2 - x1};
        sys.scale = 3.0;
        const double R1 = 0.45, R2 = 1.0;
        Polynomial r2 = x1.pow(2) + x2.pow(2);
        Domain dom;
        dom.g = -1.0 * (Polynomial::constant(n, R1 * R1) - r2) *
                (Polynomial::constant(n, R2 * R2) - r2);
        dom.bounding_box = {{-R2, R2}, {-R2, R2}};
        return {sys, dom};
    }
    if (name == "ahmadi7") {
        const int n = 2;
        Polynomial x1 = var(n, 0), x2 = var(n, 1);
        Polynomial u = x1.pow(4) + 2.0 * x1.pow(2) * x2.pow(2) - x2.pow(4);
        Polynomial v = -x1.pow(4) + 2.0 * x1.pow(2) * x2.pow(2) + x2.pow(4);
        Polynomial r2 = x1.pow(2) + x2.pow(2);
        DynamicalSystem sys;
        sys.name = name;
        sys.n = n;
        sys.f = {-2.0 * x2 * v - 2.0 * x1 * r2 * u, 2.0 * x1 * u - 2.0 * x2 * r2 * v};
        sys.time_scale = 1000.0;
        const double R = 1.0;
        Domain dom;
        dom.g = Polynomial::constant(n, R * R) - r2;
        dom.bounding_box = {{-R, R}, {-R, R}};
        return {sys, dom};
    }
    throw std::invalid_argument("builtin_system: unknown name '" + name + "'");
}

/// The non-polynomial Lyapunov function (x1^4 + x2^4)/(x1^2 + x2^2)
/// associated with the ahmadi7 field, extended by 0 at the origin.
inline double ahmadi7_w(std::span<const double> x) {
    const double a = x[0], b = x[1];
    const double d = a * a + b * b;
    if (d == 0.0) return 0.0;
    return (a * a * a * a + b * b * b * b) / d;
}

inline std::array<double, 2> ahmadi7_grad_w(std::span<const double> x) {
    const double a = x[0], b = x[1];
    const double d = a * a + b * b;
    if (d == 0.0) return {0.0, 0.0};
    const double num = a * a * a * a + b * b * b * b;
    return {(4.0 * a * a * a * d - 2.0 * a * num) / (d * d),
            (4.0 * b * b * b * d - 2.0 * b * num) / (d * d)};
}

}  // namespace attractor
