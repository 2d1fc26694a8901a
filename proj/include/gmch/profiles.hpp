#pragma once

// Peakon family a*exp(-|x - ct|), its speed-amplitude law, closed-form
// invariants, and smooth initial data obtained by mollifying the momentum
// density (which keeps y0 >= 0 by construction).

#include "gmch/coefficients.hpp"
#include "gmch/grid.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmch {

struct PeakonParams {
    unsigned n = 1;
    double a = 1.0;
    double c = 2.0 / 3.0;
};

/// kappa_n = (2n)!!/(2n+1)!!, from the exact rational.
inline double speed_factor_value(unsigned n) { return to_double(speed_factor(n)); }

inline double speed_from_amplitude(unsigned n, double a) {
    if (!(a > 0)) throw std::invalid_argument("amplitude must be positive");
    return speed_factor_value(n) * std::pow(a, 2.0 * n);
}

inline double amplitude_from_speed(unsigned n, double c) {
    if (!(c > 0)) throw std::invalid_argument("speed must be positive");
    return std::pow(c / speed_factor_value(n), 1.0 / (2.0 * n));
}

inline PeakonParams peakon_from_amplitude(unsigned n, double a) { return {n, a, speed_from_amplitude(n, a)}; }
inline PeakonParams peakon_from_speed(unsigned n, double c) { return {n, amplitude_from_speed(n, c), c}; }

inline double peakon_value(const PeakonParams& p, double t, double x) { return p.a * std::exp(-std::abs(x - p.c * t)); }

struct PeakonInvariants {
    double E = 0;
    double F = 0;
};

/// E = 2a^2, F = a^{2n+2} (2 - c_1)/(n+1).
inline PeakonInvariants peakon_closed_invariants(const PeakonParams& p) {
    const double two_minus_c1 = to_double(detail::peakon_F_factor(p.n));
    return {2.0 * p.a * p.a, std::pow(p.a, 2.0 * p.n + 2.0) * two_minus_c1 / (p.n + 1.0)};
}

/// F(peakon) (n+1)/a^{2n+2} as an exact rational.
inline Rational peakon_F_coefficient(unsigned n) { return detail::peakon_F_factor(n) / (n + 1); }

/// Sampled a*exp(-|x - shift|) with its exact one-sided derivative
/// (sign(0) = 0 at a node that lands on the crest).
inline GridFunction sampled_peakon(const PeakonParams& p, const GridSpec& g, double shift = 0.0) {
    std::vector<double> u(g.N), ux(g.N);
    for (std::size_t j = 0; j < g.N; ++j) {
        const double s = g.x(j) - shift;
        u[j] = p.a * std::exp(-std::abs(s));
        ux[j] = s > 0 ? -u[j] : (s < 0 ? u[j] : 0.0);
    }
    return GridFunction::with_derivative(g, std::move(u), std::move(ux));
}

enum class MollifierShape { gaussian, bump };

inline std::string to_string(MollifierShape s) { return s == MollifierShape::gaussian ? "gaussian" : "bump"; }

inline MollifierShape parse_mollifier_shape(const std::string& s) {
    if (s == "gaussian") return MollifierShape::gaussian;
    if (s == "bump") return MollifierShape::bump;
    throw std::invalid_argument("unknown mollifier shape: " + s);
}

struct MollifierSpec {
    double delta = 0.05;
    MollifierShape shape = MollifierShape::gaussian;
    double mass = 2.0;
};

namespace detail {

// Unnormalized profile: gaussian with standard deviation delta, or the
// C-infinity bump exp(-1/(1 - (x/delta)^2)) supported on |x| < delta.
inline double mollifier_shape(MollifierShape shape, double delta, double x) {
    const double s = x / delta;
    if (shape == MollifierShape::gaussian) return std::exp(-0.5 * s * s);
    if (std::abs(s) >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - s * s));
}

// Nonnegative samples of the mollifier centred at `center` (nearest periodic
// image), normalized so the trapezoid sum equals `mass`.
inline std::vector<double> mollifier_samples(const MollifierSpec& m, const GridSpec& g, double center) {
    std::vector<double> y(g.N);
    const double period = 2.0 * g.L;
    double sum = 0.0;
    for (std::size_t j = 0; j < g.N; ++j) {
        double d = g.x(j) - center;
        d -= period * std::round(d / period);
        y[j] = mollifier_shape(m.shape, m.delta, d);
        sum += y[j];
    }
    const double scale = m.mass / (sum * g.dx());
    for (auto& v : y) v *= scale;
    return y;
}

}  // namespace detail

/// ||u - a e^{-|x - xi|}||_{H^1}^2 = E(u) + 2a^2 - 4a u(xi) (Lemma-3.1 form).
inline double h1_distance_squared_identity(double E, double a, double u_at_xi) { return E + 2.0 * a * a - 4.0 * a * u_at_xi; }

struct InitialData {
    GridFunction u;
    double distance = 0;  ///< ||u0 - peakon||_{H^1} via the identity above
};

/// E(u) = int (u^2 + u_x^2), periodic trapezoid.
inline double energy_E(const GridFunction& f) {
    const auto& u = f.u();
    const auto& ux = f.ux();
    double s = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) s += u[j] * u[j] + ux[j] * ux[j];
    return s * f.spec().dx();
}

inline double distance_to_peakon(const GridFunction& u, const PeakonParams& p, double xi) {
    const double r = h1_distance_squared_identity(energy_E(u), p.a, u.at(xi));
    return std::sqrt(std::max(r, 0.0));
}

/// u0 = (1 - d^2)^{-1} y0 with y0 a sampled mollifier of mass 2a at `center`.
inline InitialData mollified_peakon(const PeakonParams& p, MollifierSpec m, const GridSpec& g, double center = 0.0) {
    if (!(m.delta >= 4.0 * g.dx()))
        throw std::invalid_argument("mollifier width below 4 grid spacings is unresolvable");
    m.mass = 2.0 * p.a;
    auto u = GridFunction::from_momentum(g, detail::mollifier_samples(m, g, center));
    const double d = distance_to_peakon(u, p, center);
    return {std::move(u), d};
}

/// Unit-height gaussian bump w used to perturb the momentum density.
struct BumpSpec {
    double center = 6.0;
    double width = 0.5;
};

/// u0 = (1 - d^2)^{-1}(y_moll + beta w), w >= 0, distance measured against
/// the unshifted peakon at the origin.
inline InitialData perturbed_initial_data(const PeakonParams& p, MollifierSpec m, double beta, const BumpSpec& bump,
                                          const GridSpec& g) {
    if (!(beta >= 0)) throw std::invalid_argument("bump amplitude must be nonnegative");
    if (!(m.delta >= 4.0 * g.dx()))
        throw std::invalid_argument("mollifier width below 4 grid spacings is unresolvable");
    m.mass = 2.0 * p.a;
    auto y = detail::mollifier_samples(m, g, 0.0);
    const double period = 2.0 * g.L;
    for (std::size_t j = 0; j < g.N; ++j) {
        double d = g.x(j) - bump.center;
        d -= period * std::round(d / period);
        y[j] += beta * std::exp(-0.5 * (d / bump.width) * (d / bump.width));
    }
    auto u = GridFunction::from_momentum(g, std::move(y));
    const double dist = distance_to_peakon(u, p, 0.0);
    return {std::move(u), dist};
}

/// Thrown when a requested perturbation size cannot be realized.
class TargetUnreachable : public std::runtime_error {
public:
    TargetUnreachable(const std::string& what, double floor) : std::runtime_error(what), floor_(floor) {}
    double floor() const { return floor_; }

private:
    double floor_;
};

struct TargetedData {
    InitialData data;
    double beta = 0;
};

/// Bisection on beta so that the achieved distance hits `target` to `tol`.
inline TargetedData perturb_to_target(const PeakonParams& p, const MollifierSpec& m, double target,
                                      const BumpSpec& bump, const GridSpec& g, double tol = 1e-9) {
    auto at = [&](double beta) { return perturbed_initial_data(p, m, beta, bump, g); };
    auto base = at(0.0);
    if (target < base.distance)
        throw TargetUnreachable("target distance " + std::to_string(target) + " is below the mollification floor " +
                                    std::to_string(base.distance),
                                base.distance);
    if (target - base.distance <= tol) return {std::move(base), 0.0};
    double lo = 0.0, hi = 1e-3 * p.a;
    auto probe = at(hi);
    for (int i = 0; probe.distance < target; ++i) {
        if (i > 200) throw TargetUnreachable("bump amplitude search diverged", base.distance);
        lo = hi;
        hi *= 2.0;
        probe = at(hi);
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        auto d = at(mid);
        if (std::abs(d.distance - target) <= tol) return {std::move(d), mid};
        (d.distance < target ? lo : hi) = mid;
    }
    auto d = at(0.5 * (lo + hi));
    return {std::move(d), 0.5 * (lo + hi)};
}

}  // namespace gmch
