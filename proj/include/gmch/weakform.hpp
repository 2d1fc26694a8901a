#pragma once

// The exact peakon as a weak solution, checked on the line by adaptive
// quadrature: kernel convolutions of the peakon densities and their closed
// forms, the pointwise cancellation between the local and nonlocal parts, and
// the full space-time pairing against smooth compactly supported test
// functions. Nothing here touches the periodic grid.

#include "gmch/coefficients.hpp"
#include "gmch/profiles.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <ostream>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmch {

struct QuadratureSpec {
    double absolute_tol = 1e-14;
    double relative_tol = 1e-13;
    unsigned max_subdivisions = 2000;  ///< interval bisections allowed per integral

    void validate() const {
        if (!(absolute_tol >= 1e-14 && relative_tol >= 1e-14))
            throw std::invalid_argument("quadrature tolerances must be >= 1e-14");
        if (max_subdivisions == 0) throw std::invalid_argument("max_subdivisions must be positive");
    }
};

/// Requested tolerance not reached within max_subdivisions.
class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, double achieved) : std::runtime_error(what), achieved_(achieved) {}
    double achieved() const { return achieved_; }

private:
    double achieved_;
};

/// Value with the accumulated error estimate of the quadrature behind it.
struct Estimate {
    double value = 0;
    double error = 0;
};

namespace detail {

// Global adaptive Gauss-Kronrod: repeatedly bisect the interval with the
// largest error estimate until the summed estimate meets the tolerance,
// relative to the integral of |f|. A wide interval whose mass sits in a small
// part of it can fool a single rule, so callers without breakpoints start from
// a uniform partition and enable the endpoint guard below.
template <class F>
Estimate integrate(F f, double lo, double hi, const QuadratureSpec& q, unsigned initial_pieces = 1,
                   bool endpoint_guard = false) {
    if (!(hi > lo)) return {};
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    struct Piece {
        double a, b, value, error, l1;
        bool operator<(const Piece& o) const { return error < o.error; }
    };
    // A jump lying between an endpoint and the outermost node is invisible to
    // both rules, and bisection keeps it there. Compare f at each endpoint with
    // the line through the two outermost nodes and charge a jump-like mismatch
    // over the unsampled gap.
    const auto& nodes = GK::abscissa();
    const double x1 = nodes[nodes.size() - 1], x2 = nodes[nodes.size() - 2];
    auto rule = [&](double a, double b) {
        Piece p{a, b, 0, 0, 0};
        p.value = GK::integrate(f, a, b, 0, 0.0, &p.error, &p.l1);
        const double h = 0.5 * (b - a), m = 0.5 * (a + b);
        p.error *= h;  // the single-rule estimate refers to [-1, 1]
        for (double side : {-1.0, 1.0}) {
            if (!endpoint_guard) break;
            const double f0 = f(m + side * h), f1 = f(m + side * x1 * h), f2 = f(m + side * x2 * h);
            const double mismatch = std::abs(f0 - (f1 + (f1 - f2) * (1 - x1) / (x1 - x2)));
            if (mismatch > 1e-3 * std::max({std::abs(f0), std::abs(f1), std::abs(f2)}))
                p.error += mismatch * (1 - x1) * h;
        }
        return p;
    };
    std::priority_queue<Piece> heap;
    double value = 0.0, error = 0.0, l1 = 0.0;
    for (unsigned i = 0; i < initial_pieces; ++i) {
        const double a = lo + (hi - lo) * i / initial_pieces;
        const double b = i + 1 == initial_pieces ? hi : lo + (hi - lo) * (i + 1) / initial_pieces;
        heap.push(rule(a, b));
    }
    for (auto copy = heap; !copy.empty(); copy.pop()) {
        value += copy.top().value;
        error += copy.top().error;
        l1 += copy.top().l1;
    }
    auto allowed = [&] { return std::max(q.absolute_tol, q.relative_tol * l1); };
    unsigned splits = 0;
    while (error > allowed() && splits < q.max_subdivisions) {
        const Piece worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) break;  // interval at machine resolution
        const Piece left = rule(worst.a, mid), right = rule(mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        l1 += left.l1 + right.l1 - worst.l1;
        heap.push(left);
        heap.push(right);
        ++splits;
    }
    // Re-sum to shed the drift of the incremental updates.
    value = error = l1 = 0.0;
    for (; !heap.empty(); heap.pop()) {
        value += heap.top().value;
        error += heap.top().error;
        l1 += heap.top().l1;
    }
    if (!(error <= allowed()))
        throw QuadratureError("quadrature on [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                  "] reached error " + std::to_string(error) + " > " + std::to_string(allowed()),
                              error);
    return {value, error};
}

inline double sign0(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

// The peakon and its densities decay like e^{-|x-ct|}; beyond this distance
// every integrand is below e^{-60} relative.
inline constexpr double kWindow = 60.0;

}  // namespace detail

/// Peakon densities entering the nonlocal terms.
enum class PeakonDensity {
    bracket,      ///< sum b_k phi^{2n-2k+1} phi_x^{2k} + (2n + S1)/(2n+1) phi^{2n+1}
    nonlocal_B,   ///< 2n/(2n+1) phi^{2n+1} + sum b_k phi^{2n-2k+1} phi_x^{2k}
    nonlocal_C,   ///< sum a_k phi^{2n-2k} phi_x^{2k+1}
};

/// Double-precision copies of the binomial sums for one n.
struct PeakonSums {
    unsigned n = 0;
    std::vector<double> a, b;  ///< a_k = (-1)^{k+1} C(n,k)/(2k+1), b_k = (-1)^{k-1} C(n,k)/(2k-1); index k
    double S1 = 0;             ///< sum a_k
    double S2 = 0;             ///< sum b_k
    double closed_factor = 0;  ///< [(2n + S1) + (2n+1) S2] / (4n(n+1)), exact then rounded

    explicit PeakonSums(unsigned n_) : n(n_), a(n_ + 1, 0.0), b(n_ + 1, 0.0) {
        if (n == 0) throw std::invalid_argument("n must be >= 1");
        for (unsigned k = 1; k <= n; ++k) {
            a[k] = to_double(Rational(minus_one_pow(k + 1) * BigInt(binomial(n, k)), 2 * k + 1));
            b[k] = to_double(Rational(minus_one_pow(k - 1) * BigInt(binomial(n, k)), 2 * k - 1));
        }
        const Rational s1 = detail::transport_sum(n, n);
        const Rational s2 = detail::odd_denominator_sum(n);
        S1 = to_double(s1);
        S2 = to_double(s2);
        closed_factor = to_double(Rational(1, 4 * n * (n + 1)) * ((2 * n + s1) + (2 * n + 1) * s2));
    }
};

/// Density value at (t, y), with phi_x = -sign(y - ct) phi and sign(0) = 0.
inline double peakon_density(PeakonDensity which, const PeakonParams& p, const PeakonSums& s, double t, double y) {
    const unsigned n = p.n;
    const double phi = peakon_value(p, t, y);
    const double phix = -detail::sign0(y - p.c * t) * phi;
    double acc = 0.0;
    switch (which) {
        case PeakonDensity::bracket:
        case PeakonDensity::nonlocal_B:
            for (unsigned k = 1; k <= n; ++k)
                acc += s.b[k] * std::pow(phi, 2.0 * (n - k) + 1) * std::pow(phix, 2.0 * k);
            acc += (which == PeakonDensity::bracket ? (2.0 * n + s.S1) : 2.0 * n) / (2.0 * n + 1) *
                   std::pow(phi, 2.0 * n + 1);
            return acc;
        case PeakonDensity::nonlocal_C:
            for (unsigned k = 1; k <= n; ++k)
                acc += s.a[k] * std::pow(phi, 2.0 * (n - k)) * std::pow(phix, 2.0 * k + 1);
            return acc;
    }
    return acc;
}

/// Kernel p(z) = e^{-|z|}/2 or its derivative -sign(z) e^{-|z|}/2.
inline double line_kernel(bool derivative, double z) {
    const double e = 0.5 * std::exp(-std::abs(z));
    return derivative ? -detail::sign0(z) * e : e;
}

namespace detail {

inline std::array<Estimate, 3> convolution_pieces(bool kernel_derivative, PeakonDensity which, double x, double t,
                                                  const PeakonParams& p, const PeakonSums& s, const QuadratureSpec& q) {
    const double ct = p.c * t;
    const double lo = std::min(ct - kWindow, x - kWindow);
    const double hi = std::max(ct + kWindow, x + kWindow);
    const double m1 = std::min(ct, x), m2 = std::max(ct, x);
    auto f = [&](double y) { return line_kernel(kernel_derivative, x - y) * peakon_density(which, p, s, t, y); };
    return {integrate(f, lo, m1, q), integrate(f, m1, m2, q), integrate(f, m2, hi, q)};
}

inline Estimate convolution(bool kernel_derivative, PeakonDensity which, double x, double t, const PeakonParams& p,
                            const PeakonSums& s, const QuadratureSpec& q) {
    Estimate total;
    for (const auto& e : convolution_pieces(kernel_derivative, which, x, t, p, s, q)) {
        total.value += e.value;
        total.error += e.error;
    }
    return total;
}

}  // namespace detail

/// The three pieces of the convolution integral, split at ct and at x (in
/// increasing order of their left endpoints), truncated to |y - ct| <= 60.
inline std::array<Estimate, 3> line_convolution_pieces(bool kernel_derivative, PeakonDensity which, double x, double t,
                                                       const PeakonParams& p, const QuadratureSpec& q) {
    q.validate();
    return detail::convolution_pieces(kernel_derivative, which, x, t, p, PeakonSums(p.n), q);
}

/// p * f or (d_x p) * f at (t, x) for a peakon density f.
inline Estimate line_convolution_estimate(bool kernel_derivative, PeakonDensity which, double x, double t,
                                          const PeakonParams& p, const QuadratureSpec& q) {
    q.validate();
    return detail::convolution(kernel_derivative, which, x, t, p, PeakonSums(p.n), q);
}

inline double line_convolution(bool kernel_derivative, PeakonDensity which, double x, double t, const PeakonParams& p,
                               const QuadratureSpec& q) {
    return line_convolution_estimate(kernel_derivative, which, x, t, p, q).value;
}

/// The same integral in a single adaptive call over the whole window, no
/// splitting at the kinks.
inline Estimate line_convolution_unsplit(bool kernel_derivative, PeakonDensity which, double x, double t,
                                         const PeakonParams& p, const QuadratureSpec& q) {
    q.validate();
    const PeakonSums s(p.n);
    const double ct = p.c * t;
    const double lo = std::min(ct - detail::kWindow, x - detail::kWindow);
    const double hi = std::max(ct + detail::kWindow, x + detail::kWindow);
    auto f = [&](double y) { return line_kernel(kernel_derivative, x - y) * peakon_density(which, p, s, t, y); };
    return detail::integrate(f, lo, hi, q, 64, true);
}

/// Closed form of (d_x p) * bracket:
///   x > ct:  -K a^{2n+1} (e^{ct-x} - e^{(2n+1)(ct-x)})
///   x <= ct: +K a^{2n+1} (e^{x-ct} - e^{(2n+1)(x-ct)})
/// with K = [(2n + S1) + (2n+1) S2] / (4n(n+1)).
inline double convolution_closed_form(const PeakonParams& p, double t, double x) {
    const PeakonSums s(p.n);
    const double m = 2.0 * p.n + 1;
    const double z = x - p.c * t;
    const double amp = s.closed_factor * std::pow(p.a, m);
    if (z > 0) return -amp * (std::exp(-z) - std::exp(m * -z));
    return amp * (std::exp(z) - std::exp(m * z));
}

/// sign(x-ct) phi [c - (1 - S1) phi^{2n}]: the local part of the pointwise
/// weak-solution identity.
inline double peakon_local_term(const PeakonParams& p, double t, double x) {
    const PeakonSums s(p.n);
    const double phi = peakon_value(p, t, x);
    return detail::sign0(x - p.c * t) * phi * (p.c - (1.0 - s.S1) * std::pow(phi, 2.0 * p.n));
}

struct ResidualSample {
    unsigned n = 0;
    double a = 0, t = 0, x = 0;
    double residual = 0;
    double tolerance_achieved = 0;  ///< quadrature error estimate
};

/// Local term plus (d_x p) * bracket by quadrature; zero for the peakon.
inline ResidualSample peakon_residual_sample(const PeakonParams& p, double t, double x, const QuadratureSpec& q) {
    const auto conv = line_convolution_estimate(true, PeakonDensity::bracket, x, t, p, q);
    return {p.n, p.a, t, x, peakon_local_term(p, t, x) + conv.value, conv.error};
}

inline double peakon_pointwise_residual(const PeakonParams& p, double t, double x, const QuadratureSpec& q) {
    return peakon_residual_sample(p, t, x, q).residual;
}

/// The speed-balance identity [(2n + S1) + (2n+1) S2]/(4n(n+1)) = 1 - S1, in
/// exact arithmetic for 1..n.
inline Certificate verify_speed_balance(unsigned n) {
    for (auto& cert : verify_identities(n))
        if (cert.id == IdentityId::speed_balance) return cert;
    throw std::logic_error("speed-balance certificate missing");
}

inline void write_residual_csv(std::ostream& os, const std::vector<ResidualSample>& rows) {
    os << "n,a,t,x,residual,tolerance_achieved\n";
    const auto old = os.precision(17);
    for (const auto& r : rows) os << r.n << ',' << r.a << ',' << r.t << ',' << r.x << ',' << r.residual << ',' << r.tolerance_achieved << '\n';
    os.precision(old);
}

// ---------------------------------------------------------------------------
// Test functions and the space-time pairing.

enum class BumpKind { gaussian_bump, compact_bump };

inline std::string to_string(BumpKind k) { return k == BumpKind::gaussian_bump ? "gaussian_bump" : "compact_bump"; }

/// One-dimensional profile: exp(-z^2), or exp(1 - 1/(1 - z^2)) on |z| < 1 and
/// 0 elsewhere, with z = (s - center)/width.
struct Profile1D {
    double center = 0;
    double width = 1;
    BumpKind kind = BumpKind::gaussian_bump;

    double value(double s) const {
        const double z = (s - center) / width;
        if (kind == BumpKind::gaussian_bump) return std::exp(-z * z);
        if (std::abs(z) >= 1) return 0.0;
        return std::exp(1.0 - 1.0 / (1.0 - z * z));
    }
    double derivative(double s) const {
        const double z = (s - center) / width;
        if (kind == BumpKind::gaussian_bump) return -2.0 * z / width * std::exp(-z * z);
        if (std::abs(z) >= 1) return 0.0;
        const double w = 1.0 - z * z;
        return std::exp(1.0 - 1.0 / w) * (-2.0 * z / (w * w)) / width;
    }
    /// Interval outside which the profile is zero (compact) or below e^{-64}.
    std::pair<double, double> support() const {
        const double r = kind == BumpKind::gaussian_bump ? 8.0 * width : width;
        return {center - r, center + r};
    }
};

/// psi(t, x) = space(x) * time(t).
struct TestFunction {
    Profile1D space;
    Profile1D time;

    void validate(double T) const {
        if (!(space.width > 0 && time.width > 0)) throw std::invalid_argument("test function widths must be positive");
        if (!(time.support().second <= T))
            throw std::invalid_argument("test function time support must end before T");
    }
    double value(double t, double x) const { return space.value(x) * time.value(t); }
    double dt(double t, double x) const { return space.value(x) * time.derivative(t); }
    double dx(double t, double x) const { return space.derivative(x) * time.value(t); }
};

struct PairingResult {
    double total = 0;
    /// u psi_t, u^{2n+1}/(2n+1) psi_x, C psi, (p*B) psi_x, -(p*C) psi, initial trace
    std::array<double, 6> terms{};
    double scale = 0;  ///< largest |term|
    double error = 0;  ///< summed quadrature error estimates
};

/// The weak-formulation pairing of the peakon with psi over [0, T) x R by
/// nested adaptive quadrature (x inner, t outer); each term is integrated
/// separately so the cancellation can be judged against the largest one.
inline PairingResult weak_form_pairing(const PeakonParams& p, const TestFunction& psi, double T,
                                       const QuadratureSpec& q) {
    q.validate();
    psi.validate(T);
    const PeakonSums s(p.n);
    const unsigned n = p.n;
    const auto [xlo, xhi] = psi.space.support();
    const auto [tlo_raw, thi] = psi.time.support();
    const double tlo = std::max(0.0, tlo_raw);

    // Convolutions are evaluated to a looser tolerance than the outer rules;
    // their error is still accumulated.
    QuadratureSpec inner = q;
    inner.relative_tol = std::max(q.relative_tol, 1e-12);

    auto space_integral = [&](auto&& integrand, double t, double& err) {
        const double ct = p.c * t;
        double total = 0.0;
        double a = xlo;
        for (double cut : {ct, xhi}) {
            const double b = std::min(std::max(cut, xlo), xhi);
            if (b > a) {
                const auto e = detail::integrate([&](double x) { return integrand(t, x); }, a, b, q);
                total += e.value;
                err += e.error;
                a = b;
            }
        }
        return total;
    };
    auto space_time = [&](auto&& integrand) {
        double err = 0.0;
        const auto e = detail::integrate([&](double t) { return space_integral(integrand, t, err); }, tlo, thi, q);
        return Estimate{e.value, e.error + err};
    };

    // The two convolution terms dominate the cost; they run concurrently.
    auto conv_B = std::async(std::launch::async, [&] {
        return space_time([&](double t, double x) {
            const double g = psi.dx(t, x);
            return g == 0.0 ? 0.0 : detail::convolution(false, PeakonDensity::nonlocal_B, x, t, p, s, inner).value * g;
        });
    });
    auto conv_C = std::async(std::launch::async, [&] {
        return space_time([&](double t, double x) {
            const double g = psi.value(t, x);
            return g == 0.0 ? 0.0 : -detail::convolution(false, PeakonDensity::nonlocal_C, x, t, p, s, inner).value * g;
        });
    });
    const Estimate transport = space_time([&](double t, double x) { return peakon_value(p, t, x) * psi.dt(t, x); });
    const Estimate flux = space_time([&](double t, double x) {
        return std::pow(peakon_value(p, t, x), 2.0 * n + 1) / (2.0 * n + 1) * psi.dx(t, x);
    });
    const Estimate local_C = space_time(
        [&](double t, double x) { return peakon_density(PeakonDensity::nonlocal_C, p, s, t, x) * psi.value(t, x); });
    Estimate trace;
    if (psi.time.value(0.0) != 0.0) {
        double err = 0.0;
        trace.value = space_integral([&](double, double x) { return peakon_value(p, 0.0, x) * psi.value(0.0, x); }, 0.0, err);
        trace.error = err;
    }
    const std::array<Estimate, 6> parts{transport, flux, local_C, conv_B.get(), conv_C.get(), trace};
    PairingResult r;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        r.terms[i] = parts[i].value;
        r.total += parts[i].value;
        r.scale = std::max(r.scale, std::abs(parts[i].value));
        r.error += parts[i].error;
    }
    return r;
}

/// sup_x |phi(t, x) - phi(0, x)|, sampled on [-span, span + ct] with the two
/// kinks x = 0 and x = ct included.
inline double initial_trace_distance(const PeakonParams& p, double t, double span = 10.0, std::size_t samples = 4001) {
    const double ct = p.c * t;
    std::vector<double> xs{0.0, ct};
    const double lo = -span, hi = span + ct;
    for (std::size_t i = 0; i < samples; ++i) xs.push_back(lo + (hi - lo) * static_cast<double>(i) / (samples - 1));
    double d = 0.0;
    for (double x : xs) d = std::max(d, std::abs(peakon_value(p, t, x) - peakon_value(p, 0.0, x)));
    return d;
}

}  // namespace gmch
