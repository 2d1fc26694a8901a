#pragma once

// Periodic truncation of the line: uniform grid on [-L, L), FFTW-backed
// real transforms, spectral derivatives, the Helmholtz inverse, Fourier
// interpolation and exact integrals of the trigonometric interpolant.

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gmch {

using Complex = std::complex<double>;
using Spectrum = std::vector<Complex>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

struct GridSpec {
    double L = 20.0;
    std::size_t N = 1024;

    GridSpec() = default;
    GridSpec(double half_length, std::size_t points) : L(half_length), N(points) {
        if (!(L >= 20.0)) throw std::invalid_argument("half_length must be >= 20");
        if (N < 8 || !is_power_of_two(N)) throw std::invalid_argument("point_count must be a power of two >= 8");
    }

    double dx() const { return 2.0 * L / static_cast<double>(N); }
    double x(std::size_t j) const { return -L + static_cast<double>(j) * dx(); }
    /// Wavenumber of r2c mode m (0 <= m <= N/2).
    double k(std::size_t m) const { return std::numbers::pi * static_cast<double>(m) / L; }
    std::size_t modes() const { return N / 2 + 1; }
    double k_max() const { return k(N / 2); }

    std::vector<double> points() const {
        std::vector<double> xs(N);
        for (std::size_t j = 0; j < N; ++j) xs[j] = x(j);
        return xs;
    }

    bool operator==(const GridSpec&) const = default;
};

namespace detail {

// One r2c/c2r plan pair per size. Plans are created once under a lock and
// executed through the new-array interface, which FFTW documents as
// thread-safe.
class FftPlans {
public:
    static const FftPlans& get(std::size_t n) {
        static std::mutex mu;
        static std::map<std::size_t, std::unique_ptr<FftPlans>> cache;
        std::lock_guard<std::mutex> lock(mu);
        auto& slot = cache[n];
        if (!slot) slot.reset(new FftPlans(n));
        return *slot;
    }

    ~FftPlans() {
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
    }
    FftPlans(const FftPlans&) = delete;
    FftPlans& operator=(const FftPlans&) = delete;

    void forward(const double* in, Complex* out) const {
        fftw_execute_dft_r2c(forward_, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
    }
    /// Destroys `in`. Unnormalized.
    void backward(Complex* in, double* out) const {
        fftw_execute_dft_c2r(backward_, reinterpret_cast<fftw_complex*>(in), out);
    }

private:
    explicit FftPlans(std::size_t n) {
        const int ni = static_cast<int>(n);
        double* r = fftw_alloc_real(n);
        fftw_complex* c = fftw_alloc_complex(n / 2 + 1);
        forward_ = fftw_plan_dft_r2c_1d(ni, r, c, FFTW_ESTIMATE | FFTW_UNALIGNED);
        backward_ = fftw_plan_dft_c2r_1d(ni, c, r, FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(r);
        fftw_free(c);
        if (!forward_ || !backward_) throw std::runtime_error("FFTW planning failed for N=" + std::to_string(n));
    }

    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

}  // namespace detail

inline Spectrum forward_transform(const std::vector<double>& f) {
    Spectrum out(f.size() / 2 + 1);
    detail::FftPlans::get(f.size()).forward(f.data(), out.data());
    return out;
}

/// Inverse of forward_transform (normalized); N is the physical size.
inline std::vector<double> inverse_transform(Spectrum s, std::size_t N) {
    std::vector<double> out(N);
    detail::FftPlans::get(N).backward(s.data(), out.data());
    const double inv = 1.0 / static_cast<double>(N);
    for (auto& v : out) v *= inv;
    return out;
}

/// ik multiplier; the Nyquist mode is zeroed for odd derivatives.
inline Spectrum differentiate(const GridSpec& g, Spectrum s) {
    for (std::size_t m = 0; m < s.size(); ++m) s[m] *= Complex(0.0, g.k(m));
    s.back() = 0.0;
    return s;
}

inline Spectrum helmholtz_inverse(const GridSpec& g, Spectrum s) {
    for (std::size_t m = 0; m < s.size(); ++m) {
        const double k = g.k(m);
        s[m] /= 1.0 + k * k;
    }
    return s;
}

/// Sample values of (1 - d^2/dx^2)^{-1} f.
inline std::vector<double> helmholtz_solve(const GridSpec& g, const std::vector<double>& f) {
    return inverse_transform(helmholtz_inverse(g, forward_transform(f)), g.N);
}

/// Trigonometric interpolant of the samples behind `s`, evaluated at x.
inline double fourier_interpolate(const GridSpec& g, const Spectrum& s, double x) {
    const std::size_t N = g.N;
    const double theta = std::numbers::pi * (x + g.L) / g.L;
    double acc = 0.0;
    Complex rot(1.0, 0.0);
    const Complex step = std::polar(1.0, theta);
    for (std::size_t m = 1; m < N / 2; ++m) {
        if (m % 64 == 0)
            rot = std::polar(1.0, theta * static_cast<double>(m));
        else
            rot *= step;
        acc += (s[m] * rot).real();
    }
    const double nyq = s[N / 2].real() * std::cos(theta * static_cast<double>(N / 2));
    return (s[0].real() + 2.0 * acc + nyq) / static_cast<double>(N);
}

/// Exact integral of the trigonometric interpolant over [-L, xi].
inline double fourier_integral_to(const GridSpec& g, const Spectrum& s, double xi) {
    const std::size_t N = g.N;
    const double span = xi + g.L;
    double acc = 0.0;
    for (std::size_t m = 1; m < N / 2; ++m) {
        const double k = g.k(m);
        const Complex e = std::polar(1.0, k * span) - 1.0;
        acc += (s[m] * e / Complex(0.0, k)).real();
    }
    const double kn = g.k(N / 2);
    const double nyq = s[N / 2].real() * std::sin(kn * span) / kn;
    return (s[0].real() * span + 2.0 * acc + nyq) / static_cast<double>(N);
}

/// Periodic trapezoid sum (spectrally accurate for smooth periodic data).
inline double trapezoid(const GridSpec& g, const std::vector<double>& f) {
    double s = 0.0;
    for (double v : f) s += v;
    return s * g.dx();
}

/// Integral of `left` over x < xi plus `right` over x > xi, each side taken
/// from the exact integral of its trigonometric interpolant (no O(dx) error
/// from the cell that straddles xi).
inline double split_integral(const GridSpec& g, const std::vector<double>& left, const std::vector<double>& right,
                             double xi) {
    const auto sl = forward_transform(left);
    const auto sr = forward_transform(right);
    const double left_part = fourier_integral_to(g, sl, xi);
    const double right_total = sr[0].real() * g.dx();
    return left_part + right_total - fourier_integral_to(g, sr, xi);
}

/// Sampled field on a GridSpec. Samples are immutable; the spectrum, u_x and
/// y = u - u_xx are computed on first use and shared between copies.
class GridFunction {
public:
    GridFunction() = default;
    GridFunction(GridSpec spec, std::vector<double> samples)
        : spec_(spec), u_(std::make_shared<const std::vector<double>>(std::move(samples))),
          cache_(std::make_shared<Cache>()) {
        if (u_->size() != spec_.N) throw std::invalid_argument("sample count does not match grid");
        for (double v : *u_)
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite sample");
    }

    /// Field with a known derivative (e.g. a sampled peakon, whose spectral
    /// derivative would ring at the kink).
    static GridFunction with_derivative(GridSpec spec, std::vector<double> u, std::vector<double> ux) {
        GridFunction f(spec, std::move(u));
        if (ux.size() != spec.N) throw std::invalid_argument("derivative sample count does not match grid");
        std::call_once(f.cache_->ux_once, [&] { f.cache_->ux = std::move(ux); });
        return f;
    }

    /// u = (1 - d^2)^{-1} y with y kept exactly as given.
    static GridFunction from_momentum(GridSpec spec, std::vector<double> y) {
        GridFunction f(spec, helmholtz_solve(spec, y));
        std::call_once(f.cache_->y_once, [&] { f.cache_->y = std::move(y); });
        return f;
    }

    const GridSpec& spec() const { return spec_; }
    std::size_t size() const { return spec_.N; }
    const std::vector<double>& u() const { return *u_; }
    double operator[](std::size_t j) const { return (*u_)[j]; }

    const Spectrum& spectrum() const {
        std::call_once(cache_->hat_once, [&] { cache_->hat = forward_transform(*u_); });
        return cache_->hat;
    }

    const std::vector<double>& ux() const {
        std::call_once(cache_->ux_once,
                       [&] { cache_->ux = inverse_transform(differentiate(spec_, spectrum()), spec_.N); });
        return cache_->ux;
    }

    const std::vector<double>& y() const {
        std::call_once(cache_->y_once, [&] {
            Spectrum s = spectrum();
            for (std::size_t m = 0; m < s.size(); ++m) {
                const double k = spec_.k(m);
                s[m] *= 1.0 + k * k;
            }
            cache_->y = inverse_transform(std::move(s), spec_.N);
        });
        return cache_->y;
    }

    double at(double x) const { return fourier_interpolate(spec_, spectrum(), x); }
    double ux_at(double x) const {
        std::call_once(cache_->ux_hat_once, [&] { cache_->ux_hat = forward_transform(ux()); });
        return fourier_interpolate(spec_, cache_->ux_hat, x);
    }

    double integral() const { return trapezoid(spec_, *u_); }

private:
    struct Cache {
        std::once_flag hat_once, ux_once, y_once, ux_hat_once;
        Spectrum hat, ux_hat;
        std::vector<double> ux, y;
    };

    GridSpec spec_;
    std::shared_ptr<const std::vector<double>> u_;
    std::shared_ptr<Cache> cache_;
};

template <class F>
GridFunction sample(const GridSpec& g, F&& f) {
    std::vector<double> v(g.N);
    for (std::size_t j = 0; j < g.N; ++j) v[j] = f(g.x(j));
    return GridFunction(g, std::move(v));
}

}  // namespace gmch
