#pragma once

// Pseudospectral evolution of the nonlocal form
//   u_t = -A(u,u_x) u_x - d_x p*B(u,u_x) - p*C(u,u_x),   p* = (1 - d^2)^{-1},
// with classical RK4 in time, optional dealiasing and spectral filtering,
// observers for the conserved functionals, and characteristics
// dq/dt = (u^2 - u_x^2)^n co-integrated with the field.

#include "gmch/coefficients.hpp"
#include "gmch/functionals.hpp"
#include "gmch/grid.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gmch {

enum class Dealias { two_thirds, padded, none };

inline std::string to_string(Dealias d) {
    switch (d) {
        case Dealias::two_thirds: return "two_thirds";
        case Dealias::padded: return "padded";
        case Dealias::none: return "none";
    }
    return "unknown";
}

inline Dealias parse_dealias(const std::string& s) {
    if (s == "two_thirds") return Dealias::two_thirds;
    if (s == "padded") return Dealias::padded;
    if (s == "none") return Dealias::none;
    throw std::invalid_argument("unknown dealias mode: " + s);
}

struct SolverConfig {
    unsigned n = 1;
    GridSpec grid;
    double cfl = 0.4;
    double t_end = 1.0;
    Dealias dealias = Dealias::two_thirds;
    double filter_strength = 0.0;
    unsigned observe_every = 10;
    double blowup_slope = 1e6;  ///< max|u_x| beyond this counts as wave breaking
    /// Momentum spectrum tail (see resolution_indicator) beyond this counts as
    /// concentration past the grid scale; 0 disables.
    double resolution_tol = 1e-4;
};

struct SolverState {
    double t = 0;
    GridFunction u;
    std::size_t step_count = 0;
};

struct ObserverRecord {
    double t = 0;
    std::size_t step = 0;
    double E = 0, F = 0, M = 0, xi = 0;
    double min_y = 0;
    double lhs = 0;  ///< stability-inequality left side
    double min_u_minus_ux = 0, min_u_plus_ux = 0;
};

struct FlowSample {
    double t = 0;
    double x0 = 0;
    double q = 0;
    double q_x = 1;
    double y_at_q = 0;
};

/// Non-finite state or slope beyond the configured threshold.
class BlowUp : public std::runtime_error {
public:
    BlowUp(const std::string& what, SolverState last_valid, std::vector<ObserverRecord> records)
        : std::runtime_error(what), last_valid_(std::move(last_valid)), records_(std::move(records)) {}
    const SolverState& last_valid() const { return last_valid_; }
    const std::vector<ObserverRecord>& records() const { return records_; }

private:
    SolverState last_valid_;
    std::vector<ObserverRecord> records_;
};

struct RunOptions {
    std::vector<double> characteristics;  ///< foot points x0 of tracked characteristics
    std::function<void(const SolverState&, const ObserverRecord&)> on_observe;
};

struct RunResult {
    SolverState final;
    std::vector<ObserverRecord> records;
    std::vector<std::vector<FlowSample>> flows;  ///< one trajectory per foot point
};

inline ObserverRecord observe(const SolverState& s, const CoefficientTable& table) {
    ObserverRecord r;
    r.t = s.t;
    r.step = s.step_count;
    const auto chk = stability_inequality(s.u, table);
    r.E = chk.E;
    r.F = chk.F;
    r.M = chk.M;
    r.xi = chk.xi;
    r.lhs = chk.lhs;
    const auto& u = s.u.u();
    const auto& ux = s.u.ux();
    const auto& y = s.u.y();
    r.min_y = *std::min_element(y.begin(), y.end());
    r.min_u_minus_ux = r.min_u_plus_ux = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < u.size(); ++j) {
        r.min_u_minus_ux = std::min(r.min_u_minus_ux, u[j] - ux[j]);
        r.min_u_plus_ux = std::min(r.min_u_plus_ux, u[j] + ux[j]);
    }
    return r;
}

/// Largest |y_hat| over the top quarter of the resolved band (N/4 < m <= N/3)
/// relative to the largest |y_hat| overall. Smooth data sits at rounding
/// level; a momentum density collapsing towards a spike fills the tail.
inline double resolution_indicator(const GridFunction& u) {
    const auto& uh = u.spectrum();
    const auto& g = u.spec();
    double peak = 0.0, tail = 0.0;
    for (std::size_t m = 0; m < uh.size(); ++m) {
        const double k = g.k(m);
        const double v = (1 + k * k) * std::abs(uh[m]);
        peak = std::max(peak, v);
        if (4 * m > g.N && 3 * m <= g.N) tail = std::max(tail, v);
    }
    return peak > 0 ? tail / peak : 0.0;
}

class Solver {
public:
    explicit Solver(SolverConfig config) : cfg_(std::move(config)), table_(coefficient_table(cfg_.n)) {
        if (!(cfg_.cfl > 0 && cfg_.cfl <= 1)) throw std::invalid_argument("cfl must lie in (0, 1]");
        if (!(cfg_.filter_strength >= 0)) throw std::invalid_argument("filter_strength must be >= 0");
        if (!(cfg_.t_end >= 0)) throw std::invalid_argument("t_end must be >= 0");
        if (cfg_.observe_every == 0) throw std::invalid_argument("observe_every must be positive");
        if (!(cfg_.resolution_tol >= 0)) throw std::invalid_argument("resolution_tol must be >= 0");
        const unsigned n = cfg_.n;
        a_.assign(n + 1, 0.0);
        b_.assign(n + 1, 0.0);
        for (unsigned k = 1; k <= n; ++k) {
            a_[k] = to_double(Rational(minus_one_pow(k + 1) * BigInt(binomial(n, k)), 2 * k + 1));
            b_[k] = to_double(Rational(minus_one_pow(k - 1) * BigInt(binomial(n, k)), 2 * k - 1));
        }
        b_[0] = 2.0 * n / (2.0 * n + 1.0);
        const std::size_t modes = cfg_.grid.modes();
        mask_.assign(modes, 1.0);
        if (cfg_.dealias == Dealias::two_thirds)
            for (std::size_t m = 0; m < modes; ++m)
                if (3 * m > cfg_.grid.N) mask_[m] = 0.0;
        mask_.back() = 0.0;
        work_n_ = cfg_.dealias == Dealias::padded ? (n + 1) * cfg_.grid.N : cfg_.grid.N;
    }

    const SolverConfig& config() const { return cfg_; }
    const CoefficientTable& table() const { return table_; }

    /// u_t for the given samples.
    std::vector<double> rhs(const std::vector<double>& u) const { return inverse_transform(rhs_hat(forward_transform(u)), cfg_.grid.N); }

    /// cfl*dx over the larger of the flow speed |u^2-u_x^2|^n and the
    /// advection coefficient of the nonlocal form; the two differ where
    /// |u_x| ~ |u|.
    double stable_dt(const std::vector<double>& u, const std::vector<double>& ux) const {
        std::vector<double> alpha_a(a_);
        alpha_a[0] = 1.0;
        double s = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j) {
            const double U = u[j] * u[j], V = ux[j] * ux[j];
            s = std::max({s, std::pow(std::abs(U - V), cfg_.n), std::abs(homogeneous(alpha_a, U, V, -1.0))});
        }
        return cfg_.cfl * cfg_.grid.dx() / std::max(s, 1e-12);
    }
    double stable_dt(const GridFunction& u) const { return stable_dt(u.u(), u.ux()); }

    /// One RK4 step of size dt (negative dt integrates backwards).
    SolverState step(const SolverState& s, double dt) const {
        std::vector<Tracer> none;
        return advance(s, dt, none);
    }

    /// One step with the CFL time step, clamped to t_end.
    SolverState step(const SolverState& s) const {
        const double dt = std::min(stable_dt(s.u), cfg_.t_end - s.t);
        return step(s, dt);
    }

    RunResult run(const GridFunction& u0, const RunOptions& opts = {}) const {
        if (!(u0.spec() == cfg_.grid)) throw std::invalid_argument("initial data grid differs from solver grid");
        RunResult out;
        SolverState s{0.0, u0, 0};
        std::vector<Tracer> tracers;
        for (double x0 : opts.characteristics) {
            Tracer tr{x0, x0, 0.0, true};
            tracers.push_back(tr);
            out.flows.emplace_back();
        }
        auto emit = [&](const SolverState& st) {
            auto rec = observe(st, table_);
            record_flows(st, tracers, out.flows);
            if (opts.on_observe) opts.on_observe(st, rec);
            out.records.push_back(rec);
        };
        emit(s);
        const double eps_t = 1e-12 * std::max(1.0, cfg_.t_end);
        while (s.t < cfg_.t_end - eps_t) {
            const double dt = std::min(stable_dt(s.u), cfg_.t_end - s.t);
            SolverState next;
            try {
                next = advance(s, dt, tracers);
            } catch (const std::runtime_error& e) {
                throw BlowUp(e.what(), s, out.records);
            }
            s = std::move(next);
            const bool last = s.t >= cfg_.t_end - eps_t;
            if (last || s.step_count % cfg_.observe_every == 0) emit(s);
        }
        out.final = std::move(s);
        return out;
    }

private:
    struct Tracer {
        double x0, q, log_qx;
        bool valid;
    };

    // sum_k alpha_k U^{n-k} V^k
    double homogeneous(const std::vector<double>& alpha, double U, double V, double sign_rest) const {
        double s = 0.0, vp = 1.0;
        const unsigned n = cfg_.n;
        for (unsigned k = 0; k <= n; ++k) {
            const double coef = k == 0 ? alpha[0] : sign_rest * alpha[k];
            if (coef != 0.0) s += coef * std::pow(U, static_cast<double>(n - k)) * vp;
            vp *= V;
        }
        return s;
    }

    Spectrum rhs_hat(Spectrum uh) const {
        const GridSpec& g = cfg_.grid;
        const std::size_t modes = g.modes();
        for (std::size_t m = 0; m < modes; ++m) uh[m] *= mask_[m];
        Spectrum uxh = differentiate(g, uh);

        const std::size_t W = work_n_;
        const double up = static_cast<double>(W) / static_cast<double>(g.N);
        auto to_work = [&](const Spectrum& h) {
            Spectrum p(W / 2 + 1, Complex(0.0, 0.0));
            for (std::size_t m = 0; m < modes; ++m) p[m] = h[m] * up;
            return inverse_transform(std::move(p), W);
        };
        const auto u = to_work(uh);
        const auto ux = to_work(uxh);

        std::vector<double> adv(W), B(W), C(W);
        std::vector<double> alpha_a(a_), alpha_c(a_);
        alpha_a[0] = 1.0;
        alpha_c[0] = 0.0;
        for (std::size_t j = 0; j < W; ++j) {
            const double U = u[j] * u[j], V = ux[j] * ux[j];
            adv[j] = homogeneous(alpha_a, U, V, -1.0) * ux[j];
            B[j] = homogeneous(b_, U, V, 1.0) * u[j];
            C[j] = homogeneous(alpha_c, U, V, 1.0) * ux[j];
        }
        const double down = static_cast<double>(g.N) / static_cast<double>(W);
        const auto Ah = forward_transform(adv);
        const auto Bh = forward_transform(B);
        const auto Ch = forward_transform(C);
        Spectrum r(modes);
        for (std::size_t m = 0; m < modes; ++m) {
            const double k = g.k(m);
            r[m] = -(Ah[m] + (Complex(0.0, k) * Bh[m] + Ch[m]) / (1.0 + k * k)) * down;
            r[m] *= mask_[m];
        }
        return r;
    }

    struct StageField {
        Spectrum uh;
        std::vector<double> rhs;
    };

    StageField stage(const std::vector<double>& u) const {
        StageField f;
        f.uh = forward_transform(u);
        f.rhs = inverse_transform(rhs_hat(f.uh), cfg_.grid.N);
        return f;
    }

    // u, u_x and y at x from the spectrum of u, in a single pass.
    struct PointValues {
        double u, ux, y;
    };
    PointValues point_values(const Spectrum& uh, double x) const {
        const GridSpec& g = cfg_.grid;
        const std::size_t N = g.N;
        const double theta = std::numbers::pi * (x + g.L) / g.L;
        double su = 0.0, sux = 0.0, sy = 0.0;
        Complex rot(1.0, 0.0);
        const Complex stepr = std::polar(1.0, theta);
        for (std::size_t m = 1; m < N / 2; ++m) {
            rot = (m % 64 == 0) ? std::polar(1.0, theta * static_cast<double>(m)) : rot * stepr;
            const double k = g.k(m);
            const Complex v = uh[m] * rot;
            su += v.real();
            sux += -k * v.imag();
            sy += (1.0 + k * k) * v.real();
        }
        const double kn = g.k(N / 2);
        const double nyq = uh[N / 2].real() * std::cos(theta * static_cast<double>(N / 2));
        const double inv = 1.0 / static_cast<double>(N);
        return {(uh[0].real() + 2.0 * su + nyq) * inv, 2.0 * sux * inv, (uh[0].real() + 2.0 * sy + (1.0 + kn * kn) * nyq) * inv};
    }

    // (dq/dt, d log q_x/dt) along a characteristic.
    std::pair<double, double> tracer_rate(const Spectrum& uh, double q) const {
        const auto v = point_values(uh, q);
        const double w = v.u * v.u - v.ux * v.ux;
        const unsigned n = cfg_.n;
        return {std::pow(w, n), 2.0 * n * std::pow(w, n - 1) * v.ux * v.y};
    }

    bool tracer_in_domain(double q) const { return std::abs(q) < cfg_.grid.L - 1.0; }

    SolverState advance(const SolverState& s, double dt, std::vector<Tracer>& tracers) const {
        const std::size_t N = cfg_.grid.N;
        const auto& u0 = s.u.u();
        std::vector<double> tmp(N);
        const std::size_t nt = tracers.size();
        std::vector<double> kq[4], ks[4];
        for (auto& v : kq) v.assign(nt, 0.0);
        for (auto& v : ks) v.assign(nt, 0.0);

        auto tracer_stage = [&](const Spectrum& uh, int idx, double frac, int prev) {
            for (std::size_t i = 0; i < nt; ++i) {
                if (!tracers[i].valid) continue;
                const double q = tracers[i].q + (prev >= 0 ? frac * dt * kq[prev][i] : 0.0);
                const auto [dq, ds] = tracer_rate(uh, q);
                kq[idx][i] = dq;
                ks[idx][i] = ds;
            }
        };

        const auto k1 = stage(u0);
        tracer_stage(k1.uh, 0, 0.0, -1);
        for (std::size_t j = 0; j < N; ++j) tmp[j] = u0[j] + 0.5 * dt * k1.rhs[j];
        const auto k2 = stage(tmp);
        tracer_stage(k2.uh, 1, 0.5, 0);
        for (std::size_t j = 0; j < N; ++j) tmp[j] = u0[j] + 0.5 * dt * k2.rhs[j];
        const auto k3 = stage(tmp);
        tracer_stage(k3.uh, 2, 0.5, 1);
        for (std::size_t j = 0; j < N; ++j) tmp[j] = u0[j] + dt * k3.rhs[j];
        const auto k4 = stage(tmp);
        tracer_stage(k4.uh, 3, 1.0, 2);

        std::vector<double> next(N);
        for (std::size_t j = 0; j < N; ++j) {
            next[j] = u0[j] + dt / 6.0 * (k1.rhs[j] + 2.0 * k2.rhs[j] + 2.0 * k3.rhs[j] + k4.rhs[j]);
            if (!std::isfinite(next[j]))
                throw std::runtime_error("non-finite solution at t=" + std::to_string(s.t + dt));
        }
        if (cfg_.filter_strength > 0) {
            auto h = forward_transform(next);
            const double kmax = cfg_.grid.k_max();
            for (std::size_t m = 0; m < h.size(); ++m)
                h[m] *= std::exp(-cfg_.filter_strength * std::pow(cfg_.grid.k(m) / kmax, 16));
            next = inverse_transform(std::move(h), N);
        }
        for (std::size_t i = 0; i < nt; ++i) {
            auto& tr = tracers[i];
            if (!tr.valid) continue;
            tr.q += dt / 6.0 * (kq[0][i] + 2.0 * kq[1][i] + 2.0 * kq[2][i] + kq[3][i]);
            tr.log_qx += dt / 6.0 * (ks[0][i] + 2.0 * ks[1][i] + 2.0 * ks[2][i] + ks[3][i]);
            if (!tracer_in_domain(tr.q)) tr.valid = false;
        }
        SolverState out{s.t + dt, GridFunction(cfg_.grid, std::move(next)), s.step_count + 1};
        double slope = 0.0;
        for (double v : out.u.ux()) slope = std::max(slope, std::abs(v));
        if (!(slope <= cfg_.blowup_slope))
            throw std::runtime_error("slope " + std::to_string(slope) + " exceeds blow-up threshold at t=" +
                                     std::to_string(out.t));
        if (cfg_.resolution_tol > 0) {
            const double r = resolution_indicator(out.u);
            if (!(r <= cfg_.resolution_tol))
                throw std::runtime_error("momentum concentrated below grid scale (tail " + std::to_string(r) +
                                         ") at t=" + std::to_string(out.t));
        }
        return out;
    }

    void record_flows(const SolverState& s, const std::vector<Tracer>& tracers,
                      std::vector<std::vector<FlowSample>>& flows) const {
        if (tracers.empty()) return;
        const auto& uh = s.u.spectrum();
        for (std::size_t i = 0; i < tracers.size(); ++i) {
            const auto& tr = tracers[i];
            if (!tr.valid) continue;
            flows[i].push_back({s.t, tr.x0, tr.q, std::exp(tr.log_qx), point_values(uh, tr.q).y});
        }
    }

    SolverConfig cfg_;
    CoefficientTable table_;
    std::vector<double> a_, b_, mask_;
    std::size_t work_n_ = 0;
};

/// (1 - d^2)^{-1} f as a grid function.
inline GridFunction helmholtz_solve(const GridFunction& f) { return GridFunction(f.spec(), helmholtz_solve(f.spec(), f.u())); }

/// u_t of the nonlocal form (no dealiasing).
inline GridFunction rhs(const GridFunction& u, unsigned n) {
    SolverConfig cfg;
    cfg.n = n;
    cfg.grid = u.spec();
    cfg.dealias = Dealias::none;
    return GridFunction(u.spec(), Solver(cfg).rhs(u.u()));
}

/// max over samples of |y(t,q) q_x - y0(x0)| / (|y0(x0)| + floor); the first
/// sample of each trajectory supplies y0.
inline double check_momentum_transport(const std::vector<std::vector<FlowSample>>& flows, double floor) {
    double worst = 0.0;
    for (const auto& f : flows) {
        if (f.empty()) continue;
        const double y0 = f.front().y_at_q;
        for (const auto& s : f) worst = std::max(worst, std::abs(s.y_at_q * s.q_x - y0) / (std::abs(y0) + floor));
    }
    return worst;
}

/// Characteristics started in increasing order stay in increasing order.
inline bool flow_is_monotone(const std::vector<std::vector<FlowSample>>& flows) {
    if (flows.empty()) return true;
    std::size_t len = flows.front().size();
    for (const auto& f : flows) len = std::min(len, f.size());
    for (std::size_t s = 0; s < len; ++s)
        for (std::size_t i = 1; i < flows.size(); ++i)
            if (!(flows[i][s].q > flows[i - 1][s].q) || !(flows[i][s].q_x > 0)) return false;
    return true;
}

}  // namespace gmch
