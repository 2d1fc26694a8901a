#pragma once

// Experiment plumbing: key-value configuration, the orbital-stability sweep,
// simulation and residual runs, certificate bundles, and report/frame IO.

#include "gmch/coefficients.hpp"
#include "gmch/evolution.hpp"
#include "gmch/functionals.hpp"
#include "gmch/profiles.hpp"
#include "gmch/weakform.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <future>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmch {

/// A precondition of the stability theorem failed (epsilon out of range,
/// perturbation unreachable, momentum sign).
class HypothesisViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(std::string s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    double out = 0;
    const auto s = trim(v);
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || !std::isfinite(out))
        throw std::invalid_argument("config key '" + key + "': not a number: '" + v + "'");
    return out;
}

inline unsigned long long parse_unsigned(const std::string& key, const std::string& v) {
    unsigned long long out = 0;
    const auto s = trim(v);
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw std::invalid_argument("config key '" + key + "': not a nonnegative integer: '" + v + "'");
    return out;
}

}  // namespace detail

/// Comma-separated numbers; an empty string is an empty list.
inline std::vector<double> parse_number_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    for (std::string item; std::getline(ss, item, ',');) {
        if (detail::trim(item).empty()) continue;
        out.push_back(detail::parse_double(key, item));
    }
    return out;
}

enum class InitialKind { mollified, perturbed, momentum, zero };
enum class FrameFormat { none, csv, binary };

inline std::string to_string(InitialKind k) {
    switch (k) {
        case InitialKind::mollified: return "mollified";
        case InitialKind::perturbed: return "perturbed";
        case InitialKind::momentum: return "momentum";
        case InitialKind::zero: return "zero";
    }
    return "unknown";
}

inline std::string to_string(FrameFormat f) {
    switch (f) {
        case FrameFormat::none: return "none";
        case FrameFormat::csv: return "csv";
        case FrameFormat::binary: return "binary";
    }
    return "unknown";
}

struct ExperimentConfig {
    unsigned n = 1;
    double c = 2.0 / 3.0;
    double delta = 0.05;
    MollifierShape mollifier = MollifierShape::gaussian;
    std::vector<double> eps{1e-2, 1e-3, 1e-4};
    BumpSpec bump;
    double bump_jitter = 0.0;  ///< uniform jitter of the bump center, drawn from `seed`
    std::uint64_t seed = 0;
    double L = 25.0;  ///< resolves delta = 0.05 at N = 4096 (delta >= 4 dx)
    std::size_t N = 4096;
    double cfl = 0.4;
    double t_end = 1.0;
    Dealias dealias = Dealias::two_thirds;
    double filter = 0.0;
    unsigned observe_every = 10;
    double blowup_slope = 1e6;
    double resolution_tol = 1e-4;
    InitialKind initial = InitialKind::mollified;
    double momentum_amp = 0.5;
    double momentum_width = 1.5;
    FrameFormat frames = FrameFormat::none;
    unsigned frame_every = 1;  ///< in observations
    std::string output_dir = "out";

    /// Applies one `key = value` assignment.
    void set(const std::string& raw_key, const std::string& value) {
        const auto key = detail::trim(raw_key);
        auto num = [&] { return detail::parse_double(key, value); };
        auto whole = [&] { return detail::parse_unsigned(key, value); };
        const auto v = detail::trim(value);
        if (key == "n") n = static_cast<unsigned>(whole());
        else if (key == "c") c = num();
        else if (key == "delta") delta = num();
        else if (key == "mollifier") mollifier = parse_mollifier_shape(v);
        else if (key == "eps") eps = parse_number_list(key, v);
        else if (key == "bump_center") bump.center = num();
        else if (key == "bump_width") bump.width = num();
        else if (key == "bump_jitter") bump_jitter = num();
        else if (key == "seed") seed = whole();
        else if (key == "L") L = num();
        else if (key == "N") N = whole();
        else if (key == "cfl") cfl = num();
        else if (key == "t_end") t_end = num();
        else if (key == "dealias") dealias = parse_dealias(v);
        else if (key == "filter") filter = num();
        else if (key == "observe_every") observe_every = static_cast<unsigned>(whole());
        else if (key == "blowup_slope") blowup_slope = num();
        else if (key == "resolution_tol") resolution_tol = num();
        else if (key == "initial") {
            if (v == "mollified") initial = InitialKind::mollified;
            else if (v == "perturbed") initial = InitialKind::perturbed;
            else if (v == "momentum") initial = InitialKind::momentum;
            else if (v == "zero") initial = InitialKind::zero;
            else throw std::invalid_argument("config key 'initial': unknown kind '" + v + "'");
        } else if (key == "momentum_amp") momentum_amp = num();
        else if (key == "momentum_width") momentum_width = num();
        else if (key == "frames") {
            if (v == "none") frames = FrameFormat::none;
            else if (v == "csv") frames = FrameFormat::csv;
            else if (v == "binary") frames = FrameFormat::binary;
            else throw std::invalid_argument("config key 'frames': unknown format '" + v + "'");
        } else if (key == "frame_every") frame_every = static_cast<unsigned>(whole());
        else if (key == "output_dir") output_dir = v;
        else throw std::invalid_argument("unknown config key '" + key + "'");
    }

    /// `key=value` as given on a command line.
    void apply_override(const std::string& assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("override must be key=value: '" + assignment + "'");
        set(assignment.substr(0, eq), assignment.substr(eq + 1));
    }

    /// Reads `key = value` lines; '#' starts a comment.
    void read(std::istream& in) {
        std::string line;
        for (int lineno = 1; std::getline(in, line); ++lineno) {
            if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
            if (detail::trim(line).empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
            set(line.substr(0, eq), line.substr(eq + 1));
        }
    }

    static ExperimentConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
        ExperimentConfig cfg;
        cfg.read(in);
        return cfg;
    }

    PeakonParams peakon() const { return peakon_from_speed(n, c); }
    GridSpec grid() const { return GridSpec(L, N); }
    MollifierSpec mollifier_spec() const { return {delta, mollifier, 2.0 * peakon().a}; }

    SolverConfig solver() const {
        SolverConfig s;
        s.n = n;
        s.grid = grid();
        s.cfl = cfl;
        s.t_end = t_end;
        s.dealias = dealias;
        s.filter_strength = filter;
        s.observe_every = observe_every;
        s.blowup_slope = blowup_slope;
        s.resolution_tol = resolution_tol;
        return s;
    }

    /// Bump placement for row `row`; jitter is a pure function of (seed, row).
    BumpSpec bump_for_row(std::size_t row) const {
        BumpSpec b = bump;
        if (bump_jitter > 0) {
            std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL * (row + 1));
            b.center += std::uniform_real_distribution<double>(-bump_jitter, bump_jitter)(rng);
        }
        return b;
    }

    /// Structural checks; the epsilon gate is separate (it is a hypothesis,
    /// not a configuration error).
    void validate(bool builds_mollifier) const {
        if (n == 0) throw std::invalid_argument("n must be >= 1");
        if (!(c > 0)) throw std::invalid_argument("c must be positive");
        if (!(delta > 0)) throw std::invalid_argument("delta must be positive");
        if (!(bump.width > 0)) throw std::invalid_argument("bump_width must be positive");
        if (!(bump_jitter >= 0)) throw std::invalid_argument("bump_jitter must be >= 0");
        if (!(momentum_width > 0)) throw std::invalid_argument("momentum_width must be positive");
        if (frame_every == 0) throw std::invalid_argument("frame_every must be positive");
        if (builds_mollifier)
            if (!(delta >= 4.0 * grid().dx()))
                throw std::invalid_argument("delta = " + std::to_string(delta) + " is below 4 grid spacings (dx = " +
                                            std::to_string(grid().dx()) + ")");
        Solver probe(solver());
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["n"] = n;
        j["c"] = c;
        j["delta"] = delta;
        j["mollifier"] = to_string(mollifier);
        j["eps"] = eps;
        j["bump_center"] = bump.center;
        j["bump_width"] = bump.width;
        j["bump_jitter"] = bump_jitter;
        j["seed"] = seed;
        j["L"] = L;
        j["N"] = N;
        j["cfl"] = cfl;
        j["t_end"] = t_end;
        j["dealias"] = to_string(dealias);
        j["filter"] = filter;
        j["observe_every"] = observe_every;
        j["blowup_slope"] = blowup_slope;
        j["resolution_tol"] = resolution_tol;
        j["initial"] = to_string(initial);
        j["momentum_amp"] = momentum_amp;
        j["momentum_width"] = momentum_width;
        j["frames"] = to_string(frames);
        j["frame_every"] = frame_every;
        j["output_dir"] = output_dir;
        return j;
    }
};

/// (3 - 2 sqrt 2) a: the stability theorem needs eps strictly below this.
inline double epsilon_gate(double a) { return (3.0 - 2.0 * std::sqrt(2.0)) * a; }

inline void check_epsilon(double eps, double a) {
    if (!(eps >= 0)) throw HypothesisViolation("eps must be >= 0, got " + std::to_string(eps));
    if (!(eps < epsilon_gate(a)))
        throw HypothesisViolation("eps = " + std::to_string(eps) + " is not below (3 - 2 sqrt 2) a = " +
                                  std::to_string(epsilon_gate(a)));
}

// ---------------------------------------------------------------- output

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace detail

inline void write_observer_csv(std::ostream& os, const std::vector<ObserverRecord>& rows) {
    os << "t,step,E,F,M,xi,stability_lhs,min_y,min_u_minus_ux,min_u_plus_ux\n";
    for (const auto& r : rows)
        os << detail::fmt(r.t) << ',' << r.step << ',' << detail::fmt(r.E) << ',' << detail::fmt(r.F) << ','
           << detail::fmt(r.M) << ',' << detail::fmt(r.xi) << ',' << detail::fmt(r.lhs) << ','
           << detail::fmt(r.min_y) << ',' << detail::fmt(r.min_u_minus_ux) << ',' << detail::fmt(r.min_u_plus_ux)
           << '\n';
}

inline void write_profile_csv(std::ostream& os, const GridFunction& f) {
    os << "x,u,u_x,y\n";
    const auto& ux = f.ux();
    const auto& y = f.y();
    for (std::size_t j = 0; j < f.size(); ++j)
        os << detail::fmt(f.spec().x(j)) << ',' << detail::fmt(f[j]) << ',' << detail::fmt(ux[j]) << ','
           << detail::fmt(y[j]) << '\n';
}

/// One snapshot per line: t, then the N samples.
inline void write_frame_csv(std::ostream& os, double t, const GridFunction& f) {
    os << detail::fmt(t);
    for (double v : f.u()) os << ',' << detail::fmt(v);
    os << '\n';
}

struct Frame {
    double L = 0;
    double t = 0;
    std::vector<double> u;
};

inline constexpr char kFrameMagic[8] = {'G', 'M', 'C', 'H', 'F', 'R', 'M', '1'};

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
    static_assert(sizeof(T) == 8);
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    os.write(buf, 8);
}

template <class T>
T get_le(std::istream& in) {
    static_assert(sizeof(T) == 8);
    unsigned char buf[8];
    if (!in.read(reinterpret_cast<char*>(buf), 8)) throw std::runtime_error("truncated frame");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(buf[i]) << (8 * i);
    T v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace detail

/// Binary frame: 8-byte magic "GMCHFRM1", uint64 N, float64 L, float64 t,
/// then N float64 samples; all little-endian.
inline void write_frame_binary(std::ostream& os, double t, const GridFunction& f) {
    os.write(kFrameMagic, sizeof kFrameMagic);
    detail::put_le<std::uint64_t>(os, f.size());
    detail::put_le<double>(os, f.spec().L);
    detail::put_le<double>(os, t);
    for (double v : f.u()) detail::put_le<double>(os, v);
}

/// Reads the next frame, or returns false at a clean end of stream.
inline bool read_frame_binary(std::istream& in, Frame& out) {
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() == 0) return false;
    if (in.gcount() != 8 || std::memcmp(magic, kFrameMagic, 8) != 0) throw std::runtime_error("bad frame magic");
    const auto N = detail::get_le<std::uint64_t>(in);
    if (N == 0 || N > (std::uint64_t(1) << 32)) throw std::runtime_error("implausible frame size");
    out.L = detail::get_le<double>(in);
    out.t = detail::get_le<double>(in);
    out.u.resize(N);
    for (auto& v : out.u) v = detail::get_le<double>(in);
    return true;
}

// ------------------------------------------------------------------ fits

/// log y = log C + beta log x by least squares.
struct PowerFit {
    double exponent = std::numeric_limits<double>::quiet_NaN();
    double prefactor = std::numeric_limits<double>::quiet_NaN();
    double residual = std::numeric_limits<double>::quiet_NaN();  ///< rms of log residuals
    std::size_t points = 0;
};

inline PowerFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("fit_power_law: size mismatch");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > 0 && y[i] > 0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    PowerFit f;
    f.points = lx.size();
    if (f.points < 2) return f;
    const double m = static_cast<double>(f.points);
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (!(sxx > 0)) return f;
    f.exponent = sxy / sxx;
    const double icpt = my - f.exponent * mx;
    f.prefactor = std::exp(icpt);
    double ss = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double r = ly[i] - (icpt + f.exponent * lx[i]);
        ss += r * r;
    }
    f.residual = std::sqrt(ss / m);
    return f;
}

inline nlohmann::json to_json(const PowerFit& f) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return {{"exponent", num(f.exponent)}, {"prefactor", num(f.prefactor)}, {"residual", num(f.residual)},
            {"points", f.points}};
}

// ------------------------------------------------------- stability sweep

enum class RowStatus { ok, blowup, hypothesis_violation, error };

inline std::string to_string(RowStatus s) {
    switch (s) {
        case RowStatus::ok: return "ok";
        case RowStatus::blowup: return "blowup";
        case RowStatus::hypothesis_violation: return "hypothesis_violation";
        case RowStatus::error: return "error";
    }
    return "unknown";
}

struct StabilitySample {
    double t = 0;
    double distance = 0;  ///< H1 distance to the peakon translated to xi(t)
    double xi = 0;
    double peak_deviation = 0;  ///< |M - a|
    double lhs = 0;
    double E = 0, F = 0;
};

struct StabilityRow {
    double eps_target = 0;
    double eps_achieved = 0;  ///< initial H1 distance actually realized
    double bump_amplitude = 0;
    double bump_center = 0;
    RowStatus status = RowStatus::ok;
    std::string message;
    double t_reached = 0;  ///< t_end, or the last valid time before blow-up
    double sup_distance = 0;
    double max_peak_deviation = 0;
    double max_lhs = -std::numeric_limits<double>::infinity();
    double E_drift = 0, F_drift = 0;
    double envelope = std::numeric_limits<double>::quiet_NaN();
    bool envelope_ok = false;
    std::vector<StabilitySample> trace;

    bool usable() const { return status == RowStatus::ok || status == RowStatus::blowup; }
};

struct StabilityReport {
    ExperimentConfig config;
    double a = 0;
    double gate = 0;
    std::vector<StabilityRow> rows;  ///< sorted by eps_target
    PowerFit distance_fit;           ///< sup distance vs eps
    PowerFit peak_fit;               ///< max |M - a| vs eps
    double A_hat = std::numeric_limits<double>::quiet_NaN();  ///< max (M - a)^2 / eps
    bool envelope_ok = false;        ///< every usable row inside its envelope

    bool any(RowStatus s) const {
        return std::any_of(rows.begin(), rows.end(), [s](const StabilityRow& r) { return r.status == s; });
    }
};

/// 3 sqrt(3 a eps + 4 a sqrt(A eps)).
inline double stability_envelope(double a, double eps, double A) {
    return 3.0 * std::sqrt(3.0 * a * eps + 4.0 * a * std::sqrt(A * eps));
}

/// One epsilon: build y0 >= 0 data at the requested distance, evolve, and
/// observe. Never throws for row-level failures; they land in `status`.
inline StabilityRow run_stability_row(const ExperimentConfig& cfg, double eps, std::size_t row_index) {
    StabilityRow row;
    row.eps_target = eps;
    const auto p = cfg.peakon();
    const auto g = cfg.grid();
    const auto bump = cfg.bump_for_row(row_index);
    row.bump_center = bump.center;
    try {
        check_epsilon(eps, p.a);
        InitialData data;
        if (eps == 0) {
            data = mollified_peakon(p, cfg.mollifier_spec(), g);
        } else {
            try {
                auto td = perturb_to_target(p, cfg.mollifier_spec(), eps, bump, g);
                data = std::move(td.data);
                row.bump_amplitude = td.beta;
            } catch (const TargetUnreachable& e) {
                throw HypothesisViolation(e.what());
            }
        }
        row.eps_achieved = data.distance;
        const auto& y0 = data.u.y();
        const double min_y0 = *std::min_element(y0.begin(), y0.end());
        if (min_y0 < -1e-12) throw HypothesisViolation("initial momentum has min " + std::to_string(min_y0) + " < 0");

        Solver solver(cfg.solver());
        RunOptions opts;
        opts.on_observe = [&](const SolverState& s, const ObserverRecord& r) {
            StabilitySample smp;
            smp.t = r.t;
            smp.xi = r.xi;
            smp.distance = h1_distance_to_peakon(s.u, p, r.xi);
            smp.peak_deviation = std::abs(r.M - p.a);
            smp.lhs = r.lhs;
            smp.E = r.E;
            smp.F = r.F;
            row.trace.push_back(smp);
        };
        try {
            const auto res = solver.run(data.u, opts);
            row.t_reached = res.final.t;
        } catch (const BlowUp& e) {
            row.status = RowStatus::blowup;
            row.message = e.what();
            row.t_reached = e.last_valid().t;
        }
    } catch (const HypothesisViolation& e) {
        row.status = RowStatus::hypothesis_violation;
        row.message = e.what();
        row.trace.clear();
        return row;
    } catch (const std::exception& e) {
        row.status = RowStatus::error;
        row.message = e.what();
        return row;
    }
    if (!row.trace.empty()) {
        const double E0 = row.trace.front().E, F0 = row.trace.front().F;
        for (const auto& s : row.trace) {
            row.sup_distance = std::max(row.sup_distance, s.distance);
            row.max_peak_deviation = std::max(row.max_peak_deviation, s.peak_deviation);
            row.max_lhs = std::max(row.max_lhs, s.lhs);
            if (E0 != 0) row.E_drift = std::max(row.E_drift, std::abs(s.E - E0) / std::abs(E0));
            if (F0 != 0) row.F_drift = std::max(row.F_drift, std::abs(s.F - F0) / std::abs(F0));
        }
    }
    return row;
}

/// Rows run concurrently; the report is assembled after all complete.
inline StabilityReport run_stability(const ExperimentConfig& cfg) {
    cfg.validate(true);
    StabilityReport rep;
    rep.config = cfg;
    rep.a = cfg.peakon().a;
    rep.gate = epsilon_gate(rep.a);

    std::vector<double> eps = cfg.eps;
    std::sort(eps.begin(), eps.end());
    std::vector<std::future<StabilityRow>> jobs;
    for (std::size_t i = 0; i < eps.size(); ++i)
        jobs.push_back(std::async(std::launch::async, [&cfg, e = eps[i], i] { return run_stability_row(cfg, e, i); }));
    for (auto& j : jobs) rep.rows.push_back(j.get());

    std::vector<double> xs, ds, ms;
    double A = 0;
    bool have_A = false;
    for (const auto& r : rep.rows) {
        if (!r.usable() || !(r.eps_achieved > 0) || r.trace.empty()) continue;
        xs.push_back(r.eps_achieved);
        ds.push_back(r.sup_distance);
        ms.push_back(r.max_peak_deviation);
        A = std::max(A, r.max_peak_deviation * r.max_peak_deviation / r.eps_achieved);
        have_A = true;
    }
    rep.distance_fit = fit_power_law(xs, ds);
    rep.peak_fit = fit_power_law(xs, ms);
    if (have_A) rep.A_hat = A;

    rep.envelope_ok = have_A;
    for (auto& r : rep.rows) {
        if (!r.usable() || !have_A || r.trace.empty()) continue;
        r.envelope = stability_envelope(rep.a, r.eps_achieved, A);
        r.envelope_ok = std::all_of(r.trace.begin(), r.trace.end(),
                                    [&](const StabilitySample& s) { return s.distance <= r.envelope; });
        rep.envelope_ok = rep.envelope_ok && r.envelope_ok;
    }
    return rep;
}

inline void write_stability_rows_csv(std::ostream& os, const StabilityReport& rep) {
    os << "eps_target,eps_achieved,status,bump_amplitude,bump_center,t_reached,sup_distance,max_peak_deviation,"
          "max_stability_lhs,E_drift,F_drift,envelope,envelope_ok\n";
    for (const auto& r : rep.rows)
        os << detail::fmt(r.eps_target) << ',' << detail::fmt(r.eps_achieved) << ',' << to_string(r.status) << ','
           << detail::fmt(r.bump_amplitude) << ',' << detail::fmt(r.bump_center) << ',' << detail::fmt(r.t_reached)
           << ',' << detail::fmt(r.sup_distance) << ',' << detail::fmt(r.max_peak_deviation) << ','
           << detail::fmt(r.max_lhs) << ',' << detail::fmt(r.E_drift) << ',' << detail::fmt(r.F_drift) << ','
           << detail::fmt(r.envelope) << ',' << (r.envelope_ok ? 1 : 0) << '\n';
}

/// Whitespace columns with a '#' header, for gnuplot.
inline void write_stability_trace(std::ostream& os, const StabilityRow& r) {
    os << "# eps_target " << detail::fmt(r.eps_target) << " eps_achieved " << detail::fmt(r.eps_achieved) << '\n'
       << "# t distance xi peak_deviation stability_lhs E F\n";
    for (const auto& s : r.trace)
        os << detail::fmt(s.t) << ' ' << detail::fmt(s.distance) << ' ' << detail::fmt(s.xi) << ' '
           << detail::fmt(s.peak_deviation) << ' ' << detail::fmt(s.lhs) << ' ' << detail::fmt(s.E) << ' '
           << detail::fmt(s.F) << '\n';
}

inline nlohmann::json to_json(const StabilityReport& rep) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    nlohmann::json j;
    j["config"] = rep.config.to_json();
    j["amplitude"] = rep.a;
    j["epsilon_gate"] = rep.gate;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rep.rows) {
        j["rows"].push_back({{"eps_target", r.eps_target},
                             {"eps_achieved", r.eps_achieved},
                             {"status", to_string(r.status)},
                             {"message", r.message},
                             {"bump_amplitude", r.bump_amplitude},
                             {"bump_center", r.bump_center},
                             {"t_reached", r.t_reached},
                             {"observations", r.trace.size()},
                             {"sup_distance", r.sup_distance},
                             {"max_peak_deviation", r.max_peak_deviation},
                             {"max_stability_lhs", num(r.max_lhs)},
                             {"E_drift", r.E_drift},
                             {"F_drift", r.F_drift},
                             {"envelope", num(r.envelope)},
                             {"envelope_ok", r.envelope_ok}});
    }
    j["fits"] = {{"sup_distance_vs_eps", to_json(rep.distance_fit)},
                 {"peak_deviation_vs_eps", to_json(rep.peak_fit)}};
    j["A_hat"] = num(rep.A_hat);
    j["envelope_ok"] = rep.envelope_ok;
    j["notes"] = {
        "A_hat is fitted per report as max (M - a)^2 / eps; the theorem only asserts that some A exists.",
        "The theorem statement writes both A(n, c, |u0|) and A(c, |u0|); one fitted constant serves for both.",
        "eps is the realized initial H1 distance; rows that break record the last valid time."};
    return j;
}

/// Writes stability_report.json, stability_rows.csv and one trace_<i>.dat
/// per row into `dir`.
inline void write_stability_outputs(const std::filesystem::path& dir, const StabilityReport& rep) {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "stability_report.json") << to_json(rep).dump(2) << '\n';
    std::ofstream rows(dir / "stability_rows.csv");
    write_stability_rows_csv(rows, rep);
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        std::ofstream tr(dir / ("trace_" + std::to_string(i) + ".dat"));
        write_stability_trace(tr, rep.rows[i]);
    }
}

// ------------------------------------------------------------ simulation

/// y0 = amp exp(-(x/w)^2), nonnegative momentum that stays resolved.
inline GridFunction gaussian_momentum(const GridSpec& g, double amp, double width) {
    std::vector<double> y(g.N);
    for (std::size_t j = 0; j < g.N; ++j) {
        const double z = g.x(j) / width;
        y[j] = amp * std::exp(-z * z);
    }
    return GridFunction::from_momentum(g, std::move(y));
}

inline GridFunction initial_field(const ExperimentConfig& cfg) {
    const auto g = cfg.grid();
    const auto p = cfg.peakon();
    switch (cfg.initial) {
        case InitialKind::zero: return GridFunction(g, std::vector<double>(g.N, 0.0));
        case InitialKind::momentum: return gaussian_momentum(g, cfg.momentum_amp, cfg.momentum_width);
        case InitialKind::mollified: return mollified_peakon(p, cfg.mollifier_spec(), g).u;
        case InitialKind::perturbed: {
            if (cfg.eps.empty()) throw std::invalid_argument("initial = perturbed needs an eps entry");
            check_epsilon(cfg.eps.front(), p.a);
            try {
                return perturb_to_target(p, cfg.mollifier_spec(), cfg.eps.front(), cfg.bump_for_row(0), g).data.u;
            } catch (const TargetUnreachable& e) {
                throw HypothesisViolation(e.what());
            }
        }
    }
    throw std::logic_error("unhandled initial kind");
}

/// Least-squares slope of xi(t), unwrapping jumps across the period.
inline double crest_speed(const std::vector<ObserverRecord>& rec, double L) {
    if (rec.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> xi(rec.size());
    xi[0] = rec[0].xi;
    for (std::size_t i = 1; i < rec.size(); ++i) {
        double d = rec[i].xi - rec[i - 1].xi;
        d -= 2 * L * std::round(d / (2 * L));
        xi[i] = xi[i - 1] + d;
    }
    double mt = 0, mx = 0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        mt += rec[i].t;
        mx += xi[i];
    }
    mt /= rec.size();
    mx /= rec.size();
    double stt = 0, stx = 0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        stt += (rec[i].t - mt) * (rec[i].t - mt);
        stx += (rec[i].t - mt) * (xi[i] - mx);
    }
    return stt > 0 ? stx / stt : std::numeric_limits<double>::quiet_NaN();
}

struct SimulationResult {
    bool blowup = false;
    std::string message;
    double t_reached = 0;
    std::vector<ObserverRecord> records;
    GridFunction final;
    double crest_speed = std::numeric_limits<double>::quiet_NaN();
    double E_drift = 0, F_drift = 0;
    double min_y = std::numeric_limits<double>::infinity();
    double max_lhs_ratio = -std::numeric_limits<double>::infinity();  ///< lhs / max(1, F)
};

/// Runs the configured evolution; frames (if enabled) stream to `frames`.
inline SimulationResult run_simulation(const ExperimentConfig& cfg, std::ostream* frames = nullptr) {
    cfg.validate(cfg.initial == InitialKind::mollified || cfg.initial == InitialKind::perturbed);
    SimulationResult out;
    const auto u0 = initial_field(cfg);
    Solver solver(cfg.solver());
    RunOptions opts;
    std::size_t seen = 0;
    if (frames && cfg.frames != FrameFormat::none)
        opts.on_observe = [&](const SolverState& s, const ObserverRecord&) {
            if (seen++ % cfg.frame_every != 0) return;
            if (cfg.frames == FrameFormat::csv) write_frame_csv(*frames, s.t, s.u);
            else write_frame_binary(*frames, s.t, s.u);
        };
    try {
        auto res = solver.run(u0, opts);
        out.records = std::move(res.records);
        out.final = std::move(res.final.u);
        out.t_reached = res.final.t;
    } catch (const BlowUp& e) {
        out.blowup = true;
        out.message = e.what();
        out.records = e.records();
        out.final = e.last_valid().u;
        out.t_reached = e.last_valid().t;
    }
    if (!out.records.empty()) {
        const double E0 = out.records.front().E, F0 = out.records.front().F;
        for (const auto& r : out.records) {
            if (E0 != 0) out.E_drift = std::max(out.E_drift, std::abs(r.E - E0) / std::abs(E0));
            if (F0 != 0) out.F_drift = std::max(out.F_drift, std::abs(r.F - F0) / std::abs(F0));
            out.min_y = std::min(out.min_y, r.min_y);
            out.max_lhs_ratio = std::max(out.max_lhs_ratio, r.lhs / std::max(1.0, r.F));
        }
        out.crest_speed = crest_speed(out.records, cfg.L);
    }
    return out;
}

inline nlohmann::json to_json(const SimulationResult& r, const ExperimentConfig& cfg) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return {{"config", cfg.to_json()},
            {"status", r.blowup ? "blowup" : "ok"},
            {"message", r.message},
            {"t_reached", r.t_reached},
            {"observations", r.records.size()},
            {"crest_speed", num(r.crest_speed)},
            {"expected_speed", cfg.c},
            {"E_drift", r.E_drift},
            {"F_drift", r.F_drift},
            {"min_y", num(r.min_y)},
            {"max_stability_lhs_ratio", num(r.max_lhs_ratio)}};
}

// -------------------------------------------------------- residual fan

/// Pointwise weak-form residuals at `points` equispaced x in ct +- span for
/// every (n, a, t) combination.
inline std::vector<ResidualSample> residual_fan(const std::vector<unsigned>& ns, const std::vector<double>& as,
                                                const std::vector<double>& ts, unsigned points = 100,
                                                double span = 10.0, const QuadratureSpec& q = {}) {
    std::vector<ResidualSample> out;
    for (unsigned n : ns)
        for (double a : as) {
            if (!(a > 0)) throw std::invalid_argument("amplitudes must be positive");
            const auto p = peakon_from_amplitude(n, a);
            for (double t : ts)
                for (unsigned i = 0; i < points; ++i) {
                    const double x = p.c * t - span + (points > 1 ? 2.0 * span * i / (points - 1) : span);
                    out.push_back(peakon_residual_sample(p, t, x, q));
                }
        }
    return out;
}

/// max |residual| / a^{2n+1}; 0 for an empty fan.
inline double max_scaled_residual(const std::vector<ResidualSample>& rows) {
    double m = 0;
    for (const auto& r : rows) m = std::max(m, std::abs(r.residual) / std::pow(r.a, 2.0 * r.n + 1));
    return m;
}

// ------------------------------------------------------- certificates

struct CertifyOptions {
    unsigned n_max = 20;           ///< tables, recurrences, phi, factorizations
    unsigned identity_n_max = 50;  ///< binomial identities
    unsigned phi_denominator = 256;  ///< starting sample spacing 1/D, doubled as needed
    bool inject_fault = false;  ///< perturb c_1 of the n_max table
};

namespace detail {

inline void absorb(Certificate& into, const Certificate& one) {
    if (!one.pass && one.witness) into.fail(*one.witness);
}

}  // namespace detail

/// Every exact certificate, each aggregated over its n range.
inline std::vector<Certificate> certificate_bundle(const CertifyOptions& o) {
    if (o.n_max == 0) throw std::invalid_argument("n_max must be >= 1");
    auto out = verify_identities(std::max(o.n_max, o.identity_n_max));
    Certificate left{IdentityId::left_recurrence, 1, o.n_max};
    Certificate right{IdentityId::right_recurrence, 1, o.n_max};
    Certificate phi{IdentityId::phi_nonpositive, 1, o.n_max};
    Certificate quartic{IdentityId::quartic_factorization, 1, o.n_max};
    Certificate ffac{IdentityId::f_factorization, 1, o.n_max};
    std::vector<Rational> samples;
    for (int j = -8; j <= 8; ++j) samples.emplace_back(j, 8);
    for (unsigned n = 1; n <= o.n_max; ++n) {
        auto table = coefficient_table(n);
        if (o.inject_fault && n == o.n_max) table.left[1] += Rational(1, 1000);
        const auto rec = verify_recurrences(table);
        detail::absorb(left, rec[0]);
        detail::absorb(right, rec[1]);
        detail::absorb(phi, certify_phi_nonpositive_refined(table, o.phi_denominator));
        detail::absorb(quartic, verify_P0_factorization(n));
        detail::absorb(ffac, verify_f_factorization(n, samples));
    }
    out.insert(out.end(), {left, right, phi, quartic, ffac});
    return out;
}

inline nlohmann::json to_json(const std::vector<Certificate>& bundle) {
    nlohmann::json j;
    j["certificates"] = nlohmann::json::array();
    bool ok = true;
    for (const auto& c : bundle) {
        j["certificates"].push_back(to_json(c));
        ok = ok && c.pass;
    }
    j["status"] = ok ? "pass" : "fail";
    return j;
}

}  // namespace gmch
