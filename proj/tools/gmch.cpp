// gmch: certify / simulate / stability / weakres.
// Exit codes: 0 ok, 1 usage or internal error, 2 certificate failure,
// 3 hypothesis violation, 4 blow-up abort.

#include "gmch/harness.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

enum Exit { ok = 0, internal = 1, certificate_failure = 2, hypothesis_violation = 3, blowup = 4 };

// Flags shared by simulate and stability; each maps onto a config key and
// is applied after the config file, before --set.
struct ConfigFlags {
    std::string file;
    std::vector<std::pair<std::string, std::string>> flags;
    std::vector<std::string> sets;

    void attach(CLI::App* cmd) {
        cmd->add_option("-c,--config", file, "key = value config file")->check(CLI::ExistingFile);
        auto key = [&](const char* name, const char* key, const char* help) {
            cmd->add_option_function<std::string>(
                name, [this, key](const std::string& v) { flags.emplace_back(key, v); }, help);
        };
        key("--n", "n", "nonlinearity index n >= 1");
        key("--speed", "c", "peakon speed c");
        key("--L", "L", "half length of the periodic domain");
        key("--N", "N", "grid points (power of two)");
        key("--delta", "delta", "mollifier width");
        key("--eps", "eps", "comma-separated target distances");
        key("--t-end", "t_end", "final time");
        key("--seed", "seed", "seed for the bump-center jitter");
        key("--out", "output_dir", "output directory");
        cmd->add_option("--set", sets, "extra key=value overrides, applied last");
    }

    gmch::ExperimentConfig load() const {
        auto cfg = file.empty() ? gmch::ExperimentConfig{} : gmch::ExperimentConfig::from_file(file);
        for (const auto& [k, v] : flags) cfg.set(k, v);
        for (const auto& s : sets) cfg.apply_override(s);
        return cfg;
    }
};

std::vector<unsigned> to_unsigned(const std::vector<double>& v) {
    std::vector<unsigned> out;
    for (double x : v) {
        if (!(x >= 1) || x != std::floor(x)) throw std::invalid_argument("n values must be positive integers");
        out.push_back(static_cast<unsigned>(x));
    }
    return out;
}

int cmd_certify(const gmch::CertifyOptions& o, const std::string& out) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto bundle = gmch::certificate_bundle(o);
    auto j = gmch::to_json(bundle);
    j["n_max"] = o.n_max;
    j["identity_n_max"] = std::max(o.n_max, o.identity_n_max);
    j["fault_injected"] = o.inject_fault;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (out.empty()) std::cout << j.dump(2) << '\n';
    else std::ofstream(out) << j.dump(2) << '\n';
    for (const auto& c : bundle)
        if (!c.pass) {
            std::cerr << "certificate " << gmch::wire_name(c.id) << " failed at n = " << c.witness->n
                      << ", residual " << gmch::to_string(c.witness->residual) << '\n';
        }
    std::cerr << "certify: " << bundle.size() << " certificates in " << secs << " s\n";
    return j["status"] == "pass" ? ok : certificate_failure;
}

int cmd_simulate(const gmch::ExperimentConfig& cfg) {
    const fs::path dir = cfg.output_dir;
    fs::create_directories(dir);
    std::ofstream frames;
    if (cfg.frames == gmch::FrameFormat::csv) frames.open(dir / "frames.csv");
    if (cfg.frames == gmch::FrameFormat::binary) frames.open(dir / "frames.bin", std::ios::binary);
    const auto r = gmch::run_simulation(cfg, frames.is_open() ? &frames : nullptr);
    std::ofstream obs(dir / "observer.csv");
    gmch::write_observer_csv(obs, r.records);
    std::ofstream prof(dir / "profile_final.csv");
    gmch::write_profile_csv(prof, r.final);
    std::ofstream(dir / "simulate.json") << gmch::to_json(r, cfg).dump(2) << '\n';
    std::cerr << "simulate: t = " << r.t_reached << ", " << r.records.size() << " observations, E drift "
              << r.E_drift << ", F drift " << r.F_drift << '\n';
    if (r.blowup) {
        std::cerr << "blow-up: " << r.message << '\n';
        return blowup;
    }
    return ok;
}

int cmd_stability(const gmch::ExperimentConfig& cfg) {
    const auto rep = gmch::run_stability(cfg);
    gmch::write_stability_outputs(cfg.output_dir, rep);
    for (const auto& r : rep.rows)
        std::cerr << "eps " << r.eps_target << ": " << gmch::to_string(r.status) << " (t = " << r.t_reached
                  << ", sup distance " << r.sup_distance << ")" << (r.message.empty() ? "" : " " + r.message) << '\n';
    if (rep.any(gmch::RowStatus::error)) return internal;
    if (rep.any(gmch::RowStatus::hypothesis_violation)) return hypothesis_violation;
    if (rep.any(gmch::RowStatus::blowup)) return blowup;
    return ok;
}

int cmd_weakres(const std::vector<double>& ns, const std::vector<double>& as, const std::vector<double>& ts,
                unsigned points, double tol, const std::string& out) {
    const auto rows = gmch::residual_fan(to_unsigned(ns), as, ts, points);
    if (out.empty()) gmch::write_residual_csv(std::cout, rows);
    else {
        std::ofstream f(out);
        gmch::write_residual_csv(f, rows);
    }
    const double worst = gmch::max_scaled_residual(rows);
    std::cerr << "weakres: " << rows.size() << " samples, max |residual| / a^(2n+1) = " << worst << '\n';
    return worst <= tol ? ok : certificate_failure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gmCH peakon laboratory"};
    app.require_subcommand(1);

    gmch::CertifyOptions cert;
    std::string cert_out;
    auto* certify = app.add_subcommand("certify", "exact coefficient certificates as JSON");
    certify->add_option("--n-max", cert.n_max, "tables, recurrences, phi bound, factorizations for n = 1..n_max")
        ->check(CLI::Range(1u, 200u));
    certify->add_option("--identity-n-max", cert.identity_n_max, "binomial identities for n = 1..this")
        ->check(CLI::Range(1u, 500u));
    certify->add_option("--phi-denominator", cert.phi_denominator, "sample spacing 1/D for the phi bound")
        ->check(CLI::Range(64u, 1u << 16));
    certify->add_flag("--inject-fault", cert.inject_fault, "corrupt c_1 of the n_max table (self-test)");
    certify->add_option("-o,--output", cert_out, "write JSON here instead of stdout");

    ConfigFlags sim_flags, stab_flags;
    auto* simulate = app.add_subcommand("simulate", "evolve one initial datum; observer CSV, profile, frames");
    sim_flags.attach(simulate);
    auto* stability = app.add_subcommand("stability", "orbital-stability sweep over the eps list");
    stab_flags.attach(stability);

    std::vector<double> wr_n{1}, wr_a{1}, wr_t{0, 1};
    unsigned wr_points = 100;
    double wr_tol = 1e-8;
    std::string wr_out;
    auto* weakres = app.add_subcommand("weakres", "pointwise weak-form residuals of the peakon as CSV");
    weakres->add_option("--n", wr_n, "n values (comma separated)")->delimiter(',');
    weakres->add_option("--a", wr_a, "amplitudes (comma separated)")->delimiter(',');
    weakres->add_option("--t", wr_t, "times (comma separated)")->delimiter(',');
    weakres->add_option("--points", wr_points, "x samples per (n, a, t) over ct +- 10")->check(CLI::Range(1u, 100000u));
    weakres->add_option("--tol", wr_tol, "bound on max |residual| / a^(2n+1)");
    weakres->add_option("-o,--output", wr_out, "write CSV here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*certify) return cmd_certify(cert, cert_out);
        if (*simulate) return cmd_simulate(sim_flags.load());
        if (*stability) return cmd_stability(stab_flags.load());
        if (*weakres) return cmd_weakres(wr_n, wr_a, wr_t, wr_points, wr_tol, wr_out);
    } catch (const gmch::HypothesisViolation& e) {
        std::cerr << "hypothesis violation: " << e.what() << '\n';
        return hypothesis_violation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return internal;
    }
    return internal;
}
