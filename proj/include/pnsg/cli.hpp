#pragma once

// Subcommand drivers behind tools/pnsg.cpp. Each returns an exit code and
// writes its files under the resolved output directory.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "pnsg/analysis.hpp"
#include "pnsg/basis_spectral.hpp"
#include "pnsg/config.hpp"
#include "pnsg/galerkin_system.hpp"
#include "pnsg/integrator.hpp"
#include "pnsg/io.hpp"

namespace pnsg {

namespace fs = std::filesystem;

namespace detail {

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

inline std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write '" + path.string() + "'");
    return os;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
    auto os = open_out(path);
    os << j.dump(2) << '\n';
    if (!os) throw IoError("write failed for '" + path.string() + "'");
}

/// Finite numbers only: JSON has no NaN or infinity.
inline nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

} // namespace detail

/// Summary numbers for a finished (or partial) run.
inline nlohmann::json run_summary(const SolverConfig& c, const Trajectory& traj, double wall_seconds) {
    const auto& tr = traj.trace;
    const double h0 = tr.empty() ? 0.0 : tr.front().energy;
    const double ht = tr.empty() ? 0.0 : tr.back().energy;
    double max_res = 0.0;
    bool monotone = true, positive = true;
    for (std::size_t k = 0; k < tr.size(); ++k) {
        max_res = std::max(max_res, std::abs(tr[k].energy_residual));
        if (!(tr[k].energy > 0.0)) positive = false;
        if (k > 0 && tr[k].energy > tr[k - 1].energy + 1e-12 * h0) monotone = false;
    }
    return {{"p", c.p},
            {"q", Exponent(c.p).q()},
            {"nu", c.nu},
            {"n_basis", traj.disc->size()},
            {"basis", traj.disc->basis.id()},
            {"quad_order", traj.disc->rule.order()},
            {"t_final", traj.t_final()},
            {"initial_H", detail::num(h0)},
            {"final_H", detail::num(ht)},
            {"total_dissipation", detail::num(traj.dissipated)},
            {"max_energy_residual", detail::num(max_res)},
            {"relative_energy_defect", detail::num(h0 > 0.0 ? std::abs(tr.back().energy_residual) / h0 : 0.0)},
            {"steps", tr.empty() ? 0 : tr.size() - 1},
            {"rejected_steps", traj.rejected_steps},
            {"snapshots", traj.snapshots()},
            {"energy_monotone", monotone},
            {"energy_positive", positive},
            {"wall_time_s", wall_seconds}};
}

inline void write_run_outputs(const fs::path& dir, const SolverConfig& c, const Trajectory& traj, double wall) {
    {
        auto os = detail::open_out(dir / "trace.csv");
        write_trace_csv(os, traj.trace);
    }
    {
        auto os = detail::open_out(dir / "snapshots.csv");
        write_snapshots(os, traj);
    }
    detail::write_json(dir / "summary.json", run_summary(c, traj, wall));
    Series h{"H(t)", {}, {}};
    for (const auto& r : traj.trace) {
        h.x.push_back(r.t);
        h.y.push_back(r.energy);
    }
    auto os = detail::open_out(dir / "energy.svg");
    write_svg_chart(os, {h}, {"Energy H(t)", "t", "H", false, true});
}

struct SimulateResult {
    int exit_code = 0;
    Trajectory trajectory;
};

/// Integrates the config and writes trace.csv, snapshots.csv, summary.json and
/// energy.svg. On integration failure the partial outputs and failure.json are written.
inline SimulateResult run_simulate(const SolverConfig& c, std::ostream& log = std::cerr) {
    const fs::path dir = resolve_output_dir(c);
    detail::ensure_dir(dir);
    detail::write_json(dir / "config.json", to_json(c));
    const auto disc = make_discretization(c);
    const InitialProjection init = initial_state(c, *disc);
    if (init.trivial) throw ValidationError("initial data projects to zero; the zero solution is trivial");
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
    SimulateResult res;
    try {
        res.trajectory = integrate(disc, init.coeffs, Exponent(c.p), c.nu, integrator_options(c));
    } catch (const IntegrationError& e) {
        const double wall = elapsed();
        if (e.partial().trace.size() > 0) write_run_outputs(dir, c, e.partial(), wall);
        detail::write_json(dir / "failure.json", {{"error", e.what()}, {"t_reached", e.partial().t_final()}, {"wall_time_s", wall}});
        log << "integration failed: " << e.what() << '\n';
        res.exit_code = static_cast<int>(ExitCode::numerical);
        res.trajectory = e.partial();
        return res;
    }
    write_run_outputs(dir, c, res.trajectory, elapsed());
    log << "wrote " << (dir / "summary.json").string() << '\n';
    return res;
}

/// `basis` subcommand: serialized basis, plus the eigenvalue table for spectral bases.
inline int run_basis(const std::string& kind, int n, int pool_per_axis, const std::string& out, std::ostream& log = std::cerr) {
    if (n < 1 || n > 400) throw ValidationError("--n must lie in [1, 400]");
    if (pool_per_axis <= 0) pool_per_axis = std::max(8, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))));
    if (pool_per_axis * pool_per_axis < n) throw ValidationError("--pool is too small for --n");
    const fs::path path(out);
    if (path.has_parent_path()) detail::ensure_dir(path.parent_path());
    if (kind == "spectral") {
        const SpectralBasis sb = build_spectral_basis(pool_per_axis, n);
        {
            auto os = detail::open_out(path);
            write_basis(os, sb.basis);
        }
        auto os = detail::open_out(path.string() + ".eig");
        write_eigenvalues(os, sb.eigenvalues);
    } else if (kind == "stream") {
        auto os = detail::open_out(path);
        write_basis(os, make_basis("stream", n, pool_per_axis));
    } else {
        throw ValidationError("--kind must be 'stream' or 'spectral'");
    }
    log << "wrote " << path.string() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// check

struct CheckItem {
    std::string suite;
    std::string name;
    double value = 0.0;     // measured quantity
    double threshold = 0.0; // pass boundary
    bool pass = false;
    std::string note;
};

/// Random coefficient vectors with spectrally decaying variance, N(0,1)/(k+1).
inline std::vector<Eigen::VectorXd> random_states(Eigen::Index n, std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Eigen::VectorXd> out;
    while (out.size() < count) {
        Eigen::VectorXd x(n);
        for (Eigen::Index k = 0; k < n; ++k) x[k] = g(rng) / static_cast<double>(k + 1);
        if (x.norm() > 0.1) out.push_back(x);
    }
    return out;
}

inline std::vector<CheckItem> check_inequalities(const SolverConfig& c) {
    std::vector<CheckItem> items;
    auto add = [&](const InequalityReport& r, double threshold) {
        items.push_back({"inequalities", r.name + "(p=" + detail::g17(r.p) + ")", r.worst, threshold, r.pass, r.detail});
    };
    add(check_gady(c.p, 100000, c.seed), 0.0);
    if (c.p != 2.0) add(check_gady(2.0, 100000, c.seed), 1.0);
    add(check_monotone_g(c.p, 100000, c.seed), -1e-14);
    add(check_hemicontinuity(c.p, 100, c.seed), 1e-2);
    return items;
}

/// Trajectory for the check suites: reuse snapshots.csv and trace.csv in the
/// output directory when present, otherwise run the simulation.
struct LoadedRun {
    Trajectory traj;
    bool from_files = false;
};

inline LoadedRun load_or_simulate(const SolverConfig& c, std::ostream& log) {
    const fs::path dir = resolve_output_dir(c);
    const fs::path snap = dir / "snapshots.csv", trace = dir / "trace.csv";
    LoadedRun out;
    if (fs::exists(snap)) {
        std::ifstream is(snap);
        if (!is) throw IoError("cannot read '" + snap.string() + "'");
        out.traj = trajectory_from_snapshots(read_snapshots(is, snap.string()), make_discretization(c));
        if (fs::exists(trace)) {
            std::ifstream ts(trace);
            out.traj.trace = read_trace_csv(ts, trace.string());
        }
        out.from_files = true;
        log << "using " << snap.string() << '\n';
        return out;
    }
    SimulateResult r = run_simulate(c, log);
    if (r.exit_code != 0) throw NumericalError("simulation failed; see failure.json");
    out.traj = std::move(r.trajectory);
    return out;
}

inline std::vector<CheckItem> check_energy(const SolverConfig& c, const Trajectory& traj) {
    std::vector<CheckItem> items;
    const Exponent ex(c.p);
    const auto fine = verification_discretization(*traj.disc, c.p);
    const Discretization& disc = *fine;
    const auto states = random_states(disc.size(), 50, c.seed);

    double worst_identity = 0.0;
    double worst_transport = 0.0;
    for (const auto& x : states) {
        const AssembledSystem s = assemble(disc, x, ex, c.nu, AssemblyParts::rhs, c.threads);
        const double diss = c.nu * s.int_d_p;
        worst_identity = std::max(worst_identity, std::abs(x.dot(s.f_vector) + diss) / diss);
        worst_transport = std::max(worst_transport, std::abs(x.dot(s.f_transport)) / (x.norm() * s.f_vector.norm()));
    }
    items.push_back({"energy", "instantaneous_identity", worst_identity, 1e-7, worst_identity <= 1e-7,
                     "max |X.F + nu int|D|^p| / (nu int|D|^p), 50 states"});
    items.push_back({"energy", "transport_annihilation", worst_transport, 1e-8, worst_transport <= 1e-8,
                     "max |X.F_transport| / (|X| |F|), 50 states"});

    double worst_pd = std::numeric_limits<double>::infinity();
    std::size_t activations = 0;
    bool chol = true;
    for (const auto& x : random_states(disc.size(), 100, c.seed + 1)) {
        const AssembledSystem s = assemble(*traj.disc, x, ex, c.nu, AssemblyParts::matrix, c.threads);
        activations += s.diagnostics.guard_activations;
        if (Eigen::LLT<Eigen::MatrixXd>(s.a_matrix).info() != Eigen::Success) chol = false;
        const double amin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s.a_matrix, Eigen::EigenvaluesOnly).eigenvalues()[0];
        const double gmin =
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(weighted_gram(*traj.disc, x, ex), Eigen::EigenvaluesOnly).eigenvalues()[0];
        worst_pd = std::min(worst_pd, amin / (std::min(ex.p() - 1.0, 1.0) * gmin));
    }
    items.push_back({"energy", "a_positive_definite", worst_pd, 1.0 - 1e-10, chol && worst_pd >= 1.0 - 1e-10 && activations == 0,
                     "min lambda_min(A) / (min(p-1,1) lambda_min(G_p)); guard activations " + std::to_string(activations)});

    const auto& tr = traj.trace;
    if (!tr.empty()) {
        const double h0 = tr.front().energy;
        const double defect = std::abs(tr.back().energy_residual) / h0;
        items.push_back({"energy", "energy_law", defect, c.tol_energy, defect <= c.tol_energy,
                         "|H(T) - H(0) + nu int ||D||_p^p dt| / H(0)"});
        double rise = 0.0;
        bool positive = true;
        for (std::size_t k = 0; k < tr.size(); ++k) {
            if (!(tr[k].energy > 0.0)) positive = false;
            if (k > 0) rise = std::max(rise, tr[k].energy - tr[k - 1].energy);
        }
        items.push_back({"energy", "monotone_energy", rise, 1e-12, rise <= 1e-12, "max H(t_k+1) - H(t_k)"});
        items.push_back({"energy", "positive_energy", positive ? 1.0 : 0.0, 1.0, positive, "H(t_k) > 0 for all k"});
    }

    double lp_rise = 0.0, vp_gap = 0.0, inverse = 0.0;
    double prev = -1.0;
    for (const auto& x : traj.coeffs) {
        const NormReport nr = norm_report(*traj.disc, x, ex);
        const double lp = std::pow(nr.lp_v, 1.0 / ex.p());
        if (prev >= 0.0) lp_rise = std::max(lp_rise, lp - prev);
        prev = lp;
        if (nr.lp_v > 0.0) vp_gap = std::max(vp_gap, std::abs(nr.lq_vp - nr.lp_v) / nr.lp_v);
        inverse = std::max(inverse, nr.inverse);
    }
    items.push_back({"energy", "lp_bound", lp_rise, 1e-9, lp_rise <= 1e-9, "max increase of ||v(t_k)||_p between snapshots"});
    items.push_back({"energy", "vp_norm_identity", vp_gap, 1e-12, vp_gap <= 1e-12, "max | ||v_p||_q^q - ||v||_p^p | / ||v||_p^p"});
    items.push_back({"energy", "vp_inverse", inverse, 1e-12, inverse <= 1e-12, "max |(v_p)_q - v| / max |v|"});
    return items;
}

inline std::vector<CheckItem> check_weakform(const SolverConfig& c, const Trajectory& traj) {
    std::vector<CheckItem> items;
    const double t_end = traj.t_final();
    const int k_max = static_cast<int>(std::min<Eigen::Index>(traj.disc->size(), 16));
    const WeakResidualReport wr = weak_residual(traj, standard_test_family(traj, 4, k_max));
    items.push_back({"weakform", "weak_residual", wr.max_relative, 1e-4, wr.max_relative <= 1e-4,
                     "max |residual| / largest term over q_m(t) phi_k(x), m <= 4"});

    std::vector<double> hs;
    for (int d : {64, 32, 16, 8}) hs.push_back(t_end / d);
    const ShiftModulus sm = time_shift_modulus(traj, hs);
    items.push_back({"weakform", "time_shift_slope", sm.slope, 0.9, sm.slope >= 0.9, "log-log slope over h = T/64..T/8"});

    double worst_ratio = 0.0, worst_gap = 0.0;
    std::vector<double> defects;
    for (int d : {16, 32, 64}) {
        const ChainRuleResult r = chain_rule_check(traj, t_end / d);
        defects.push_back(std::abs(r.minus));
        worst_gap = std::abs(r.plus - r.minus);
    }
    for (std::size_t k = 1; k < defects.size(); ++k)
        if (defects[k - 1] > 0.0) worst_ratio = std::max(worst_ratio, std::abs(defects[k] / defects[k - 1] - 0.5) / 0.5);
    items.push_back({"weakform", "chain_rule_halving", worst_ratio, 0.3, worst_ratio <= 0.3,
                     "max |ratio/0.5 - 1| of successive D_h^- defects, h = T/16, T/32, T/64"});
    items.push_back({"weakform", "chain_rule_two_sided_gap", worst_gap, defects.empty() ? 0.0 : defects.front(),
                     worst_gap <= (defects.empty() ? 0.0 : defects.front()), "|defect+ - defect-| at the smallest h vs the largest-h defect"});

    const Exponent ex(c.p);
    const GnRatio gn = gn_ratio(*traj.disc, traj.coeffs.front(), ex);
    items.push_back({"weakform", "gn_ratio_finite", gn.v, 0.0, std::isfinite(gn.v) && std::isfinite(gn.vp),
                     "v ratio; v_p ratio " + detail::g17(gn.vp)});
    return items;
}

inline void write_check_reports(const fs::path& dir, const std::vector<CheckItem>& items) {
    nlohmann::json j = nlohmann::json::object();
    bool all = true;
    for (const auto& it : items) {
        j["checks"][it.suite + "/" + it.name] = {{"value", detail::num(it.value)}, {"threshold", it.threshold}, {"pass", it.pass}, {"note", it.note}};
        all = all && it.pass;
    }
    j["pass"] = all;
    detail::write_json(dir / "check_report.json", j);
    auto os = detail::open_out(dir / "check_report.csv");
    os << "suite,name,value,threshold,pass\n";
    for (const auto& it : items)
        os << it.suite << ',' << it.name << ',' << detail::g17(it.value) << ',' << detail::g17(it.threshold) << ',' << (it.pass ? 1 : 0) << '\n';
}

/// Exit 0 when every check passes, 2 otherwise.
inline int run_check(const std::string& suite, const SolverConfig& c, std::ostream& log = std::cerr) {
    if (suite != "inequalities" && suite != "energy" && suite != "weakform" && suite != "all") {
        throw ValidationError("unknown suite '" + suite + "' (inequalities, energy, weakform, all)");
    }
    std::vector<CheckItem> items;
    if (suite == "inequalities" || suite == "all") {
        auto v = check_inequalities(c);
        items.insert(items.end(), v.begin(), v.end());
    }
    if (suite == "energy" || suite == "weakform" || suite == "all") {
        const LoadedRun run = load_or_simulate(c, log);
        if (suite != "weakform") {
            auto v = check_energy(c, run.traj);
            items.insert(items.end(), v.begin(), v.end());
        }
        if (suite != "energy") {
            auto v = check_weakform(c, run.traj);
            items.insert(items.end(), v.begin(), v.end());
        }
    }
    const fs::path dir = resolve_output_dir(c);
    detail::ensure_dir(dir);
    write_check_reports(dir, items);
    bool all = true;
    for (const auto& it : items) {
        log << (it.pass ? "PASS " : "FAIL ") << it.suite << '/' << it.name << " value=" << detail::g17(it.value)
            << " threshold=" << detail::g17(it.threshold) << '\n';
        all = all && it.pass;
    }
    return all ? 0 : static_cast<int>(ExitCode::numerical);
}

// ---------------------------------------------------------------------------
// sweep

inline std::vector<int> parse_n_list(const std::string& s) {
    std::vector<int> out;
    for (const std::string& tok : detail::split(s, ',')) {
        if (tok.empty()) throw ValidationError("empty entry in --n-list");
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(tok, &used);
        } catch (const std::exception&) {
            throw ValidationError("--n-list entry '" + tok + "' is not an integer");
        }
        if (used != tok.size() || v < 1) throw ValidationError("--n-list entry '" + tok + "' is not a positive integer");
        if (!out.empty() && v < out.back()) throw ValidationError("--n-list must be ascending");
        out.push_back(v);
    }
    if (out.empty()) throw ValidationError("--n-list is empty");
    return out;
}

inline int run_sweep(const SolverConfig& base, const std::vector<int>& n_list, std::ostream& log = std::cerr) {
    std::vector<Trajectory> runs;
    for (int n : n_list) {
        SolverConfig c = base;
        c.n_basis = n;
        validate(c);
        const auto disc = make_discretization(c);
        const InitialProjection init = initial_state(c, *disc);
        if (init.trivial) throw ValidationError("initial data projects to zero for N = " + std::to_string(n));
        log << "sweep: N = " << n << '\n';
        runs.push_back(integrate(disc, init.coeffs, Exponent(c.p), c.nu, integrator_options(c)));
    }
    const SweepReport rep = convergence_sweep(runs, runs.back().disc->rule);
    const fs::path dir = resolve_output_dir(base);
    detail::ensure_dir(dir);
    {
        auto os = detail::open_out(dir / "sweep.csv");
        os << "n_i,n_j,distance\n";
        for (std::size_t i = 0; i < runs.size(); ++i)
            for (std::size_t j = i + 1; j < runs.size(); ++j)
                os << n_list[i] << ',' << n_list[j] << ',' << detail::g17(rep.distance[i][j]) << '\n';
    }
    {
        auto os = detail::open_out(dir / "sweep_runs.csv");
        os << "n,initial_lp,sup_lp,bounded,distance_to_last\n";
        for (std::size_t i = 0; i < runs.size(); ++i)
            os << n_list[i] << ',' << detail::g17(rep.runs[i].initial_lp) << ',' << detail::g17(rep.runs[i].sup_lp) << ','
               << (rep.runs[i].bounded ? 1 : 0) << ',' << detail::g17(rep.to_finest[i]) << '\n';
    }
    Series s{"distance to N = " + std::to_string(n_list.back()), {}, {}};
    for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
        s.x.push_back(n_list[i]);
        s.y.push_back(rep.to_finest[i]);
    }
    auto os = detail::open_out(dir / "sweep.svg");
    write_svg_chart(os, {s}, {"Pairwise L^p(0,T;L^p) distance", "N", "distance", false, true});
    bool bounded = true;
    for (const auto& r : rep.runs) bounded = bounded && r.bounded;
    log << "sweep: distances " << (rep.decreasing ? "decrease" : "do not decrease monotonically") << " along the list; "
        << (bounded ? "all runs bounded by their initial L^p norm" : "an L^p bound was violated") << '\n';
    return bounded ? 0 : static_cast<int>(ExitCode::numerical);
}

} // namespace pnsg
