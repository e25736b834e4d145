#pragma once

// Run configuration (JSON) and everything needed to turn it into a
// Discretization plus initial coefficients. Requires nlohmann/json.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pnsg/basis_spectral.hpp"
#include "pnsg/basis_stream.hpp"
#include "pnsg/error.hpp"
#include "pnsg/exponent.hpp"
#include "pnsg/field_eval.hpp"
#include "pnsg/helmholtz.hpp"
#include "pnsg/initial_data.hpp"
#include "pnsg/integrator.hpp"

namespace pnsg {

inline constexpr const char* output_root_env = "PNSG_OUTPUT_ROOT";

struct InitialData {
    std::string preset = "two_mode";      // single_mode | two_mode | vortex; empty when another source is used
    std::vector<double> stream_coefficients; // over the raw stream pool, pool order
    std::string grid_file;                // CSV x,y,u1,u2 on a cell-centred grid
    double amplitude = 1.0;
};

struct SolverConfig {
    double p = 3.0;
    double nu = 0.1;
    int n_basis = 16;
    std::string basis_kind = "spectral";
    int pool_per_axis = 8;
    double t_final = 1.0;
    int quad_order = 0; // 0: automatic
    double tol_energy = 1e-5;
    double newton_tol = 1e-12;
    int max_newton = 30;
    double dt_initial = 0.0;
    double dt_min = 1e-9;
    double dt_max = 0.0;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string output_dir = "pnsg_out";
    InitialData initial;
};

inline void validate(const SolverConfig& c) {
    auto bad = [](const std::string& field, const std::string& why) { throw ValidationError("config field '" + field + "': " + why); };
    if (!std::isfinite(c.p) || c.p < 2.0) bad("p", "must satisfy p >= 2 (got " + std::to_string(c.p) + ")");
    if (!(c.nu > 0.0) || !std::isfinite(c.nu)) bad("nu", "must be > 0");
    if (c.n_basis < 1) bad("n_basis", "must be >= 1");
    if (c.n_basis > 400) bad("n_basis", "must be <= 400");
    if (c.basis_kind != "stream" && c.basis_kind != "spectral") bad("basis_kind", "must be 'stream' or 'spectral'");
    if (c.pool_per_axis < 1 || c.pool_per_axis > 20) bad("pool_per_axis", "must lie in [1, 20]");
    if (c.pool_per_axis * c.pool_per_axis < c.n_basis) bad("pool_per_axis", "pool_per_axis^2 must be >= n_basis");
    if (!(c.t_final > 0.0) || !std::isfinite(c.t_final)) bad("t_final", "must be > 0");
    if (c.quad_order < 0 || c.quad_order > 400) bad("quad_order", "must be 0 (automatic) or in [1, 400]");
    if (!(c.tol_energy > 0.0)) bad("tol_energy", "must be > 0");
    if (!(c.newton_tol > 0.0)) bad("newton_tol", "must be > 0");
    if (c.max_newton < 1) bad("max_newton", "must be >= 1");
    if (c.dt_initial < 0.0) bad("dt_initial", "must be >= 0");
    if (!(c.dt_min > 0.0)) bad("dt_min", "must be > 0");
    if (c.dt_max < 0.0) bad("dt_max", "must be >= 0");
    if (c.threads < 1) bad("threads", "must be >= 1");
    if (c.output_dir.empty()) bad("output_dir", "must not be empty");
    const InitialData& in = c.initial;
    const int sources = (!in.preset.empty()) + (!in.stream_coefficients.empty()) + (!in.grid_file.empty());
    if (sources != 1) bad("initial_data", "exactly one of preset, stream_coefficients, grid_file is required");
    if (!in.preset.empty() && in.preset != "single_mode" && in.preset != "two_mode" && in.preset != "vortex") {
        bad("initial_data.preset", "unknown preset '" + in.preset + "' (single_mode, two_mode, vortex)");
    }
    if (!in.preset.empty() && in.preset == "two_mode" && c.n_basis < 2) bad("initial_data.preset", "two_mode needs n_basis >= 2");
    if (in.stream_coefficients.size() > static_cast<std::size_t>(c.pool_per_axis * c.pool_per_axis)) {
        bad("initial_data.stream_coefficients", "more coefficients than pool members");
    }
    if (!std::isfinite(in.amplitude)) bad("initial_data.amplitude", "must be finite");
}

inline nlohmann::json to_json(const SolverConfig& c) {
    nlohmann::json init;
    if (!c.initial.preset.empty()) init["preset"] = c.initial.preset;
    if (!c.initial.stream_coefficients.empty()) init["stream_coefficients"] = c.initial.stream_coefficients;
    if (!c.initial.grid_file.empty()) init["grid_file"] = c.initial.grid_file;
    init["amplitude"] = c.initial.amplitude;
    return {{"p", c.p},
            {"nu", c.nu},
            {"n_basis", c.n_basis},
            {"basis_kind", c.basis_kind},
            {"pool_per_axis", c.pool_per_axis},
            {"t_final", c.t_final},
            {"quad_order", c.quad_order},
            {"tol_energy", c.tol_energy},
            {"newton_tol", c.newton_tol},
            {"max_newton", c.max_newton},
            {"dt_initial", c.dt_initial},
            {"dt_min", c.dt_min},
            {"dt_max", c.dt_max},
            {"seed", c.seed},
            {"threads", c.threads},
            {"output_dir", c.output_dir},
            {"initial_data", init}};
}

namespace detail {

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out, const std::string& prefix = "") {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError("config field '" + prefix + key + "' has the wrong type");
    }
}

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& prefix) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw ValidationError("unknown config field '" + prefix + it.key() + "'");
}

} // namespace detail

/// Missing keys keep their defaults; unknown keys are errors (they are usually typos).
inline SolverConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    detail::reject_unknown(j,
                           {"p", "nu", "n_basis", "basis_kind", "pool_per_axis", "t_final", "quad_order", "tol_energy",
                            "newton_tol", "max_newton", "dt_initial", "dt_min", "dt_max", "seed", "threads",
                            "output_dir", "initial_data"},
                           "");
    SolverConfig c;
    detail::read_field(j, "p", c.p);
    detail::read_field(j, "nu", c.nu);
    detail::read_field(j, "n_basis", c.n_basis);
    detail::read_field(j, "basis_kind", c.basis_kind);
    detail::read_field(j, "pool_per_axis", c.pool_per_axis);
    detail::read_field(j, "t_final", c.t_final);
    detail::read_field(j, "quad_order", c.quad_order);
    detail::read_field(j, "tol_energy", c.tol_energy);
    detail::read_field(j, "newton_tol", c.newton_tol);
    detail::read_field(j, "max_newton", c.max_newton);
    detail::read_field(j, "dt_initial", c.dt_initial);
    detail::read_field(j, "dt_min", c.dt_min);
    detail::read_field(j, "dt_max", c.dt_max);
    detail::read_field(j, "seed", c.seed);
    detail::read_field(j, "threads", c.threads);
    detail::read_field(j, "output_dir", c.output_dir);
    if (j.contains("initial_data")) {
        const auto& in = j.at("initial_data");
        if (!in.is_object()) throw ValidationError("config field 'initial_data' must be an object");
        detail::reject_unknown(in, {"preset", "stream_coefficients", "grid_file", "amplitude"}, "initial_data.");
        c.initial.preset.clear();
        detail::read_field(in, "preset", c.initial.preset, "initial_data.");
        detail::read_field(in, "stream_coefficients", c.initial.stream_coefficients, "initial_data.");
        detail::read_field(in, "grid_file", c.initial.grid_file, "initial_data.");
        detail::read_field(in, "amplitude", c.initial.amplitude, "initial_data.");
    }
    validate(c);
    return c;
}

inline SolverConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    SolverConfig c = config_from_json(j);
    // Relative grid files are resolved against the config's directory.
    if (!c.initial.grid_file.empty() && std::filesystem::path(c.initial.grid_file).is_relative()) {
        c.initial.grid_file = (std::filesystem::path(path).parent_path() / c.initial.grid_file).string();
    }
    return c;
}

/// output_dir, placed under $PNSG_OUTPUT_ROOT when that is set and the path is relative.
inline std::filesystem::path resolve_output_dir(const SolverConfig& c) {
    std::filesystem::path out(c.output_dir);
    if (const char* root = std::getenv(output_root_env); root && *root && out.is_relative()) out = std::filesystem::path(root) / out;
    return out;
}

/// Basis for a config. Both kinds are nested in n: the spectral basis keeps the
/// n lowest eigenmodes over a fixed pool, the stream basis the first n
/// orthonormalized pool members (the Cholesky factor is lower triangular).
inline BasisSet make_basis(const std::string& kind, int n, int pool_per_axis) {
    if (n < 1) throw ValidationError("basis size must be >= 1");
    if (pool_per_axis * pool_per_axis < n) throw ValidationError("basis size exceeds the stream pool");
    if (kind == "spectral") return build_spectral_basis(pool_per_axis, n).basis;
    if (kind == "stream") {
        const BasisSet full = build_stream_basis(pool_per_axis, true);
        std::vector<StreamFunction> pool(full.pool().begin(), full.pool().begin() + n);
        return BasisSet("stream", std::move(pool), full.combination().topLeftCorner(n, n), true);
    }
    throw ValidationError("unknown basis kind '" + kind + "' (stream, spectral)");
}

/// Gauss order per axis. For even integer p every integrand is a polynomial and
/// the order is exact: the transport integrand has per-axis degree (p+1) d.
/// Otherwise |v|^{p-2} is not polynomial and the order is raised to 64, where
/// the quadrature error of X^T F is about 1% of the per-step energy budget.
inline int auto_quad_order(double p, const BasisSet& basis) {
    const int d = basis.exact_order() - 1;
    const bool even = std::abs(p - 2.0 * std::round(p / 2.0)) < 1e-14;
    const double pe = even ? p : 2.0 * std::ceil(p / 2.0);
    const int exact = static_cast<int>(std::ceil(((pe + 1.0) * d + 1.0) / 2.0));
    return even ? std::max(exact, basis.exact_order()) : std::max(64, exact);
}

inline int quad_order_for(const SolverConfig& c, const BasisSet& basis) {
    return c.quad_order > 0 ? c.quad_order : auto_quad_order(c.p, basis);
}

inline std::shared_ptr<const Discretization> make_discretization(const SolverConfig& c) {
    validate(c);
    BasisSet b = make_basis(c.basis_kind, c.n_basis, c.pool_per_axis);
    const int order = quad_order_for(c, b);
    return std::make_shared<const Discretization>(std::move(b), build_rule(order));
}

/// Discretization for pointwise identity checks on random states. For non-even p
/// the integrands are not polynomial; order 64 leaves a relative error near 1e-6
/// at p = 2.5, order 256 about 4e-9.
inline std::shared_ptr<const Discretization> verification_discretization(const Discretization& disc, double p) {
    const bool even = std::abs(p - 2.0 * std::round(p / 2.0)) < 1e-14;
    if (even || disc.rule.order() >= 256) return std::make_shared<const Discretization>(disc);
    return std::make_shared<const Discretization>(disc.basis, build_rule(256));
}

inline IntegratorOptions integrator_options(const SolverConfig& c) {
    IntegratorOptions o;
    o.t_final = c.t_final;
    o.tol_energy = c.tol_energy;
    o.newton_tol = c.newton_tol;
    o.max_newton = c.max_newton;
    o.dt_initial = c.dt_initial;
    o.dt_min = c.dt_min;
    o.dt_max = c.dt_max;
    o.threads = c.threads;
    return o;
}

/// Velocity of psi = sin^2(pi x) sin^2(pi y).
inline Eigen::Vector2d vortex_velocity(double x, double y) {
    const double pi = std::numbers::pi;
    const double sx = std::sin(pi * x), sy = std::sin(pi * y);
    const double dsx = 2.0 * pi * sx * std::cos(pi * x), dsy = 2.0 * pi * sy * std::cos(pi * y);
    return {sx * sx * dsy, -dsx * sy * sy};
}

/// Initial coefficients in the config's basis.
inline InitialProjection initial_state(const SolverConfig& c, const Discretization& disc) {
    const InitialData& in = c.initial;
    const Eigen::Index n = disc.size();
    InitialProjection out;
    if (in.preset == "single_mode" || in.preset == "two_mode") {
        out.coeffs = Eigen::VectorXd::Zero(n);
        out.coeffs[0] = 1.0;
        if (in.preset == "two_mode") out.coeffs[1] = 0.5;
    } else if (in.preset == "vortex") {
        out = initial_coefficients(vortex_velocity, disc.basis, build_rule(std::max(disc.basis.exact_order(), 40)));
    } else if (!in.stream_coefficients.empty()) {
        const std::vector<StreamFunction> pool = stream_pool(c.pool_per_axis);
        const std::vector<double>& sc = in.stream_coefficients;
        auto field = [&](double x, double y) {
            Eigen::Vector2d v = Eigen::Vector2d::Zero();
            for (std::size_t k = 0; k < sc.size(); ++k)
                if (sc[k] != 0.0) v += sc[k] * pool[k].evaluate(x, y).value;
            return v;
        };
        out = initial_coefficients(field, disc.basis, build_rule(disc.basis.exact_order()));
    } else {
        std::ifstream is(in.grid_file);
        if (!is) throw IoError("cannot open grid file '" + in.grid_file + "'");
        out = initial_coefficients(read_grid_csv(is, in.grid_file), disc.basis);
    }
    out.coeffs *= in.amplitude;
    if (out.coeffs.isZero(0.0)) out.trivial = true;
    return out;
}

} // namespace pnsg
