#pragma once

// File formats: energy trace CSV, trajectory snapshots, SVG line charts.
// Every writer has a matching reader that reports the offending line.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pnsg/error.hpp"
#include "pnsg/integrator.hpp"

namespace pnsg {

namespace detail {

inline std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

inline double parse_double(const std::string& tok, const std::string& file, std::size_t line) {
    // strtod rather than stod: stod rejects subnormal values, which decayed runs produce.
    if (tok.empty() || std::isspace(static_cast<unsigned char>(tok.front()))) throw ParseError(file, line, "not a number: '" + tok + "'");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str()) throw ParseError(file, line, "not a number: '" + tok + "'");
    if (*end != '\0') throw ParseError(file, line, "trailing characters in '" + tok + "'");
    return v;
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

inline void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
}

} // namespace detail

inline constexpr const char* trace_header = "t,H,dissipation_rate,energy_residual,dt,newton_iters,min_speed,chol_shift_flag";

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
    os << trace_header << '\n';
    for (const TraceRow& r : rows) {
        os << detail::g17(r.t) << ',' << detail::g17(r.energy) << ',' << detail::g17(r.dissipation_rate) << ','
           << detail::g17(r.energy_residual) << ',' << detail::g17(r.dt) << ',' << r.newton_iters << ','
           << detail::g17(r.min_speed) << ',' << (r.chol_shift ? 1 : 0) << '\n';
    }
}

inline std::vector<TraceRow> read_trace_csv(std::istream& is, const std::string& name = "<trace>") {
    std::string line;
    std::size_t no = 1;
    if (!std::getline(is, line)) throw ParseError(name, 1, "empty file");
    detail::strip_cr(line);
    if (line != trace_header) throw ParseError(name, 1, "unexpected header");
    std::vector<TraceRow> rows;
    while (std::getline(is, line)) {
        ++no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        const auto tok = detail::split(line, ',');
        if (tok.size() != 8) throw ParseError(name, no, "expected 8 columns, got " + std::to_string(tok.size()));
        TraceRow r;
        r.t = detail::parse_double(tok[0], name, no);
        r.energy = detail::parse_double(tok[1], name, no);
        r.dissipation_rate = detail::parse_double(tok[2], name, no);
        r.energy_residual = detail::parse_double(tok[3], name, no);
        r.dt = detail::parse_double(tok[4], name, no);
        r.newton_iters = static_cast<int>(detail::parse_double(tok[5], name, no));
        r.min_speed = detail::parse_double(tok[6], name, no);
        r.chol_shift = detail::parse_double(tok[7], name, no) != 0.0;
        rows.push_back(r);
    }
    return rows;
}

/// Header of a snapshot file.
struct SnapshotHeader {
    Eigen::Index n = 0;
    double p = 2.0;
    double nu = 1.0;
    std::string basis_id;
    int quad_order = 0;
};

struct SnapshotFile {
    SnapshotHeader header;
    std::vector<double> times;
    std::vector<Eigen::VectorXd> coeffs;
};

inline void write_snapshots(std::ostream& os, const Trajectory& traj) {
    const Eigen::Index n = traj.disc->size();
    os << "# pnsg-snapshots 1\n";
    os << "# N " << n << '\n';
    os << "# p " << detail::g17(traj.p) << '\n';
    os << "# nu " << detail::g17(traj.nu) << '\n';
    os << "# basis " << traj.disc->basis.id() << '\n';
    os << "# quad_order " << traj.disc->rule.order() << '\n';
    os << 't';
    for (Eigen::Index k = 1; k <= n; ++k) os << ",c" << k;
    os << '\n';
    for (std::size_t s = 0; s < traj.times.size(); ++s) {
        os << detail::g17(traj.times[s]);
        for (Eigen::Index k = 0; k < n; ++k) os << ',' << detail::g17(traj.coeffs[s][k]);
        os << '\n';
    }
}

inline SnapshotFile read_snapshots(std::istream& is, const std::string& name = "<snapshots>") {
    SnapshotFile f;
    std::string line;
    std::size_t no = 0;
    bool magic = false, have_n = false, have_p = false, have_nu = false, have_cols = false;
    while (std::getline(is, line)) {
        ++no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string key;
            ls >> key;
            std::string rest;
            std::getline(ls, rest);
            const auto b = rest.find_first_not_of(' ');
            rest = b == std::string::npos ? "" : rest.substr(b);
            if (key == "pnsg-snapshots") {
                if (rest != "1") throw ParseError(name, no, "unsupported snapshot version '" + rest + "'");
                magic = true;
            } else if (key == "N") {
                const double v = detail::parse_double(rest, name, no);
                if (v < 1 || v != std::floor(v)) throw ParseError(name, no, "N must be a positive integer");
                f.header.n = static_cast<Eigen::Index>(v);
                have_n = true;
            } else if (key == "p") {
                f.header.p = detail::parse_double(rest, name, no);
                have_p = true;
            } else if (key == "nu") {
                f.header.nu = detail::parse_double(rest, name, no);
                have_nu = true;
            } else if (key == "basis") {
                f.header.basis_id = rest;
            } else if (key == "quad_order") {
                f.header.quad_order = static_cast<int>(detail::parse_double(rest, name, no));
            } else {
                throw ParseError(name, no, "unknown header key '" + key + "'");
            }
            continue;
        }
        if (!magic) throw ParseError(name, no, "missing '# pnsg-snapshots 1' header");
        if (!have_n || !have_p || !have_nu) throw ParseError(name, no, "header must give N, p and nu before data");
        const auto tok = detail::split(line, ',');
        if (!have_cols) {
            if (static_cast<Eigen::Index>(tok.size()) != f.header.n + 1 || tok[0] != "t") {
                throw ParseError(name, no, "column header must be t,c1..cN");
            }
            have_cols = true;
            continue;
        }
        if (static_cast<Eigen::Index>(tok.size()) != f.header.n + 1) {
            throw ParseError(name, no, "expected " + std::to_string(f.header.n + 1) + " columns, got " + std::to_string(tok.size()));
        }
        const double t = detail::parse_double(tok[0], name, no);
        if (!std::isfinite(t)) throw ParseError(name, no, "time is not finite");
        if (!f.times.empty() && !(t > f.times.back())) throw ParseError(name, no, "times must be strictly increasing");
        Eigen::VectorXd x(f.header.n);
        for (Eigen::Index k = 0; k < f.header.n; ++k) {
            x[k] = detail::parse_double(tok[static_cast<std::size_t>(k) + 1], name, no);
            if (!std::isfinite(x[k])) throw ParseError(name, no, "coefficient is not finite");
        }
        f.times.push_back(t);
        f.coeffs.push_back(std::move(x));
    }
    if (!magic) throw ParseError(name, std::max<std::size_t>(no, 1), "missing '# pnsg-snapshots 1' header");
    if (f.times.empty()) throw ParseError(name, std::max<std::size_t>(no, 1), "no snapshot rows");
    return f;
}

/// Rebuilds a trajectory from a snapshot file over a matching discretization.
inline Trajectory trajectory_from_snapshots(const SnapshotFile& f, std::shared_ptr<const Discretization> disc) {
    if (f.header.n != disc->size()) throw ValidationError("snapshot N does not match the configured basis");
    if (!f.header.basis_id.empty() && f.header.basis_id != disc->basis.id()) {
        throw ValidationError("snapshot basis '" + f.header.basis_id + "' does not match '" + disc->basis.id() + "'");
    }
    Trajectory t;
    t.disc = std::move(disc);
    t.p = f.header.p;
    t.nu = f.header.nu;
    t.times = f.times;
    t.coeffs = f.coeffs;
    return t;
}

// ---------------------------------------------------------------------------
// SVG line charts.

struct Series {
    std::string label;
    std::vector<double> x, y;
};

struct ChartOptions {
    std::string title;
    std::string x_label, y_label;
    bool log_x = false, log_y = false;
    int width = 640, height = 420;
};

inline void write_svg_chart(std::ostream& os, const std::vector<Series>& series, const ChartOptions& opt) {
    auto tx = [&](double v) { return opt.log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return opt.log_y ? std::log10(v) : v; };
    auto usable = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!opt.log_x || x > 0.0) && (!opt.log_y || y > 0.0);
    };
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const Series& s : series)
        for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
            if (!usable(s.x[k], s.y[k])) continue;
            x0 = std::min(x0, tx(s.x[k]));
            x1 = std::max(x1, tx(s.x[k]));
            y0 = std::min(y0, ty(s.y[k]));
            y1 = std::max(y1, ty(s.y[k]));
        }
    if (!(x1 >= x0)) x0 = 0.0, x1 = 1.0;
    if (!(y1 >= y0)) y0 = 0.0, y1 = 1.0;
    if (x1 == x0) x1 = x0 + 1.0;
    if (y1 == y0) y1 = y0 + 1.0;
    const double ml = 70, mr = 20, mt = 36, mb = 50;
    const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;
    auto px = [&](double v) { return ml + (tx(v) - x0) / (x1 - x0) * pw; };
    auto py = [&](double v) { return mt + ph - (ty(v) - y0) / (y1 - y0) * ph; };
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    char buf[128];

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << opt.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << detail::xml_escape(opt.title) << "</text>\n";
    std::snprintf(buf, sizeof buf, "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"black\"/>\n", ml, mt, pw, ph);
    os << buf;
    for (int k = 0; k <= 4; ++k) {
        const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
        const double vx = opt.log_x ? std::pow(10.0, fx) : fx, vy = opt.log_y ? std::pow(10.0, fy) : fy;
        std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\" font-size=\"11\">%.3g</text>\n",
                      ml + pw * k / 4.0, mt + ph + 16, vx);
        os << buf;
        std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"end\" font-size=\"11\">%.3g</text>\n", ml - 6,
                      mt + ph - ph * k / 4.0 + 4, vy);
        os << buf;
    }
    os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << opt.height - 10 << "\" text-anchor=\"middle\" font-size=\"12\">"
       << detail::xml_escape(opt.x_label) << "</text>\n";
    os << "<text x=\"14\" y=\"" << mt + ph / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
       << mt + ph / 2 << ")\">" << detail::xml_escape(opt.y_label) << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = colors[s % 6];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t k = 0; k < std::min(series[s].x.size(), series[s].y.size()); ++k) {
            if (!usable(series[s].x[k], series[s].y[k])) continue;
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(series[s].x[k]), py(series[s].y[k]));
            os << buf;
        }
        os << "\"/>\n";
        std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" font-size=\"11\" fill=\"%s\">", ml + pw - 150, mt + 16.0 + 14.0 * s, color);
        os << buf << detail::xml_escape(series[s].label) << "</text>\n";
    }
    os << "</svg>\n";
}

} // namespace pnsg
