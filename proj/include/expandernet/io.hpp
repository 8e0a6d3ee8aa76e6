#pragma once

// Text formats: labeled meshes, cone specs, point lists, CSV plot data and
// run manifests.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cone_model.hpp"
#include "errors.hpp"
#include "surface_complex.hpp"
#include "text_format.hpp"
#include "verification.hpp"
#include "weighted_geometry.hpp"

namespace expandernet {

inline std::string read_text_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& p, std::string_view text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write '" + p.string() + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

namespace detail {

/// Whitespace-separated tokens of one line; '#' starts a comment.
inline std::vector<std::string_view> tokens(std::string_view line) {
    if (auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < text.size()) lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

inline double num(std::string_view s, std::size_t line) {
    try {
        return parse_double(s);
    } catch (const InvalidArgument&) {
        throw ParseError(line, "bad number '" + std::string(s) + "'");
    }
}

inline std::uint64_t index(std::string_view s, std::size_t line) {
    std::uint64_t x = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ParseError(line, "bad integer '" + std::string(s) + "'");
    return x;
}

inline void expect_header(const std::vector<std::string_view>& t, std::string_view magic, std::size_t line) {
    if (t.size() != 2 || t[0] != magic || t[1] != "1")
        throw ParseError(line, "expected '" + std::string(magic) + " 1'");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// meshnet
// ---------------------------------------------------------------------------

inline std::string write_meshnet(const SurfaceComplex& c) {
    std::string out = "meshnet 1\n";
    out += "k " + std::to_string(c.phase_count) + "\n";
    out += "r " + format_double(c.truncation_radius) + "\n";
    for (std::size_t v = 0; v < c.vertices.size(); ++v) {
        const Vec3& p = c.vertices[v];
        out += "v " + format_double(p[0]) + " " + format_double(p[1]) + " " + format_double(p[2]) +
               (c.is_boundary(v) ? " b\n" : " i\n");
    }
    for (const FaceRecord& f : c.faces) {
        out += "f " + std::to_string(f.v[0] + 1) + " " + std::to_string(f.v[1] + 1) + " " +
               std::to_string(f.v[2] + 1) + " " + std::to_string(f.a.value) + " " + std::to_string(f.b.value) + "\n";
    }
    return out;
}

/// Parses a meshnet file. Structural checks beyond syntax (index ranges,
/// phase order) are left to validate().
inline SurfaceComplex read_meshnet(std::string_view text) {
    SurfaceComplex c;
    bool header = false, have_k = false, have_r = false;
    std::size_t lineno = 0;
    for (std::string_view line : detail::split_lines(text)) {
        ++lineno;
        const auto t = detail::tokens(line);
        if (t.empty()) continue;
        if (!header) {
            detail::expect_header(t, "meshnet", lineno);
            header = true;
            continue;
        }
        if (t[0] == "k" && t.size() == 2) {
            c.phase_count = static_cast<std::uint32_t>(detail::index(t[1], lineno));
            have_k = true;
        } else if (t[0] == "r" && t.size() == 2) {
            c.truncation_radius = detail::num(t[1], lineno);
            have_r = true;
        } else if (t[0] == "v" && t.size() == 5) {
            c.vertices.push_back({detail::num(t[1], lineno), detail::num(t[2], lineno), detail::num(t[3], lineno)});
            if (t[4] == "i") c.flags.push_back(VertexFlag::interior);
            else if (t[4] == "b") c.flags.push_back(VertexFlag::sphere_boundary);
            else throw ParseError(lineno, "vertex flag must be 'i' or 'b'");
        } else if (t[0] == "f" && t.size() == 6) {
            FaceRecord f;
            for (std::size_t k = 0; k < 3; ++k) {
                const std::uint64_t i = detail::index(t[1 + k], lineno);
                if (i == 0) throw ParseError(lineno, "vertex indices are 1-based");
                f.v[k] = static_cast<std::size_t>(i - 1);
            }
            f.a = PhaseLabel{static_cast<std::uint32_t>(detail::index(t[4], lineno))};
            f.b = PhaseLabel{static_cast<std::uint32_t>(detail::index(t[5], lineno))};
            c.faces.push_back(f);
        } else {
            throw ParseError(lineno, "unknown line '" + std::string(line) + "'");
        }
    }
    if (!header) throw ParseError(lineno, "missing 'meshnet 1' header");
    if (!have_k) throw ParseError(lineno, "missing 'k' line");
    if (!have_r) throw ParseError(lineno, "missing 'r' line");
    return c;
}

// ---------------------------------------------------------------------------
// conespec
// ---------------------------------------------------------------------------

inline std::string write_conespec(const ConeSpec& s) {
    std::string out = "conespec 1\n";
    out += "k " + std::to_string(s.region_count) + "\n";
    for (const ConeNode& n : s.nodes) {
        out += "n " + format_double(n.direction[0]) + " " + format_double(n.direction[1]) + " " +
               format_double(n.direction[2]) + (n.helper ? " h\n" : "\n");
    }
    for (const ConeArc& a : s.arcs) {
        out += "a " + std::to_string(a.a + 1) + " " + std::to_string(a.b + 1) + " " + std::to_string(a.left.value) +
               " " + std::to_string(a.right.value);
        if (a.via)
            out += " " + format_double((*a.via)[0]) + " " + format_double((*a.via)[1]) + " " +
                   format_double((*a.via)[2]);
        out += "\n";
    }
    return out;
}

/// Parses a cone spec. Each `a` line may carry a trailing via direction that
/// selects the half circle between antipodal nodes.
inline ConeSpec read_conespec(std::string_view text) {
    ConeSpec s;
    bool header = false, have_k = false;
    std::size_t lineno = 0;
    for (std::string_view line : detail::split_lines(text)) {
        ++lineno;
        const auto t = detail::tokens(line);
        if (t.empty()) continue;
        if (!header) {
            detail::expect_header(t, "conespec", lineno);
            header = true;
            continue;
        }
        if (t[0] == "k" && t.size() == 2) {
            s.region_count = static_cast<std::uint32_t>(detail::index(t[1], lineno));
            have_k = true;
        } else if (t[0] == "n" && (t.size() == 4 || (t.size() == 5 && t[4] == "h"))) {
            s.nodes.push_back({{detail::num(t[1], lineno), detail::num(t[2], lineno), detail::num(t[3], lineno)},
                               t.size() == 5});
        } else if (t[0] == "a" && (t.size() == 5 || t.size() == 8)) {
            ConeArc a;
            const std::uint64_t na = detail::index(t[1], lineno), nb = detail::index(t[2], lineno);
            if (na == 0 || nb == 0) throw ParseError(lineno, "arc endpoints are 1-based node indices; 0 is not allowed");
            if (na > s.nodes.size() || nb > s.nodes.size()) throw ParseError(lineno, "arc references an undeclared node");
            a.a = static_cast<std::size_t>(na - 1);
            a.b = static_cast<std::size_t>(nb - 1);
            a.left = PhaseLabel{static_cast<std::uint32_t>(detail::index(t[3], lineno))};
            a.right = PhaseLabel{static_cast<std::uint32_t>(detail::index(t[4], lineno))};
            if (t.size() == 8) a.via = Vec3{detail::num(t[5], lineno), detail::num(t[6], lineno), detail::num(t[7], lineno)};
            s.arcs.push_back(a);
        } else {
            throw ParseError(lineno, "unknown line '" + std::string(line) + "'");
        }
    }
    if (!header) throw ParseError(lineno, "missing 'conespec 1' header");
    if (!have_k) throw ParseError(lineno, "missing 'k' line");
    return s;
}

// ---------------------------------------------------------------------------
// Point lists
// ---------------------------------------------------------------------------

/// One point per line, `dim` coordinates each.
inline std::vector<std::vector<double>> read_points(std::string_view text, std::size_t dim) {
    std::vector<std::vector<double>> out;
    std::size_t lineno = 0;
    for (std::string_view line : detail::split_lines(text)) {
        ++lineno;
        const auto t = detail::tokens(line);
        if (t.empty()) continue;
        if (t.size() != dim) throw ParseError(lineno, "expected " + std::to_string(dim) + " coordinates");
        std::vector<double> p;
        for (std::string_view x : t) p.push_back(detail::num(x, lineno));
        out.push_back(std::move(p));
    }
    return out;
}

inline std::string write_points(const std::vector<std::vector<double>>& pts) {
    std::string out;
    for (const auto& p : pts) {
        for (std::size_t k = 0; k < p.size(); ++k) out += (k ? " " : "") + format_double(p[k]);
        out += "\n";
    }
    return out;
}

inline std::size_t model_dimension(Model m) { return m == Model::hyperboloid ? 4 : 3; }

/// Converts one point between models through the ball.
inline std::vector<double> map_point(const std::vector<double>& p, Model from, Model to) {
    Vec3 u;
    switch (from) {
        case Model::euclid: u = euclid_to_ball({p[0], p[1], p[2]}); break;
        case Model::ball:
            u = {p[0], p[1], p[2]};
            require_in_ball(u);
            break;
        case Model::hyperboloid: u = to_ball({p[0], p[1], p[2], p[3]}); break;
    }
    switch (to) {
        case Model::euclid: {
            const Vec3 e = ball_to_euclid(u);
            return {e[0], e[1], e[2]};
        }
        case Model::ball: return {u[0], u[1], u[2]};
        case Model::hyperboloid: {
            const Vec4 x = to_hyperboloid(u);
            return {x[0], x[1], x[2], x[3]};
        }
    }
    return {};
}

// ---------------------------------------------------------------------------
// CSV plot data
// ---------------------------------------------------------------------------

/// vertex,x,y,z,residual for every unmasked vertex.
inline std::string residual_csv(const SurfaceComplex& c, std::size_t k_ring = 2) {
    const ExpanderResidualField r = expander_residual(c, k_ring);
    std::string out = "vertex,x,y,z,residual\n";
    for (std::size_t v = 0; v < c.vertices.size(); ++v) {
        if (r.mask[v]) continue;
        const Vec3& p = c.vertices[v];
        out += std::to_string(v + 1) + "," + format_double(p[0]) + "," + format_double(p[1]) + "," +
               format_double(p[2]) + "," + format_double(r.per_vertex[v]) + "\n";
    }
    return out;
}

/// curve,vertex,arclength,angle1,angle2,angle3,balance per triple-curve sample.
inline std::string angles_csv(const SurfaceComplex& c, std::size_t k_ring = 2) {
    const Topology topo = build_topology(c);
    const TripleAngleStats st = check_triple_angles(c, topo, extract_junctions(c, topo), k_ring);
    std::string out = "curve,vertex,arclength,angle1,angle2,angle3,balance\n";
    for (const TripleSample& s : st.samples) {
        out += std::to_string(s.curve + 1) + "," + std::to_string(s.vertex + 1) + "," + format_double(s.arclength);
        for (double a : s.angles_deg) out += "," + format_double(a);
        out += "," + format_double(s.balance) + "\n";
    }
    return out;
}

/// arc,inner_radius,sup_u,sup_grad per end annulus.
inline std::string ends_csv(const SurfaceComplex& c, const ConeSpec& spec, const std::vector<double>& radii,
                            double width, const EndFitOptions& opt = {}) {
    std::string out = "arc,inner_radius,sup_u,sup_grad\n";
    for (std::size_t a = 0; a < spec.arcs.size(); ++a) {
        for (const EndDecaySample& s : end_decay(c, spec, a, radii, width, opt)) {
            out += std::to_string(a + 1) + "," + format_double(s.inner_radius) + "," + format_double(s.sup_u) + "," +
                   format_double(s.sup_grad) + "\n";
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

inline constexpr const char* tool_version = "0.1.0";

/// 64-bit FNV-1a.
inline std::uint64_t digest(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string digest_hex(std::string_view bytes) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest(bytes)));
    return buf;
}

struct RunManifest {
    std::string command;
    std::vector<std::string> arguments;             // full argv after the program name
    std::map<std::string, std::string> inputs;      // path -> digest
    nlohmann::ordered_json config;                  // every option, defaults materialized
    std::uint64_t seed = 0;
    std::string version = tool_version;
    std::map<std::string, std::string> outputs;     // path -> digest
    double seconds = 0.0;
    std::size_t threads = 1;
};

inline std::string write_manifest(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["command"] = m.command;
    j["arguments"] = m.arguments;
    j["inputs"] = m.inputs;
    j["config"] = m.config;
    j["seed"] = m.seed;
    j["version"] = m.version;
    j["outputs"] = m.outputs;
    j["threads"] = m.threads;
    j["seconds"] = m.seconds;
    return j.dump(2) + "\n";
}

inline RunManifest read_manifest(std::string_view text) {
    RunManifest m;
    try {
        const auto j = nlohmann::ordered_json::parse(text);
        m.command = j.at("command").get<std::string>();
        m.arguments = j.at("arguments").get<std::vector<std::string>>();
        m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
        m.config = j.at("config");
        m.seed = j.at("seed").get<std::uint64_t>();
        m.version = j.at("version").get<std::string>();
        m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
        m.threads = j.value("threads", std::size_t{1});
        m.seconds = j.value("seconds", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

}  // namespace expandernet
