#pragma once

// Numerical certification of a computed network: junction angles and
// balance, solid angles at quadruple points, expander residual, end decay,
// asymptotic convergence to the cone, junction persistence across radii.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cone_model.hpp"
#include "conformal_models.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "surface_complex.hpp"
#include "text_format.hpp"
#include "vec3.hpp"
#include "weighted_geometry.hpp"

namespace expandernet {

namespace constants {
inline const double tetrahedral_angle_deg = deg(std::acos(-1.0 / 3.0));  // 109.4712...
inline const double half_apex_deg = deg(std::acos(1.0 / std::sqrt(3.0)));  // 54.7356...
inline const double omega_min = 2.0 * std::numbers::pi * (1.0 - 1.0 / std::sqrt(3.0));
inline constexpr double density_sheet = 1.0;
inline constexpr double density_triple = 1.5;
inline const double density_quadruple = 3.0 * std::acos(-1.0 / 3.0) / std::numbers::pi;
}  // namespace constants

struct ToleranceProfile {
    double triple_deg = 0.5;
    double quad_deg = 1.0;
    double balance = 0.02;
    double quad_balance = 0.03;
    double residual_factor = 5.0;      // tol_residual = factor * h
    double hausdorff_factor = 2.0;     // final shell distance <= factor * h / r
    double persistence_factor = 0.05;  // tol_persist = factor * R_1
    double solid_angle_slack = 0.01;   // sr
    double monotone_floor = 1e-9;      // values below this count as converged to zero
};

// ---------------------------------------------------------------------------
// Triple curves
// ---------------------------------------------------------------------------

struct TripleSample {
    std::size_t curve = 0;
    std::size_t vertex = 0;
    double arclength = 0.0;
    std::array<double, 3> angles_deg{};
    double balance = 0.0;  // |sum of unit conormals|
};

struct TripleAngleStats {
    std::vector<TripleSample> samples;
    double max_deviation_deg = 0.0;
    double max_balance = 0.0;
};

namespace detail {

/// Ring distance of every vertex from the rim (unreachable: max size_t).
inline std::vector<std::size_t> rim_distance(const SurfaceComplex& c, const Topology& topo) {
    std::vector<std::size_t> dist(c.vertices.size(), std::numeric_limits<std::size_t>::max());
    std::vector<std::size_t> frontier;
    for (std::size_t v = 0; v < c.vertices.size(); ++v)
        if (c.is_boundary(v)) {
            dist[v] = 0;
            frontier.push_back(v);
        }
    for (std::size_t d = 1; !frontier.empty(); ++d) {
        std::vector<std::size_t> next;
        for (std::size_t v : frontier)
            for (std::size_t e : topo.edges_of_vertex(v)) {
                const std::size_t w = topo.other_end(e, v);
                if (dist[w] > d) {
                    dist[w] = d;
                    next.push_back(w);
                }
            }
        frontier = std::move(next);
    }
    return dist;
}

/// Unit conormals at triple-curve vertex v (neighbours prev, next along the
/// curve), one per incident sheet: the normals of the sheet's faces on the two
/// curve edges are averaged, crossed with t and pointed into the sheet.
inline std::vector<Vec3> sheet_conormals(const SurfaceComplex& c, const Topology& topo, std::size_t prev,
                                         std::size_t v, std::size_t next, const Vec3& t) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<Vec3, Vec3>> sheets;  // normal sum, into-sheet
    for (std::size_t w : {prev, next}) {
        const auto e = topo.find_edge(v, w);
        if (!e) continue;
        for (std::size_t f : topo.faces_of_edge(*e)) {
            const FaceRecord& face = c.faces[f];
            auto& [nsum, into] = sheets[face.phase_pair()];
            nsum += face_normal(c, face);
            for (std::size_t u : face.v)
                if (u != v && u != w) into += normalized(reject(c.vertices[u] - c.vertices[v], t));
        }
    }
    std::vector<Vec3> out;
    for (const auto& [pair, acc] : sheets) {
        const auto& [nsum, into] = acc;
        Vec3 eta = normalized(cross(t, normalized(nsum)));
        if (dot(eta, into) < 0.0) eta = -eta;
        out.push_back(eta);
    }
    return out;
}

}  // namespace detail

/// Dihedral angles between consecutive sheets around every triple-curve
/// vertex more than k_ring rings away from the rim.
inline TripleAngleStats check_triple_angles(const SurfaceComplex& c, const Topology& topo, const JunctionGraph& jg,
                                            std::size_t k_ring = 2) {
    TripleAngleStats st;
    const std::vector<std::size_t> rim = detail::rim_distance(c, topo);
    for (std::size_t k = 0; k < jg.triple_curves.size(); ++k) {
        const auto& ch = jg.triple_curves[k].vertices;
        double s = 0.0;
        for (std::size_t i = 0; i < ch.size(); ++i) {
            if (i > 0) s += distance(c.vertices[ch[i]], c.vertices[ch[i - 1]]);
            if (i == 0 || i + 1 == ch.size()) continue;
            const std::size_t v = ch[i];
            if (rim[v] <= k_ring) continue;
            const Vec3 t = normalized(c.vertices[ch[i + 1]] - c.vertices[ch[i - 1]]);
            const std::vector<Vec3> eta = detail::sheet_conormals(c, topo, ch[i - 1], v, ch[i + 1], t);
            if (eta.size() != 3) continue;
            // Angles about t, measured from the sheet with the lowest phase pair.
            std::array<double, 3> phi{};
            Vec3 sum{0.0, 0.0, 0.0};
            for (std::size_t j = 0; j < 3; ++j) {
                phi[j] = std::atan2(dot(cross(eta[0], eta[j]), t), dot(eta[0], eta[j]));
                if (phi[j] < 0.0) phi[j] += 2.0 * std::numbers::pi;
                sum += eta[j];
            }
            phi[0] = 0.0;
            std::sort(phi.begin() + 1, phi.end());
            TripleSample sample;
            sample.curve = k;
            sample.vertex = v;
            sample.arclength = s;
            sample.angles_deg = {deg(phi[1] - phi[0]), deg(phi[2] - phi[1]),
                                 deg(phi[0] + 2.0 * std::numbers::pi - phi[2])};
            sample.balance = norm(sum);
            for (double a : sample.angles_deg) st.max_deviation_deg = std::max(st.max_deviation_deg, std::abs(a - 120.0));
            st.max_balance = std::max(st.max_balance, sample.balance);
            st.samples.push_back(sample);
        }
    }
    return st;
}

// ---------------------------------------------------------------------------
// Quadruple points
// ---------------------------------------------------------------------------

struct QuadSample {
    std::size_t vertex = 0;
    std::vector<Vec3> tangents;
    std::vector<double> pair_angles_deg;
    double balance = 0.0;
    double max_deviation_deg = 0.0;
};

struct QuadStats {
    std::vector<QuadSample> points;
    double max_deviation_deg = 0.0;
    double max_balance = 0.0;
};

/// Unit direction of the line through p0 best fitting the points (anchored
/// least squares), oriented toward the points.
inline Vec3 anchored_line_fit(const Vec3& p0, const std::vector<Vec3>& pts) {
    std::array<std::array<double, 3>, 3> m{};
    Vec3 mean{0.0, 0.0, 0.0};
    for (const Vec3& p : pts) {
        const Vec3 d = p - p0;
        mean += d;
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = 0; b < 3; ++b) m[a][b] += d[a] * d[b];
    }
    Vec3 x = normalized(mean);
    if (norm2(x) == 0.0) return x;
    for (int it = 0; it < 200; ++it) {
        Vec3 y{0.0, 0.0, 0.0};
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = 0; b < 3; ++b) y[a] += m[a][b] * x[b];
        y = normalized(y);
        if (distance(x, y) < 1e-15) break;
        x = y;
    }
    if (dot(x, mean) < 0.0) x = -x;
    return x;
}

/// Pairwise angles between fitted unit tangents of the (up to) four germs
/// given explicitly; exposed for frame-level tests.
inline QuadSample quad_sample_from_tangents(std::size_t vertex, std::vector<Vec3> tangents) {
    QuadSample q;
    q.vertex = vertex;
    q.tangents = std::move(tangents);
    Vec3 sum{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < q.tangents.size(); ++i) {
        sum += q.tangents[i];
        for (std::size_t j = i + 1; j < q.tangents.size(); ++j) {
            const double a = deg(angle_between(q.tangents[i], q.tangents[j]));
            q.pair_angles_deg.push_back(a);
            q.max_deviation_deg = std::max(q.max_deviation_deg, std::abs(a - constants::tetrahedral_angle_deg));
        }
    }
    q.balance = norm(sum);
    return q;
}

inline QuadStats check_quadruple(const SurfaceComplex& c, const JunctionGraph& jg, std::size_t j_fit = 4) {
    QuadStats st;
    for (const QuadruplePoint& qp : jg.quadruple_points) {
        std::vector<Vec3> tangents;
        for (const TripleCurve& curve : jg.triple_curves) {
            const auto& ch = curve.vertices;
            for (int dir : {+1, -1}) {
                const std::size_t start = dir > 0 ? 0 : ch.size() - 1;
                if (ch[start] != qp.vertex) continue;
                std::vector<Vec3> pts;
                for (std::size_t k = 1; k <= j_fit && k < ch.size(); ++k)
                    pts.push_back(c.vertices[ch[dir > 0 ? k : ch.size() - 1 - k]]);
                tangents.push_back(anchored_line_fit(c.vertices[qp.vertex], pts));
            }
        }
        QuadSample q = quad_sample_from_tangents(qp.vertex, std::move(tangents));
        st.max_deviation_deg = std::max(st.max_deviation_deg, q.max_deviation_deg);
        st.max_balance = std::max(st.max_balance, q.balance);
        st.points.push_back(std::move(q));
    }
    return st;
}

// ---------------------------------------------------------------------------
// Solid angles
// ---------------------------------------------------------------------------

/// Signed solid angle of the triangle (a, b, c) seen from the origin
/// (Van Oosterom-Strackee).
inline double triangle_solid_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
    const double la = norm(a), lb = norm(b), lc = norm(c);
    const double num = dot(a, cross(b, c));
    const double den = la * lb * lc + dot(a, b) * lc + dot(a, c) * lb + dot(b, c) * la;
    return 2.0 * std::atan2(num, den);
}

/// Solid angle at vertex v of the region carrying `phase`, from the oriented
/// link of the faces around v that border it. Result in [0, 4 pi).
inline double phase_solid_angle(const SurfaceComplex& c, const Topology& topo, std::size_t v, PhaseLabel phase) {
    std::map<std::size_t, int> balance;
    const Vec3& o = c.vertices[v];
    const Vec3 ref = normalized(Vec3{0.2718281828, 0.5772156649, 0.7853981634});
    double total = 0.0;
    std::size_t edges = 0;
    for (std::size_t f : topo.faces_of_vertex(v)) {
        const FaceRecord& face = c.faces[f];
        if (face.a != phase && face.b != phase) continue;
        std::size_t slot = 0;
        while (face.v[slot] != v) ++slot;
        std::size_t x = face.v[(slot + 1) % 3], y = face.v[(slot + 2) % 3];
        if (face.a == phase) std::swap(x, y);
        ++balance[x];
        --balance[y];
        total += triangle_solid_angle(ref, normalized(c.vertices[x] - o), normalized(c.vertices[y] - o));
        ++edges;
    }
    if (edges == 0) throw OpenLink("phase does not touch the vertex");
    for (const auto& [u, b] : balance)
        if (b != 0) throw OpenLink("link of phase " + std::to_string(phase.value) + " at vertex " +
                                   std::to_string(v + 1) + " is not closed");
    const double four_pi = 4.0 * std::numbers::pi;
    total = std::fmod(total, four_pi);
    if (total < 0.0) total += four_pi;
    return total;
}

struct SolidAngleSample {
    std::size_t vertex = 0;
    PhaseLabel phase{};
    double steradians = 0.0;
};

struct SolidAngleStats {
    std::vector<SolidAngleSample> samples;
    double min_sr = std::numeric_limits<double>::infinity();
    double max_sr = 0.0;
};

inline SolidAngleStats check_solid_angles(const SurfaceComplex& c, const Topology& topo, const JunctionGraph& jg) {
    SolidAngleStats st;
    for (const QuadruplePoint& qp : jg.quadruple_points) {
        for (PhaseLabel p : qp.phases) {
            const double w = phase_solid_angle(c, topo, qp.vertex, p);
            st.samples.push_back({qp.vertex, p, w});
            st.min_sr = std::min(st.min_sr, w);
            st.max_sr = std::max(st.max_sr, w);
        }
    }
    if (st.samples.empty()) st.min_sr = 0.0;
    return st;
}

// ---------------------------------------------------------------------------
// Asymptotics
// ---------------------------------------------------------------------------

struct ShellDistance {
    double r = 0.0;
    double width = 0.0;
    double hausdorff = 0.0;
    double mesh_to_cone = 0.0;
    double cone_to_mesh = 0.0;
    std::size_t segments = 0;
};

namespace detail {

inline double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double l2 = norm2(ab);
    const double t = l2 > 0.0 ? std::clamp(dot(p - a, ab) / l2, 0.0, 1.0) : 0.0;
    return distance(p, a + t * ab);
}

/// Segments of the mesh cut by the sphere |x| = rho, radially normalized.
inline std::vector<std::pair<Vec3, Vec3>> sphere_slice(const SurfaceComplex& c, double rho) {
    std::vector<std::pair<Vec3, Vec3>> out;
    for (const FaceRecord& f : c.faces) {
        std::array<double, 3> s{};
        for (std::size_t i = 0; i < 3; ++i) s[i] = norm(c.vertices[f.v[i]]) - rho;
        std::vector<Vec3> pts;
        for (std::size_t i = 0; i < 3; ++i) {
            const std::size_t j = (i + 1) % 3;
            if ((s[i] < 0.0) == (s[j] < 0.0)) continue;
            const double t = s[i] / (s[i] - s[j]);
            pts.push_back(normalized(c.vertices[f.v[i]] + t * (c.vertices[f.v[j]] - c.vertices[f.v[i]])));
        }
        if (pts.size() == 2) out.emplace_back(pts[0], pts[1]);
    }
    return out;
}

}  // namespace detail

/// Symmetric Hausdorff distance on the unit sphere between the radially
/// normalized slices of the mesh in [r, r + w] and the cone's spherical trace.
inline std::vector<ShellDistance> check_hausdorff_asymptotics(const SurfaceComplex& c, const ConeSpec& spec,
                                                              const std::vector<double>& shells, double width,
                                                              double trace_step = 2e-3) {
    std::vector<ArcGeometry> arcs;
    for (const ConeArc& a : spec.arcs) arcs.push_back(arc_geometry(spec, a));
    std::vector<Vec3> trace;
    for (const ArcGeometry& g : arcs) {
        const auto n = static_cast<std::size_t>(std::ceil(g.angle / trace_step));
        for (std::size_t i = 0; i <= n; ++i) trace.push_back(g.point(static_cast<double>(i) / static_cast<double>(n)));
    }
    std::vector<ShellDistance> out;
    for (double r : shells) {
        ShellDistance sd;
        sd.r = r;
        sd.width = width;
        std::vector<std::pair<Vec3, Vec3>> segs;
        for (double rho : {r, r + 0.5 * width, r + width}) {
            auto s = detail::sphere_slice(c, rho);
            segs.insert(segs.end(), s.begin(), s.end());
        }
        if (segs.empty()) throw EmptyShell("no surface between radii " + std::to_string(r) + " and " +
                                           std::to_string(r + width));
        sd.segments = segs.size();
        for (const auto& [a, b] : segs) {
            for (const Vec3& p : {a, b, normalized(0.5 * (a + b))}) {
                double best = std::numeric_limits<double>::infinity();
                for (const ArcGeometry& g : arcs) best = std::min(best, distance_to_arc(g, p));
                sd.mesh_to_cone = std::max(sd.mesh_to_cone, best);
            }
        }
        std::vector<double> per_trace(trace.size());
        parallel_for(trace.size(), [&](std::size_t i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& [a, b] : segs) best = std::min(best, detail::point_segment_distance(trace[i], a, b));
            per_trace[i] = best;
        });
        for (double d : per_trace) sd.cone_to_mesh = std::max(sd.cone_to_mesh, d);
        sd.hausdorff = std::max(sd.mesh_to_cone, sd.cone_to_mesh);
        out.push_back(sd);
    }
    return out;
}

/// Strictly decreasing, except that values under `floor` count as settled.
inline bool decreasing_sequence(const std::vector<double>& v, double floor) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1]) && !(v[i] <= floor && v[i - 1] <= floor)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Persistence across radii
// ---------------------------------------------------------------------------

/// Symmetric Hausdorff distance between finite point sets. Zero for two empty
/// sets, infinite when only one is empty.
inline double point_set_hausdorff(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() != b.empty()) return std::numeric_limits<double>::infinity();
    auto directed = [](const std::vector<Vec3>& x, const std::vector<Vec3>& y) {
        std::vector<double> best(x.size(), std::numeric_limits<double>::infinity());
        parallel_for(x.size(), [&](std::size_t i) {
            for (const Vec3& q : y) best[i] = std::min(best[i], distance(x[i], q));
        });
        double d = 0.0;
        for (double v : best) d = std::max(d, v);
        return d;
    };
    return std::max(directed(a, b), directed(b, a));
}

/// Vertices of all triple curves, junction endpoints included.
inline std::vector<Vec3> triple_curve_points(const SurfaceComplex& c) {
    std::vector<Vec3> out;
    for (const TripleCurve& t : extract_junctions(c).triple_curves)
        for (std::size_t v : t.vertices) out.push_back(c.vertices[v]);
    return out;
}

struct PersistenceEntry {
    double radius = 0.0;
    std::size_t triple_curves = 0;
    std::size_t quadruple_points = 0;
    std::size_t core_points = 0;
    double core_radius = 0.0;         // Euclidean
    double core_chart_radius = 0.0;   // radial ball chart
    double hausdorff_to_previous = 0.0;
};

struct PersistenceRecord {
    std::vector<PersistenceEntry> entries;
    double inner_radius = 0.0;  // R_1
    double tolerance = 0.0;     // tol_persist, Euclidean
    double chart_tolerance = 0.0;
    double delta1 = 0.0;        // ball radius tanh(d*/2) of the angle-of-parallelism threshold
    bool counts_stable = true;
    bool cores_stable = true;

    [[nodiscard]] bool passed() const { return counts_stable && cores_stable; }
};

/// Junction cores inside B_{R_1} (R_1 the smallest radius): quadruple points
/// and triple-curve vertices with |p| <= R_1. Consecutive radii must agree in
/// junction counts and in core position up to tol_persist.
inline PersistenceRecord check_persistence(const std::vector<std::pair<double, const SurfaceComplex*>>& states,
                                           double factor = 0.05) {
    if (states.size() < 2) throw InvalidArgument("persistence needs at least two radii");
    PersistenceRecord rec;
    rec.inner_radius = states.front().first;
    rec.tolerance = factor * rec.inner_radius;
    const double R1 = rec.inner_radius;
    rec.chart_tolerance = euclid_radius_to_ball(R1 + rec.tolerance) - euclid_radius_to_ball(R1);
    rec.delta1 = ball_radius_of_distance(parallelism_threshold());
    std::vector<Vec3> previous;
    for (std::size_t k = 0; k < states.size(); ++k) {
        const SurfaceComplex& c = *states[k].second;
        const JunctionGraph jg = extract_junctions(c);
        PersistenceEntry e;
        e.radius = states[k].first;
        e.triple_curves = jg.triple_curves.size();
        e.quadruple_points = jg.quadruple_points.size();
        std::vector<Vec3> core;
        for (const QuadruplePoint& q : jg.quadruple_points) core.push_back(c.vertices[q.vertex]);
        for (const TripleCurve& tc : jg.triple_curves)
            for (std::size_t v : tc.vertices)
                if (norm(c.vertices[v]) <= R1 + 1e-9 * R1) core.push_back(c.vertices[v]);
        e.core_points = core.size();
        for (const Vec3& p : core) e.core_radius = std::max(e.core_radius, norm(p));
        e.core_chart_radius = euclid_radius_to_ball(e.core_radius);
        if (k > 0) {
            const PersistenceEntry& prev = rec.entries.back();
            if (prev.triple_curves != e.triple_curves || prev.quadruple_points != e.quadruple_points)
                rec.counts_stable = false;
            e.hausdorff_to_previous = point_set_hausdorff(core, previous);
            if (!(e.hausdorff_to_previous <= rec.tolerance)) rec.cores_stable = false;
            if (std::abs(e.core_chart_radius - prev.core_chart_radius) > rec.chart_tolerance) rec.cores_stable = false;
        }
        previous = std::move(core);
        rec.entries.push_back(e);
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Full report
// ---------------------------------------------------------------------------

struct ReportConfig {
    double h = 0.1;  // mesh resolution the tolerances refer to
    std::size_t k_ring = 2;
    std::size_t j_fit = 4;
    ToleranceProfile tol;
    /// Shell inner radii; empty selects {3, 4, 5, 6, 7} * R / 8.
    std::vector<double> shells;
    double shell_width = 0.0;  // <= 0 selects R / 16
    /// End annulus inner radii; empty selects {3, 4, 5, 6} * R / 8.
    std::vector<double> end_radii;
    double end_width = 0.0;  // <= 0 selects R / 8
    EndFitOptions end_fit;
};

struct VerificationReport {
    std::map<std::string, bool> checks;
    std::map<std::string, double> metrics;
    std::vector<std::string> notes;

    TripleAngleStats triple;
    QuadStats quad;
    SolidAngleStats solid;
    ExpanderResidualField residual;
    std::vector<ShellDistance> hausdorff;
    std::vector<std::vector<EndDecaySample>> end_decay;  // per arc
    std::size_t components = 0;

    [[nodiscard]] bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& kv) { return kv.second; });
    }
};

inline constexpr const char* chart_note = "chart euclid-to-ball u = p/(1+|p|)";

inline VerificationReport full_report(const SurfaceComplex& c, const ConeSpec& spec, const ReportConfig& cfg) {
    const ValidationOutcome vo = validate(c);
    if (!vo.ok())
        throw InvalidComplex("complex fails validation: " + vo.violations.front().kind + " (" +
                             vo.violations.front().message + ")");
    const double R = c.truncation_radius;
    const ToleranceProfile& tol = cfg.tol;
    VerificationReport rep;
    const Topology topo = build_topology(c);
    const JunctionGraph jg = extract_junctions(c, topo);

    rep.metrics["junction.triple_curves"] = static_cast<double>(jg.triple_curves.size());
    rep.metrics["junction.quadruple_points"] = static_cast<double>(jg.quadruple_points.size());

    rep.triple = check_triple_angles(c, topo, jg, cfg.k_ring);
    rep.checks["triple-angle"] = rep.triple.max_deviation_deg <= tol.triple_deg;
    rep.checks["balance"] = rep.triple.max_balance <= tol.balance;
    rep.metrics["triple.max_deviation_deg"] = rep.triple.max_deviation_deg;
    rep.metrics["triple.max_balance"] = rep.triple.max_balance;
    rep.metrics["triple.samples"] = static_cast<double>(rep.triple.samples.size());

    rep.quad = check_quadruple(c, jg, cfg.j_fit);
    rep.checks["quad-angle"] = rep.quad.max_deviation_deg <= tol.quad_deg;
    rep.checks["quad-balance"] = rep.quad.max_balance <= tol.quad_balance;
    rep.metrics["quad.max_deviation_deg"] = rep.quad.max_deviation_deg;
    rep.metrics["quad.max_balance"] = rep.quad.max_balance;

    rep.solid = check_solid_angles(c, topo, jg);
    rep.checks["solid-angle"] = rep.solid.samples.empty() || rep.solid.min_sr >= constants::omega_min - tol.solid_angle_slack;
    rep.metrics["solid.min_sr"] = rep.solid.min_sr;
    rep.metrics["solid.max_sr"] = rep.solid.max_sr;
    rep.metrics["solid.omega_min"] = constants::omega_min;

    rep.residual = expander_residual(c, topo, cfg.k_ring);
    rep.checks["residual"] = rep.residual.max_abs <= tol.residual_factor * cfg.h;
    rep.metrics["residual.max"] = rep.residual.max_abs;
    rep.metrics["residual.rms"] = rep.residual.rms;
    rep.metrics["residual.tolerance"] = tol.residual_factor * cfg.h;

    std::vector<double> shells = cfg.shells;
    if (shells.empty())
        for (int k = 3; k <= 7; ++k) shells.push_back(k * R / 8.0);
    const double sw = cfg.shell_width > 0.0 ? cfg.shell_width : R / 16.0;
    try {
        rep.hausdorff = check_hausdorff_asymptotics(c, spec, shells, sw);
        std::vector<double> d;
        for (const ShellDistance& s : rep.hausdorff) d.push_back(s.hausdorff);
        const ShellDistance& last = rep.hausdorff.back();
        rep.checks["hausdorff"] = decreasing_sequence(d, tol.monotone_floor) &&
                                  last.hausdorff <= tol.hausdorff_factor * cfg.h / last.r;
        for (const ShellDistance& s : rep.hausdorff) {
            std::ostringstream key;
            key << "hausdorff.r" << s.r;
            rep.metrics[key.str()] = s.hausdorff;
        }
    } catch (const EmptyShell& e) {
        rep.checks["hausdorff"] = false;
        rep.notes.push_back(std::string("hausdorff: ") + e.what());
    }

    std::vector<double> ends = cfg.end_radii;
    if (ends.empty())
        for (int k = 3; k <= 6; ++k) ends.push_back(k * R / 8.0);
    const double ew = cfg.end_width > 0.0 ? cfg.end_width : R / 8.0;
    bool decay_ok = true;
    for (std::size_t a = 0; a < spec.arcs.size(); ++a) {
        try {
            rep.end_decay.push_back(end_decay(c, spec, a, ends, ew, cfg.end_fit));
            std::vector<double> sup;
            for (const EndDecaySample& s : rep.end_decay.back()) sup.push_back(s.sup_u);
            decay_ok = decay_ok && decreasing_sequence(sup, tol.monotone_floor);
            std::ostringstream key;
            key << "end.arc" << (a + 1) << ".sup_u_inner";
            rep.metrics[key.str()] = sup.front();
            key.str("");
            key << "end.arc" << (a + 1) << ".sup_u_outer";
            rep.metrics[key.str()] = sup.back();
        } catch (const NotGraphical& e) {
            rep.end_decay.emplace_back();
            decay_ok = false;
            rep.notes.push_back("end arc " + std::to_string(a + 1) + ": " + e.what());
        }
    }
    rep.checks["end-decay"] = decay_ok;

    rep.components = connected_components(c).size();
    rep.checks["connected"] = rep.components == 1;
    rep.metrics["components"] = static_cast<double>(rep.components);

    double core = 0.0;
    for (const QuadruplePoint& q : jg.quadruple_points) core = std::max(core, norm(c.vertices[q.vertex]));
    rep.metrics["persistence.quad_chart_radius"] = euclid_radius_to_ball(core);
    rep.metrics["persistence.delta1"] = ball_radius_of_distance(parallelism_threshold());
    rep.metrics["reference.density_quadruple"] = constants::density_quadruple;
    rep.metrics["reference.density_triple"] = constants::density_triple;
    rep.metrics["mesh.h"] = cfg.h;
    rep.metrics["mesh.radius"] = R;
    rep.notes.emplace_back(chart_note);
    return rep;
}

// ---------------------------------------------------------------------------
// Report text format
// ---------------------------------------------------------------------------

inline std::string write_report(const VerificationReport& rep) {
    std::string out = "report 1\n";
    for (const std::string& n : rep.notes) out += "note " + n + "\n";
    for (const auto& [name, ok] : rep.checks) out += "check " + name + (ok ? " pass\n" : " fail\n");
    for (const auto& [name, value] : rep.metrics) out += "metric " + name + " " + format_double(value) + "\n";
    return out;
}

inline VerificationReport read_report(const std::string& text) {
    VerificationReport rep;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (!header) {
            int version = 0;
            if (tag != "report" || !(ls >> version) || version != 1) throw ParseError(lineno, "expected 'report 1'");
            header = true;
        } else if (tag == "note") {
            rep.notes.push_back(line.size() > 5 ? line.substr(5) : "");
        } else if (tag == "check") {
            std::string name, verdict;
            if (!(ls >> name >> verdict) || (verdict != "pass" && verdict != "fail"))
                throw ParseError(lineno, "malformed check line");
            rep.checks[name] = verdict == "pass";
        } else if (tag == "metric") {
            std::string name, value;
            if (!(ls >> name >> value)) throw ParseError(lineno, "malformed metric line");
            try {
                rep.metrics[name] = parse_double(value);
            } catch (const InvalidArgument&) {
                throw ParseError(lineno, "bad metric value '" + value + "'");
            }
        } else {
            throw ParseError(lineno, "unknown line '" + tag + "'");
        }
    }
    if (!header) throw ParseError(lineno, "empty report");
    return rep;
}

}  // namespace expandernet
