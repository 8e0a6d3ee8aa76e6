#pragma once

// Constrained minimization of the weighted area with the rim pinned to the
// boundary trace, plus continuation in the truncation radius.
//
// Degrees of freedom: interior sheet vertices move along their vertex normal,
// triple-curve vertices in the plane orthogonal to the curve, quadruple points
// freely, rim vertices not at all. Sheet vertices within `blend_rings` rings of
// a junction also follow the tangential part of that junction's motion, so
// junctions can travel without tearing the surrounding triangles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cone_model.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "surface_complex.hpp"
#include "vec3.hpp"
#include "weighted_geometry.hpp"

namespace expandernet {

struct SolveConfig {
    std::size_t max_iters = 20000;
    double grad_tol = 1e-6;
    double c1 = 1e-4;
    double shrink = 0.5;
    std::size_t remesh_every = 0;
    std::vector<double> radius_schedule;
    std::uint64_t seed = 0;
    /// Amplitude of a seeded normal perturbation applied before descent.
    double perturbation = 0.0;
    std::size_t lbfgs_memory = 8;
    /// Iterations between refreshes of normals and curve tangents.
    std::size_t frame_refresh = 20;
    std::size_t blend_rings = 8;
    std::size_t max_backtracks = 60;
    /// Largest trial displacement of a vertex, as a fraction of its shortest edge.
    double max_step_fraction = 0.25;

    void check() const {
        if (!(grad_tol > 0.0)) throw InvalidArgument("grad_tol must be > 0");
        if (!(c1 > 0.0 && c1 < 1.0)) throw InvalidArgument("c1 must lie in (0, 1)");
        if (!(shrink > 0.0 && shrink < 1.0)) throw InvalidArgument("shrink must lie in (0, 1)");
        if (frame_refresh == 0) throw InvalidArgument("frame_refresh must be >= 1");
        if (!(max_step_fraction > 0.0)) throw InvalidArgument("max_step_fraction must be > 0");
        for (std::size_t i = 0; i < radius_schedule.size(); ++i) {
            if (!(radius_schedule[i] > 0.0)) throw InvalidArgument("radii must be > 0");
            if (i > 0 && !(radius_schedule[i] > radius_schedule[i - 1]))
                throw InvalidArgument("radius schedule must be strictly increasing");
        }
    }
};

enum class SolveStatus : std::uint8_t { converged, max_iters, line_search_failure };

inline const char* status_name(SolveStatus s) {
    switch (s) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::max_iters: return "max_iters";
        case SolveStatus::line_search_failure: return "line_search_failure";
    }
    return "?";
}

struct IterationRecord {
    std::size_t iter = 0;
    double energy = 0.0;     // shifted total
    double log_scale = 0.0;
    double gradrms = 0.0;
    double step = 0.0;

    [[nodiscard]] double log_energy() const { return std::log(energy) + log_scale; }
};

inline std::string format_iteration(const IterationRecord& r) {
    std::ostringstream os;
    os.precision(17);
    os << "iter " << r.iter << " energy " << r.energy << " logscale " << r.log_scale << " gradrms " << r.gradrms
       << " step " << r.step;
    return os.str();
}

struct OptimizerState {
    SurfaceComplex complex;
    std::vector<IterationRecord> history;  // history[0] is the starting point
    std::vector<std::size_t> boundary_vertices;
    std::vector<std::size_t> junction_vertices;
    std::vector<std::size_t> interior_vertices;
    std::size_t iterations = 0;
    SolveStatus status = SolveStatus::max_iters;
    double gradrms = 0.0;
    std::size_t quality_flips = 0;
    std::size_t quality_splits = 0;
    std::size_t components = 0;
    /// Largest distance of a rim vertex from the boundary trace.
    double boundary_deviation = 0.0;

    [[nodiscard]] double log_energy() const { return history.empty() ? 0.0 : history.back().log_energy(); }
};

using IterationLogger = std::function<void(const IterationRecord&)>;

namespace detail {

enum class DofKind : std::uint8_t { fixed, normal, plane, free };

/// Linear map from reduced coordinates to vertex displacements, frozen
/// between frame refreshes.
struct DofFrame {
    std::vector<DofKind> kind;
    std::vector<std::size_t> offset;
    std::vector<std::array<Vec3, 3>> basis;
    // Sheet vertex v follows sum_k follow_coef[k] * P_v (motion of follow_vertex[k])
    // over k in [follow_offset[v], follow_offset[v + 1]).
    std::vector<std::size_t> follow_offset;
    std::vector<std::size_t> follow_vertex;
    std::vector<double> follow_coef;
    std::vector<double> mass;        // per vertex, in the reduced metric
    std::size_t ndof = 0;

    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    [[nodiscard]] std::size_t width(std::size_t v) const noexcept {
        switch (kind[v]) {
            case DofKind::fixed: return 0;
            case DofKind::normal: return 1;
            case DofKind::plane: return 2;
            case DofKind::free: return 3;
        }
        return 0;
    }
};

struct Classification {
    std::vector<DofKind> kind;
    std::vector<Vec3> tangent;  // for plane vertices
};

inline Classification classify_vertices(const SurfaceComplex& c, const Topology& topo, const JunctionGraph& jg) {
    Classification cl;
    const std::size_t nv = c.vertices.size();
    cl.kind.assign(nv, DofKind::fixed);
    cl.tangent.assign(nv, {0.0, 0.0, 0.0});
    for (std::size_t v = 0; v < nv; ++v)
        if (is_interior_manifold(c, topo, v)) cl.kind[v] = DofKind::normal;
    for (const QuadruplePoint& q : jg.quadruple_points)
        if (!c.is_boundary(q.vertex)) cl.kind[q.vertex] = DofKind::free;
    for (const TripleCurve& curve : jg.triple_curves) {
        const auto& ch = curve.vertices;
        const bool closed = curve.closed();
        const std::size_t n = ch.size();
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t v = ch[i];
            if (c.is_boundary(v) || cl.kind[v] == DofKind::free) continue;
            std::size_t prev, next;
            if (closed) {
                // chain repeats its first vertex at the end
                const std::size_t m = n - 1;
                const std::size_t k = i % m;
                prev = ch[(k + m - 1) % m];
                next = ch[(k + 1) % m];
            } else {
                if (i == 0 || i + 1 == n) continue;
                prev = ch[i - 1];
                next = ch[i + 1];
            }
            cl.kind[v] = DofKind::plane;
            cl.tangent[v] = normalized(c.vertices[next] - c.vertices[prev]);
        }
    }
    return cl;
}

inline std::vector<double> lumped_mass(const SurfaceComplex& c, double log_scale) {
    std::vector<double> m(c.vertices.size(), 0.0);
    for (const FaceRecord& f : c.faces) {
        const double w = face_area(c, f) * std::exp(norm2(face_centroid(c, f)) / 4.0 - log_scale) / 3.0;
        for (std::size_t v : f.v) m[v] += w;
    }
    return m;
}

inline DofFrame build_frame(const SurfaceComplex& c, const Topology& topo, const Classification& cl,
                            double log_scale, std::size_t blend_rings) {
    DofFrame fr;
    const std::size_t nv = c.vertices.size();
    fr.kind = cl.kind;
    fr.offset.assign(nv, 0);
    fr.basis.assign(nv, {});
    const std::vector<double> m = lumped_mass(c, log_scale);
    fr.mass = m;
    for (std::size_t v = 0; v < nv; ++v) {
        fr.offset[v] = fr.ndof;
        fr.ndof += fr.width(v);
        switch (fr.kind[v]) {
            case DofKind::normal: fr.basis[v][0] = vertex_normal(c, topo, v); break;
            case DofKind::plane: {
                const Vec3 b1 = any_orthogonal(cl.tangent[v]);
                fr.basis[v][0] = b1;
                fr.basis[v][1] = cross(cl.tangent[v], b1);
                break;
            }
            case DofKind::free: fr.basis[v] = {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}}; break;
            case DofKind::fixed: break;
        }
    }
    fr.follow_offset.assign(nv + 1, 0);
    if (blend_rings == 0) return fr;
    // Ring distances from every movable junction vertex through sheet vertices.
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> reach(nv);  // (junction, rings)
    std::vector<std::size_t> seen(nv, DofFrame::npos);
    for (std::size_t j = 0; j < nv; ++j) {
        if (fr.kind[j] != DofKind::plane && fr.kind[j] != DofKind::free) continue;
        std::vector<std::size_t> frontier{j};
        seen[j] = j;
        for (std::size_t d = 1; d < blend_rings && !frontier.empty(); ++d) {
            std::vector<std::size_t> next;
            for (std::size_t v : frontier) {
                for (std::size_t e : topo.edges_of_vertex(v)) {
                    const std::size_t w = topo.other_end(e, v);
                    if (seen[w] == j || fr.kind[w] != DofKind::normal) continue;
                    seen[w] = j;
                    reach[w].emplace_back(j, d);
                    next.push_back(w);
                }
            }
            frontier = std::move(next);
        }
    }
    for (std::size_t v = 0; v < nv; ++v) {
        fr.follow_offset[v + 1] = fr.follow_offset[v];
        if (reach[v].empty()) continue;
        std::size_t dmin = blend_rings;
        double ksum = 0.0;
        for (const auto& [j, d] : reach[v]) {
            dmin = std::min(dmin, d);
            ksum += 1.0 / static_cast<double>(d * d);
        }
        const double falloff = 1.0 - static_cast<double>(dmin) / static_cast<double>(blend_rings);
        for (const auto& [j, d] : reach[v]) {
            const double coef = falloff / static_cast<double>(d * d) / ksum;
            fr.follow_vertex.push_back(j);
            fr.follow_coef.push_back(coef);
            fr.mass[j] += coef * coef * m[v];
            ++fr.follow_offset[v + 1];
        }
    }
    return fr;
}

/// Vertex displacements for reduced vector xi.
inline std::vector<Vec3> expand(const DofFrame& fr, const std::vector<double>& xi) {
    const std::size_t nv = fr.kind.size();
    std::vector<Vec3> d(nv, {0.0, 0.0, 0.0});
    for (std::size_t v = 0; v < nv; ++v) {
        const std::size_t w = fr.width(v);
        for (std::size_t k = 0; k < w; ++k) d[v] += xi[fr.offset[v] + k] * fr.basis[v][k];
    }
    for (std::size_t v = 0; v < nv; ++v) {
        const Vec3& n = fr.basis[v][0];
        for (std::size_t k = fr.follow_offset[v]; k < fr.follow_offset[v + 1]; ++k)
            d[v] += fr.follow_coef[k] * reject(d[fr.follow_vertex[k]], n);
    }
    return d;
}

/// Transpose of expand applied to a vertex gradient.
inline std::vector<double> reduce(const DofFrame& fr, const std::vector<Vec3>& g) {
    const std::size_t nv = fr.kind.size();
    std::vector<Vec3> acc = g;
    for (std::size_t v = 0; v < nv; ++v) {
        if (fr.follow_offset[v] == fr.follow_offset[v + 1]) continue;
        const Vec3 pg = reject(g[v], fr.basis[v][0]);
        for (std::size_t k = fr.follow_offset[v]; k < fr.follow_offset[v + 1]; ++k)
            acc[fr.follow_vertex[k]] += fr.follow_coef[k] * pg;
    }
    std::vector<double> out(fr.ndof, 0.0);
    for (std::size_t v = 0; v < nv; ++v) {
        const std::size_t w = fr.width(v);
        for (std::size_t k = 0; k < w; ++k) out[fr.offset[v] + k] = dot(acc[v], fr.basis[v][k]);
    }
    return out;
}

/// RMS over movable vertices of |reduced gradient| / mass (curvature units).
inline double gradient_rms(const DofFrame& fr, const std::vector<double>& G) {
    double sq = 0.0;
    std::size_t count = 0;
    for (std::size_t v = 0; v < fr.kind.size(); ++v) {
        const std::size_t w = fr.width(v);
        if (w == 0) continue;
        double s = 0.0;
        for (std::size_t k = 0; k < w; ++k) s += G[fr.offset[v] + k] * G[fr.offset[v] + k];
        sq += s / (fr.mass[v] * fr.mass[v]);
        ++count;
    }
    return count ? std::sqrt(sq / static_cast<double>(count)) : 0.0;
}

/// Scales each vertex's own block of p so that its displacement stays under
/// `fraction` of its shortest incident edge.
inline void cap_step(const SurfaceComplex& c, const Topology& topo, const DofFrame& fr, double fraction,
                     std::vector<double>& p) {
    std::vector<double> shortest(c.vertices.size(), std::numeric_limits<double>::infinity());
    for (const Edge& e : topo.edges) {
        const double l = distance(c.vertices[e.u], c.vertices[e.v]);
        shortest[e.u] = std::min(shortest[e.u], l);
        shortest[e.v] = std::min(shortest[e.v], l);
    }
    for (std::size_t v = 0; v < fr.kind.size(); ++v) {
        const std::size_t w = fr.width(v);
        double len2 = 0.0;
        for (std::size_t k = 0; k < w; ++k) len2 += p[fr.offset[v] + k] * p[fr.offset[v] + k];
        const double cap = fraction * shortest[v];
        if (len2 <= cap * cap) continue;
        const double scale = cap / std::sqrt(len2);
        for (std::size_t k = 0; k < w; ++k) p[fr.offset[v] + k] *= scale;
    }
}

inline std::vector<double> dof_mass(const DofFrame& fr) {
    std::vector<double> m(fr.ndof, 1.0);
    for (std::size_t v = 0; v < fr.kind.size(); ++v)
        for (std::size_t k = 0; k < fr.width(v); ++k) m[fr.offset[v] + k] = fr.mass[v];
    return m;
}

inline double mean_edge_length(const SurfaceComplex& c, const Topology& topo) {
    if (topo.edges.empty()) return 1.0;
    double s = 0.0;
    for (const Edge& e : topo.edges) s += distance(c.vertices[e.u], c.vertices[e.v]);
    return s / static_cast<double>(topo.edges.size());
}

inline double dotv(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Per-face shifted energies; false if any face degenerates or flips
/// against `reference` area vectors.
inline bool face_energies(const SurfaceComplex& c, double log_scale, std::vector<double>& out,
                          const std::vector<Vec3>* reference, double eps_area) {
    const std::size_t nf = c.faces.size();
    out.resize(nf);
    std::vector<char> bad(nf, 0);
    parallel_for(nf, [&](std::size_t f) {
        const FaceRecord& face = c.faces[f];
        const Vec3 av = face_area_vector(c, face);
        const double a = norm(av);
        if (!(a >= eps_area) || (reference && dot(av, (*reference)[f]) <= 0.0)) bad[f] = 1;
        out[f] = a * std::exp(norm2(face_centroid(c, face)) / 4.0 - log_scale);
    });
    for (char b : bad)
        if (b) return false;
    return true;
}

inline std::vector<Vec3> area_vectors(const SurfaceComplex& c) {
    std::vector<Vec3> out(c.faces.size());
    for (std::size_t f = 0; f < c.faces.size(); ++f) out[f] = face_area_vector(c, c.faces[f]);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Quality pass
// ---------------------------------------------------------------------------

/// Circumradius over twice the inradius; 1 for an equilateral triangle.
inline double aspect_ratio(const Vec3& p0, const Vec3& p1, const Vec3& p2) {
    const double a = distance(p1, p2), b = distance(p0, p2), c = distance(p0, p1);
    const double area = 0.5 * norm(cross(p1 - p0, p2 - p0));
    if (area <= 0.0) return std::numeric_limits<double>::infinity();
    const double s = 0.5 * (a + b + c);
    return a * b * c * s / (8.0 * area * area);
}

inline double max_aspect_ratio(const SurfaceComplex& c) {
    double m = 0.0;
    for (const FaceRecord& f : c.faces)
        m = std::max(m, aspect_ratio(c.vertices[f.v[0]], c.vertices[f.v[1]], c.vertices[f.v[2]]));
    return m;
}

struct QualityOptions {
    double aspect_threshold = 20.0;
    /// Admissible energy increase of one pass, relative to the energy.
    double energy_budget = 1e-9;
    /// Flips only between faces whose normals differ by less than this.
    double max_fold_deg = 30.0;
    std::size_t max_sweeps = 8;
    bool allow_splits = true;
};

struct QualityReport {
    std::size_t flips = 0;
    std::size_t splits = 0;
    std::size_t rejected = 0;
    double energy_before = 0.0;  // log energy
    double energy_after = 0.0;
    double max_aspect_before = 0.0;
    double max_aspect_after = 0.0;
};

namespace detail {

inline double face_energy(const Vec3& p0, const Vec3& p1, const Vec3& p2, double log_scale) {
    const Vec3 c = (p0 + p1 + p2) / 3.0;
    return 0.5 * norm(cross(p1 - p0, p2 - p0)) * std::exp(norm2(c) / 4.0 - log_scale);
}

}  // namespace detail

/// Edge flips (and, where a flip is impossible, midpoint splits) on
/// manifold edges to bring aspect ratios under the threshold. Triple-curve
/// and rim edges are never touched. The cumulative energy increase of the
/// pass, net of the decreases, stays within energy_budget * E.
inline QualityReport quality_pass(SurfaceComplex& c, const QualityOptions& opt = {}) {
    QualityReport rep;
    const double s0 = max_log_weight(c);
    double energy = weighted_area(c, {.unit_weight = false, .log_scale = s0}).total;
    rep.energy_before = std::log(energy) + s0;
    rep.max_aspect_before = max_aspect_ratio(c);
    const double budget = opt.energy_budget * energy;
    double spent = 0.0;
    const double cos_fold = std::cos(rad(opt.max_fold_deg));
    const SurfaceComplex original = c;
    const std::size_t curves_before = extract_junctions(c).triple_curves.size();

    auto aspect = [&](const FaceRecord& f) {
        return aspect_ratio(c.vertices[f.v[0]], c.vertices[f.v[1]], c.vertices[f.v[2]]);
    };

    for (std::size_t sweep = 0; sweep < opt.max_sweeps; ++sweep) {
        bool changed = false;
        Topology topo = build_topology(c);
        std::vector<bool> touched(c.faces.size(), false);
        for (std::size_t e = 0; e < topo.edges.size(); ++e) {
            if (topo.edge_valence(e) != 2) continue;
            const auto fs = topo.faces_of_edge(e);
            const std::size_t f0 = fs[0], f1 = fs[1];
            if (touched[f0] || touched[f1]) continue;
            const double worst = std::max(aspect(c.faces[f0]), aspect(c.faces[f1]));
            if (worst <= opt.aspect_threshold) continue;
            const std::size_t a = topo.edges[e].u, b = topo.edges[e].v;
            // Rotate so face f0 reads (a, b, x) and f1 reads (b, a, y).
            auto apex = [&](const FaceRecord& f, std::size_t from, std::size_t to) -> std::optional<std::size_t> {
                for (std::size_t i = 0; i < 3; ++i)
                    if (f.v[i] == from && f.v[(i + 1) % 3] == to) return f.v[(i + 2) % 3];
                return std::nullopt;
            };
            std::size_t p = a, q = b;
            auto x = apex(c.faces[f0], p, q);
            if (!x) {
                std::swap(p, q);
                x = apex(c.faces[f0], p, q);
            }
            const auto y = apex(c.faces[f1], q, p);
            if (!x || !y || *x == *y || topo.find_edge(*x, *y)) continue;
            // Sliver normals are noise, so only the new pair is held to the fold limit.
            FaceRecord g0 = c.faces[f0], g1 = c.faces[f1];
            g0.v = {p, *y, *x};
            g1.v = {q, *x, *y};
            const Vec3 m0 = face_normal(c, g0), m1 = face_normal(c, g1);
            if (dot(m0, m1) < cos_fold) continue;
            if (dot(face_area_vector(c, c.faces[f0]) + face_area_vector(c, c.faces[f1]), m0 + m1) <= 0.0) continue;
            const double new_worst = std::max(aspect(g0), aspect(g1));
            if (new_worst >= worst) continue;
            const auto& P = c.vertices;
            const double before = detail::face_energy(P[p], P[q], P[*x], s0) + detail::face_energy(P[q], P[p], P[*y], s0);
            const double after = detail::face_energy(P[p], P[*y], P[*x], s0) + detail::face_energy(P[q], P[*x], P[*y], s0);
            const double delta = after - before;
            if (spent + delta > budget) {
                ++rep.rejected;
                continue;
            }
            spent += delta;
            c.faces[f0] = g0;
            c.faces[f1] = g1;
            touched[f0] = touched[f1] = true;
            ++rep.flips;
            changed = true;
        }
        if (opt.allow_splits) {
            // Obtuse slivers that no flip fixed: split the longest edge when
            // it is a manifold edge.
            topo = build_topology(c);
            const std::size_t nf = c.faces.size();
            std::vector<bool> busy(nf, false);
            for (std::size_t f = 0; f < nf; ++f) {
                if (busy[f] || aspect(c.faces[f]) <= opt.aspect_threshold) continue;
                std::size_t slot = 0;
                double longest = -1.0;
                for (std::size_t i = 0; i < 3; ++i) {
                    const double l = distance(c.vertices[c.faces[f].v[i]], c.vertices[c.faces[f].v[(i + 1) % 3]]);
                    if (l > longest) {
                        longest = l;
                        slot = i;
                    }
                }
                const std::size_t e = topo.face_edges[f][slot];
                if (topo.edge_valence(e) != 2) continue;
                const auto fs = topo.faces_of_edge(e);
                const std::size_t other = fs[0] == f ? fs[1] : fs[0];
                if (busy[other]) continue;
                const std::size_t a = topo.edges[e].u, b = topo.edges[e].v;
                const Vec3 mid = 0.5 * (c.vertices[a] + c.vertices[b]);
                const std::size_t m = c.vertices.size();
                std::array<std::pair<FaceRecord, FaceRecord>, 2> halves;
                double before = 0.0, after = 0.0;
                bool ok = true;
                for (std::size_t k = 0; k < 2; ++k) {
                    const FaceRecord& face = c.faces[k == 0 ? f : other];
                    const auto& P = c.vertices;
                    before += detail::face_energy(P[face.v[0]], P[face.v[1]], P[face.v[2]], s0);
                    std::size_t i = 0;
                    while (i < 3 && !((face.v[i] == a && face.v[(i + 1) % 3] == b) ||
                                      (face.v[i] == b && face.v[(i + 1) % 3] == a)))
                        ++i;
                    if (i == 3) {
                        ok = false;
                        break;
                    }
                    const std::size_t u = face.v[i], w = face.v[(i + 1) % 3], z = face.v[(i + 2) % 3];
                    halves[k] = {face, face};
                    halves[k].first.v = {u, m, z};
                    halves[k].second.v = {m, w, z};
                    after += detail::face_energy(P[u], mid, P[z], s0) + detail::face_energy(mid, P[w], P[z], s0);
                }
                if (!ok) continue;
                const double worst = std::max(aspect(c.faces[f]), aspect(c.faces[other]));
                double new_worst = 0.0;
                for (const auto& [h0, h1] : halves) {
                    const Vec3& z0 = h0.v[0] == m ? mid : c.vertices[h0.v[0]];
                    new_worst = std::max(new_worst, aspect_ratio(z0, mid, c.vertices[h0.v[2]]));
                    new_worst = std::max(new_worst, aspect_ratio(mid, c.vertices[h1.v[1]], c.vertices[h1.v[2]]));
                }
                if (new_worst >= worst) continue;
                const double delta = after - before;
                if (spent + delta > budget) {
                    ++rep.rejected;
                    continue;
                }
                spent += delta;
                c.vertices.push_back(mid);
                c.flags.push_back(VertexFlag::interior);
                c.faces[f] = halves[0].first;
                c.faces[other] = halves[1].first;
                c.faces.push_back(halves[0].second);
                c.faces.push_back(halves[1].second);
                busy[f] = busy[other] = true;
                busy.resize(c.faces.size(), true);
                ++rep.splits;
                changed = true;
            }
        }
        if (!changed) break;
    }

    const ValidationOutcome vo = validate(c);
    bool broken = false;
    for (const Violation& v : vo.violations) {
        // Rim placement of an input that was never on a sphere is not ours to fix.
        if (v.kind != violation::off_sphere && v.kind != violation::open_edge) broken = true;
    }
    if (!broken) broken = extract_junctions(c).triple_curves.size() != curves_before;
    if (broken) {
        c = original;
        throw TopologyBroken("quality pass produced an invalid complex; rolled back");
    }
    energy = weighted_area(c, {.unit_weight = false, .log_scale = s0}).total;
    rep.energy_after = std::log(energy) + s0;
    rep.max_aspect_after = max_aspect_ratio(c);
    return rep;
}

// ---------------------------------------------------------------------------
// Minimization
// ---------------------------------------------------------------------------

namespace detail {

inline void apply_perturbation(SurfaceComplex& c, const Topology& topo, double amplitude, std::uint64_t seed) {
    if (amplitude == 0.0) return;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<Vec3> moved = c.vertices;
    for (std::size_t v = 0; v < c.vertices.size(); ++v) {
        const double r = uni(rng);
        if (!is_interior_manifold(c, topo, v)) continue;
        moved[v] += (amplitude * r) * vertex_normal(c, topo, v);
    }
    c.vertices = std::move(moved);
}

}  // namespace detail

inline OptimizerState minimize(SurfaceComplex complex, const ConeSpec& spec, const SolveConfig& config,
                               const IterationLogger& log = {}) {
    config.check();
    {
        const ValidationOutcome vo = validate(complex);
        if (!vo.ok())
            throw InvalidComplex("input complex invalid: " + vo.violations.front().kind + " (" +
                                 vo.violations.front().message + ")");
    }
    OptimizerState st;
    st.components = connected_components(complex).size();
    Topology topo = build_topology(complex);
    detail::apply_perturbation(complex, topo, config.perturbation, config.seed);
    const JunctionGraph jg = extract_junctions(complex, topo);
    const detail::Classification cl0 = detail::classify_vertices(complex, topo, jg);
    for (std::size_t v = 0; v < complex.vertices.size(); ++v) {
        if (complex.is_boundary(v)) st.boundary_vertices.push_back(v);
        else if (cl0.kind[v] == detail::DofKind::normal) st.interior_vertices.push_back(v);
        else st.junction_vertices.push_back(v);
    }
    st.complex = std::move(complex);
    SurfaceComplex& c = st.complex;
    const double eps_area = area_epsilon(c);
    double gamma = 0.25 * std::pow(detail::mean_edge_length(c, topo), 2);

    std::size_t iter = 0;
    bool first_record = true;
    while (true) {
        // New epoch: fresh shift, frames and memory.
        const double s0 = max_log_weight(c);
        const detail::Classification cl = detail::classify_vertices(c, topo, jg);
        const detail::DofFrame fr = detail::build_frame(c, topo, cl, s0, config.blend_rings);
        const std::vector<double> M = detail::dof_mass(fr);
        std::deque<std::pair<std::vector<double>, std::vector<double>>> memory;
        std::vector<double> face_e;
        detail::face_energies(c, s0, face_e, nullptr, 0.0);
        double energy = pairwise_sum(face_e);
        std::vector<double> G = detail::reduce(fr, weighted_area_gradient(c, {.unit_weight = false, .log_scale = s0}).per_vertex);
        double grms = detail::gradient_rms(fr, G);
        if (first_record) {
            st.history.push_back({0, energy, s0, grms, 0.0});
            if (log) log(st.history.back());
            first_record = false;
        }
        bool epoch_done = false;
        for (std::size_t local = 0; !epoch_done; ++local) {
            st.gradrms = grms;
            if (grms <= config.grad_tol) {
                st.status = SolveStatus::converged;
                if (local == 0) break;  // confirmed with fresh frames
                epoch_done = true;
                continue;
            }
            if (iter >= config.max_iters) {
                st.status = SolveStatus::max_iters;
                break;
            }
            if (local >= config.frame_refresh ||
                (config.remesh_every > 0 && iter > 0 && iter % config.remesh_every == 0 && local > 0)) {
                epoch_done = true;
                continue;
            }
            // Two-loop recursion with H0 = gamma M^-1.
            std::vector<double> q = G;
            std::vector<double> alpha(memory.size());
            for (std::size_t k = memory.size(); k-- > 0;) {
                const auto& [s, y] = memory[k];
                alpha[k] = detail::dotv(s, q) / detail::dotv(y, s);
                for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * y[i];
            }
            for (std::size_t i = 0; i < q.size(); ++i) q[i] *= gamma / M[i];
            for (std::size_t k = 0; k < memory.size(); ++k) {
                const auto& [s, y] = memory[k];
                const double beta = detail::dotv(y, q) / detail::dotv(y, s);
                for (std::size_t i = 0; i < q.size(); ++i) q[i] += (alpha[k] - beta) * s[i];
            }
            std::vector<double> p(q.size());
            for (std::size_t i = 0; i < q.size(); ++i) p[i] = -q[i];
            // Faces far inside carry a tiny share of E, so the line search cannot
            // see overshoot there; a per-vertex trust region keeps them intact.
            detail::cap_step(c, topo, fr, config.max_step_fraction, p);
            double slope = detail::dotv(G, p);
            if (!(slope < 0.0)) {
                memory.clear();
                for (std::size_t i = 0; i < p.size(); ++i) p[i] = -gamma * G[i] / M[i];
                detail::cap_step(c, topo, fr, config.max_step_fraction, p);
                slope = detail::dotv(G, p);
            }
            const std::vector<Vec3> dir = detail::expand(fr, p);
            const std::vector<Vec3> x0 = c.vertices;
            const std::vector<Vec3> ref = detail::area_vectors(c);
            double t = 1.0;
            bool accepted = false;
            std::vector<double> trial_e;
            double trial_energy = energy;
            for (std::size_t bt = 0; bt <= config.max_backtracks; ++bt, t *= config.shrink) {
                for (std::size_t v = 0; v < x0.size(); ++v) c.vertices[v] = x0[v] + t * dir[v];
                if (!detail::face_energies(c, s0, trial_e, &ref, eps_area)) continue;
                // Difference summed face by face; cancels most rounding in E.
                std::vector<double> diff(trial_e.size());
                for (std::size_t f = 0; f < diff.size(); ++f) diff[f] = trial_e[f] - face_e[f];
                const double delta = pairwise_sum(diff);
                if (delta < 0.0 && delta <= config.c1 * t * slope) {
                    accepted = true;
                    trial_energy = energy + delta;
                    break;
                }
            }
            if (!accepted) {
                c.vertices = x0;
                // A fresh epoch (steepest descent, new frames) gets the last word.
                if (local == 0) {
                    st.status = SolveStatus::line_search_failure;
                    break;
                }
                epoch_done = true;
                continue;
            }
            ++iter;
            face_e = std::move(trial_e);
            energy = trial_energy;
            std::vector<double> Gn =
                detail::reduce(fr, weighted_area_gradient(c, {.unit_weight = false, .log_scale = s0}).per_vertex);
            std::vector<double> s(p.size()), y(p.size());
            for (std::size_t i = 0; i < p.size(); ++i) {
                s[i] = t * p[i];
                y[i] = Gn[i] - G[i];
            }
            const double sy = detail::dotv(s, y);
            if (sy > 1e-300 && config.lbfgs_memory > 0) {
                double yMy = 0.0;
                for (std::size_t i = 0; i < y.size(); ++i) yMy += y[i] * y[i] / M[i];
                gamma = sy / yMy;
                memory.emplace_back(std::move(s), std::move(y));
                if (memory.size() > config.lbfgs_memory) memory.pop_front();
            }
            G = std::move(Gn);
            grms = detail::gradient_rms(fr, G);
            st.history.push_back({iter, energy, s0, grms, t});
            if (log) log(st.history.back());
        }
        if (!epoch_done) break;
        if (config.remesh_every > 0 && iter > 0 && iter % config.remesh_every == 0) {
            const QualityReport qr = quality_pass(c);
            st.quality_flips += qr.flips;
            st.quality_splits += qr.splits;
            if (qr.flips + qr.splits > 0) topo = build_topology(c);
        }
    }
    st.iterations = iter;
    for (std::size_t v : st.boundary_vertices)
        st.boundary_deviation = std::max(st.boundary_deviation, distance_to_trace(spec, c.truncation_radius, c.vertices[v]));
    if (connected_components(c).size() != st.components)
        throw TopologyBroken("component count changed during minimization");
    return st;
}

// ---------------------------------------------------------------------------
// Continuation in R
// ---------------------------------------------------------------------------

struct ContinuationStep {
    double radius = 0.0;
    OptimizerState state;
    std::vector<VertexKey> keys;
    std::vector<double> ring_radii;
};

/// Solves at each radius of the schedule, warm-starting every solve from the
/// previous solution extended outward along the cone.
inline std::vector<ContinuationStep> continue_in_radius(const ConeSpec& spec, const TopologyTemplate& tmpl,
                                                        const SolveConfig& config, double h,
                                                        InstantiateOptions options = {},
                                                        const std::function<void(double, const IterationRecord&)>& log = {}) {
    config.check();
    if (config.radius_schedule.empty()) throw InvalidArgument("radius schedule is empty");
    if (!(options.strip_width > 0.0)) options.strip_width = 0.3 * config.radius_schedule.front();
    std::vector<ContinuationStep> out;
    std::vector<double> radii;
    for (double R : config.radius_schedule) {
        radii = radii.empty() ? uniform_rings(R, h) : extend_rings(radii, R, h);
        TemplateMesh tm = instantiate_on_rings(tmpl, spec, radii, h, options);
        if (!out.empty()) {
            const ContinuationStep& prev = out.back();
            std::map<VertexKey, std::size_t> old_index;
            for (std::size_t v = 0; v < prev.keys.size(); ++v) old_index.emplace(prev.keys[v], v);
            for (std::size_t v = 0; v < tm.keys.size(); ++v) {
                auto it = old_index.find(tm.keys[v]);
                if (it != old_index.end()) tm.complex.vertices[v] = prev.state.complex.vertices[it->second];
            }
        }
        IterationLogger inner;
        if (log) inner = [&, R](const IterationRecord& r) { log(R, r); };
        ContinuationStep step;
        step.radius = R;
        step.keys = tm.keys;
        step.ring_radii = radii;
        step.state = minimize(std::move(tm.complex), spec, config, inner);
        // Splits append vertices with no template identity.
        step.keys.resize(step.state.complex.vertices.size(), VertexKey{255, -1, -1, -1});
        out.push_back(std::move(step));
    }
    return out;
}

}  // namespace expandernet
