#pragma once

// Phase-labelled non-manifold triangle complexes: data model, invariant checks,
// junction extraction, connectivity and edge refinement.

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "vec3.hpp"

namespace expandernet {

/// Region label. 0 is the exterior / unassigned region, 1..K are phases.
struct PhaseLabel {
    std::uint32_t value = 0;

    constexpr auto operator<=>(const PhaseLabel&) const = default;
};

enum class VertexFlag : std::uint8_t { interior, sphere_boundary };

/// A face separates phase `a` from phase `b` (a < b). The winding normal
/// (v1 - v0) x (v2 - v0) points from region a toward region b.
struct FaceRecord {
    std::array<std::size_t, 3> v{};
    PhaseLabel a{};
    PhaseLabel b{};

    [[nodiscard]] constexpr std::pair<std::uint32_t, std::uint32_t> phase_pair() const noexcept {
        return {a.value, b.value};
    }
    constexpr bool operator==(const FaceRecord&) const = default;
};

struct SurfaceComplex {
    std::vector<Vec3> vertices;
    std::vector<VertexFlag> flags;
    std::vector<FaceRecord> faces;
    std::uint32_t phase_count = 0;
    double truncation_radius = 1.0;

    [[nodiscard]] std::size_t num_vertices() const noexcept { return vertices.size(); }
    [[nodiscard]] std::size_t num_faces() const noexcept { return faces.size(); }
    [[nodiscard]] bool is_boundary(std::size_t v) const noexcept {
        return flags[v] == VertexFlag::sphere_boundary;
    }

    bool operator==(const SurfaceComplex&) const = default;
};

// ---------------------------------------------------------------------------
// Elementary face geometry
// ---------------------------------------------------------------------------

inline Vec3 face_area_vector(const SurfaceComplex& c, const FaceRecord& f) noexcept {
    const Vec3& p0 = c.vertices[f.v[0]];
    return 0.5 * cross(c.vertices[f.v[1]] - p0, c.vertices[f.v[2]] - p0);
}

inline double face_area(const SurfaceComplex& c, const FaceRecord& f) noexcept {
    return norm(face_area_vector(c, f));
}

inline Vec3 face_centroid(const SurfaceComplex& c, const FaceRecord& f) noexcept {
    return (c.vertices[f.v[0]] + c.vertices[f.v[1]] + c.vertices[f.v[2]]) / 3.0;
}

/// Unit normal pointing from phase a toward phase b.
inline Vec3 face_normal(const SurfaceComplex& c, const FaceRecord& f) noexcept {
    return normalized(face_area_vector(c, f));
}

inline double bounding_box_diagonal(const SurfaceComplex& c) noexcept {
    if (c.vertices.empty()) return 0.0;
    Vec3 lo = c.vertices.front();
    Vec3 hi = lo;
    for (const Vec3& p : c.vertices) {
        for (std::size_t k = 0; k < 3; ++k) {
            lo[k] = std::min(lo[k], p[k]);
            hi[k] = std::max(hi[k], p[k]);
        }
    }
    return norm(hi - lo);
}

/// Minimum admissible face area: 1e-12 * (bounding-box diagonal)^2.
inline double area_epsilon(const SurfaceComplex& c) noexcept {
    const double d = bounding_box_diagonal(c);
    return 1e-12 * d * d;
}

/// Maximum radial deviation of sphere-boundary vertices: 1e-9 * R.
inline double boundary_epsilon(const SurfaceComplex& c) noexcept {
    return 1e-9 * c.truncation_radius;
}

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

struct Edge {
    std::size_t u = 0;  // u < v
    std::size_t v = 0;
};

/// Compressed adjacency lists. All orderings are by ascending id, so every
/// traversal built on top is deterministic.
struct Topology {
    std::vector<Edge> edges;
    std::vector<std::size_t> edge_face_offsets;  // CSR into edge_faces
    std::vector<std::size_t> edge_faces;
    std::vector<std::array<std::size_t, 3>> face_edges;  // slot i joins v[i] and v[i+1]
    std::vector<std::size_t> vertex_face_offsets;
    std::vector<std::size_t> vertex_faces;
    std::vector<std::size_t> vertex_edge_offsets;
    std::vector<std::size_t> vertex_edges;

    [[nodiscard]] std::span<const std::size_t> faces_of_edge(std::size_t e) const noexcept {
        return {edge_faces.data() + edge_face_offsets[e],
                edge_face_offsets[e + 1] - edge_face_offsets[e]};
    }
    [[nodiscard]] std::size_t edge_valence(std::size_t e) const noexcept {
        return edge_face_offsets[e + 1] - edge_face_offsets[e];
    }
    [[nodiscard]] std::span<const std::size_t> faces_of_vertex(std::size_t v) const noexcept {
        return {vertex_faces.data() + vertex_face_offsets[v],
                vertex_face_offsets[v + 1] - vertex_face_offsets[v]};
    }
    [[nodiscard]] std::span<const std::size_t> edges_of_vertex(std::size_t v) const noexcept {
        return {vertex_edges.data() + vertex_edge_offsets[v],
                vertex_edge_offsets[v + 1] - vertex_edge_offsets[v]};
    }
    [[nodiscard]] std::size_t other_end(std::size_t e, std::size_t v) const noexcept {
        return edges[e].u == v ? edges[e].v : edges[e].u;
    }
    /// Edge id of {a, b}, if present.
    [[nodiscard]] std::optional<std::size_t> find_edge(std::size_t a, std::size_t b) const {
        for (std::size_t e : edges_of_vertex(a)) {
            if (other_end(e, a) == b) return e;
        }
        return std::nullopt;
    }
};

namespace detail {
inline void build_csr(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                      std::vector<std::size_t>& offsets, std::vector<std::size_t>& values) {
    offsets.assign(n + 1, 0);
    for (const auto& [k, val] : pairs) ++offsets[k + 1];
    for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
    values.assign(pairs.size(), 0);
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (const auto& [k, val] : pairs) values[cursor[k]++] = val;
}
}  // namespace detail

/// Requires vertex indices in range.
inline Topology build_topology(const SurfaceComplex& c) {
    Topology t;
    const std::size_t nf = c.faces.size();
    const std::size_t nv = c.vertices.size();

    struct HalfKey {
        std::size_t u, v, face, slot;
    };
    std::vector<HalfKey> keys;
    keys.reserve(3 * nf);
    for (std::size_t f = 0; f < nf; ++f) {
        for (std::size_t i = 0; i < 3; ++i) {
            std::size_t a = c.faces[f].v[i];
            std::size_t b = c.faces[f].v[(i + 1) % 3];
            if (a > b) std::swap(a, b);
            keys.push_back({a, b, f, i});
        }
    }
    std::sort(keys.begin(), keys.end(), [](const HalfKey& x, const HalfKey& y) {
        return std::tie(x.u, x.v, x.face, x.slot) < std::tie(y.u, y.v, y.face, y.slot);
    });

    t.face_edges.assign(nf, {0, 0, 0});
    t.edge_face_offsets.push_back(0);
    for (std::size_t i = 0; i < keys.size();) {
        std::size_t j = i;
        const std::size_t e = t.edges.size();
        t.edges.push_back({keys[i].u, keys[i].v});
        while (j < keys.size() && keys[j].u == keys[i].u && keys[j].v == keys[i].v) {
            t.edge_faces.push_back(keys[j].face);
            t.face_edges[keys[j].face][keys[j].slot] = e;
            ++j;
        }
        t.edge_face_offsets.push_back(t.edge_faces.size());
        i = j;
    }

    std::vector<std::pair<std::size_t, std::size_t>> vf;
    vf.reserve(3 * nf);
    for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t k : c.faces[f].v) vf.emplace_back(k, f);
    detail::build_csr(nv, vf, t.vertex_face_offsets, t.vertex_faces);

    std::vector<std::pair<std::size_t, std::size_t>> ve;
    ve.reserve(2 * t.edges.size());
    for (std::size_t e = 0; e < t.edges.size(); ++e) {
        ve.emplace_back(t.edges[e].u, e);
        ve.emplace_back(t.edges[e].v, e);
    }
    detail::build_csr(nv, ve, t.vertex_edge_offsets, t.vertex_edges);
    return t;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
    std::string kind;
    std::string message;
    std::vector<std::size_t> ids;
};

struct ValidationOutcome {
    std::vector<Violation> violations;

    [[nodiscard]] bool ok() const noexcept { return violations.empty(); }
    [[nodiscard]] bool has(std::string_view kind) const {
        return std::any_of(violations.begin(), violations.end(),
                           [&](const Violation& v) { return v.kind == kind; });
    }
};

namespace violation {
inline constexpr std::string_view phase_order = "face phase_pair not ordered a < b";
inline constexpr std::string_view phase_range = "phase label exceeds phase count";
inline constexpr std::string_view vertex_range = "face vertex index out of range";
inline constexpr std::string_view repeated_vertex = "face repeats a vertex";
inline constexpr std::string_view flag_count = "vertex flag count differs from vertex count";
inline constexpr std::string_view radius = "truncation radius not positive";
inline constexpr std::string_view open_edge = "1-face edge with interior endpoint";
inline constexpr std::string_view mismatched_pair = "interior 2-face edge with mismatched phase_pair";
inline constexpr std::string_view orientation = "2-face edge with inconsistent orientation";
inline constexpr std::string_view triple_phases = "3-face edge phases are not a triple";
inline constexpr std::string_view high_valence = "edge with 4 or more incident faces";
inline constexpr std::string_view off_sphere = "sphere-boundary vertex off the truncation sphere";
inline constexpr std::string_view degenerate = "degenerate face";
}  // namespace violation

/// Pure check of every structural invariant. Never throws; violations carry
/// the offending face, edge-endpoint or vertex ids.
inline ValidationOutcome validate(const SurfaceComplex& c) {
    ValidationOutcome out;
    auto report = [&](std::string_view kind, std::string msg, std::vector<std::size_t> ids) {
        out.violations.push_back({std::string(kind), std::move(msg), std::move(ids)});
    };

    if (c.flags.size() != c.vertices.size()) {
        report(violation::flag_count, "flags=" + std::to_string(c.flags.size()) +
                                          " vertices=" + std::to_string(c.vertices.size()),
               {});
        return out;
    }
    if (!(c.truncation_radius > 0.0)) report(violation::radius, "R must be > 0", {});

    bool indices_ok = true;
    for (std::size_t f = 0; f < c.faces.size(); ++f) {
        const FaceRecord& face = c.faces[f];
        if (!(face.a < face.b)) report(violation::phase_order, "face " + std::to_string(f), {f});
        if (face.b.value > c.phase_count || face.a.value > c.phase_count)
            report(violation::phase_range, "face " + std::to_string(f), {f});
        for (std::size_t k : face.v) {
            if (k >= c.vertices.size()) {
                report(violation::vertex_range, "face " + std::to_string(f), {f});
                indices_ok = false;
                break;
            }
        }
        if (face.v[0] == face.v[1] || face.v[1] == face.v[2] || face.v[0] == face.v[2])
            report(violation::repeated_vertex, "face " + std::to_string(f), {f});
    }
    if (!indices_ok) return out;

    const Topology topo = build_topology(c);
    for (std::size_t e = 0; e < topo.edges.size(); ++e) {
        const auto fs = topo.faces_of_edge(e);
        const Edge& edge = topo.edges[e];
        const std::string where = "edge (" + std::to_string(edge.u) + "," + std::to_string(edge.v) + ")";
        switch (fs.size()) {
            case 1:
                if (!c.is_boundary(edge.u) || !c.is_boundary(edge.v))
                    report(violation::open_edge, where, {edge.u, edge.v});
                break;
            case 2: {
                const FaceRecord& f0 = c.faces[fs[0]];
                const FaceRecord& f1 = c.faces[fs[1]];
                if (f0.phase_pair() != f1.phase_pair()) {
                    report(violation::mismatched_pair, where, {fs[0], fs[1]});
                    break;
                }
                // Consistent orientation: the shared edge is traversed in opposite senses.
                auto forward = [&](const FaceRecord& f) {
                    for (std::size_t i = 0; i < 3; ++i)
                        if (f.v[i] == edge.u && f.v[(i + 1) % 3] == edge.v) return true;
                    return false;
                };
                if (forward(f0) == forward(f1)) report(violation::orientation, where, {fs[0], fs[1]});
                break;
            }
            case 3: {
                std::set<std::uint32_t> phases;
                std::set<std::pair<std::uint32_t, std::uint32_t>> pairs;
                for (std::size_t f : fs) {
                    phases.insert(c.faces[f].a.value);
                    phases.insert(c.faces[f].b.value);
                    pairs.insert(c.faces[f].phase_pair());
                }
                if (phases.size() != 3 || pairs.size() != 3)
                    report(violation::triple_phases, where, {fs[0], fs[1], fs[2]});
                break;
            }
            default:
                report(violation::high_valence, where + " has " + std::to_string(fs.size()) + " faces",
                       {edge.u, edge.v});
        }
    }

    const double eps_bdry = boundary_epsilon(c);
    for (std::size_t v = 0; v < c.vertices.size(); ++v) {
        if (c.is_boundary(v) && std::abs(norm(c.vertices[v]) - c.truncation_radius) > eps_bdry)
            report(violation::off_sphere, "vertex " + std::to_string(v), {v});
    }
    const double eps_area = area_epsilon(c);
    for (std::size_t f = 0; f < c.faces.size(); ++f) {
        if (face_area(c, c.faces[f]) < eps_area)
            report(violation::degenerate, "face " + std::to_string(f), {f});
    }
    return out;
}

/// Histogram of edge valences (number of incident faces -> edge count).
inline std::map<std::size_t, std::size_t> edge_incidence_census(const SurfaceComplex& c) {
    const Topology topo = build_topology(c);
    std::map<std::size_t, std::size_t> census;
    for (std::size_t e = 0; e < topo.edges.size(); ++e) ++census[topo.edge_valence(e)];
    return census;
}

// ---------------------------------------------------------------------------
// Junctions
// ---------------------------------------------------------------------------

struct TripleCurve {
    std::vector<std::size_t> vertices;  // chain; closed loops repeat the first vertex at the end
    std::array<PhaseLabel, 3> phases{};

    [[nodiscard]] bool closed() const noexcept {
        return vertices.size() > 2 && vertices.front() == vertices.back();
    }
};

struct QuadruplePoint {
    std::size_t vertex = 0;
    std::array<PhaseLabel, 4> phases{};
    std::array<std::size_t, 4> curves{};  // incident triple-curve ids (a loop counts twice)
};

struct JunctionGraph {
    std::vector<TripleCurve> triple_curves;
    std::vector<QuadruplePoint> quadruple_points;
    /// Per curve: (start on sphere, end on sphere).
    std::vector<std::pair<bool, bool>> endpoint_map;

    [[nodiscard]] bool empty() const noexcept {
        return triple_curves.empty() && quadruple_points.empty();
    }
};

/// Per-vertex count of incident 3-face edges.
inline std::vector<std::size_t> triple_germ_counts(const SurfaceComplex& c, const Topology& topo) {
    std::vector<std::size_t> germs(c.vertices.size(), 0);
    for (std::size_t e = 0; e < topo.edges.size(); ++e) {
        if (topo.edge_valence(e) == 3) {
            ++germs[topo.edges[e].u];
            ++germs[topo.edges[e].v];
        }
    }
    return germs;
}

/// Traces triple curves along 3-face edges. Sphere-boundary vertices always
/// terminate a curve; interior vertices must carry 0, 2 or 4 germs.
inline JunctionGraph extract_junctions(const SurfaceComplex& c, const Topology& topo) {
    JunctionGraph g;
    const std::vector<std::size_t> germs = triple_germ_counts(c, topo);
    std::vector<bool> terminal(c.vertices.size(), false);
    for (std::size_t v = 0; v < c.vertices.size(); ++v) {
        if (germs[v] == 0) continue;
        if (c.is_boundary(v)) {
            terminal[v] = true;
            continue;
        }
        if (germs[v] == 4) {
            terminal[v] = true;
        } else if (germs[v] != 2) {
            throw JunctionDegreeError("vertex " + std::to_string(v) + " joins " +
                                      std::to_string(germs[v]) + " triple-curve germs");
        }
    }

    auto triple_of_edge = [&](std::size_t e) {
        std::set<std::uint32_t> ph;
        for (std::size_t f : topo.faces_of_edge(e)) {
            ph.insert(c.faces[f].a.value);
            ph.insert(c.faces[f].b.value);
        }
        std::array<PhaseLabel, 3> out{};
        std::size_t i = 0;
        for (std::uint32_t p : ph) {
            if (i < 3) out[i++] = PhaseLabel{p};
        }
        return out;
    };

    std::vector<bool> used(topo.edges.size(), false);
    auto walk = [&](std::size_t start, std::size_t first_edge) {
        TripleCurve curve;
        curve.phases = triple_of_edge(first_edge);
        curve.vertices.push_back(start);
        std::size_t cur = start;
        std::size_t e = first_edge;
        while (true) {
            used[e] = true;
            cur = topo.other_end(e, cur);
            curve.vertices.push_back(cur);
            if (terminal[cur] || cur == start) break;
            std::optional<std::size_t> next;
            for (std::size_t cand : topo.edges_of_vertex(cur)) {
                if (!used[cand] && topo.edge_valence(cand) == 3) {
                    next = cand;
                    break;
                }
            }
            if (!next) break;
            e = *next;
        }
        return curve;
    };

    for (std::size_t v = 0; v < c.vertices.size(); ++v) {
        if (!terminal[v]) continue;
        for (std::size_t e : topo.edges_of_vertex(v)) {
            if (topo.edge_valence(e) == 3 && !used[e]) g.triple_curves.push_back(walk(v, e));
        }
    }
    // Closed loops without terminals.
    for (std::size_t e = 0; e < topo.edges.size(); ++e) {
        if (topo.edge_valence(e) == 3 && !used[e]) g.triple_curves.push_back(walk(topo.edges[e].u, e));
    }

    for (const TripleCurve& curve : g.triple_curves) {
        g.endpoint_map.emplace_back(c.is_boundary(curve.vertices.front()),
                                    c.is_boundary(curve.vertices.back()));
    }

    for (std::size_t v = 0; v < c.vertices.size(); ++v) {
        if (c.is_boundary(v) || germs[v] != 4) continue;
        QuadruplePoint q;
        q.vertex = v;
        std::set<std::uint32_t> phases;
        std::set<std::pair<std::uint32_t, std::uint32_t>> sheets;
        for (std::size_t f : topo.faces_of_vertex(v)) {
            phases.insert(c.faces[f].a.value);
            phases.insert(c.faces[f].b.value);
            sheets.insert(c.faces[f].phase_pair());
        }
        if (phases.size() != 4 || sheets.size() != 6) {
            throw JunctionDegreeError("quadruple point at vertex " + std::to_string(v) + " has " +
                                      std::to_string(phases.size()) + " phases and " +
                                      std::to_string(sheets.size()) + " sheets");
        }
        std::size_t i = 0;
        for (std::uint32_t p : phases) q.phases[i++] = PhaseLabel{p};
        std::size_t k = 0;
        for (std::size_t id = 0; id < g.triple_curves.size() && k < 4; ++id) {
            const TripleCurve& curve = g.triple_curves[id];
            if (curve.vertices.front() == v) q.curves[k++] = id;
            if (k < 4 && curve.vertices.back() == v) q.curves[k++] = id;
        }
        if (k != 4)
            throw JunctionDegreeError("quadruple point at vertex " + std::to_string(v) +
                                      " has " + std::to_string(k) + " incident curves");
        g.quadruple_points.push_back(q);
    }
    return g;
}

inline JunctionGraph extract_junctions(const SurfaceComplex& c) {
    return extract_junctions(c, build_topology(c));
}

// ---------------------------------------------------------------------------
// Connectivity
// ---------------------------------------------------------------------------

namespace detail {
struct DisjointSets {
    std::vector<std::size_t> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};
}  // namespace detail

/// Faces grouped by edge-adjacency; groups ordered by their smallest face id.
inline std::vector<std::vector<std::size_t>> connected_components(const SurfaceComplex& c) {
    const Topology topo = build_topology(c);
    detail::DisjointSets sets(c.faces.size());
    for (std::size_t e = 0; e < topo.edges.size(); ++e) {
        const auto fs = topo.faces_of_edge(e);
        for (std::size_t i = 1; i < fs.size(); ++i) sets.unite(fs[0], fs[i]);
    }
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t f = 0; f < c.faces.size(); ++f) groups[sets.find(f)].push_back(f);
    std::vector<std::vector<std::size_t>> out;
    out.reserve(groups.size());
    for (auto& [root, faces] : groups) out.push_back(std::move(faces));
    return out;
}

// ---------------------------------------------------------------------------
// Refinement
// ---------------------------------------------------------------------------

struct RefineOptions {
    std::size_t max_faces = 5'000'000;
};

/// Splits edges until every edge is at most 1.5 h. Marked faces also split
/// their longest edge so repeated bisection does not create slivers. Midpoints
/// of edges joining two sphere-boundary vertices are pushed radially onto the
/// truncation sphere, which keeps them on the great circle through both ends.
inline SurfaceComplex refine(const SurfaceComplex& input, double target_edge_length,
                             const RefineOptions& options = {}) {
    if (!(target_edge_length > 0.0)) throw InvalidArgument("refine: target edge length must be > 0");
    const double limit = 1.5 * target_edge_length;
    SurfaceComplex c = input;

    while (true) {
        const Topology topo = build_topology(c);
        std::vector<bool> marked(topo.edges.size(), false);
        bool any = false;
        for (std::size_t e = 0; e < topo.edges.size(); ++e) {
            if (distance(c.vertices[topo.edges[e].u], c.vertices[topo.edges[e].v]) > limit) {
                marked[e] = true;
                any = true;
            }
        }
        if (!any) break;

        auto longest_slot = [&](std::size_t f) {
            std::size_t best = 0;
            double best_len = -1.0;
            for (std::size_t i = 0; i < 3; ++i) {
                const Edge& ed = topo.edges[topo.face_edges[f][i]];
                const double len = distance(c.vertices[ed.u], c.vertices[ed.v]);
                if (len > best_len) {
                    best_len = len;
                    best = i;
                }
            }
            return best;
        };
        // Closure: a face with any marked edge also splits its longest edge.
        for (bool changed = true; changed;) {
            changed = false;
            for (std::size_t f = 0; f < c.faces.size(); ++f) {
                const auto& fe = topo.face_edges[f];
                if (!(marked[fe[0]] || marked[fe[1]] || marked[fe[2]])) continue;
                const std::size_t le = fe[longest_slot(f)];
                if (!marked[le]) {
                    marked[le] = true;
                    changed = true;
                }
            }
        }

        std::size_t new_faces = c.faces.size();
        for (std::size_t f = 0; f < c.faces.size(); ++f) {
            const auto& fe = topo.face_edges[f];
            new_faces += static_cast<std::size_t>(marked[fe[0]]) + marked[fe[1]] + marked[fe[2]];
        }
        if (new_faces > options.max_faces)
            throw RefinementOverflow("refine would create " + std::to_string(new_faces) +
                                     " faces (cap " + std::to_string(options.max_faces) + ")");

        std::vector<std::size_t> midpoint(topo.edges.size(), std::numeric_limits<std::size_t>::max());
        for (std::size_t e = 0; e < topo.edges.size(); ++e) {
            if (!marked[e]) continue;
            const Edge& ed = topo.edges[e];
            Vec3 m = 0.5 * (c.vertices[ed.u] + c.vertices[ed.v]);
            const bool on_sphere = c.is_boundary(ed.u) && c.is_boundary(ed.v) && topo.edge_valence(e) == 1;
            if (on_sphere) m = c.truncation_radius * normalized(m);
            midpoint[e] = c.vertices.size();
            c.vertices.push_back(m);
            c.flags.push_back(on_sphere ? VertexFlag::sphere_boundary : VertexFlag::interior);
        }

        std::vector<FaceRecord> faces;
        faces.reserve(new_faces);
        for (std::size_t f = 0; f < c.faces.size(); ++f) {
            const FaceRecord& face = c.faces[f];
            const auto& fe = topo.face_edges[f];  // fe[i] joins v[i] and v[i+1]
            const std::size_t count = static_cast<std::size_t>(marked[fe[0]]) + marked[fe[1]] + marked[fe[2]];
            auto tri = [&](std::size_t a, std::size_t b, std::size_t d) {
                faces.push_back({{a, b, d}, face.a, face.b});
            };
            if (count == 0) {
                faces.push_back(face);
                continue;
            }
            if (count == 3) {
                const std::size_t m0 = midpoint[fe[0]], m1 = midpoint[fe[1]], m2 = midpoint[fe[2]];
                tri(face.v[0], m0, m2);
                tri(m0, face.v[1], m1);
                tri(m2, m1, face.v[2]);
                tri(m0, m1, m2);
                continue;
            }
            // Rotate so the longest (always marked) edge is slot 0.
            const std::size_t s = longest_slot(f);
            const std::size_t v0 = face.v[s], v1 = face.v[(s + 1) % 3], v2 = face.v[(s + 2) % 3];
            const std::size_t e0 = fe[s], e1 = fe[(s + 1) % 3], e2 = fe[(s + 2) % 3];
            const std::size_t m0 = midpoint[e0];
            if (count == 1) {
                tri(v0, m0, v2);
                tri(m0, v1, v2);
            } else if (marked[e1]) {
                tri(v0, m0, v2);
                tri(m0, v1, midpoint[e1]);
                tri(m0, midpoint[e1], v2);
            } else {
                tri(v0, m0, midpoint[e2]);
                tri(midpoint[e2], m0, v2);
                tri(m0, v1, v2);
            }
        }
        c.faces = std::move(faces);
    }
    return c;
}

}  // namespace expandernet
