#pragma once

// Asymptotic cones as geodesic networks on the unit sphere: validation,
// boundary traces on the truncation sphere, and initial-topology templates.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "errors.hpp"
#include "surface_complex.hpp"
#include "vec3.hpp"

namespace expandernet {

struct ConeNode {
    Vec3 direction{};
    bool helper = false;  // 2-valent node splitting a great circle; no junction
};

/// Great-circle arc from node a to node b. The left side (phase_left) is the
/// side of the oriented great-circle normal. Arcs between antipodal nodes need
/// a via direction to pick the half circle.
struct ConeArc {
    std::size_t a = 0;
    std::size_t b = 0;
    PhaseLabel left{};
    PhaseLabel right{};
    std::optional<Vec3> via;
};

struct ConeSpec {
    std::vector<ConeNode> nodes;
    std::vector<ConeArc> arcs;
    std::uint32_t region_count = 0;

    bool operator==(const ConeSpec& o) const {
        if (region_count != o.region_count || nodes.size() != o.nodes.size() ||
            arcs.size() != o.arcs.size())
            return false;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].direction != o.nodes[i].direction || nodes[i].helper != o.nodes[i].helper)
                return false;
        for (std::size_t i = 0; i < arcs.size(); ++i) {
            const ConeArc& x = arcs[i];
            const ConeArc& y = o.arcs[i];
            if (x.a != y.a || x.b != y.b || x.left != y.left || x.right != y.right || x.via != y.via)
                return false;
        }
        return true;
    }
};

// ---------------------------------------------------------------------------
// Arc geometry
// ---------------------------------------------------------------------------

struct ArcGeometry {
    Vec3 start{};
    Vec3 end{};
    Vec3 normal{};  // unit; left side
    double angle = 0.0;

    /// Point at parameter t in [0, 1] on the unit sphere; t = 0 and t = 1
    /// return the stored endpoints exactly.
    [[nodiscard]] Vec3 point(double t) const noexcept {
        if (t <= 0.0) return start;
        if (t >= 1.0) return end;
        const double phi = t * angle;
        return std::cos(phi) * start + std::sin(phi) * cross(normal, start);
    }
    /// Unit tangent leaving the start node.
    [[nodiscard]] Vec3 start_tangent() const noexcept { return cross(normal, start); }
    /// Unit tangent leaving the end node (pointing back along the arc).
    [[nodiscard]] Vec3 end_tangent() const noexcept { return -cross(normal, end); }

    /// Angular parameter of x about the normal, in [0, 2 pi).
    [[nodiscard]] double parameter_of(const Vec3& x) const noexcept {
        double phi = std::atan2(dot(x, cross(normal, start)), dot(x, start));
        if (phi < 0.0) phi += 2.0 * std::numbers::pi;
        return phi;
    }
};

inline ArcGeometry arc_geometry(const ConeSpec& spec, const ConeArc& arc) {
    if (arc.a >= spec.nodes.size() || arc.b >= spec.nodes.size())
        throw InvalidArgument("arc references a missing node");
    ArcGeometry g;
    g.start = normalized(spec.nodes[arc.a].direction);
    g.end = normalized(spec.nodes[arc.b].direction);
    Vec3 n;
    if (arc.via) {
        n = cross(g.start, normalized(*arc.via));
        if (norm(n) < 1e-9) throw InvalidArgument("arc via direction is parallel to its start node");
    } else {
        n = cross(g.start, g.end);
        if (norm(n) < 1e-9)
            throw InvalidArgument("arc between coincident or antipodal nodes needs a via direction");
    }
    g.normal = normalized(n);
    g.angle = g.parameter_of(g.end);
    if (g.angle < 1e-9) g.angle = 2.0 * std::numbers::pi;
    return g;
}

/// Chordal distance from a unit vector to an arc.
inline double distance_to_arc(const ArcGeometry& g, const Vec3& x) {
    const Vec3 q = reject(x, g.normal);
    if (norm(q) > 1e-15) {
        const double phi = g.parameter_of(q);
        if (phi <= g.angle) return distance(x, normalized(q));
    }
    return std::min(distance(x, g.start), distance(x, g.end));
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct NodeAngles {
    std::size_t node = 0;
    std::vector<double> angles_deg;  // consecutive tangent angles, sorted around the node
    double max_deviation_deg = 0.0;
};

struct RegionInfo {
    PhaseLabel label{};
    Vec3 centroid{};  // mean direction of the region's sample points
    std::size_t side_count = 0;
};

struct ConeValidation {
    ValidationOutcome outcome;
    std::vector<NodeAngles> node_angles;
    std::vector<RegionInfo> regions;
    std::vector<std::string> notes;

    [[nodiscard]] bool ok() const noexcept { return outcome.ok(); }
};

namespace cone_violation {
inline constexpr std::string_view unit_norm = "node direction not unit";
inline constexpr std::string_view bad_arc = "arc geometry undefined";
inline constexpr std::string_view labels = "arc labels invalid";
inline constexpr std::string_view valence = "node with 4 incident arcs";  // or any count other than 3
inline constexpr std::string_view angle = "node angle deviates from 120 degrees";
inline constexpr std::string_view helper = "helper node does not continue a great circle";
inline constexpr std::string_view disconnected = "arc network disconnected";
inline constexpr std::string_view region_labels = "region labels inconsistent";
inline constexpr std::string_view region_sides = "region bounded by fewer than 2 or more than 5 arcs";
}  // namespace cone_violation

namespace detail {

/// Icosphere vertices and edges after a fixed generic rotation, so no sample
/// point lies on a coordinate great circle.
struct SphereSampling {
    std::vector<Vec3> points;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
};

inline SphereSampling make_sphere_sampling(int level) {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> pts = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                             {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                             {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
    for (Vec3& p : pts) p = normalized(p);
    std::vector<std::array<std::size_t, 3>> tris = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
        {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (int l = 0; l < level; ++l) {
        std::map<std::pair<std::size_t, std::size_t>, std::size_t> mid;
        auto midpoint = [&](std::size_t a, std::size_t b) {
            const auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            pts.push_back(normalized(pts[a] + pts[b]));
            mid.emplace(key, pts.size() - 1);
            return pts.size() - 1;
        };
        std::vector<std::array<std::size_t, 3>> next;
        next.reserve(tris.size() * 4);
        for (const auto& t : tris) {
            const std::size_t ab = midpoint(t[0], t[1]);
            const std::size_t bc = midpoint(t[1], t[2]);
            const std::size_t ca = midpoint(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({t[1], bc, ab});
            next.push_back({t[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        tris = std::move(next);
    }
    const Mat3 rot = rotation_matrix(normalized(Vec3{0.3, 0.5, 0.81}), 0.4123);
    SphereSampling s;
    s.points.reserve(pts.size());
    for (const Vec3& p : pts) s.points.push_back(rot * p);
    std::set<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& t : tris)
        for (std::size_t i = 0; i < 3; ++i) edges.insert(std::minmax(t[i], t[(i + 1) % 3]));
    s.edges.assign(edges.begin(), edges.end());
    return s;
}

/// True if the short geodesic p-q meets the arc.
inline bool geodesic_crosses_arc(const Vec3& p, const Vec3& q, const ArcGeometry& g) {
    const Vec3 m = cross(p, q);
    const Vec3 d = cross(g.normal, m);
    if (norm(d) < 1e-14) return true;  // same great circle: treat as blocked
    const Vec3 x0 = normalized(d);
    const double span = angle_between(p, q);
    for (const Vec3& x : {x0, -x0}) {
        if (angle_between(p, x) + angle_between(x, q) > span + 1e-12) continue;
        if (g.parameter_of(x) <= g.angle + 1e-12) return true;
    }
    return false;
}

}  // namespace detail

/// Checks every admissibility condition of a cone spec. tol_deg bounds the
/// deviation of node angles from 120 degrees.
inline ConeValidation validate_cone(const ConeSpec& spec, double tol_deg = 0.1) {
    ConeValidation out;
    auto report = [&](std::string_view kind, std::string msg, std::vector<std::size_t> ids = {}) {
        out.outcome.violations.push_back({std::string(kind), std::move(msg), std::move(ids)});
    };

    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
        if (std::abs(norm(spec.nodes[i].direction) - 1.0) > 1e-12)
            report(cone_violation::unit_norm, "node " + std::to_string(i + 1), {i});
    }

    std::vector<std::optional<ArcGeometry>> geo(spec.arcs.size());
    for (std::size_t k = 0; k < spec.arcs.size(); ++k) {
        const ConeArc& arc = spec.arcs[k];
        try {
            geo[k] = arc_geometry(spec, arc);
        } catch (const Error& e) {
            report(cone_violation::bad_arc, "arc " + std::to_string(k + 1) + ": " + e.what(), {k});
        }
        if (arc.left == arc.right || arc.left.value == 0 || arc.right.value == 0 ||
            arc.left.value > spec.region_count || arc.right.value > spec.region_count)
            report(cone_violation::labels, "arc " + std::to_string(k + 1), {k});
    }
    if (!out.outcome.ok()) return out;

    // Incidence: (arc, leaving tangent, label on the left of the leaving direction, right label).
    struct Incidence {
        std::size_t arc;
        Vec3 tangent;
        PhaseLabel left, right;
    };
    std::vector<std::vector<Incidence>> incident(spec.nodes.size());
    for (std::size_t k = 0; k < spec.arcs.size(); ++k) {
        const ConeArc& arc = spec.arcs[k];
        incident[arc.a].push_back({k, geo[k]->start_tangent(), arc.left, arc.right});
        incident[arc.b].push_back({k, geo[k]->end_tangent(), arc.right, arc.left});
    }

    std::size_t true_nodes = 0;
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
        const auto& inc = incident[i];
        const Vec3 a = normalized(spec.nodes[i].direction);
        if (spec.nodes[i].helper) {
            bool good = inc.size() == 2;
            if (good) {
                const double ang = deg(angle_between(inc[0].tangent, inc[1].tangent));
                good = std::abs(ang - 180.0) <= tol_deg && inc[0].left == inc[1].right &&
                       inc[0].right == inc[1].left;
            }
            if (!good) report(cone_violation::helper, "helper node " + std::to_string(i + 1), {i});
            continue;
        }
        ++true_nodes;
        if (inc.size() != 3) {
            report(cone_violation::valence,
                   "node " + std::to_string(i + 1) + " has " + std::to_string(inc.size()) + " incident arcs",
                   {i});
        }
        if (inc.size() < 2) continue;
        const Vec3 e1 = any_orthogonal(a);
        const Vec3 e2 = cross(a, e1);
        std::vector<double> phis;
        for (const Incidence& x : inc) phis.push_back(std::atan2(dot(x.tangent, e2), dot(x.tangent, e1)));
        std::sort(phis.begin(), phis.end());
        NodeAngles na;
        na.node = i;
        for (std::size_t j = 0; j < phis.size(); ++j) {
            double d = (j + 1 < phis.size() ? phis[j + 1] : phis[0] + 2.0 * std::numbers::pi) - phis[j];
            na.angles_deg.push_back(deg(d));
            na.max_deviation_deg = std::max(na.max_deviation_deg, std::abs(deg(d) - 120.0));
        }
        if (inc.size() == 3 && na.max_deviation_deg > tol_deg)
            report(cone_violation::angle,
                   "node " + std::to_string(i + 1) + " deviates " + std::to_string(na.max_deviation_deg) + " deg",
                   {i});
        out.node_angles.push_back(std::move(na));
    }
    if (true_nodes == 0) out.notes.emplace_back("no triple points");

    // Connectivity of the arc network.
    {
        detail::DisjointSets sets(spec.nodes.size());
        for (const ConeArc& arc : spec.arcs) sets.unite(arc.a, arc.b);
        std::set<std::size_t> roots;
        for (std::size_t i = 0; i < spec.nodes.size(); ++i)
            if (!incident[i].empty()) roots.insert(sets.find(i));
        if (roots.size() > 1 || spec.arcs.empty())
            report(cone_violation::disconnected, std::to_string(roots.size()) + " pieces");
    }

    // Regions: flood fill on a sphere sampling with arc-crossing edges removed.
    const detail::SphereSampling s = detail::make_sphere_sampling(5);
    detail::DisjointSets sets(s.points.size());
    for (const auto& [p, q] : s.edges) {
        bool blocked = false;
        for (const auto& g : geo) {
            if (detail::geodesic_crosses_arc(s.points[p], s.points[q], *g)) {
                blocked = true;
                break;
            }
        }
        if (!blocked) sets.unite(p, q);
    }
    std::map<std::size_t, std::size_t> component_index;
    std::vector<Vec3> centroid_sum;
    std::vector<std::size_t> sample_component(s.points.size());
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        const std::size_t root = sets.find(i);
        auto [it, inserted] = component_index.emplace(root, centroid_sum.size());
        if (inserted) centroid_sum.push_back({0.0, 0.0, 0.0});
        centroid_sum[it->second] += s.points[i];
        sample_component[i] = it->second;
    }

    // Side of an arc -> component, by locating the nearest sample point reachable
    // from a point slightly off the arc midpoint.
    auto component_at = [&](const Vec3& x) -> std::optional<std::size_t> {
        std::vector<std::pair<double, std::size_t>> order;
        order.reserve(s.points.size());
        for (std::size_t i = 0; i < s.points.size(); ++i) order.emplace_back(norm2(s.points[i] - x), i);
        const std::size_t keep = std::min<std::size_t>(64, order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end());
        for (std::size_t j = 0; j < keep; ++j) {
            const Vec3& p = s.points[order[j].second];
            bool blocked = false;
            for (const auto& g : geo) {
                if (detail::geodesic_crosses_arc(x, p, *g)) {
                    blocked = true;
                    break;
                }
            }
            if (!blocked) return sample_component[order[j].second];
        }
        return std::nullopt;
    };

    // Chains: arcs merged through helper nodes count as one side.
    detail::DisjointSets chains(spec.arcs.size());
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
        if (spec.nodes[i].helper && incident[i].size() == 2) chains.unite(incident[i][0].arc, incident[i][1].arc);
    }

    std::vector<std::set<std::uint32_t>> comp_labels(centroid_sum.size());
    std::vector<std::set<std::size_t>> comp_sides(centroid_sum.size());
    for (std::size_t k = 0; k < spec.arcs.size(); ++k) {
        const ArcGeometry& g = *geo[k];
        const Vec3 mid = g.point(0.5);
        for (int side : {+1, -1}) {
            const Vec3 probe = normalized(mid + (side * 2e-3) * g.normal);
            const auto comp = component_at(probe);
            if (!comp) {
                report(cone_violation::region_labels, "arc " + std::to_string(k + 1) + " side not resolved", {k});
                continue;
            }
            comp_labels[*comp].insert(side > 0 ? spec.arcs[k].left.value : spec.arcs[k].right.value);
            comp_sides[*comp].insert(chains.find(k));
        }
    }
    for (std::size_t r = 0; r < centroid_sum.size(); ++r) {
        RegionInfo info;
        info.centroid = normalized(centroid_sum[r]);
        info.side_count = comp_sides[r].size();
        if (comp_labels[r].size() != 1) {
            report(cone_violation::region_labels,
                   "region " + std::to_string(r + 1) + " carries " + std::to_string(comp_labels[r].size()) +
                       " labels",
                   {r});
        } else {
            info.label = PhaseLabel{*comp_labels[r].begin()};
        }
        if (true_nodes > 0 && (info.side_count < 2 || info.side_count > 5))
            report(cone_violation::region_sides,
                   "region " + std::to_string(r + 1) + " has " + std::to_string(info.side_count) + " sides", {r});
        out.regions.push_back(info);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Boundary trace
// ---------------------------------------------------------------------------

struct TracePolyline {
    std::size_t arc = 0;
    std::vector<Vec3> points;
};

/// gamma^R: every arc sampled at angular step <= h (so spacing <= h R),
/// scaled to radius R. Shared endpoints are exactly R * node direction.
inline std::vector<TracePolyline> boundary_trace(const ConeSpec& spec, double radius, double h) {
    if (!(radius > 0.0) || !(h > 0.0)) throw InvalidArgument("boundary_trace: R and h must be > 0");
    std::vector<TracePolyline> out;
    for (std::size_t k = 0; k < spec.arcs.size(); ++k) {
        const ArcGeometry g = arc_geometry(spec, spec.arcs[k]);
        const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(g.angle / h - 1e-12)));
        TracePolyline poly;
        poly.arc = k;
        for (std::size_t i = 0; i <= n; ++i) {
            const double t = static_cast<double>(i) / static_cast<double>(n);
            poly.points.push_back(radius * g.point(t));
        }
        out.push_back(std::move(poly));
    }
    return out;
}

/// Distance from a point to the exact trace C0 ∩ S^2_R.
inline double distance_to_trace(const ConeSpec& spec, double radius, const Vec3& p) {
    double best = std::numeric_limits<double>::infinity();
    const double r = norm(p);
    for (const ConeArc& arc : spec.arcs) {
        const ArcGeometry g = arc_geometry(spec, arc);
        const Vec3 u = r > 0 ? p / r : Vec3{0, 0, 1};
        best = std::min(best, norm(p - radius * u) + radius * distance_to_arc(g, u));
    }
    return best;
}

// ---------------------------------------------------------------------------
// Topology templates
// ---------------------------------------------------------------------------

enum class TemplateKind : std::uint8_t { flat_sheet, y_sheet, tetra_cone, cross_resolved_a, cross_resolved_b, cone_verbatim };

struct TopologyTemplate {
    std::string name;
    TemplateKind kind = TemplateKind::cone_verbatim;
    std::string description;
};

inline const std::vector<TopologyTemplate>& builtin_templates() {
    static const std::vector<TopologyTemplate> all = {
        {"flat-sheet", TemplateKind::flat_sheet, "planar disk spanning one great circle"},
        {"y-sheet", TemplateKind::y_sheet, "three half-disks meeting along one triple diameter"},
        {"tetra-cone", TemplateKind::tetra_cone, "cone over the tetrahedral network; one quadruple point"},
        {"cross-resolved-a", TemplateKind::cross_resolved_a,
         "cross cone resolved into two triple curves joined by a strip (first pairing)"},
        {"cross-resolved-b", TemplateKind::cross_resolved_b,
         "cross cone resolved into two triple curves joined by a strip (rotated pairing)"},
        {"cone-verbatim", TemplateKind::cone_verbatim, "the cone itself, meshed as is"},
    };
    return all;
}

inline std::optional<TopologyTemplate> find_template(std::string_view name) {
    if (name == "cross-resolved") name = "cross-resolved-a";
    for (const TopologyTemplate& t : builtin_templates())
        if (t.name == name) return t;
    return std::nullopt;
}

inline std::string template_names() {
    std::string s;
    for (const TopologyTemplate& t : builtin_templates()) {
        if (!s.empty()) s += ", ";
        s += t.name;
    }
    return s;
}

/// Stable identity of a template vertex across truncation radii; lets a
/// solution at R be copied into the template mesh at a larger radius.
struct VertexKey {
    enum Kind : std::uint8_t { center, ray, arc_point, curve, strip };
    std::uint8_t kind = center;
    std::int64_t a = 0;
    std::int64_t b = 0;
    std::int64_t c = 0;

    constexpr auto operator<=>(const VertexKey&) const = default;
};

struct TemplateMesh {
    SurfaceComplex complex;
    std::vector<VertexKey> keys;
    std::vector<double> ring_radii;
};

struct InstantiateOptions {
    bool allow_nonregular = false;
    double tol_deg = 0.1;
    /// Connector-strip width of the cross-resolved templates at the equator;
    /// <= 0 selects 0.3 R.
    double strip_width = 0.0;
};

/// Uniform ring radii 0 = r_0 < ... < r_N = R with spacing <= h.
inline std::vector<double> uniform_rings(double radius, double h) {
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(radius / h - 1e-9)));
    std::vector<double> r(n + 1);
    for (std::size_t k = 0; k <= n; ++k) r[k] = radius * static_cast<double>(k) / static_cast<double>(n);
    r[n] = radius;
    return r;
}

/// Appends rings from radii.back() out to new_radius at spacing <= h.
inline std::vector<double> extend_rings(std::vector<double> radii, double new_radius, double h) {
    const double r0 = radii.back();
    if (!(new_radius > r0)) throw InvalidArgument("extend_rings: radius must increase");
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil((new_radius - r0) / h - 1e-9)));
    for (std::size_t k = 1; k <= n; ++k)
        radii.push_back(k == n ? new_radius : r0 + (new_radius - r0) * static_cast<double>(k) / static_cast<double>(n));
    return radii;
}

namespace detail {

/// Triangulates the band between two chains whose first and last vertices are
/// joined by the band's side edges; picks the shorter diagonal at each step.
template <class Pos, class Emit>
void stitch_chains(const std::vector<std::size_t>& lower, const std::vector<std::size_t>& upper, Pos&& pos,
                   Emit&& emit) {
    std::size_t i = 0, j = 0;
    const std::size_t p = lower.size() - 1, q = upper.size() - 1;
    while (i < p || j < q) {
        bool advance_lower;
        if (i == p) advance_lower = false;
        else if (j == q) advance_lower = true;
        else advance_lower = norm2(pos(lower[i + 1]) - pos(upper[j])) <= norm2(pos(lower[i]) - pos(upper[j + 1]));
        if (advance_lower) {
            emit(lower[i], lower[i + 1], upper[j]);
            ++i;
        } else {
            emit(lower[i], upper[j + 1], upper[j]);
            ++j;
        }
    }
}

struct CrossLayout {
    std::size_t north = 0, south = 0;
    Vec3 axis{};
    std::array<std::size_t, 4> arcs{};        // sorted by longitude about the axis
    std::array<int, 4> side{};                // +1 first curve, -1 second curve, per sorted slot
    std::array<Vec3, 2> offset_dir{};         // curve displacement directions
    std::array<PhaseLabel, 2> strip_phases{}; // regions separated by the strip, ascending
    Vec3 strip_normal_hint{};                 // points toward strip_phases[1]

    [[nodiscard]] std::size_t slot_of(std::size_t arc) const {
        return static_cast<std::size_t>(std::find(arcs.begin(), arcs.end(), arc) - arcs.begin());
    }
    [[nodiscard]] int side_of(std::size_t arc) const { return side[slot_of(arc)]; }
    [[nodiscard]] const Vec3& dir(int s) const { return offset_dir[s > 0 ? 0 : 1]; }
};

inline CrossLayout cross_layout(const ConeSpec& spec, const std::vector<ArcGeometry>& geo, bool variant_b) {
    std::vector<std::size_t> true_nodes;
    for (std::size_t i = 0; i < spec.nodes.size(); ++i)
        if (!spec.nodes[i].helper) true_nodes.push_back(i);
    if (true_nodes.size() != 2) throw TemplateMismatch("cross-resolved needs exactly two crossing nodes");
    CrossLayout L;
    L.north = true_nodes[0];
    L.south = true_nodes[1];
    L.axis = normalized(spec.nodes[L.north].direction);
    if (dot(L.axis, normalized(spec.nodes[L.south].direction)) > -1.0 + 1e-9)
        throw TemplateMismatch("cross-resolved needs antipodal crossing nodes");
    if (spec.arcs.size() != 4) throw TemplateMismatch("cross-resolved needs exactly four arcs");

    std::vector<std::pair<double, std::size_t>> by_longitude;
    const Vec3 e1 = any_orthogonal(L.axis);
    const Vec3 e2 = cross(L.axis, e1);
    for (std::size_t k = 0; k < spec.arcs.size(); ++k) {
        const ConeArc& arc = spec.arcs[k];
        const bool ns = (arc.a == L.north && arc.b == L.south) || (arc.a == L.south && arc.b == L.north);
        if (!ns) throw TemplateMismatch("cross-resolved needs every arc to join the two crossing nodes");
        const Vec3 mid = geo[k].point(0.5);
        by_longitude.emplace_back(std::atan2(dot(mid, e2), dot(mid, e1)), k);
    }
    std::sort(by_longitude.begin(), by_longitude.end());
    std::array<Vec3, 4> u{};
    for (std::size_t s = 0; s < 4; ++s) {
        L.arcs[s] = by_longitude[s].second;
        u[s] = normalized(reject(geo[L.arcs[s]].point(0.5), L.axis));
    }
    auto region_between = [&](std::size_t s) {
        const ConeArc& x = spec.arcs[L.arcs[s]];
        const ConeArc& y = spec.arcs[L.arcs[(s + 1) % 4]];
        for (PhaseLabel p : {x.left, x.right})
            if (p == y.left || p == y.right) return p;
        throw TemplateMismatch("adjacent cross arcs share no region");
    };
    const std::size_t first = variant_b ? 1 : 0;
    for (std::size_t s = 0; s < 4; ++s) L.side[(first + s) % 4] = s < 2 ? +1 : -1;
    L.offset_dir[0] = normalized(u[first] + u[(first + 1) % 4]);
    L.offset_dir[1] = normalized(u[(first + 2) % 4] + u[(first + 3) % 4]);
    // The strip separates the two regions not enclosed by either pair.
    const std::size_t sa = (first + 1) % 4;
    const std::size_t sb = (first + 3) % 4;
    PhaseLabel ra = region_between(sa);
    PhaseLabel rb = region_between(sb);
    Vec3 da = normalized(u[sa] + u[(sa + 1) % 4]);
    Vec3 db = normalized(u[sb] + u[(sb + 1) % 4]);
    if (rb < ra) {
        std::swap(ra, rb);
        std::swap(da, db);
    }
    L.strip_phases = {ra, rb};
    L.strip_normal_hint = db - da;
    return L;
}

inline void check_template_fit(const TopologyTemplate& tmpl, const ConeSpec& spec, const ConeValidation& cv) {
    std::size_t true_nodes = 0;
    for (const ConeNode& n : spec.nodes) true_nodes += n.helper ? 0 : 1;
    auto need = [&](bool cond, const std::string& what) {
        if (!cond) throw TemplateMismatch(tmpl.name + ": " + what);
    };
    need(!spec.arcs.empty(), "spec has no arcs");
    switch (tmpl.kind) {
        case TemplateKind::flat_sheet: {
            need(true_nodes == 0, "cone must be a single great circle (no junction nodes)");
            const Vec3 n0 = arc_geometry(spec, spec.arcs.front()).normal;
            for (const ConeArc& arc : spec.arcs)
                need(std::abs(std::abs(dot(arc_geometry(spec, arc).normal, n0)) - 1.0) < 1e-9,
                     "arcs must lie on one great circle");
            break;
        }
        case TemplateKind::y_sheet:
            need(true_nodes == 2 && spec.arcs.size() == 3, "cone must have two junction nodes and three arcs");
            need(cv.regions.size() == 3, "cone must have three regions");
            break;
        case TemplateKind::tetra_cone:
            need(true_nodes == 4 && spec.arcs.size() == 6, "cone must have four junction nodes and six arcs");
            need(cv.regions.size() == 4, "cone must have four regions");
            break;
        case TemplateKind::cross_resolved_a:
        case TemplateKind::cross_resolved_b:
            need(true_nodes == 2 && spec.arcs.size() == 4, "cone must have two 4-valent crossing nodes");
            break;
        case TemplateKind::cone_verbatim:
            break;
    }
}

}  // namespace detail

/// Builds the template mesh on the given ring radii (r_0 = 0, r_N = R).
inline TemplateMesh instantiate_on_rings(const TopologyTemplate& tmpl, const ConeSpec& spec,
                                         const std::vector<double>& radii, double h,
                                         const InstantiateOptions& options = {}) {
    if (radii.size() < 2 || radii.front() != 0.0) throw InvalidArgument("ring radii must start at 0");
    if (!(h > 0.0)) throw InvalidArgument("edge length must be > 0");
    const ConeValidation cv = validate_cone(spec, options.tol_deg);
    if (!cv.ok()) {
        bool only_nonregular = true;
        for (const Violation& v : cv.outcome.violations)
            if (v.kind != cone_violation::valence && v.kind != cone_violation::angle) only_nonregular = false;
        if (!(options.allow_nonregular && only_nonregular))
            throw TemplateMismatch("cone spec invalid: " + cv.outcome.violations.front().kind + " (" +
                                   cv.outcome.violations.front().message + ")");
    }
    detail::check_template_fit(tmpl, spec, cv);

    std::vector<ArcGeometry> geo;
    for (const ConeArc& arc : spec.arcs) geo.push_back(arc_geometry(spec, arc));

    const bool lens = tmpl.kind == TemplateKind::cross_resolved_a || tmpl.kind == TemplateKind::cross_resolved_b;
    detail::CrossLayout layout;
    if (lens) layout = detail::cross_layout(spec, geo, tmpl.kind == TemplateKind::cross_resolved_b);

    const std::size_t nring = radii.size() - 1;
    const double radius = radii.back();
    const double half_width = 0.5 * (options.strip_width > 0.0 ? options.strip_width : 0.3 * radius);

    TemplateMesh out;
    out.ring_radii = radii;
    SurfaceComplex& c = out.complex;
    c.phase_count = spec.region_count;
    c.truncation_radius = radius;
    std::map<VertexKey, std::size_t> index;
    std::vector<Vec3> rest;  // undeformed cone position; drives diagonals and orientation
    auto add_vertex = [&](const VertexKey& key, const Vec3& p, const Vec3& at_rest, bool boundary) {
        index.emplace(key, c.vertices.size());
        c.vertices.push_back(p);
        rest.push_back(at_rest);
        c.flags.push_back(boundary ? VertexFlag::sphere_boundary : VertexFlag::interior);
        out.keys.push_back(key);
    };
    auto vid = [&](const VertexKey& key) {
        auto it = index.find(key);
        if (it == index.end()) throw Error("template vertex missing");
        return it->second;
    };

    auto ring_segments = [&](std::size_t arc, std::size_t k) {
        return static_cast<std::size_t>(std::max(2.0, std::ceil(geo[arc].angle * radii[k] / h - 1e-9)));
    };
    auto width_at = [&](double z) { return half_width * std::exp(-z * z / 4.0); };
    auto is_axis_node = [&](std::size_t node) { return lens && (node == layout.north || node == layout.south); };
    std::vector<bool> node_used(spec.nodes.size(), false);
    for (const ConeArc& arc : spec.arcs) node_used[arc.a] = node_used[arc.b] = true;
    const auto ik = [](std::size_t k) { return static_cast<std::int64_t>(k); };

    if (!lens) add_vertex({VertexKey::center, 0, 0, 0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, false);
    for (std::size_t k = 0; k <= nring; ++k) {
        const bool outer = k == nring;
        if (lens && !outer) {
            for (int sign : {+1, -1}) {
                if (k == 0 && sign < 0) break;
                const std::int64_t row = sign * ik(k);
                const double z = sign * radii[k];
                const Vec3 on_axis = z * layout.axis;
                for (int side : {+1, -1})
                    add_vertex({VertexKey::curve, side, row, 0}, on_axis + width_at(z) * layout.dir(side), on_axis,
                               false);
                const Vec3 p1 = on_axis + width_at(z) * layout.dir(+1);
                const Vec3 p2 = on_axis + width_at(z) * layout.dir(-1);
                const auto m = static_cast<std::size_t>(std::max(1.0, std::ceil(distance(p1, p2) / h - 1e-9)));
                for (std::size_t col = 1; col < m; ++col) {
                    const double t = static_cast<double>(col) / static_cast<double>(m);
                    const Vec3 p = (1.0 - t) * p1 + t * p2;
                    add_vertex({VertexKey::strip, row, ik(col), 0}, p, p, false);
                }
            }
        }
        if (k == 0) continue;
        for (std::size_t node = 0; node < spec.nodes.size(); ++node) {
            if (!node_used[node] || (is_axis_node(node) && !outer)) continue;
            const Vec3 p = radii[k] * normalized(spec.nodes[node].direction);
            add_vertex({VertexKey::ray, ik(node), ik(k), 0}, p, p, outer);
        }
        for (std::size_t arc = 0; arc < spec.arcs.size(); ++arc) {
            const std::size_t n = ring_segments(arc, k);
            for (std::size_t i = 1; i < n; ++i) {
                const Vec3 p = radii[k] * geo[arc].point(static_cast<double>(i) / static_cast<double>(n));
                add_vertex({VertexKey::arc_point, ik(arc), ik(k), ik(i)}, p, p, outer);
            }
        }
    }

    // Vertex standing for `node` at ring k on the sheet of `arc`.
    auto node_vertex = [&](std::size_t arc, std::size_t node, std::size_t k) -> std::size_t {
        if (!lens) return k == 0 ? vid({VertexKey::center, 0, 0, 0}) : vid({VertexKey::ray, ik(node), ik(k), 0});
        if (k == nring) return vid({VertexKey::ray, ik(node), ik(k), 0});
        const std::int64_t row = node == layout.north ? ik(k) : -ik(k);
        return vid({VertexKey::curve, layout.side_of(arc), row, 0});
    };
    auto ring_chain = [&](std::size_t arc, std::size_t k) {
        const ConeArc& a = spec.arcs[arc];
        std::vector<std::size_t> chain{node_vertex(arc, a.a, k)};
        if (k == 0) return chain;
        const std::size_t n = ring_segments(arc, k);
        for (std::size_t i = 1; i < n; ++i) chain.push_back(vid({VertexKey::arc_point, ik(arc), ik(k), ik(i)}));
        chain.push_back(node_vertex(arc, a.b, k));
        return chain;
    };
    auto rest_pos = [&](std::size_t v) { return rest[v]; };
    // Face normal points toward `toward_b` when measured on the rest geometry.
    auto emit = [&](std::size_t x, std::size_t y, std::size_t z, PhaseLabel p, PhaseLabel q, const Vec3& toward_q) {
        FaceRecord f;
        f.a = std::min(p, q);
        f.b = std::max(p, q);
        const Vec3 want = f.b == q ? toward_q : -toward_q;
        f.v = {x, y, z};
        if (dot(cross(rest[y] - rest[x], rest[z] - rest[x]), want) < 0.0) f.v = {x, z, y};
        c.faces.push_back(f);
    };

    for (std::size_t k = 1; k <= nring; ++k) {
        for (std::size_t arc = 0; arc < spec.arcs.size(); ++arc) {
            const ConeArc& a = spec.arcs[arc];
            const Vec3 toward_right = -geo[arc].normal;
            detail::stitch_chains(ring_chain(arc, k - 1), ring_chain(arc, k), rest_pos,
                                  [&](std::size_t x, std::size_t y, std::size_t z) {
                                      emit(x, y, z, a.left, a.right, toward_right);
                                  });
        }
    }

    if (lens) {
        // Strip rows -N..N; rows +-N collapse to the poles on the sphere.
        auto row = [&](std::int64_t j) {
            const auto k = static_cast<std::size_t>(std::llabs(j));
            if (k == nring) return std::vector<std::size_t>{vid({VertexKey::ray, ik(j > 0 ? layout.north : layout.south), ik(k), 0})};
            std::vector<std::size_t> chain{vid({VertexKey::curve, +1, j, 0})};
            for (std::int64_t col = 1;; ++col) {
                auto it = index.find({VertexKey::strip, j, col, 0});
                if (it == index.end()) break;
                chain.push_back(it->second);
            }
            chain.push_back(vid({VertexKey::curve, -1, j, 0}));
            return chain;
        };
        const Vec3 strip_normal = normalized(cross(layout.axis, layout.dir(+1) - layout.dir(-1)));
        const Vec3 toward_b = dot(strip_normal, layout.strip_normal_hint) >= 0.0 ? strip_normal : -strip_normal;
        auto actual = [&](std::size_t v) { return c.vertices[v]; };
        const auto n = ik(nring);
        for (std::int64_t j = -n; j < n; ++j) {
            detail::stitch_chains(row(j), row(j + 1), actual, [&](std::size_t x, std::size_t y, std::size_t z) {
                FaceRecord f;
                f.a = layout.strip_phases[0];
                f.b = layout.strip_phases[1];
                f.v = {x, y, z};
                const Vec3& P = c.vertices[x];
                if (dot(cross(c.vertices[y] - P, c.vertices[z] - P), toward_b) < 0.0) f.v = {x, z, y};
                c.faces.push_back(f);
            });
        }

        // Bend each sheet toward its triple curve near the axis.
        for (std::size_t v = 0; v < c.vertices.size(); ++v) {
            const VertexKey& key = out.keys[v];
            if (key.kind != VertexKey::arc_point || c.is_boundary(v)) continue;
            const Vec3& p = c.vertices[v];
            const double z = dot(p, layout.axis);
            const double rho = norm(reject(p, layout.axis));
            const double beta = std::exp(-rho * rho / 2.0);
            c.vertices[v] = p + (beta * width_at(z)) * layout.dir(layout.side_of(static_cast<std::size_t>(key.a)));
        }
    }
    return out;
}

/// Template mesh spanning gamma^R with ring spacing <= h.
inline SurfaceComplex instantiate(const TopologyTemplate& tmpl, const ConeSpec& spec, double radius, double h,
                                  const InstantiateOptions& options = {}) {
    if (!(radius > 0.0)) throw InvalidArgument("radius must be > 0");
    return instantiate_on_rings(tmpl, spec, uniform_rings(radius, h), h, options).complex;
}

// ---------------------------------------------------------------------------
// Reference cones
// ---------------------------------------------------------------------------

namespace cones {

/// One great circle (the plane z = 0) split by two helper nodes.
inline ConeSpec flat() {
    ConeSpec s;
    s.region_count = 2;
    s.nodes = {{{1.0, 0.0, 0.0}, true}, {{-1.0, 0.0, 0.0}, true}};
    // Upward normal on both arcs: left = phase 2 (z > 0).
    s.arcs = {{0, 1, PhaseLabel{2}, PhaseLabel{1}, Vec3{0.0, 1.0, 0.0}},
              {1, 0, PhaseLabel{2}, PhaseLabel{1}, Vec3{0.0, -1.0, 0.0}}};
    return s;
}

/// Three half great circles from the north to the south pole at longitudes
/// 0, 120 and 240 degrees.
inline ConeSpec y_cone() {
    ConeSpec s;
    s.region_count = 3;
    s.nodes = {{{0.0, 0.0, 1.0}, false}, {{0.0, 0.0, -1.0}, false}};
    for (std::size_t i = 0; i < 3; ++i) {
        const double lon = 2.0 * std::numbers::pi * static_cast<double>(i) / 3.0;
        const Vec3 via{std::cos(lon), std::sin(lon), 0.0};
        // Region i+1 spans longitudes [lon_i, lon_{i+1}].
        const auto before = static_cast<std::uint32_t>(i == 0 ? 3 : i);
        const auto after = static_cast<std::uint32_t>(i + 1);
        // Travelling north -> south, the normal points toward increasing longitude.
        s.arcs.push_back({0, 1, PhaseLabel{after}, PhaseLabel{before}, via});
    }
    return s;
}

/// Cone over the regular tetrahedral network: 4 nodes, 6 arcs, 4 regions.
inline ConeSpec tetra_cone() {
    ConeSpec s;
    s.region_count = 4;
    const double k = 1.0 / std::sqrt(3.0);
    const std::array<Vec3, 4> v = {Vec3{k, k, k}, Vec3{k, -k, -k}, Vec3{-k, k, -k}, Vec3{-k, -k, k}};
    for (const Vec3& p : v) s.nodes.push_back({p, false});
    // Region r (1-based) is the spherical triangle opposite node r-1, i.e. around -v[r-1].
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = i + 1; j < 4; ++j) {
            std::array<std::size_t, 2> others{};
            std::size_t m = 0;
            for (std::size_t t = 0; t < 4; ++t)
                if (t != i && t != j) others[m++] = t;
            const Vec3 n = normalized(cross(v[i], v[j]));
            // The region opposite node t lies around -v[t].
            const bool first_left = dot(-v[others[0]], n) > 0.0;
            const auto r0 = static_cast<std::uint32_t>(others[0] + 1);
            const auto r1 = static_cast<std::uint32_t>(others[1] + 1);
            s.arcs.push_back({i, j, PhaseLabel{first_left ? r0 : r1}, PhaseLabel{first_left ? r1 : r0}, std::nullopt});
        }
    }
    return s;
}

/// Two orthogonal great circles (planes x = 0 and y = 0) crossing at the poles.
inline ConeSpec cross_cone() {
    ConeSpec s;
    s.region_count = 4;
    s.nodes = {{{0.0, 0.0, 1.0}, false}, {{0.0, 0.0, -1.0}, false}};
    for (std::size_t i = 0; i < 4; ++i) {
        const double lon = std::numbers::pi * static_cast<double>(i) / 2.0;
        const Vec3 via{std::cos(lon), std::sin(lon), 0.0};
        const auto before = static_cast<std::uint32_t>(i == 0 ? 4 : i);
        const auto after = static_cast<std::uint32_t>(i + 1);
        s.arcs.push_back({0, 1, PhaseLabel{after}, PhaseLabel{before}, via});
    }
    return s;
}

}  // namespace cones

}  // namespace expandernet
