#pragma once

// Weighted area E = sum_f A_f exp(|c_f|^2 / 4), its exact gradient, discrete
// mean curvature, the expander residual H - <x, n>/2, and the Jacobi operator
// on graphical ends.
//
// Curvature convention: H = H_vec . n, where H_vec is the mean curvature
// vector (Laplace-Beltrami of the position) and n points from phase a to
// phase b. H is the sum of the principal curvatures and is positive when the
// surface bends toward n. The unit sphere with outward n has H = -2; with
// inward n it has H = +2. With this sign the expander equation reads
// H = <x, n> / 2 for either orientation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "cone_model.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "surface_complex.hpp"
#include "vec3.hpp"

namespace expandernet {

struct EnergyOptions {
    /// Replaces the weight by 1 (plain area); used to check scaling.
    bool unit_weight = false;
    /// Exponent offset; defaults to max_f |c_f|^2 / 4.
    std::optional<double> log_scale;
};

/// Values are stored as exp(-log_scale) times the true weighted area.
struct WeightedEnergy {
    double total = 0.0;
    std::vector<double> per_face;
    double log_scale = 0.0;

    /// log of the unshifted total.
    [[nodiscard]] double log_total() const { return std::log(total) + log_scale; }
    /// Unshifted total; overflows to inf for very large radii.
    [[nodiscard]] double value() const { return total * std::exp(log_scale); }
};

struct WeightedGradient {
    std::vector<Vec3> per_vertex;  // scaled by exp(-log_scale) like the energy
    double log_scale = 0.0;
};

inline double max_log_weight(const SurfaceComplex& c) {
    double s = 0.0;
    for (const FaceRecord& f : c.faces) s = std::max(s, norm2(face_centroid(c, f)) / 4.0);
    return s;
}

namespace detail {

inline void check_face_areas(const SurfaceComplex& c, std::span<const double> areas) {
    const double eps = area_epsilon(c);
    for (std::size_t f = 0; f < areas.size(); ++f) {
        if (!(areas[f] >= eps))
            throw DegenerateFace("face " + std::to_string(f + 1) + " has area " + std::to_string(areas[f]));
    }
}

}  // namespace detail

inline WeightedEnergy weighted_area(const SurfaceComplex& c, const EnergyOptions& options = {}) {
    WeightedEnergy e;
    e.log_scale = options.unit_weight ? 0.0 : options.log_scale.value_or(max_log_weight(c));
    const std::size_t nf = c.faces.size();
    std::vector<double> areas(nf);
    e.per_face.resize(nf);
    parallel_for(nf, [&](std::size_t f) {
        const FaceRecord& face = c.faces[f];
        areas[f] = face_area(c, face);
        const double w = options.unit_weight ? 1.0 : std::exp(norm2(face_centroid(c, face)) / 4.0 - e.log_scale);
        e.per_face[f] = areas[f] * w;
    });
    detail::check_face_areas(c, areas);
    e.total = pairwise_sum(e.per_face);
    return e;
}

/// Exact gradient of weighted_area under the centroid rule:
/// d/dx_i [A w] = w (n x e_i) / 2 + A w c / 6, with e_i the edge opposite x_i.
inline WeightedGradient weighted_area_gradient(const SurfaceComplex& c, const EnergyOptions& options = {}) {
    WeightedGradient g;
    g.log_scale = options.unit_weight ? 0.0 : options.log_scale.value_or(max_log_weight(c));
    const std::size_t nf = c.faces.size();
    std::vector<std::array<Vec3, 3>> contrib(nf);
    std::vector<double> areas(nf);
    parallel_for(nf, [&](std::size_t f) {
        const FaceRecord& face = c.faces[f];
        const Vec3& p0 = c.vertices[face.v[0]];
        const Vec3& p1 = c.vertices[face.v[1]];
        const Vec3& p2 = c.vertices[face.v[2]];
        const Vec3 av = 0.5 * cross(p1 - p0, p2 - p0);
        const double area = norm(av);
        areas[f] = area;
        if (area == 0.0) return;
        const Vec3 n = av / area;
        const Vec3 centroid = (p0 + p1 + p2) / 3.0;
        const double w = options.unit_weight ? 1.0 : std::exp(norm2(centroid) / 4.0 - g.log_scale);
        const Vec3 wc = options.unit_weight ? Vec3{0.0, 0.0, 0.0} : (area * w / 6.0) * centroid;
        contrib[f][0] = (0.5 * w) * cross(n, p2 - p1) + wc;
        contrib[f][1] = (0.5 * w) * cross(n, p0 - p2) + wc;
        contrib[f][2] = (0.5 * w) * cross(n, p1 - p0) + wc;
    });
    detail::check_face_areas(c, areas);
    g.per_vertex.assign(c.vertices.size(), {0.0, 0.0, 0.0});
    for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t i = 0; i < 3; ++i) g.per_vertex[c.faces[f].v[i]] += contrib[f][i];
    return g;
}

// ---------------------------------------------------------------------------
// Vertex classes and curvature
// ---------------------------------------------------------------------------

/// Not on the sphere and every incident edge has exactly two faces.
inline bool is_interior_manifold(const SurfaceComplex& c, const Topology& topo, std::size_t v) {
    if (c.is_boundary(v)) return false;
    const auto edges = topo.edges_of_vertex(v);
    if (edges.empty()) return false;
    for (std::size_t e : edges)
        if (topo.edge_valence(e) != 2) return false;
    return true;
}

/// Area-weighted unit normal over the star of v (orientation a -> b).
inline Vec3 vertex_normal(const SurfaceComplex& c, const Topology& topo, std::size_t v) {
    Vec3 n{0.0, 0.0, 0.0};
    for (std::size_t f : topo.faces_of_vertex(v)) n += face_area_vector(c, c.faces[f]);
    return normalized(n);
}

struct CurvatureSample {
    Vec3 laplacian{};   // mean curvature vector H_vec
    Vec3 normal{};
    double mixed_area = 0.0;
    double H = 0.0;
};

inline CurvatureSample curvature_at(const SurfaceComplex& c, const Topology& topo, std::size_t v) {
    if (!is_interior_manifold(c, topo, v))
        throw NotManifoldVertex("vertex " + std::to_string(v + 1) + " is on a junction or the boundary");
    CurvatureSample s;
    Vec3 sum{0.0, 0.0, 0.0};
    Vec3 nsum{0.0, 0.0, 0.0};
    const Vec3& xi = c.vertices[v];
    for (std::size_t f : topo.faces_of_vertex(v)) {
        const FaceRecord& face = c.faces[f];
        std::size_t slot = 0;
        while (face.v[slot] != v) ++slot;
        const Vec3& xj = c.vertices[face.v[(slot + 1) % 3]];
        const Vec3& xk = c.vertices[face.v[(slot + 2) % 3]];
        const Vec3 eij = xj - xi, eik = xk - xi, ejk = xk - xj;
        const Vec3 av = 0.5 * cross(eij, eik);
        const double area2 = 2.0 * norm(av);
        nsum += av;
        if (area2 == 0.0) continue;
        // cot of the angles at j and k
        const double cot_j = dot(-eij, ejk) / area2;
        const double cot_k = dot(-eik, -ejk) / area2;
        sum += cot_k * eij + cot_j * eik;
        const double ang_i = dot(eij, eik), ang_j = dot(-eij, ejk), ang_k = dot(eik, ejk);
        if (ang_i < 0.0) s.mixed_area += 0.25 * area2;
        else if (ang_j < 0.0 || ang_k < 0.0) s.mixed_area += 0.125 * area2;
        else s.mixed_area += 0.125 * (cot_k * norm2(eij) + cot_j * norm2(eik));
    }
    s.normal = normalized(nsum);
    s.laplacian = sum / (2.0 * s.mixed_area);
    s.H = dot(s.laplacian, s.normal);
    return s;
}

inline double mean_curvature(const SurfaceComplex& c, const Topology& topo, std::size_t v) {
    return curvature_at(c, topo, v).H;
}

inline double mean_curvature(const SurfaceComplex& c, std::size_t v) {
    return mean_curvature(c, build_topology(c), v);
}

/// Graph distance (in edges) from the nearest boundary or non-manifold vertex;
/// max() where none is reachable.
inline std::vector<std::size_t> distance_to_special(const SurfaceComplex& c, const Topology& topo) {
    constexpr std::size_t inf = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> dist(c.vertices.size(), inf);
    std::queue<std::size_t> q;
    for (std::size_t v = 0; v < c.vertices.size(); ++v) {
        if (!is_interior_manifold(c, topo, v)) {
            dist[v] = 0;
            q.push(v);
        }
    }
    while (!q.empty()) {
        const std::size_t v = q.front();
        q.pop();
        for (std::size_t e : topo.edges_of_vertex(v)) {
            const std::size_t w = topo.other_end(e, v);
            if (dist[w] == inf) {
                dist[w] = dist[v] + 1;
                q.push(w);
            }
        }
    }
    return dist;
}

struct ExpanderResidualField {
    std::vector<double> per_vertex;  // NaN where masked
    std::vector<bool> mask;          // true = excluded
    double max_abs = 0.0;
    double rms = 0.0;
    std::size_t count = 0;
};

/// r = H - <x, n>/2 on vertices more than k_ring rings away from any junction
/// or boundary vertex.
inline ExpanderResidualField expander_residual(const SurfaceComplex& c, const Topology& topo,
                                               std::size_t k_ring = 2) {
    ExpanderResidualField r;
    const std::size_t nv = c.vertices.size();
    const std::vector<std::size_t> dist = distance_to_special(c, topo);
    r.per_vertex.assign(nv, std::numeric_limits<double>::quiet_NaN());
    r.mask.assign(nv, true);
    for (std::size_t v = 0; v < nv; ++v) r.mask[v] = dist[v] <= k_ring || topo.faces_of_vertex(v).empty();
    parallel_for(nv, [&](std::size_t v) {
        if (r.mask[v]) return;
        const CurvatureSample s = curvature_at(c, topo, v);
        r.per_vertex[v] = s.H - 0.5 * dot(c.vertices[v], s.normal);
    });
    double sq = 0.0;
    for (std::size_t v = 0; v < nv; ++v) {
        if (r.mask[v]) continue;
        r.max_abs = std::max(r.max_abs, std::abs(r.per_vertex[v]));
        sq += r.per_vertex[v] * r.per_vertex[v];
        ++r.count;
    }
    r.rms = r.count ? std::sqrt(sq / static_cast<double>(r.count)) : 0.0;
    return r;
}

inline ExpanderResidualField expander_residual(const SurfaceComplex& c, std::size_t k_ring = 2) {
    return expander_residual(c, build_topology(c), k_ring);
}

// ---------------------------------------------------------------------------
// Graphical ends and the Jacobi operator
// ---------------------------------------------------------------------------

/// Uniform node grid: node (i, j) sits at (x0 + i dx, y0 + j dx).
struct Grid2D {
    double x0 = 0.0;
    double y0 = 0.0;
    double dx = 1.0;
    std::size_t nx = 0;
    std::size_t ny = 0;

    [[nodiscard]] std::size_t size() const noexcept { return nx * ny; }
    [[nodiscard]] std::size_t index(std::size_t i, std::size_t j) const noexcept { return j * nx + i; }
    [[nodiscard]] double x(std::size_t i) const noexcept { return x0 + static_cast<double>(i) * dx; }
    [[nodiscard]] double y(std::size_t j) const noexcept { return y0 + static_cast<double>(j) * dx; }
};

/// Heights u over an asymptotic plane; NaN marks nodes outside the sampled
/// annular sector.
struct PlanarEndSample {
    Vec3 normal{};
    Vec3 e1{};
    Vec3 e2{};
    Grid2D grid;
    std::vector<double> u;
    double r0 = 0.0;
    double r1 = 0.0;
    double sup_u = 0.0;
    double sup_grad = 0.0;
    std::size_t sample_count = 0;
};

/// Lu = lap u + x . grad u / 2 - u / 2 by centered differences. Nodes on the
/// grid rim or next to a NaN come back as NaN.
inline std::vector<double> jacobi_apply(const Grid2D& grid, std::span<const double> u) {
    if (grid.nx < 3 || grid.ny < 3) throw GridTooSmall("Jacobi operator needs at least a 3x3 grid");
    if (u.size() != grid.size()) throw InvalidArgument("height array does not match the grid");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> out(grid.size(), nan);
    const double inv_h2 = 1.0 / (grid.dx * grid.dx);
    const double inv_2h = 0.5 / grid.dx;
    for (std::size_t j = 1; j + 1 < grid.ny; ++j) {
        for (std::size_t i = 1; i + 1 < grid.nx; ++i) {
            const double c = u[grid.index(i, j)];
            const double e = u[grid.index(i + 1, j)], w = u[grid.index(i - 1, j)];
            const double n = u[grid.index(i, j + 1)], s = u[grid.index(i, j - 1)];
            if (std::isnan(c) || std::isnan(e) || std::isnan(w) || std::isnan(n) || std::isnan(s)) continue;
            const double lap = ((e - c) + (w - c) + (n - c) + (s - c)) * inv_h2;
            const double drift = grid.x(i) * (e - w) * inv_2h + grid.y(j) * (n - s) * inv_2h;
            out[grid.index(i, j)] = lap + 0.5 * drift - 0.5 * c;
        }
    }
    return out;
}

inline std::vector<double> jacobi_apply(const PlanarEndSample& end, std::span<const double> u) {
    return jacobi_apply(end.grid, u);
}

struct EndFitOptions {
    /// Grid spacing; <= 0 selects (r1 - r0) / 20.
    double spacing = 0.0;
    /// Angular margin kept clear of the arc's end rays (radians).
    double angular_margin = 0.35;
};

namespace detail {

inline PlanarEndSample empty_end_grid(const ArcGeometry& g, double r0, double r1, const EndFitOptions& opt) {
    if (!(r1 > r0) || !(r0 >= 0.0)) throw InvalidArgument("end annulus needs 0 <= r0 < r1");
    PlanarEndSample end;
    end.normal = g.normal;
    end.e1 = g.start;
    end.e2 = cross(g.normal, g.start);
    end.r0 = r0;
    end.r1 = r1;
    const double dx = opt.spacing > 0.0 ? opt.spacing : (r1 - r0) / 20.0;
    const auto half = static_cast<std::size_t>(std::ceil(r1 / dx));
    end.grid = {-static_cast<double>(half) * dx, -static_cast<double>(half) * dx, dx, 2 * half + 1, 2 * half + 1};
    end.u.assign(end.grid.size(), std::numeric_limits<double>::quiet_NaN());
    return end;
}

inline bool in_end_domain(const ArcGeometry& g, const EndFitOptions& opt, double r0, double r1, double x,
                          double y) {
    const double r = std::hypot(x, y);
    if (r < r0 || r > r1) return false;
    double phi = std::atan2(y, x);
    if (phi < 0.0) phi += 2.0 * std::numbers::pi;
    return phi >= opt.angular_margin && phi <= g.angle - opt.angular_margin;
}

inline void finish_end(PlanarEndSample& end) {
    const Grid2D& gr = end.grid;
    end.sup_u = 0.0;
    end.sup_grad = 0.0;
    end.sample_count = 0;
    for (std::size_t j = 0; j < gr.ny; ++j) {
        for (std::size_t i = 0; i < gr.nx; ++i) {
            const double u = end.u[gr.index(i, j)];
            if (std::isnan(u)) continue;
            ++end.sample_count;
            end.sup_u = std::max(end.sup_u, std::abs(u));
            if (i == 0 || j == 0 || i + 1 == gr.nx || j + 1 == gr.ny) continue;
            const double e = end.u[gr.index(i + 1, j)], w = end.u[gr.index(i - 1, j)];
            const double n = end.u[gr.index(i, j + 1)], s = end.u[gr.index(i, j - 1)];
            if (std::isnan(e) || std::isnan(w) || std::isnan(n) || std::isnan(s)) continue;
            end.sup_grad = std::max(end.sup_grad, std::hypot(e - w, n - s) / (2.0 * gr.dx));
        }
    }
}

}  // namespace detail

/// Samples the sheet belonging to `arc` as a graph over the arc's plane, on
/// the annular sector r0 <= |x| <= r1 clear of the arc's end rays. Heights come
/// from casting rays along the plane normal against faces carrying the arc's
/// phase pair.
inline PlanarEndSample fit_planar_end(const SurfaceComplex& c, const ConeSpec& spec, std::size_t arc, double r0,
                                      double r1, const EndFitOptions& opt = {}) {
    if (arc >= spec.arcs.size()) throw InvalidArgument("arc index out of range");
    const ArcGeometry g = arc_geometry(spec, spec.arcs[arc]);
    PlanarEndSample end = detail::empty_end_grid(g, r0, r1, opt);
    const PhaseLabel pa = std::min(spec.arcs[arc].left, spec.arcs[arc].right);
    const PhaseLabel pb = std::max(spec.arcs[arc].left, spec.arcs[arc].right);

    struct Tri {
        std::array<double, 3> x, y, z;
    };
    std::vector<Tri> tris;
    for (const FaceRecord& f : c.faces) {
        if (f.a != pa || f.b != pb) continue;
        Tri t;
        for (std::size_t k = 0; k < 3; ++k) {
            const Vec3& p = c.vertices[f.v[k]];
            t.x[k] = dot(p, end.e1);
            t.y[k] = dot(p, end.e2);
            t.z[k] = dot(p, end.normal);
        }
        tris.push_back(t);
    }

    // Bin triangles over the grid's bounding square.
    const Grid2D& gr = end.grid;
    const double lo = gr.x0, span = static_cast<double>(gr.nx - 1) * gr.dx;
    const std::size_t nb = std::max<std::size_t>(1, std::min<std::size_t>(256, gr.nx / 2));
    const double cell = span / static_cast<double>(nb);
    auto bin = [&](double v) {
        const double t = std::floor((v - lo) / cell);
        return static_cast<std::size_t>(std::clamp(t, 0.0, static_cast<double>(nb - 1)));
    };
    std::vector<std::vector<std::size_t>> bins(nb * nb);
    for (std::size_t t = 0; t < tris.size(); ++t) {
        const auto [xmin, xmax] = std::minmax({tris[t].x[0], tris[t].x[1], tris[t].x[2]});
        const auto [ymin, ymax] = std::minmax({tris[t].y[0], tris[t].y[1], tris[t].y[2]});
        if (xmax < lo || ymax < lo || xmin > lo + span || ymin > lo + span) continue;
        for (std::size_t by = bin(ymin); by <= bin(ymax); ++by)
            for (std::size_t bx = bin(xmin); bx <= bin(xmax); ++bx) bins[by * nb + bx].push_back(t);
    }

    for (std::size_t j = 0; j < gr.ny; ++j) {
        for (std::size_t i = 0; i < gr.nx; ++i) {
            const double x = gr.x(i), y = gr.y(j);
            if (!detail::in_end_domain(g, opt, r0, r1, x, y)) continue;
            std::vector<double> hits;
            for (std::size_t t : bins[bin(y) * nb + bin(x)]) {
                const Tri& T = tris[t];
                const double d = (T.y[1] - T.y[2]) * (T.x[0] - T.x[2]) + (T.x[2] - T.x[1]) * (T.y[0] - T.y[2]);
                if (std::abs(d) < 1e-300) continue;
                const double l0 = ((T.y[1] - T.y[2]) * (x - T.x[2]) + (T.x[2] - T.x[1]) * (y - T.y[2])) / d;
                const double l1 = ((T.y[2] - T.y[0]) * (x - T.x[2]) + (T.x[0] - T.x[2]) * (y - T.y[2])) / d;
                const double l2 = 1.0 - l0 - l1;
                constexpr double tol = -1e-10;
                if (l0 < tol || l1 < tol || l2 < tol) continue;
                const double z = l0 * T.z[0] + l1 * T.z[1] + l2 * T.z[2];
                bool dup = false;
                for (double hz : hits) dup = dup || std::abs(hz - z) <= 1e-9 * (1.0 + std::abs(z));
                if (!dup) hits.push_back(z);
            }
            if (hits.size() != 1)
                throw NotGraphical("normal ray at (" + std::to_string(x) + ", " + std::to_string(y) + ") meets the sheet " +
                                   std::to_string(hits.size()) + " times");
            end.u[gr.index(i, j)] = hits.front();
        }
    }
    detail::finish_end(end);
    return end;
}

struct EndDecaySample {
    double inner_radius = 0.0;
    double sup_u = 0.0;
    double sup_grad = 0.0;
};

/// sup|u| over the annuli [r, r + width] for each inner radius r.
inline std::vector<EndDecaySample> end_decay(const SurfaceComplex& c, const ConeSpec& spec, std::size_t arc,
                                             std::span<const double> inner_radii, double width,
                                             const EndFitOptions& opt = {}) {
    std::vector<EndDecaySample> out;
    for (double r : inner_radii) {
        const PlanarEndSample end = fit_planar_end(c, spec, arc, r, r + width, opt);
        out.push_back({r, end.sup_u, end.sup_grad});
    }
    return out;
}

}  // namespace expandernet
