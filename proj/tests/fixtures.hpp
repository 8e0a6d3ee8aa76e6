#pragma once

// Small meshes built directly from coordinates, independent of the
// template generators.

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <vector>

#include "expandernet/expandernet.hpp"

namespace fixtures {

using namespace expandernet;

/// Flips faces whose normal disagrees with want(centroid).
inline void orient(SurfaceComplex& c, const std::function<Vec3(const Vec3&)>& want) {
    for (FaceRecord& f : c.faces)
        if (dot(face_area_vector(c, f), want(face_centroid(c, f))) < 0.0) std::swap(f.v[1], f.v[2]);
}

/// Polar disk of radius R in the z = 0 plane, phases (1, 2), normal +z, rim
/// on the truncation sphere. Ring i has 6 i vertices.
inline SurfaceComplex disk(double R, int rings) {
    SurfaceComplex c;
    c.phase_count = 2;
    c.truncation_radius = R;
    c.vertices.push_back({0, 0, 0});
    c.flags.push_back(VertexFlag::interior);
    std::vector<std::vector<std::size_t>> ring(rings + 1);
    ring[0] = {0};
    for (int i = 1; i <= rings; ++i) {
        const int m = 6 * i;
        for (int j = 0; j < m; ++j) {
            const double th = 2.0 * std::numbers::pi * j / m;
            const double r = R * i / rings;
            c.vertices.push_back({r * std::cos(th), r * std::sin(th), 0.0});
            c.flags.push_back(i == rings ? VertexFlag::sphere_boundary : VertexFlag::interior);
            ring[i].push_back(c.vertices.size() - 1);
        }
    }
    auto emit = [&](std::size_t a, std::size_t b, std::size_t d) {
        c.faces.push_back({{a, b, d}, PhaseLabel{1}, PhaseLabel{2}});
    };
    for (int j = 0; j < 6; ++j) emit(0, ring[1][j], ring[1][(j + 1) % 6]);
    for (int i = 2; i <= rings; ++i) {
        const auto& in = ring[i - 1];
        const auto& out = ring[i];
        const int m = 6 * i, n = 6 * (i - 1);
        int a = 0, b = 0;
        // merge by angle
        while (a < n || b < m) {
            const double ta = 2.0 * std::numbers::pi * (a + 1) / n;
            const double tb = 2.0 * std::numbers::pi * (b + 1) / m;
            if (b < m && (a == n || tb <= ta)) {
                emit(in[a % n], out[b], out[(b + 1) % m]);
                ++b;
            } else {
                emit(in[a % n], out[b % m], in[(a + 1) % n]);
                ++a;
            }
        }
    }
    orient(c, [](const Vec3&) { return Vec3{0, 0, 1}; });
    return c;
}

/// Three half-disks of radius R on the half-planes at the given longitudes
/// (degrees, increasing), meeting along the z-axis diameter. Region j lies
/// between half-planes j-1 and j (cyclically), phases 1..3.
inline SurfaceComplex y_config(double R, int rings, std::array<double, 3> lon_deg = {0.0, 120.0, 240.0}) {
    SurfaceComplex c;
    c.phase_count = 3;
    c.truncation_radius = R;
    auto add = [&](const Vec3& p, bool rim) {
        c.vertices.push_back(p);
        c.flags.push_back(rim ? VertexFlag::sphere_boundary : VertexFlag::interior);
        return c.vertices.size() - 1;
    };
    const std::size_t centre = add({0, 0, 0}, false);
    std::vector<std::size_t> north(rings + 1, centre), south(rings + 1, centre);
    for (int i = 1; i <= rings; ++i) {
        north[i] = add({0, 0, R * i / rings}, i == rings);
        south[i] = add({0, 0, -R * i / rings}, i == rings);
    }
    for (int k = 0; k < 3; ++k) {
        const double th = rad(lon_deg[k]);
        const Vec3 d{std::cos(th), std::sin(th), 0.0};
        const Vec3 e_theta{-std::sin(th), std::cos(th), 0.0};
        // half-plane k separates region k (before) from region k+1 (after)
        const std::uint32_t before = k == 0 ? 3 : static_cast<std::uint32_t>(k);
        const std::uint32_t after = static_cast<std::uint32_t>(k + 1);
        const PhaseLabel a{std::min(before, after)}, b{std::max(before, after)};
        const Vec3 want = before < after ? e_theta : -e_theta;
        std::vector<std::size_t> prev = {centre};
        for (int i = 1; i <= rings; ++i) {
            const int m = 2 * i;  // segments over phi in [0, pi]
            std::vector<std::size_t> cur;
            for (int j = 0; j <= m; ++j) {
                if (j == 0) { cur.push_back(north[i]); continue; }
                if (j == m) { cur.push_back(south[i]); continue; }
                const double phi = std::numbers::pi * j / m;
                const double r = R * i / rings;
                cur.push_back(add(r * (std::cos(phi) * Vec3{0, 0, 1} + std::sin(phi) * d), i == rings));
            }
            const std::size_t first = c.faces.size();
            if (i == 1) {
                for (int j = 0; j < m; ++j) c.faces.push_back({{centre, cur[j], cur[j + 1]}, a, b});
            } else {
                const int n = 2 * (i - 1);
                int p = 0, q = 0;
                while (p < n || q < m) {
                    const double tp = static_cast<double>(p + 1) / n, tq = static_cast<double>(q + 1) / m;
                    if (q < m && (p == n || tq <= tp)) {
                        c.faces.push_back({{prev[p], cur[q], cur[q + 1]}, a, b});
                        ++q;
                    } else {
                        c.faces.push_back({{prev[p], cur[q], prev[p + 1]}, a, b});
                        ++p;
                    }
                }
            }
            for (std::size_t f = first; f < c.faces.size(); ++f)
                if (dot(face_area_vector(c, c.faces[f]), want) < 0.0) std::swap(c.faces[f].v[1], c.faces[f].v[2]);
            prev = std::move(cur);
        }
    }
    return c;
}

/// Icosphere of radius r, outward normals, phases (1, 2), no boundary.
inline SurfaceComplex sphere(double r, int level) {
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
            if (auto it = mid.find(key); it != mid.end()) return it->second;
            pts.push_back(normalized(pts[a] + pts[b]));
            mid.emplace(key, pts.size() - 1);
            return pts.size() - 1;
        };
        std::vector<std::array<std::size_t, 3>> next;
        for (const auto& t : tris) {
            const std::size_t ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({t[1], bc, ab});
            next.push_back({t[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        tris = std::move(next);
    }
    SurfaceComplex c;
    c.phase_count = 2;
    c.truncation_radius = 10.0 * r;
    for (const Vec3& p : pts) {
        c.vertices.push_back(r * p);
        c.flags.push_back(VertexFlag::interior);
    }
    for (const auto& t : tris) c.faces.push_back({{t[0], t[1], t[2]}, PhaseLabel{1}, PhaseLabel{2}});
    orient(c, [](const Vec3& x) { return x; });
    return c;
}

/// Open cylinder of radius r about the z-axis, |z| <= half_length, outward normals.
inline SurfaceComplex cylinder(double r, double half_length, int around, int along) {
    SurfaceComplex c;
    c.phase_count = 2;
    c.truncation_radius = 100.0;
    for (int i = 0; i <= along; ++i) {
        for (int j = 0; j < around; ++j) {
            const double th = 2.0 * std::numbers::pi * (j + 0.5 * (i % 2)) / around;
            c.vertices.push_back({r * std::cos(th), r * std::sin(th), -half_length + 2.0 * half_length * i / along});
            c.flags.push_back(VertexFlag::interior);
        }
    }
    auto id = [&](int i, int j) { return static_cast<std::size_t>(i * around + ((j % around) + around) % around); };
    for (int i = 0; i < along; ++i) {
        for (int j = 0; j < around; ++j) {
            if (i % 2 == 0) {
                c.faces.push_back({{id(i, j), id(i, j + 1), id(i + 1, j)}, PhaseLabel{1}, PhaseLabel{2}});
                c.faces.push_back({{id(i, j + 1), id(i + 1, j + 1), id(i + 1, j)}, PhaseLabel{1}, PhaseLabel{2}});
            } else {
                c.faces.push_back({{id(i, j), id(i + 1, j + 1), id(i + 1, j)}, PhaseLabel{1}, PhaseLabel{2}});
                c.faces.push_back({{id(i, j), id(i, j + 1), id(i + 1, j + 1)}, PhaseLabel{1}, PhaseLabel{2}});
            }
        }
    }
    orient(c, [](const Vec3& x) { return Vec3{x[0], x[1], 0.0}; });
    return c;
}

inline Mat3 scaling(double s) { return Mat3{{Vec3{s, 0, 0}, Vec3{0, s, 0}, Vec3{0, 0, s}}}; }

inline SurfaceComplex transformed(SurfaceComplex c, const Mat3& m, const Vec3& shift = {0, 0, 0}) {
    for (Vec3& p : c.vertices) p = m * p + shift;
    return c;
}

/// Unit vector uniformly distributed on the sphere.
inline Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    return normalized(Vec3{g(rng), g(rng), g(rng)});
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi);
    return rotation_matrix(random_unit(rng), ang(rng));
}

/// nx-by-ny grid patch of spacing dx, randomly displaced in 3D by up to
/// jitter * dx and shifted by `centre`. Not oriented or validated.
inline SurfaceComplex random_patch(std::mt19937_64& rng, std::size_t nx, std::size_t ny, double dx, double jitter,
                                   const Vec3& centre) {
    std::uniform_real_distribution<double> u(-jitter * dx, jitter * dx);
    SurfaceComplex c;
    c.phase_count = 2;
    c.truncation_radius = 100.0;
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            c.vertices.push_back(centre + Vec3{dx * static_cast<double>(i), dx * static_cast<double>(j), 0.0} +
                                 Vec3{u(rng), u(rng), u(rng)});
            c.flags.push_back(VertexFlag::interior);
        }
    for (std::size_t j = 0; j + 1 < ny; ++j)
        for (std::size_t i = 0; i + 1 < nx; ++i) {
            const std::size_t a = j * nx + i, b = a + 1, d = a + nx, e = d + 1;
            c.faces.push_back({{a, b, e}, PhaseLabel{1}, PhaseLabel{2}});
            c.faces.push_back({{a, e, d}, PhaseLabel{1}, PhaseLabel{2}});
        }
    return c;
}

}  // namespace fixtures
