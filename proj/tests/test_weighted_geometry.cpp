#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fixtures.hpp"

using namespace expandernet;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

SurfaceComplex triangle(const Vec3& a, const Vec3& b, const Vec3& c) {
    SurfaceComplex s;
    s.phase_count = 2;
    s.truncation_radius = 100.0;
    s.vertices = {a, b, c};
    s.flags.assign(3, VertexFlag::interior);
    s.faces = {{{0, 1, 2}, PhaseLabel{1}, PhaseLabel{2}}};
    return s;
}

/// Central differences of the (shifted) weighted area, same log_scale throughout.
std::vector<Vec3> fd_gradient(SurfaceComplex c, double step, double log_scale) {
    EnergyOptions o;
    o.log_scale = log_scale;
    std::vector<Vec3> g(c.vertices.size());
    for (std::size_t v = 0; v < c.vertices.size(); ++v)
        for (std::size_t k = 0; k < 3; ++k) {
            const double keep = c.vertices[v][k];
            c.vertices[v][k] = keep + step;
            const double ep = weighted_area(c, o).total;
            c.vertices[v][k] = keep - step;
            const double em = weighted_area(c, o).total;
            c.vertices[v][k] = keep;
            g[v][k] = (ep - em) / (2.0 * step);
        }
    return g;
}

double relative_frobenius(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += norm2(a[i] - b[i]);
        den += norm2(b[i]);
    }
    return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("single triangle energy uses the centroid weight") {
    const SurfaceComplex t = triangle({0, 0, 0}, {1, 0, 0}, {0, 1, 0});
    const WeightedEnergy e = weighted_area(t);
    CHECK_THAT(e.log_scale, WithinAbs(1.0 / 18.0, 1e-15));
    CHECK_THAT(e.total, WithinRel(0.5 * std::exp(1.0 / 18.0 - e.log_scale), 1e-14));
    CHECK_THAT(e.value(), WithinRel(0.5 * std::exp(1.0 / 18.0), 1e-14));
    CHECK_THAT(e.log_total(), WithinRel(std::log(0.5) + 1.0 / 18.0, 1e-14));
}

TEST_CASE("shifted exponent keeps huge radii finite") {
    const SurfaceComplex t = triangle({60, 0, 0}, {61, 0, 0}, {60, 1, 0});
    const WeightedEnergy e = weighted_area(t);
    CHECK(std::isfinite(e.total));
    CHECK(e.log_scale > 900.0);
    CHECK(std::isfinite(e.log_total()));
}

TEST_CASE("degenerate faces are rejected") {
    const SurfaceComplex t = triangle({0, 0, 0}, {1, 0, 0}, {2, 0, 0});
    CHECK_THROWS_AS(weighted_area(t), DegenerateFace);
    CHECK_THROWS_AS(weighted_area_gradient(t), DegenerateFace);
}

TEST_CASE("meshes shrunk toward the origin approach Euclidean area") {
    SurfaceComplex c = fixtures::disk(1.0, 6);
    EnergyOptions plain;
    plain.unit_weight = true;
    for (double s : {1e-2, 1e-4}) {
        const SurfaceComplex small = fixtures::transformed(c, fixtures::scaling(s));
        const double area = weighted_area(small, plain).total;
        EnergyOptions unshifted;
        unshifted.log_scale = 0.0;
        CHECK_THAT(weighted_area(small, unshifted).total / area, WithinAbs(1.0, s * s));
    }
}

TEST_CASE("unit disk energy converges to the radial integral") {
    const double exact = 4.0 * std::numbers::pi * (std::exp(0.25) - 1.0);
    double prev_err = 0.0;
    for (int rings : {10, 20, 40}) {
        const SurfaceComplex c = fixtures::disk(1.0, rings);
        const double err = std::abs(weighted_area(c).value() - exact);
        CHECK(err / exact < 0.02);
        if (prev_err > 0.0) CHECK(std::log2(prev_err / err) > 1.9);
        prev_err = err;
    }
}

TEST_CASE("Euclidean part scales quadratically") {
    std::mt19937_64 rng(7);
    const SurfaceComplex c = fixtures::random_patch(rng, 5, 4, 0.3, 0.2, {0.2, -0.1, 0.4});
    EnergyOptions plain;
    plain.unit_weight = true;
    const double a = weighted_area(c, plain).total;
    for (double lambda : {0.5, 3.0, 10.0}) {
        const double b = weighted_area(fixtures::transformed(c, fixtures::scaling(lambda)), plain).total;
        CHECK_THAT(b, WithinRel(lambda * lambda * a, 1e-13));
    }
}

TEST_CASE("gradient matches central differences") {
    SECTION("single triangle") {
        const SurfaceComplex t = triangle({0, 0, 0}, {1, 0, 0}, {0, 1, 0});
        const WeightedGradient g = weighted_area_gradient(t);
        CHECK(relative_frobenius(g.per_vertex, fd_gradient(t, 1e-6, g.log_scale)) <= 1e-6);
    }
    SECTION("random perturbed patches") {
        std::mt19937_64 rng(20240611);
        std::uniform_real_distribution<double> off(-1.5, 1.5);
        for (int trial = 0; trial < 50; ++trial) {
            const SurfaceComplex c = fixtures::random_patch(rng, 6, 5, 0.25, 0.3, {off(rng), off(rng), off(rng)});
            const WeightedGradient g = weighted_area_gradient(c);
            const double err = relative_frobenius(g.per_vertex, fd_gradient(c, 1e-6, g.log_scale));
            INFO("trial " << trial);
            CHECK(err <= 1e-6);
        }
    }
    SECTION("unit weight gradient is the area gradient") {
        std::mt19937_64 rng(3);
        const SurfaceComplex c = fixtures::random_patch(rng, 4, 4, 0.5, 0.3, {1, 1, 1});
        EnergyOptions plain;
        plain.unit_weight = true;
        const WeightedGradient g = weighted_area_gradient(c, plain);
        SurfaceComplex d = c;
        std::vector<Vec3> fd(c.vertices.size());
        for (std::size_t v = 0; v < c.vertices.size(); ++v)
            for (std::size_t k = 0; k < 3; ++k) {
                d.vertices[v][k] = c.vertices[v][k] + 1e-6;
                const double ep = weighted_area(d, plain).total;
                d.vertices[v][k] = c.vertices[v][k] - 1e-6;
                const double em = weighted_area(d, plain).total;
                d.vertices[v][k] = c.vertices[v][k];
                fd[v][k] = (ep - em) / 2e-6;
            }
        CHECK(relative_frobenius(g.per_vertex, fd) <= 1e-6);
    }
}

TEST_CASE("equilateral triangle about the origin has equal radial gradients") {
    std::mt19937_64 rng(11);
    const Mat3 rot = fixtures::random_rotation(rng);
    const double d = 0.8;
    std::array<Vec3, 3> p;
    for (std::size_t i = 0; i < 3; ++i) {
        const double th = 2.0 * std::numbers::pi * static_cast<double>(i) / 3.0;
        p[i] = rot * Vec3{d * std::cos(th), d * std::sin(th), 0.0};
    }
    const WeightedGradient g = weighted_area_gradient(triangle(p[0], p[1], p[2]));
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(norm(cross(g.per_vertex[i], p[i])) <= 1e-14 * norm(g.per_vertex[i]) * d);
        CHECK(dot(g.per_vertex[i], p[i]) > 0.0);
        CHECK_THAT(norm(g.per_vertex[i]), WithinRel(norm(g.per_vertex[0]), 1e-13));
    }
}

TEST_CASE("flat disk: no normal gradient at interior vertices") {
    const SurfaceComplex c = fixtures::disk(4.0, 20);
    const WeightedGradient g = weighted_area_gradient(c);
    for (std::size_t v = 0; v < c.vertices.size(); ++v)
        if (!c.is_boundary(v)) CHECK(std::abs(g.per_vertex[v][2]) <= 1e-14);
    std::mt19937_64 rng(5);
    const Mat3 rot = fixtures::random_rotation(rng);
    const SurfaceComplex r = fixtures::transformed(c, rot);
    const WeightedGradient gr = weighted_area_gradient(r);
    const Vec3 n = rot * Vec3{0, 0, 1};
    double scale = 0.0;
    for (const Vec3& x : gr.per_vertex) scale = std::max(scale, norm(x));
    for (std::size_t v = 0; v < r.vertices.size(); ++v)
        if (!r.is_boundary(v)) CHECK(std::abs(dot(gr.per_vertex[v], n)) <= 1e-12 * scale);
}

TEST_CASE("mean curvature") {
    SECTION("flat mesh is zero") {
        const SurfaceComplex c = fixtures::disk(2.0, 8);
        const Topology t = build_topology(c);
        for (std::size_t v = 0; v < c.vertices.size(); ++v)
            if (!c.is_boundary(v)) CHECK(std::abs(mean_curvature(c, t, v)) <= 1e-10);
    }
    SECTION("unit sphere with outward normal is -2, error shrinking with h") {
        double prev = 0.0;
        for (int level : {2, 3, 4}) {
            const SurfaceComplex c = fixtures::sphere(1.0, level);
            const Topology t = build_topology(c);
            double worst = 0.0;
            for (std::size_t v = 0; v < c.vertices.size(); ++v) worst = std::max(worst, std::abs(mean_curvature(c, t, v) + 2.0));
            INFO("level " << level << " max error " << worst);
            CHECK(worst < 0.05);
            if (prev > 0.0) CHECK(worst <= prev);
            prev = worst;
        }
    }
    SECTION("flipping the orientation flips the sign") {
        SurfaceComplex c = fixtures::sphere(1.0, 3);
        for (FaceRecord& f : c.faces) std::swap(f.v[1], f.v[2]);
        CHECK_THAT(mean_curvature(c, 0), WithinAbs(2.0, 0.05));
    }
    SECTION("unit cylinder has |H| = 1, negative for the outward normal") {
        const SurfaceComplex c = fixtures::cylinder(1.0, 1.0, 64, 40);
        const Topology t = build_topology(c);
        for (std::size_t v = 0; v < c.vertices.size(); ++v) {
            if (std::abs(c.vertices[v][2]) > 0.7) continue;
            CHECK_THAT(mean_curvature(c, t, v), WithinAbs(-1.0, 0.02));
        }
    }
    SECTION("junction and rim vertices are refused") {
        const SurfaceComplex y = fixtures::y_config(1.0, 3);
        CHECK_THROWS_AS(mean_curvature(y, 0), NotManifoldVertex);
        const SurfaceComplex d = fixtures::disk(1.0, 3);
        CHECK_THROWS_AS(mean_curvature(d, d.vertices.size() - 1), NotManifoldVertex);
    }
}

TEST_CASE("expander residual") {
    SECTION("planes through the origin vanish identically") {
        std::mt19937_64 rng(99);
        for (int k = 0; k < 5; ++k) {
            const SurfaceComplex c = fixtures::transformed(fixtures::disk(3.0, 12), fixtures::random_rotation(rng));
            const ExpanderResidualField r = expander_residual(c);
            CHECK(r.count > 0);
            CHECK(r.max_abs <= 1e-12);
        }
    }
    SECTION("plane z = d gives -d/2") {
        const double d = 0.7;
        const SurfaceComplex c = fixtures::transformed(fixtures::disk(3.0, 12), fixtures::scaling(1.0), {0, 0, d});
        const ExpanderResidualField r = expander_residual(c);
        for (std::size_t v = 0; v < c.vertices.size(); ++v)
            if (!r.mask[v]) CHECK_THAT(r.per_vertex[v], WithinAbs(-d / 2.0, 1e-12));
        CHECK_THAT(r.rms, WithinAbs(d / 2.0, 1e-12));
    }
    SECTION("mask covers k rings around the rim and the triple curve") {
        const SurfaceComplex c = fixtures::disk(1.0, 8);
        const ExpanderResidualField r = expander_residual(c, 2);
        for (std::size_t v = 0; v < c.vertices.size(); ++v)
            CHECK(r.mask[v] == (norm(c.vertices[v]) > 1.0 - 2.5 / 8.0));
        const SurfaceComplex y = fixtures::y_config(1.0, 6);
        const ExpanderResidualField ry = expander_residual(y, 1);
        for (std::size_t v = 0; v < y.vertices.size(); ++v) {
            if (ry.mask[v]) continue;
            CHECK_FALSE(std::isnan(ry.per_vertex[v]));
            CHECK(std::hypot(y.vertices[v][0], y.vertices[v][1]) > 1e-12);
        }
    }
    SECTION("sphere of radius a: -2/a - a/2") {
        const double a = 1.5;
        const SurfaceComplex c = fixtures::sphere(a, 4);
        const ExpanderResidualField r = expander_residual(c);
        CHECK(r.count == c.vertices.size());
        for (double x : r.per_vertex) CHECK_THAT(x, WithinAbs(-2.0 / a - a / 2.0, 0.02));
    }
}

TEST_CASE("kernels do not depend on the worker count") {
    const SurfaceComplex c = fixtures::transformed(fixtures::disk(3.0, 45), fixtures::scaling(1.0), {0.1, 0.2, 0.3});
    REQUIRE(c.faces.size() > 8192);
    set_thread_count(1);
    const WeightedEnergy e1 = weighted_area(c);
    const WeightedGradient g1 = weighted_area_gradient(c);
    const ExpanderResidualField r1 = expander_residual(c);
    set_thread_count(4);
    const WeightedEnergy e4 = weighted_area(c);
    const WeightedGradient g4 = weighted_area_gradient(c);
    const ExpanderResidualField r4 = expander_residual(c);
    set_thread_count(0);
    CHECK(e1.total == e4.total);
    CHECK(e1.per_face == e4.per_face);
    CHECK(g1.per_vertex == g4.per_vertex);
    CHECK(r1.max_abs == r4.max_abs);
    CHECK(r1.rms == r4.rms);
    CHECK(weighted_area(c).total == e1.total);
}

TEST_CASE("Jacobi operator") {
    Grid2D g{-1.0, -1.5, 0.1, 21, 31};
    auto fill = [&](auto f) {
        std::vector<double> u(g.size());
        for (std::size_t j = 0; j < g.ny; ++j)
            for (std::size_t i = 0; i < g.nx; ++i) u[g.index(i, j)] = f(g.x(i), g.y(j));
        return u;
    };
    auto interior = [&](auto check) {
        for (std::size_t j = 1; j + 1 < g.ny; ++j)
            for (std::size_t i = 1; i + 1 < g.nx; ++i) check(i, j);
    };
    SECTION("annihilates linear data") {
        const auto Lu = jacobi_apply(g, fill([](double x, double y) { return 0.3 * x - 1.7 * y; }));
        interior([&](std::size_t i, std::size_t j) { CHECK(std::abs(Lu[g.index(i, j)]) <= 1e-10); });
    }
    SECTION("constant 1 maps to -1/2") {
        const auto Lu = jacobi_apply(g, fill([](double, double) { return 1.0; }));
        interior([&](std::size_t i, std::size_t j) { CHECK(Lu[g.index(i, j)] == -0.5); });
    }
    SECTION("|x|^2 maps to 4 + |x|^2 / 2") {
        const auto Lu = jacobi_apply(g, fill([](double x, double y) { return x * x + y * y; }));
        interior([&](std::size_t i, std::size_t j) {
            const double r2 = g.x(i) * g.x(i) + g.y(j) * g.y(j);
            CHECK_THAT(Lu[g.index(i, j)], WithinAbs(4.0 + 0.5 * r2, 1e-9));
        });
    }
    SECTION("rim nodes and NaN neighbours stay NaN") {
        auto u = fill([](double x, double) { return x; });
        u[g.index(5, 5)] = std::numeric_limits<double>::quiet_NaN();
        const auto Lu = jacobi_apply(g, u);
        CHECK(std::isnan(Lu[g.index(0, 3)]));
        CHECK(std::isnan(Lu[g.index(5, 6)]));
        CHECK(std::isnan(Lu[g.index(4, 5)]));
        CHECK_FALSE(std::isnan(Lu[g.index(7, 7)]));
    }
    SECTION("small grids are refused") {
        const Grid2D tiny{0.0, 0.0, 0.1, 2, 5};
        CHECK_THROWS_AS(jacobi_apply(tiny, std::vector<double>(10, 0.0)), GridTooSmall);
    }
}

TEST_CASE("planar ends") {
    SECTION("flat sheet over its own plane is zero") {
        const SurfaceComplex c = fixtures::disk(4.0, 20);
        const PlanarEndSample e = fit_planar_end(c, cones::flat(), 0, 1.0, 3.0);
        CHECK(e.sample_count > 50);
        CHECK(e.sup_u <= 1e-14);
        CHECK(e.sup_grad <= 1e-14);
    }
    SECTION("tilted plane gives a linear graph with sup |u| = R1 tan(alpha)") {
        const double alpha = rad(10.0), r0 = 1.0, r1 = 3.0;
        const SurfaceComplex c = fixtures::transformed(fixtures::disk(4.0, 24), rotation_matrix({1, 0, 0}, alpha));
        const PlanarEndSample e = fit_planar_end(c, cones::flat(), 0, r0, r1);
        for (std::size_t j = 0; j < e.grid.ny; ++j)
            for (std::size_t i = 0; i < e.grid.nx; ++i) {
                const double u = e.u[e.grid.index(i, j)];
                if (!std::isnan(u)) CHECK_THAT(u, WithinAbs(e.grid.y(j) * std::tan(alpha), 1e-12));
            }
        CHECK(e.sup_u <= r1 * std::tan(alpha) + 1e-12);
        CHECK(e.sup_u >= (r1 - e.grid.dx) * std::tan(alpha));
        CHECK_THAT(e.sup_grad, WithinAbs(std::tan(alpha), 1e-10));
        const auto Lu = jacobi_apply(e, e.u);
        for (double x : Lu)
            if (!std::isnan(x)) CHECK(std::abs(x) <= 1e-10);
    }
    SECTION("two sheets over the annulus are not graphical") {
        SurfaceComplex c = fixtures::disk(4.0, 12);
        const SurfaceComplex top = fixtures::transformed(c, fixtures::scaling(1.0), {0, 0, 0.5});
        const std::size_t off = c.vertices.size();
        c.vertices.insert(c.vertices.end(), top.vertices.begin(), top.vertices.end());
        c.flags.insert(c.flags.end(), top.flags.begin(), top.flags.end());
        for (FaceRecord f : top.faces) {
            for (auto& v : f.v) v += off;
            c.faces.push_back(f);
        }
        CHECK_THROWS_AS(fit_planar_end(c, cones::flat(), 0, 1.0, 2.0), NotGraphical);
    }
    SECTION("a sheet that misses part of the annulus is not graphical") {
        const SurfaceComplex c = fixtures::disk(2.0, 10);
        CHECK_THROWS_AS(fit_planar_end(c, cones::flat(), 0, 1.0, 3.0), NotGraphical);
    }
    SECTION("end decay records one sample per radius") {
        const SurfaceComplex c = fixtures::disk(4.0, 20);
        const std::vector<double> radii{1.0, 1.5, 2.0};
        const auto d = end_decay(c, cones::flat(), 1, radii, 1.0);
        REQUIRE(d.size() == 3);
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(d[k].inner_radius == radii[k]);
            CHECK(d[k].sup_u <= 1e-14);
        }
    }
}
