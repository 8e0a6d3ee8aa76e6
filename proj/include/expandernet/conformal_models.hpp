#pragma once

// Hyperboloid model, Poincaré ball and the radial Euclidean chart.

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "errors.hpp"
#include "vec3.hpp"

namespace expandernet {

using Vec4 = std::array<double, 4>;

/// x1^2 + x2^2 + x3^2 - x4^2
constexpr double minkowski(const Vec4& a, const Vec4& b) noexcept {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] - a[3] * b[3];
}

inline constexpr double hyperboloid_tol = 1e-10;
inline constexpr double ideal_boundary_tol = 1e-12;

inline bool on_hyperboloid(const Vec4& x, double tol = hyperboloid_tol) {
    return x[3] >= 1.0 - tol && std::abs(minkowski(x, x) + 1.0) <= tol * std::max(1.0, x[3] * x[3]);
}

inline Vec3 to_ball(const Vec4& x) {
    if (!on_hyperboloid(x))
        throw NotOnHyperboloid("point is not on the upper sheet <x,x> = -1");
    const double s = 1.0 + x[3];
    return {x[0] / s, x[1] / s, x[2] / s};
}

inline void require_in_ball(const Vec3& u) {
    if (!(norm2(u) < 1.0) || norm(u) >= 1.0 - ideal_boundary_tol)
        throw OnIdealBoundary("point at or beyond the ideal boundary |u| = 1");
}

inline Vec4 to_hyperboloid(const Vec3& u) {
    require_in_ball(u);
    const double r2 = norm2(u);
    const double s = 1.0 / (1.0 - r2);
    return {2.0 * u[0] * s, 2.0 * u[1] * s, 2.0 * u[2] * s, (1.0 + r2) * s};
}

/// Exact differential of to_hyperboloid applied to du.
inline Vec4 to_hyperboloid_differential(const Vec3& u, const Vec3& du) {
    require_in_ball(u);
    const double r2 = norm2(u);
    const double s = 1.0 / (1.0 - r2);
    const double udu = dot(u, du);
    // d(2u/(1-r2)) = 2 du s + 4 u (u.du) s^2 ; d((1+r2)/(1-r2)) = 4 (u.du) s^2
    Vec4 dx{};
    for (std::size_t k = 0; k < 3; ++k) dx[k] = 2.0 * du[k] * s + 4.0 * u[k] * udu * s * s;
    dx[3] = 4.0 * udu * s * s;
    return dx;
}

struct PullbackValues {
    double minkowski = 0.0;  // <dx, dx>_M
    double poincare = 0.0;   // 4 |du|^2 / (1 - |u|^2)^2
};

enum class Jacobian { exact, finite_difference };

/// Both sides of the pullback identity. The finite-difference variant uses a
/// central difference with step 1e-6 (relative to |du|).
inline PullbackValues pullback_check(const Vec3& u, const Vec3& du, Jacobian mode = Jacobian::exact) {
    require_in_ball(u);
    PullbackValues out;
    const double r2 = norm2(u);
    out.poincare = 4.0 * norm2(du) / ((1.0 - r2) * (1.0 - r2));
    if (norm2(du) == 0.0) return out;
    Vec4 dx;
    if (mode == Jacobian::exact) {
        dx = to_hyperboloid_differential(u, du);
    } else {
        const double t = 1e-6 / norm(du);
        const Vec4 a = to_hyperboloid(u + t * du);
        const Vec4 b = to_hyperboloid(u - t * du);
        for (std::size_t k = 0; k < 4; ++k) dx[k] = (a[k] - b[k]) / (2.0 * t);
    }
    out.minkowski = minkowski(dx, dx);
    return out;
}

/// Radial chart R^3 -> B^3, u = p / (1 + |p|).
inline Vec3 euclid_to_ball(const Vec3& p) { return p / (1.0 + norm(p)); }

inline Vec3 ball_to_euclid(const Vec3& u) {
    if (!(norm(u) < 1.0)) throw OnIdealBoundary("point at or beyond the ideal boundary |u| = 1");
    return u / (1.0 - norm(u));
}

/// Chart radius of a Euclidean radius r.
inline double euclid_radius_to_ball(double r) { return r / (1.0 + r); }

/// Lobachevsky's function 2 atan(exp(-d)).
inline double angle_of_parallelism(double d) {
    if (!(d >= 0.0)) throw InvalidArgument("hyperbolic distance must be >= 0");
    return 2.0 * std::atan(std::exp(-d));
}

/// Distance at which the angle of parallelism reaches 60 degrees: log(3) / 2.
inline double parallelism_threshold() { return 0.5 * std::log(3.0); }

inline double hyperbolic_distance(const Vec3& u, const Vec3& v) {
    require_in_ball(u);
    require_in_ball(v);
    const double num = 2.0 * norm2(u - v);
    const double den = (1.0 - norm2(u)) * (1.0 - norm2(v));
    const double q = num / den;
    // acosh(1 + q) = log1p(q + sqrt(q (q + 2))), accurate for small q
    return std::log1p(q + std::sqrt(q * (q + 2.0)));
}

/// Euclidean radius in the ball of hyperbolic radius d about the centre: tanh(d/2).
inline double ball_radius_of_distance(double d) { return std::tanh(0.5 * d); }

enum class Model { euclid, ball, hyperboloid };

inline Model parse_model(const std::string& s) {
    if (s == "euclid") return Model::euclid;
    if (s == "ball") return Model::ball;
    if (s == "hyperboloid") return Model::hyperboloid;
    throw InvalidArgument("unknown model '" + s + "' (expected euclid, ball or hyperboloid)");
}

inline const char* model_name(Model m) {
    switch (m) {
        case Model::euclid: return "euclid";
        case Model::ball: return "ball";
        case Model::hyperboloid: return "hyperboloid";
    }
    return "?";
}

}  // namespace expandernet
