#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>

namespace expandernet {

using Vec3 = std::array<double, 3>;

constexpr Vec3 operator+(const Vec3& a, const Vec3& b) noexcept {
    return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
constexpr Vec3 operator-(const Vec3& a, const Vec3& b) noexcept {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
constexpr Vec3 operator-(const Vec3& a) noexcept { return {-a[0], -a[1], -a[2]}; }
constexpr Vec3 operator*(double s, const Vec3& a) noexcept {
    return {s * a[0], s * a[1], s * a[2]};
}
constexpr Vec3 operator*(const Vec3& a, double s) noexcept { return s * a; }
constexpr Vec3 operator/(const Vec3& a, double s) noexcept {
    return {a[0] / s, a[1] / s, a[2] / s};
}
constexpr Vec3& operator+=(Vec3& a, const Vec3& b) noexcept {
    a[0] += b[0];
    a[1] += b[1];
    a[2] += b[2];
    return a;
}
constexpr Vec3& operator-=(Vec3& a, const Vec3& b) noexcept {
    a[0] -= b[0];
    a[1] -= b[1];
    a[2] -= b[2];
    return a;
}
constexpr Vec3& operator*=(Vec3& a, double s) noexcept {
    a[0] *= s;
    a[1] *= s;
    a[2] *= s;
    return a;
}

constexpr double dot(const Vec3& a, const Vec3& b) noexcept {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
constexpr Vec3 cross(const Vec3& a, const Vec3& b) noexcept {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
constexpr double norm2(const Vec3& a) noexcept { return dot(a, a); }
inline double norm(const Vec3& a) noexcept { return std::sqrt(norm2(a)); }

inline Vec3 normalized(const Vec3& a) noexcept {
    const double n = norm(a);
    return n > 0.0 ? a / n : Vec3{0.0, 0.0, 0.0};
}

inline double distance(const Vec3& a, const Vec3& b) noexcept { return norm(a - b); }

// Angle between two nonzero vectors in [0, pi], robust near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) noexcept {
    return std::atan2(norm(cross(a, b)), dot(a, b));
}

// Any unit vector orthogonal to n (n need not be unit).
inline Vec3 any_orthogonal(const Vec3& n) noexcept {
    const Vec3 u = normalized(n);
    const Vec3 trial = std::abs(u[0]) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
    return normalized(cross(u, trial));
}

// Component of v orthogonal to the unit vector n.
constexpr Vec3 reject(const Vec3& v, const Vec3& n) noexcept { return v - dot(v, n) * n; }

inline double deg(double rad) noexcept { return rad * 180.0 / std::numbers::pi; }
inline double rad(double degrees) noexcept { return degrees * std::numbers::pi / 180.0; }

// Rotation about a unit axis (Rodrigues).
inline Vec3 rotate(const Vec3& v, const Vec3& axis, double angle) noexcept {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return c * v + s * cross(axis, v) + (1.0 - c) * dot(axis, v) * axis;
}

struct Mat3 {
    std::array<Vec3, 3> rows{};

    constexpr Vec3 operator*(const Vec3& v) const noexcept {
        return {dot(rows[0], v), dot(rows[1], v), dot(rows[2], v)};
    }
};

inline Mat3 rotation_matrix(const Vec3& axis, double angle) noexcept {
    Mat3 m;
    for (std::size_t c = 0; c < 3; ++c) {
        Vec3 e{0.0, 0.0, 0.0};
        e[c] = 1.0;
        const Vec3 col = rotate(e, axis, angle);
        for (std::size_t r = 0; r < 3; ++r) m.rows[r][c] = col[r];
    }
    return m;
}

}  // namespace expandernet
