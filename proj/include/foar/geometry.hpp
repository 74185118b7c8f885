#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace foar {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    Vec3 normalized(double eps = 1e-12) const {
        double n = norm();
        return n < eps ? Vec3{0, 0, 0} : Vec3{x / n, y / n, z / n};
    }
};

/// Unit quaternion (w, x, y, z).
struct Quat {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    static Quat identity() { return {}; }
    static Quat from_yaw(double theta) {
        return {std::cos(theta * 0.5), 0.0, 0.0, std::sin(theta * 0.5)};
    }

    double dot(const Quat& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }

    Quat normalized() const {
        double n = norm();
        if (n < 1e-12) return identity();
        return {w / n, x / n, y / n, z / n};
    }

    Quat operator*(const Quat& o) const {
        return {w * o.w - x * o.x - y * o.y - z * o.z,
                w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x,
                w * o.z + x * o.y - y * o.x + z * o.w};
    }

    Vec3 rotate(const Vec3& v) const {
        // q v q* expanded via the cross-product form.
        Vec3 u{x, y, z};
        Vec3 t = u.cross(v) * 2.0;
        return v + t * w + u.cross(t);
    }

    /// Angle in radians to another orientation (sign-insensitive).
    double angle_to(const Quat& o) const {
        double d = std::min(1.0, std::abs(dot(o)));
        return 2.0 * std::acos(d);
    }
};

struct Pose {
    Vec3 pos;
    Quat orn;
};

/// One end-effector target: pose plus commanded gripper width (m).
struct Action {
    Pose pose;
    double width = 0.0;
};

/// A predicted sequence of future end-effector targets.
using ActionChunk = std::vector<Action>;

}  // namespace foar
