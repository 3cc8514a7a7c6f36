#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace mcvd {

/// Cartesian 3-vector. Positions are in micrometers; directions are unitless.
struct Vec3
{
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    [[nodiscard]] double norm() const { return std::sqrt(x * x + y * y + z * z); }
    [[nodiscard]] constexpr double squared_norm() const { return x * x + y * y + z * z; }
    [[nodiscard]] bool is_finite() const
    {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }

    constexpr double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr double& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr Vec3& operator+=(Vec3 const& o)
    {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    constexpr Vec3& operator-=(Vec3 const& o)
    {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    constexpr Vec3& operator*=(double s)
    {
        x *= s;
        y *= s;
        z *= s;
        return *this;
    }

    friend constexpr Vec3 operator+(Vec3 a, Vec3 const& b) { return a += b; }
    friend constexpr Vec3 operator-(Vec3 a, Vec3 const& b) { return a -= b; }
    friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
    friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
    friend constexpr Vec3 operator-(Vec3 const& a) { return {-a.x, -a.y, -a.z}; }
    friend constexpr bool operator==(Vec3 const&, Vec3 const&) = default;
};

constexpr double dot(Vec3 const& a, Vec3 const& b)
{
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

constexpr Vec3 cross(Vec3 const& a, Vec3 const& b)
{
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double distance(Vec3 const& a, Vec3 const& b)
{
    return (a - b).norm();
}

/// Unit-length copy of v. Throws std::invalid_argument for zero or
/// non-finite input.
Vec3 unit(Vec3 const& v);

/// Rotation stored as a unit quaternion (w, x, y, z).
class UnitQuaternion
{
  public:
    constexpr UnitQuaternion() = default;

    /// Normalizes the given components. Throws std::invalid_argument when the
    /// norm is zero or non-finite.
    UnitQuaternion(double w, double x, double y, double z);

    static UnitQuaternion from_axis_angle(Vec3 const& axis, double angle_rad);
    /// Stores already-unit components verbatim (exact round trips through
    /// text). Throws std::invalid_argument if the norm is off by > 1e-9.
    static UnitQuaternion from_unit_components(double w, double x, double y, double z);

    [[nodiscard]] constexpr double w() const { return w_; }
    [[nodiscard]] constexpr double x() const { return x_; }
    [[nodiscard]] constexpr double y() const { return y_; }
    [[nodiscard]] constexpr double z() const { return z_; }
    [[nodiscard]] constexpr std::array<double, 4> components() const
    {
        return {w_, x_, y_, z_};
    }

    [[nodiscard]] Vec3 rotate(Vec3 const& v) const;
    [[nodiscard]] UnitQuaternion conjugate() const;

    friend constexpr bool operator==(UnitQuaternion const&, UnitQuaternion const&) = default;

  private:
    double w_ = 1.0;
    double x_ = 0.0;
    double y_ = 0.0;
    double z_ = 0.0;
};

/// Rigid placement of Node A in Node B's frame (Node B sits at the origin
/// with identity orientation).
struct Pose
{
    Vec3 position;
    UnitQuaternion orientation;
};

inline constexpr std::size_t kNumTx = 6;
inline constexpr std::size_t kNumOctants = 8;

/// Receiver sphere plus six point emitters at the tube tips.
class NodeLayout
{
  public:
    NodeLayout(double radius, double tube_offset);

    [[nodiscard]] double radius() const { return radius_; }
    [[nodiscard]] double tube_offset() const { return tube_offset_; }
    /// Tube tips in the node's body frame, ordered +x, -x, +y, -y, +z, -z.
    [[nodiscard]] std::array<Vec3, kNumTx> const& tx_local() const { return tx_local_; }

  private:
    double radius_;
    double tube_offset_;
    std::array<Vec3, kNumTx> tx_local_;
};

/// Octant of p, coding negative x/y/z as bits 0/1/2. Zero counts as
/// non-negative. Throws std::invalid_argument for non-finite input.
int octant_index(Vec3 const& p);

std::array<Vec3, kNumTx> tx_world_positions(Pose const& pose, NodeLayout const& layout);

/// Maps a world point into the body frame of `pose`.
Vec3 to_body_frame(Pose const& pose, Vec3 const& world);

}  // namespace mcvd
