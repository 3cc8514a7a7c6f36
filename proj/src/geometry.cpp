#include "mcvd/geometry.hpp"

#include <stdexcept>

namespace mcvd {

Vec3 unit(Vec3 const& v)
{
    double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n))
    {
        throw std::invalid_argument("cannot normalize a zero or non-finite vector");
    }
    return v * (1.0 / n);
}

UnitQuaternion::UnitQuaternion(double w, double x, double y, double z)
{
    double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (!(n > 0.0) || !std::isfinite(n))
    {
        throw std::invalid_argument("quaternion norm must be positive and finite");
    }
    w_ = w / n;
    x_ = x / n;
    y_ = y / n;
    z_ = z / n;
}

UnitQuaternion UnitQuaternion::from_axis_angle(Vec3 const& axis, double angle_rad)
{
    Vec3 a = unit(axis);
    double s = std::sin(0.5 * angle_rad);
    return {std::cos(0.5 * angle_rad), a.x * s, a.y * s, a.z * s};
}

UnitQuaternion UnitQuaternion::from_unit_components(double w, double x, double y, double z)
{
    double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (!(std::abs(n - 1.0) <= 1e-9))
    {
        throw std::invalid_argument("quaternion components are not unit norm");
    }
    UnitQuaternion q;
    q.w_ = w;
    q.x_ = x;
    q.y_ = y;
    q.z_ = z;
    return q;
}

Vec3 UnitQuaternion::rotate(Vec3 const& v) const
{
    // v' = v + 2w (u x v) + 2 u x (u x v), with u the vector part
    Vec3 u{x_, y_, z_};
    Vec3 t = 2.0 * cross(u, v);
    return v + w_ * t + cross(u, t);
}

UnitQuaternion UnitQuaternion::conjugate() const
{
    UnitQuaternion q = *this;
    q.x_ = -x_;
    q.y_ = -y_;
    q.z_ = -z_;
    return q;
}

NodeLayout::NodeLayout(double radius, double tube_offset)
    : radius_(radius), tube_offset_(tube_offset)
{
    if (!(radius > 0.0) || !std::isfinite(radius))
    {
        throw std::invalid_argument("node radius must be positive");
    }
    if (!(tube_offset > 0.0) || !std::isfinite(tube_offset))
    {
        throw std::invalid_argument("tube offset must be positive");
    }
    double a = radius + tube_offset;
    tx_local_ = {Vec3{a, 0, 0}, Vec3{-a, 0, 0}, Vec3{0, a, 0},
                 Vec3{0, -a, 0}, Vec3{0, 0, a}, Vec3{0, 0, -a}};
}

int octant_index(Vec3 const& p)
{
    if (!p.is_finite())
    {
        throw std::invalid_argument("octant_index: non-finite point");
    }
    return (p.x < 0 ? 1 : 0) + (p.y < 0 ? 2 : 0) + (p.z < 0 ? 4 : 0);
}

std::array<Vec3, kNumTx> tx_world_positions(Pose const& pose, NodeLayout const& layout)
{
    std::array<Vec3, kNumTx> out;
    for (std::size_t k = 0; k < kNumTx; ++k)
    {
        out[k] = pose.orientation.rotate(layout.tx_local()[k]) + pose.position;
    }
    return out;
}

Vec3 to_body_frame(Pose const& pose, Vec3 const& world)
{
    return pose.orientation.conjugate().rotate(world - pose.position);
}

}  // namespace mcvd
