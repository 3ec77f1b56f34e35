#include "foresight/geometry2d.hpp"

#include <algorithm>
#include <limits>

namespace foresight
{

std::array<Vec2, 4> OrientedRect::corners() const
{
    const Vec2 u = axis_u() * hx;
    const Vec2 v = axis_v() * hy;
    return {center + u + v, center - u + v, center - u - v, center + u - v};
}

std::pair<double, double> OrientedRect::project(Vec2 axis) const
{
    const double c = center.dot(axis);
    const double r = hx * std::abs(axis_u().dot(axis)) + hy * std::abs(axis_v().dot(axis));
    return {c - r, c + r};
}

bool OrientedRect::contains(Vec2 p) const
{
    const Vec2 d = p - center;
    return std::abs(d.dot(axis_u())) <= hx && std::abs(d.dot(axis_v())) <= hy;
}

bool overlaps(const OrientedRect& a, const OrientedRect& b, double eps)
{
    for (const Vec2 axis : {a.axis_u(), a.axis_v(), b.axis_u(), b.axis_v()})
    {
        const auto [a0, a1] = a.project(axis);
        const auto [b0, b1] = b.project(axis);
        if (std::min(a1, b1) - std::max(a0, b0) <= eps)
        {
            return false;
        }
    }
    return true;
}

bool inside(const OrientedRect& r, const AxisBox& box, double eps)
{
    const auto [x0, x1] = r.project({1.0, 0.0});
    const auto [y0, y1] = r.project({0.0, 1.0});
    return x0 >= box.x0 - eps && x1 <= box.x1 + eps && y0 >= box.y0 - eps && y1 <= box.y1 + eps;
}

double max_travel_inside(const OrientedRect& r, Vec2 dir, double max_s, const AxisBox& box)
{
    double s = max_s;
    const auto [x0, x1] = r.project({1.0, 0.0});
    const auto [y0, y1] = r.project({0.0, 1.0});
    if (dir.x > 1e-12) s = std::min(s, (box.x1 - x1) / dir.x);
    if (dir.x < -1e-12) s = std::min(s, (box.x0 - x0) / dir.x);
    if (dir.y > 1e-12) s = std::min(s, (box.y1 - y1) / dir.y);
    if (dir.y < -1e-12) s = std::min(s, (box.y0 - y0) / dir.y);
    return std::max(0.0, s);
}

}  // namespace foresight
