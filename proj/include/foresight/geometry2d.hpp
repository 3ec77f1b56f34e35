#pragma once

#include <array>
#include <cmath>
#include <utility>

namespace foresight
{

struct Vec2
{
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
};

inline Vec2 unit_from_angle(double a)
{
    return {std::cos(a), std::sin(a)};
}

/// Rectangle with half extents (hx, hy) along its local axes, rotated by yaw.
struct OrientedRect
{
    Vec2 center;
    double yaw = 0.0;
    double hx = 0.0;
    double hy = 0.0;

    Vec2 axis_u() const { return unit_from_angle(yaw); }
    Vec2 axis_v() const { return {-std::sin(yaw), std::cos(yaw)}; }
    std::array<Vec2, 4> corners() const;
    std::pair<double, double> project(Vec2 axis) const;
    OrientedRect inflated(double margin) const { return {center, yaw, hx + margin, hy + margin}; }
    bool contains(Vec2 p) const;
};

/// Separating-axis test; intervals must overlap by more than eps on every axis.
bool overlaps(const OrientedRect& a, const OrientedRect& b, double eps = 1e-9);

struct AxisBox
{
    double x0, y0, x1, y1;
};

bool inside(const OrientedRect& r, const AxisBox& box, double eps = 1e-9);

/// Largest s in [0, max_s] such that r translated by s*dir stays inside box.
double max_travel_inside(const OrientedRect& r, Vec2 dir, double max_s, const AxisBox& box);

}  // namespace foresight
