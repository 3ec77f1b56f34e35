#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "foresight/errors.hpp"

namespace foresight
{

// Pixel (col, row) covers [col*res, (col+1)*res) x [row*res, (row+1)*res) of
// the task frame, so its center sits at continuous pixel coordinate (col, row)
// and at metric position ((col + 0.5) * res, (row + 0.5) * res).
struct ImageGeometry
{
    int width_px = 0;
    int height_px = 0;
    double resolution = 0.0;  // meters per pixel

    size_t size() const { return static_cast<size_t>(width_px) * static_cast<size_t>(height_px); }
    bool operator==(const ImageGeometry&) const = default;

    double to_pixel_x(double x_m) const { return x_m / resolution - 0.5; }
    double to_pixel_y(double y_m) const { return y_m / resolution - 0.5; }
    double to_meter_x(double px) const { return (px + 0.5) * resolution; }
    double to_meter_y(double py) const { return (py + 0.5) * resolution; }
};

/// Orthographic heightmap in meters above the bin floor.
class DepthImage
{
public:
    DepthImage() = default;
    DepthImage(int width_px, int height_px, double resolution);
    explicit DepthImage(const ImageGeometry& geometry);

    const ImageGeometry& geometry() const { return geometry_; }
    int width() const { return geometry_.width_px; }
    int height() const { return geometry_.height_px; }
    double resolution() const { return geometry_.resolution; }

    double at(int col, int row) const { return data_[index(col, row)]; }
    double& at(int col, int row) { return data_[index(col, row)]; }
    bool valid(int col, int row) const { return valid_[index(col, row)] != 0; }
    void set_valid(int col, int row, bool v) { valid_[index(col, row)] = v ? 1 : 0; }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }
    std::span<const uint8_t> valid_mask() const { return valid_; }
    std::span<uint8_t> valid_mask() { return valid_; }

    size_t index(int col, int row) const
    {
        return static_cast<size_t>(row) * static_cast<size_t>(geometry_.width_px) + static_cast<size_t>(col);
    }

    /// Throws InvalidArgument if a valid pixel is negative or non-finite.
    void check_invariants() const;

    bool operator==(const DepthImage&) const = default;

private:
    ImageGeometry geometry_;
    std::vector<double> data_;
    std::vector<uint8_t> valid_;
};

/// Per-pixel variance in meters squared.
class UncertaintyImage
{
public:
    UncertaintyImage() = default;
    explicit UncertaintyImage(const ImageGeometry& geometry, double fill = 0.0);

    const ImageGeometry& geometry() const { return geometry_; }
    int width() const { return geometry_.width_px; }
    int height() const { return geometry_.height_px; }

    double at(int col, int row) const { return data_[index(col, row)]; }
    double& at(int col, int row) { return data_[index(col, row)]; }
    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    size_t index(int col, int row) const
    {
        return static_cast<size_t>(row) * static_cast<size_t>(geometry_.width_px) + static_cast<size_t>(col);
    }

    double sum() const;
    double max() const;
    bool all_zero() const;

    bool operator==(const UncertaintyImage&) const = default;

private:
    ImageGeometry geometry_;
    std::vector<double> data_;
};

struct PlanarPose
{
    double x = 0.0;  // meters
    double y = 0.0;  // meters
    double a = 0.0;  // radians about the vertical axis, kept in [-pi, pi)

    PlanarPose() = default;
    PlanarPose(double x_m, double y_m, double angle);
};

double normalize_angle(double a);

struct WindowSpec
{
    int size_px = 32;

    double side_m(double resolution) const { return size_px * resolution; }
    static WindowSpec reward() { return {32}; }
    static WindowSpec transition() { return {64}; }
};

// Row-major 2x3 matrix [a b tx; c d ty] acting on column vectors (u, v, 1).
struct AffineMap
{
    std::array<double, 6> m{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

    std::array<double, 2> apply(double u, double v) const
    {
        return {m[0] * u + m[1] * v + m[2], m[3] * u + m[4] * v + m[5]};
    }
    AffineMap inverse() const;
    AffineMap compose(const AffineMap& inner) const;  // this ∘ inner
};

/// Window-local pixel coordinates (window center at the origin) to image pixel
/// coordinates: rotation by pose.a, then translation to the pose position.
AffineMap pose_to_affine(const PlanarPose& pose, const ImageGeometry& geometry);
inline AffineMap pose_to_affine(const PlanarPose& pose, const DepthImage& image)
{
    return pose_to_affine(pose, image.geometry());
}

// Bilinear read of one continuous pixel location. Locations within 1e-9 of a
// pixel center snap to it so axis-aligned warps are exact copies.
struct BilinearTaps
{
    std::array<int, 4> index{0, 0, 0, 0};
    std::array<double, 4> weight{0.0, 0.0, 0.0, 0.0};
    bool inside = false;
};

BilinearTaps bilinear_taps(const ImageGeometry& geometry, double px, double py);

/// Bilinear sample. Returns {height, valid}; outside the image -> {0, false}.
std::pair<double, bool> sample_bilinear(const DepthImage& image, double px, double py);

DepthImage crop_window(const DepthImage& image, const PlanarPose& pose, const WindowSpec& spec);

/// Writes the window back over the image at pose. Window pixels are splatted
/// with bilinear weights and renormalized; only image pixels whose centers lie
/// inside the window's square footprint are touched, invalid window pixels are
/// skipped.
DepthImage patch_window(const DepthImage& image, const DepthImage& window, const PlanarPose& pose);

/// Full-size variance image: the window variance warped into the footprint,
/// exactly zero elsewhere.
UncertaintyImage zero_pad_uncertainty(const UncertaintyImage& window_var, const PlanarPose& pose,
                                      const ImageGeometry& target);

/// True where the pixel center lies inside the rotated square footprint of a
/// window of side size_px placed at pose.
std::vector<uint8_t> window_footprint(const ImageGeometry& geometry, const PlanarPose& pose, int size_px);

}  // namespace foresight
