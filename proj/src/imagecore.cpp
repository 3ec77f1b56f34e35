#include "foresight/imagecore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace foresight
{

const char* to_string(ErrorCode code)
{
    switch (code)
    {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::ImageTooSmall: return "ImageTooSmall";
        case ErrorCode::PoseOutOfBin: return "PoseOutOfBin";
        case ErrorCode::PackingFailure: return "PackingFailure";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::EmptyMap: return "EmptyMap";
        case ErrorCode::DepthZero: return "DepthZero";
        case ErrorCode::NonPositiveStep: return "NonPositiveStep";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

DepthImage::DepthImage(int width_px, int height_px, double resolution)
    : DepthImage(ImageGeometry{width_px, height_px, resolution})
{}

DepthImage::DepthImage(const ImageGeometry& geometry)
    : geometry_(geometry)
{
    if (geometry.width_px < 0 || geometry.height_px < 0 || !(geometry.resolution > 0.0))
    {
        throw Error(ErrorCode::InvalidArgument, "image needs non-negative size and positive resolution");
    }
    data_.assign(geometry.size(), 0.0);
    valid_.assign(geometry.size(), 1);
}

void DepthImage::check_invariants() const
{
    if (data_.size() != geometry_.size() || valid_.size() != geometry_.size())
    {
        throw Error(ErrorCode::ShapeMismatch, "pixel buffer does not match geometry");
    }
    for (size_t i = 0; i < data_.size(); ++i)
    {
        if (valid_[i] && (!std::isfinite(data_[i]) || data_[i] < 0.0))
        {
            throw Error(ErrorCode::InvalidArgument, "valid pixel with negative or non-finite height");
        }
    }
}

UncertaintyImage::UncertaintyImage(const ImageGeometry& geometry, double fill)
    : geometry_(geometry)
    , data_(geometry.size(), fill)
{}

double UncertaintyImage::sum() const
{
    double s = 0.0;
    for (double v : data_)
    {
        s += v;
    }
    return s;
}

double UncertaintyImage::max() const
{
    double m = 0.0;
    for (double v : data_)
    {
        m = std::max(m, v);
    }
    return m;
}

bool UncertaintyImage::all_zero() const
{
    return std::all_of(data_.begin(), data_.end(), [](double v) { return v == 0.0; });
}

double normalize_angle(double a)
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(a + std::numbers::pi, two_pi);
    if (r < 0.0)
    {
        r += two_pi;
    }
    r -= std::numbers::pi;
    if (r >= std::numbers::pi)
    {
        r -= two_pi;
    }
    return r;
}

PlanarPose::PlanarPose(double x_m, double y_m, double angle)
    : x(x_m)
    , y(y_m)
    , a(normalize_angle(angle))
{}

AffineMap AffineMap::inverse() const
{
    const double det = m[0] * m[4] - m[1] * m[3];
    if (det == 0.0)
    {
        throw Error(ErrorCode::InvalidArgument, "singular affine map");
    }
    AffineMap inv;
    inv.m[0] = m[4] / det;
    inv.m[1] = -m[1] / det;
    inv.m[3] = -m[3] / det;
    inv.m[4] = m[0] / det;
    inv.m[2] = -(inv.m[0] * m[2] + inv.m[1] * m[5]);
    inv.m[5] = -(inv.m[3] * m[2] + inv.m[4] * m[5]);
    return inv;
}

AffineMap AffineMap::compose(const AffineMap& in) const
{
    AffineMap out;
    out.m[0] = m[0] * in.m[0] + m[1] * in.m[3];
    out.m[1] = m[0] * in.m[1] + m[1] * in.m[4];
    out.m[2] = m[0] * in.m[2] + m[1] * in.m[5] + m[2];
    out.m[3] = m[3] * in.m[0] + m[4] * in.m[3];
    out.m[4] = m[3] * in.m[1] + m[4] * in.m[4];
    out.m[5] = m[3] * in.m[2] + m[4] * in.m[5] + m[5];
    return out;
}

AffineMap pose_to_affine(const PlanarPose& pose, const ImageGeometry& geometry)
{
    const double c = std::cos(pose.a);
    const double s = std::sin(pose.a);
    AffineMap map;
    map.m = {c, -s, geometry.to_pixel_x(pose.x), s, c, geometry.to_pixel_y(pose.y)};
    return map;
}

namespace
{

double snap(double p)
{
    const double r = std::round(p);
    return std::abs(p - r) < 1e-9 ? r : p;
}

}  // namespace

BilinearTaps bilinear_taps(const ImageGeometry& g, double px, double py)
{
    BilinearTaps taps;
    px = snap(px);
    py = snap(py);
    if (!(px >= 0.0 && py >= 0.0 && px <= g.width_px - 1 && py <= g.height_px - 1))
    {
        return taps;
    }
    taps.inside = true;
    const int x0 = static_cast<int>(std::floor(px));
    const int y0 = static_cast<int>(std::floor(py));
    const double fx = px - x0;
    const double fy = py - y0;
    const int x1 = std::min(x0 + 1, g.width_px - 1);
    const int y1 = std::min(y0 + 1, g.height_px - 1);
    const int w = g.width_px;
    taps.index = {y0 * w + x0, y0 * w + x1, y1 * w + x0, y1 * w + x1};
    taps.weight = {(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy};
    return taps;
}

std::pair<double, bool> sample_bilinear(const DepthImage& image, double px, double py)
{
    const BilinearTaps taps = bilinear_taps(image.geometry(), px, py);
    if (!taps.inside)
    {
        return {0.0, false};
    }
    const auto data = image.data();
    const auto valid = image.valid_mask();
    double v = 0.0;
    bool ok = true;
    for (int k = 0; k < 4; ++k)
    {
        if (taps.weight[k] == 0.0)
        {
            continue;
        }
        v += taps.weight[k] * data[taps.index[k]];
        ok = ok && valid[taps.index[k]] != 0;
    }
    return {v, ok};
}

DepthImage crop_window(const DepthImage& image, const PlanarPose& pose, const WindowSpec& spec)
{
    if (spec.size_px <= 0)
    {
        throw Error(ErrorCode::InvalidArgument, "window size must be positive");
    }
    const int n = spec.size_px;
    DepthImage window(n, n, image.resolution());
    const AffineMap map = pose_to_affine(pose, image);
    const double half = 0.5 * (n - 1);
    for (int j = 0; j < n; ++j)
    {
        for (int i = 0; i < n; ++i)
        {
            const auto [px, py] = map.apply(i - half, j - half);
            const auto [v, ok] = sample_bilinear(image, px, py);
            window.at(i, j) = ok ? v : 0.0;
            window.set_valid(i, j, ok);
        }
    }
    return window;
}

namespace
{

struct Splat
{
    std::vector<double> numerator;
    std::vector<double> denominator;
};

// Splat window values into image space, then yield the renormalized value for
// every image pixel whose center lies inside the footprint.
template <typename WindowValue, typename Emit>
void warp_into_image(const ImageGeometry& g, const PlanarPose& pose, int n, WindowValue&& value_at, Emit&& emit)
{
    const AffineMap map = pose_to_affine(pose, g);
    const AffineMap inv = map.inverse();
    const double half = 0.5 * (n - 1);

    double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
    for (const auto& [u, v] : {std::pair{-0.5 * n, -0.5 * n}, {0.5 * n, -0.5 * n}, {-0.5 * n, 0.5 * n}, {0.5 * n, 0.5 * n}})
    {
        const auto [x, y] = map.apply(u, v);
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
    }
    const int c0 = std::max(0, static_cast<int>(std::floor(min_x)) - 1);
    const int c1 = std::min(g.width_px - 1, static_cast<int>(std::ceil(max_x)) + 1);
    const int r0 = std::max(0, static_cast<int>(std::floor(min_y)) - 1);
    const int r1 = std::min(g.height_px - 1, static_cast<int>(std::ceil(max_y)) + 1);
    if (c0 > c1 || r0 > r1)
    {
        return;
    }

    Splat splat{std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0)};
    for (int j = 0; j < n; ++j)
    {
        for (int i = 0; i < n; ++i)
        {
            const auto [v, ok] = value_at(i, j);
            if (!ok)
            {
                continue;
            }
            const auto [px, py] = map.apply(i - half, j - half);
            const BilinearTaps taps = bilinear_taps(g, px, py);
            if (!taps.inside)
            {
                continue;
            }
            for (int k = 0; k < 4; ++k)
            {
                if (taps.weight[k] == 0.0)
                {
                    continue;
                }
                splat.numerator[taps.index[k]] += taps.weight[k] * v;
                splat.denominator[taps.index[k]] += taps.weight[k];
            }
        }
    }

    const double lim = 0.5 * n;
    for (int r = r0; r <= r1; ++r)
    {
        for (int c = c0; c <= c1; ++c)
        {
            const auto [u, v] = inv.apply(c, r);
            if (std::abs(u) > lim || std::abs(v) > lim)
            {
                continue;
            }
            const size_t idx = static_cast<size_t>(r) * g.width_px + c;
            if (splat.denominator[idx] > 0.0)
            {
                emit(idx, splat.numerator[idx] / splat.denominator[idx]);
            }
        }
    }
}

}  // namespace

DepthImage patch_window(const DepthImage& image, const DepthImage& window, const PlanarPose& pose)
{
    if (window.width() != window.height())
    {
        throw Error(ErrorCode::ShapeMismatch, "patch window must be square");
    }
    DepthImage out = image;
    auto data = out.data();
    auto valid = out.valid_mask();
    warp_into_image(
        image.geometry(), pose, window.width(),
        [&](int i, int j) { return std::pair{window.at(i, j), window.valid(i, j)}; },
        [&](size_t idx, double v) {
            data[idx] = v;
            valid[idx] = 1;
        });
    return out;
}

UncertaintyImage zero_pad_uncertainty(const UncertaintyImage& window_var, const PlanarPose& pose,
                                      const ImageGeometry& target)
{
    if (window_var.width() != window_var.height())
    {
        throw Error(ErrorCode::ShapeMismatch, "uncertainty window must be square");
    }
    UncertaintyImage out(target, 0.0);
    auto data = out.data();
    warp_into_image(
        target, pose, window_var.width(),
        [&](int i, int j) { return std::pair{window_var.at(i, j), true}; },
        [&](size_t idx, double v) { data[idx] = std::max(0.0, v); });
    return out;
}

std::vector<uint8_t> window_footprint(const ImageGeometry& g, const PlanarPose& pose, int size_px)
{
    std::vector<uint8_t> mask(g.size(), 0);
    const AffineMap inv = pose_to_affine(pose, g).inverse();
    const double lim = 0.5 * size_px;
    for (int r = 0; r < g.height_px; ++r)
    {
        for (int c = 0; c < g.width_px; ++c)
        {
            const auto [u, v] = inv.apply(c, r);
            if (std::abs(u) <= lim && std::abs(v) <= lim)
            {
                mask[static_cast<size_t>(r) * g.width_px + c] = 1;
            }
        }
    }
    return mask;
}

}  // namespace foresight
