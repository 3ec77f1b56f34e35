#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "foresight/rewardnet.hpp"
#include "foresight/reward_field.hpp"

namespace foresight::test
{

// Empirical std of psi for one map cell when every image pixel gets
// independent N(0, std^2) noise. One set of normal draws is reused for every
// std so the estimates differ only through the model's nonlinearity.
inline std::vector<double> monte_carlo_sigma(const ModelWeights& w, const DepthImage& image, const MapLayout& layout,
                                             size_t cell, const std::vector<double>& stds, int samples, uint64_t seed)
{
    const MapCell c = layout.cell(cell);
    const PlanarPose pose = layout.pose(c.r, c.oy, c.ox);
    const ImageGeometry& g = image.geometry();
    const double reach = 0.5 * layout.field * std::sqrt(2.0) + 2.0;
    const double px = g.to_pixel_x(pose.x);
    const double py = g.to_pixel_y(pose.y);
    const int c0 = std::max(0, static_cast<int>(std::floor(px - reach)));
    const int c1 = std::min(g.width_px - 1, static_cast<int>(std::ceil(px + reach)));
    const int r0 = std::max(0, static_cast<int>(std::floor(py - reach)));
    const int r1 = std::min(g.height_px - 1, static_cast<int>(std::ceil(py + reach)));

    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> noise(static_cast<size_t>(c1 - c0 + 1) * (r1 - r0 + 1));
    // Welford accumulators; the naive sum of squares cancels badly for tiny spreads.
    std::vector<double> mean(stds.size(), 0.0), m2(stds.size(), 0.0);
    DepthImage work = image;
    const WindowSpec spec{layout.field};
    for (int k = 0; k < samples; ++k)
    {
        for (double& z : noise)
        {
            z = normal(rng);
        }
        for (size_t s = 0; s < stds.size(); ++s)
        {
            size_t n = 0;
            for (int r = r0; r <= r1; ++r)
            {
                for (int col = c0; col <= c1; ++col)
                {
                    // Heights may go negative here; the model is evaluated on the raw perturbation.
                    work.at(col, r) = image.at(col, r) + stds[s] * noise[n++];
                }
            }
            const double v = forward_window(w, crop_window(work, pose, spec), c.p);
            const double d = v - mean[s];
            mean[s] += d / (k + 1);
            m2[s] += d * (v - mean[s]);
        }
    }
    std::vector<double> out(stds.size());
    for (size_t s = 0; s < stds.size(); ++s)
    {
        out[s] = std::sqrt(m2[s] / (samples - 1));
    }
    return out;
}

// Independent bilinear lookup: window pixel (i, j) -> image pixel coordinates
// by explicit rotation, then the four neighbours. Returns {value, valid}.
inline std::pair<double, bool> oracle_sample(const DepthImage& img, const PlanarPose& pose, int n, int i, int j)
{
    const double res = img.resolution();
    const double u = i - (n - 1) / 2.0;
    const double v = j - (n - 1) / 2.0;
    const double px = pose.x / res - 0.5 + std::cos(pose.a) * u - std::sin(pose.a) * v;
    const double py = pose.y / res - 0.5 + std::sin(pose.a) * u + std::cos(pose.a) * v;
    if (px < 0 || py < 0 || px > img.width() - 1 || py > img.height() - 1)
    {
        return {0.0, false};
    }
    const int x0 = static_cast<int>(px);
    const int y0 = static_cast<int>(py);
    const int x1 = std::min(x0 + 1, img.width() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fx = px - x0;
    const double fy = py - y0;
    const double val = (1 - fx) * (1 - fy) * img.at(x0, y0) + fx * (1 - fy) * img.at(x1, y0) +
                       (1 - fx) * fy * img.at(x0, y1) + fx * fy * img.at(x1, y1);
    return {val, true};
}

// Relative 2-norm error of the analytic input gradient against central
// differences. Wider steps straddle leaky-ReLU kinks of trained models.
inline double gradient_error(const ModelWeights& w, const DepthImage& win, int ch, double h = 1e-8)
{
    const std::vector<double> g = input_gradient(w, win, ch);
    double num = 0.0, den = 0.0;
    DepthImage probe = win;
    for (size_t i = 0; i < g.size(); ++i)
    {
        const double v = probe.data()[i];
        probe.data()[i] = v + h;
        const double up = forward_window(w, probe, ch);
        probe.data()[i] = v - h;
        const double down = forward_window(w, probe, ch);
        probe.data()[i] = v;
        const double fd = (up - down) / (2 * h);
        num += (g[i] - fd) * (g[i] - fd);
        den += fd * fd;
    }
    return std::sqrt(num / std::max(den, 1e-300));
}

}  // namespace foresight::test
