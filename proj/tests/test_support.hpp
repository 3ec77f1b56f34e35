#pragma once

#include <cmath>
#include <random>
#include <string>

#include "foresight/policy.hpp"
#include "foresight/rewardnet.hpp"

namespace foresight::test
{

inline DepthImage random_image(int w, int h, uint64_t seed, double max_height = 0.05, double res = 0.0025)
{
    DepthImage img(w, h, res);
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, max_height);
    for (double& v : img.data())
    {
        v = u(rng);
    }
    return img;
}

// Trained model checked into tests/data.
inline const ModelWeights& fixture_model()
{
    static const ModelWeights w = load_model(FORESIGHT_TEST_MODEL);
    return w;
}

inline Models fixture_models()
{
    Models m;
    m.reward = fixture_model();
    return m;
}

inline double rel_diff(double a, double b)
{
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

}  // namespace foresight::test
