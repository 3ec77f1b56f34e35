#include <doctest.h>

#include <cmath>

#include "foresight/reward_field.hpp"
#include "test_support.hpp"

using namespace foresight;

TEST_SUITE("reward_field")
{
    TEST_CASE("every map cell equals the model on its cropped window")
    {
        const ModelWeights& w = test::fixture_model();
        const DepthImage img = test::random_image(64, 48, 21);
        const RewardMap m = forward_full(w, img, 4);
        double worst = 0.0;
        for (size_t i = 0; i < m.size(); ++i)
        {
            const MapCell c = m.layout->cell(i);
            if (c.p != 0)
            {
                continue;
            }
            const auto all = forward_window_all(w, crop_window(img, m.layout->pose(i), WindowSpec::reward()));
            for (int p = 0; p < w.output_channels(); ++p)
            {
                worst = std::max(worst, std::abs(all[static_cast<size_t>(p)] - m.at(c.r, p, c.oy, c.ox)));
            }
        }
        CHECK(worst < 1e-6);
    }

    TEST_CASE("whole-stride translation shifts the heatmap")
    {
        const ModelWeights& w = test::fixture_model();
        const DepthImage a = test::random_image(96, 64, 22);
        DepthImage b(96, 64, a.resolution());
        for (int r = 0; r < 64; ++r)
        {
            for (int c = 4; c < 96; ++c)
            {
                b.at(c, r) = a.at(c - 4, r);
            }
        }
        const RewardMap ma = forward_full(w, a, 1);
        const RewardMap mb = forward_full(w, b, 1);
        const RotationGrid& g = ma.layout->grids[0];
        int compared = 0;
        for (int p = 0; p < w.output_channels(); ++p)
        {
            for (int oy = 0; oy < g.ny; ++oy)
            {
                for (int ox = 0; ox + 1 < g.nx; ++ox)
                {
                    // Only cells whose field lies fully inside both images.
                    const PlanarPose pose = ma.layout->pose(0, oy, ox);
                    const double px = pose.x / a.resolution() - 0.5;
                    const double py = pose.y / a.resolution() - 0.5;
                    if (px - 15.5 < 0 || px + 15.5 + 4 > 95 || py - 15.5 < 0 || py + 15.5 > 63)
                    {
                        continue;
                    }
                    CHECK(std::abs(ma.at(0, p, oy, ox) - mb.at(0, p, oy, ox + 1)) < 1e-12);
                    ++compared;
                }
            }
        }
        CHECK(compared > 0);
    }

    TEST_CASE("images narrower than the field are rejected")
    {
        try
        {
            (void)forward_full(test::fixture_model(), DepthImage(20, 64, 0.0025), 4);
            FAIL("no throw");
        }
        catch (const Error& e)
        {
            CHECK(e.code() == ErrorCode::ImageTooSmall);
        }
    }

    TEST_CASE("linear index and cell decomposition agree")
    {
        const auto layout = layout_for(test::fixture_model(), ImageGeometry{160, 120, 0.0025}, 16);
        for (size_t i = 0; i < layout->size(); i += 97)
        {
            const MapCell c = layout->cell(i);
            CHECK(layout->index(c.r, c.p, c.oy, c.ox) == i);
        }
        CHECK_THROWS_AS(layout->cell(layout->size()), Error);
    }

    TEST_CASE("rotation 0 cells sit on pixel centers or corners at the stride")
    {
        const auto layout = layout_for(test::fixture_model(), ImageGeometry{160, 120, 0.0025}, 16);
        const PlanarPose a = layout->pose(0, 3, 3);
        const PlanarPose b = layout->pose(0, 3, 4);
        CHECK(b.x - a.x == doctest::Approx(4 * 0.0025));
        CHECK(b.y == doctest::Approx(a.y));
        CHECK(layout->grids[5].angle == doctest::Approx(5 * std::numbers::pi / 16));
    }

    TEST_CASE("valid region marks cells outside as invalid")
    {
        const AxisBox box{0.05, 0.05, 0.35, 0.25};
        const auto layout = layout_for(test::fixture_model(), ImageGeometry{160, 120, 0.0025}, 4, box);
        size_t valid = 0;
        for (size_t i = 0; i < layout->size(); ++i)
        {
            const PlanarPose p = layout->pose(i);
            const bool in = p.x >= box.x0 && p.x <= box.x1 && p.y >= box.y0 && p.y <= box.y1;
            CHECK(static_cast<bool>(layout->valid[i]) == in);
            valid += in ? 1 : 0;
        }
        CHECK(valid > 0);
        CHECK(valid < layout->size());
    }

    TEST_CASE("all map values are probabilities")
    {
        const RewardMap m = forward_full(test::fixture_model(), test::random_image(160, 120, 23), 16);
        for (double v : m.values)
        {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
        }
    }
}
