#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "foresight/imagecore.hpp"
#include "foresight/pgm_io.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace foresight;

namespace
{

bool in_footprint(const ImageGeometry& g, const PlanarPose& pose, int n, int c, int r)
{
    const double dx = c - (pose.x / g.resolution - 0.5);
    const double dy = r - (pose.y / g.resolution - 0.5);
    const double u = std::cos(pose.a) * dx + std::sin(pose.a) * dy;
    const double v = -std::sin(pose.a) * dx + std::cos(pose.a) * dy;
    return std::abs(u) <= 0.5 * n + 1e-9 && std::abs(v) <= 0.5 * n + 1e-9;
}

}  // namespace

TEST_SUITE("imagecore")
{
    TEST_CASE("pose at the image center maps to a pure translation")
    {
        const ImageGeometry g{160, 120, 0.0025};
        const AffineMap m = pose_to_affine(PlanarPose(0.2, 0.15, 0.0), g);
        CHECK(m.m[0] == 1.0);
        CHECK(m.m[1] == 0.0);
        CHECK(m.m[3] == 0.0);
        CHECK(m.m[4] == 1.0);
        CHECK(m.m[2] == doctest::Approx(79.5));
        CHECK(m.m[5] == doctest::Approx(59.5));
    }

    TEST_CASE("quarter turn maps the window x axis onto the image y axis")
    {
        const ImageGeometry g{160, 120, 0.0025};
        const AffineMap m = pose_to_affine(PlanarPose(0.1, 0.1, std::numbers::pi / 2), g);
        const auto o = m.apply(0, 0);
        const auto e = m.apply(1, 0);
        CHECK(e[0] - o[0] == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(e[1] - o[1] == doctest::Approx(1.0));
    }

    TEST_CASE("affine map composed with its inverse is the identity")
    {
        const ImageGeometry g{160, 120, 0.0025};
        Rng rng(11);
        std::uniform_real_distribution<double> ux(0.0, 0.4), ua(-4.0, 4.0);
        for (int k = 0; k < 50; ++k)
        {
            const AffineMap m = pose_to_affine(PlanarPose(ux(rng), ux(rng), ua(rng)), g);
            const AffineMap id = m.compose(m.inverse());
            const AffineMap ref;
            for (int i = 0; i < 6; ++i)
            {
                CHECK(std::abs(id.m[i] - ref.m[i]) < 1e-9);
            }
        }
    }

    TEST_CASE("angles are normalized to [-pi, pi)")
    {
        CHECK(normalize_angle(std::numbers::pi) == doctest::Approx(-std::numbers::pi));
        CHECK(normalize_angle(3 * std::numbers::pi / 2) == doctest::Approx(-std::numbers::pi / 2));
        CHECK(PlanarPose(0, 0, -7.0).a >= -std::numbers::pi);
        CHECK(PlanarPose(0, 0, 7.0).a < std::numbers::pi);
    }

    TEST_CASE("single bright pixel lands at the window center")
    {
        DepthImage img(5, 5, 0.01);
        img.at(2, 2) = 0.03;
        const DepthImage w = crop_window(img, PlanarPose(0.025, 0.025, 0.0), WindowSpec{3});
        for (int j = 0; j < 3; ++j)
        {
            for (int i = 0; i < 3; ++i)
            {
                CHECK(w.at(i, j) == ((i == 1 && j == 1) ? 0.03 : 0.0));
                CHECK(w.valid(i, j));
            }
        }
    }

    TEST_CASE("axis-aligned crop is an exact pixel copy")
    {
        const DepthImage img = test::random_image(160, 120, 3);
        // Even window: the pose sits on a pixel corner.
        const DepthImage w = crop_window(img, PlanarPose(40 * 0.0025, 30 * 0.0025, 0.0), WindowSpec{32});
        for (int j = 0; j < 32; ++j)
        {
            for (int i = 0; i < 32; ++i)
            {
                REQUIRE(w.at(i, j) == img.at(24 + i, 14 + j));
            }
        }
    }

    TEST_CASE("rotated crop equals the pixelwise oracle")
    {
        const DepthImage img = test::random_image(160, 120, 5);
        Rng rng(6);
        std::uniform_real_distribution<double> ux(-0.02, 0.42), uy(-0.02, 0.32), ua(-3.2, 3.2);
        double worst = 0.0;
        for (int k = 0; k < 100; ++k)
        {
            const PlanarPose pose = k == 0 ? PlanarPose(0.2, 0.15, std::numbers::pi / 6)
                                           : PlanarPose(ux(rng), uy(rng), ua(rng));
            const int n = k % 2 ? 32 : 64;
            const DepthImage w = crop_window(img, pose, WindowSpec{n});
            for (int j = 0; j < n; ++j)
            {
                for (int i = 0; i < n; ++i)
                {
                    const auto [v, ok] = test::oracle_sample(img, pose, n, i, j);
                    REQUIRE(w.valid(i, j) == ok);
                    worst = std::max(worst, std::abs(w.at(i, j) - v));
                }
            }
        }
        CHECK(worst < 1e-12);
    }

    TEST_CASE("crop then patch restores the image bit-exactly at aligned poses")
    {
        const DepthImage img = test::random_image(160, 120, 8);
        for (const auto& [c, r, n] : {std::tuple{40, 30, 32}, {100, 60, 64}, {17, 90, 32}})
        {
            const PlanarPose pose(c * 0.0025, r * 0.0025, 0.0);
            const DepthImage w = crop_window(img, pose, WindowSpec{n});
            CHECK(patch_window(img, w, pose) == img);
        }
    }

    TEST_CASE("constant region survives a rotated roundtrip")
    {
        DepthImage img(160, 120, 0.0025);
        for (double& v : img.data())
        {
            v = 0.02;
        }
        const PlanarPose pose(0.2, 0.15, 0.4);
        const DepthImage out = patch_window(img, crop_window(img, pose, WindowSpec{32}), pose);
        for (size_t i = 0; i < img.data().size(); ++i)
        {
            REQUIRE(std::abs(out.data()[i] - 0.02) < 1e-15);
        }
    }

    TEST_CASE("all-invalid window leaves the image unchanged")
    {
        const DepthImage img = test::random_image(160, 120, 9);
        DepthImage w(32, 32, 0.0025);
        for (auto& m : w.valid_mask())
        {
            m = 0;
        }
        CHECK(patch_window(img, w, PlanarPose(0.2, 0.15, 0.3)) == img);
    }

    TEST_CASE("rotated patch only touches the footprint")
    {
        const DepthImage img(160, 120, 0.0025);
        DepthImage w(32, 32, 0.0025);
        for (double& v : w.data())
        {
            v = 1.0;
        }
        for (const PlanarPose pose : {PlanarPose(0.2, 0.15, 0.7), PlanarPose(0.03, 0.28, -2.0), PlanarPose(0.1, 0.1, 1.1)})
        {
            const DepthImage out = patch_window(img, w, pose);
            const auto fp = window_footprint(img.geometry(), pose, 32);
            int changed = 0;
            for (int r = 0; r < img.height(); ++r)
            {
                for (int c = 0; c < img.width(); ++c)
                {
                    const bool inside = in_footprint(img.geometry(), pose, 32, c, r);
                    CHECK(static_cast<bool>(fp[img.index(c, r)]) == inside);
                    if (out.at(c, r) != 0.0)
                    {
                        ++changed;
                        REQUIRE(inside);
                    }
                }
            }
            CHECK(changed > 0);
        }
    }

    TEST_CASE("zero window variance pads to a zero image")
    {
        const ImageGeometry g{160, 120, 0.0025};
        const UncertaintyImage v({64, 64, 0.0025}, 0.0);
        CHECK(zero_pad_uncertainty(v, PlanarPose(0.2, 0.15, 0.5), g).all_zero());
    }

    TEST_CASE("uniform window variance conserves mass and stays in the footprint")
    {
        const ImageGeometry g{160, 120, 0.0025};
        const double v = 3e-6;
        const UncertaintyImage win({64, 64, 0.0025}, v);
        Rng rng(12);
        std::uniform_real_distribution<double> ux(0.09, 0.31), uy(0.09, 0.21), ua(-3.2, 3.2);
        for (int k = 0; k < 20; ++k)
        {
            const PlanarPose pose(ux(rng), uy(rng), ua(rng));
            const UncertaintyImage out = zero_pad_uncertainty(win, pose, g);
            CHECK(std::abs(out.sum() / (v * 64 * 64) - 1.0) < 0.02);
            for (int r = 0; r < g.height_px; ++r)
            {
                for (int c = 0; c < g.width_px; ++c)
                {
                    CHECK(out.at(c, r) >= 0.0);
                    if (!in_footprint(g, pose, 64, c, r))
                    {
                        REQUIRE(out.at(c, r) == 0.0);
                    }
                }
            }
        }
    }

    TEST_CASE("footprint partly outside the image is clipped")
    {
        const ImageGeometry g{160, 120, 0.0025};
        const double v = 1e-6;
        const UncertaintyImage win({64, 64, 0.0025}, v);
        const PlanarPose pose(0.01, 0.01, 0.3);
        const UncertaintyImage out = zero_pad_uncertainty(win, pose, g);
        int inside = 0;
        for (int r = 0; r < g.height_px; ++r)
        {
            for (int c = 0; c < g.width_px; ++c)
            {
                inside += in_footprint(g, pose, 64, c, r) ? 1 : 0;
            }
        }
        CHECK(out.sum() < 0.5 * v * 64 * 64);
        CHECK(std::abs(out.sum() / (v * inside) - 1.0) < 0.05);
    }

    TEST_CASE("negative valid heights fail the invariant check")
    {
        DepthImage img(4, 4, 0.01);
        img.at(1, 1) = -0.01;
        CHECK_THROWS_AS(img.check_invariants(), Error);
        img.set_valid(1, 1, false);
        CHECK_NOTHROW(img.check_invariants());
    }

    TEST_CASE("16-bit PGM roundtrip keeps heights to quantization and the invalid mask")
    {
        DepthImage img = test::random_image(20, 10, 4, 0.08);
        img.set_valid(3, 4, false);
        img.at(3, 4) = 0.0;
        const auto path = std::filesystem::temp_directory_path() / "foresight_pgm_roundtrip.pgm";
        write_depth_pgm(path, img, 0.1);
        const DepthImage back = read_depth_pgm(path);
        REQUIRE(back.geometry() == img.geometry());
        for (int r = 0; r < img.height(); ++r)
        {
            for (int c = 0; c < img.width(); ++c)
            {
                CHECK(back.valid(c, r) == img.valid(c, r));
                if (img.valid(c, r))
                {
                    CHECK(std::abs(back.at(c, r) - img.at(c, r)) <= 0.1 / 65535);
                }
            }
        }
        std::filesystem::remove(path);
        std::filesystem::remove(sidecar_path(path));
    }
}
