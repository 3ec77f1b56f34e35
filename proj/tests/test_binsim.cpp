#include <doctest.h>

#include <cmath>
#include <numbers>

#include "foresight/binsim.hpp"
#include "test_support.hpp"

using namespace foresight;

namespace
{

SceneState one_cube(double x, double y, double size = 0.025, double yaw = 0.0)
{
    SceneState s;
    Cuboid c;
    c.x = x;
    c.y = y;
    c.yaw = yaw;
    c.lx = c.ly = c.lz = size;
    s.objects.push_back(c);
    return s;
}

double interior_mass(const SceneState& s)
{
    const DepthImage img = render_depth(s);
    const AxisBox box = s.bin.interior();
    const ImageGeometry& g = img.geometry();
    double m = 0.0;
    for (int r = 0; r < img.height(); ++r)
    {
        for (int c = 0; c < img.width(); ++c)
        {
            const double x = g.to_meter_x(c);
            const double y = g.to_meter_y(r);
            if (x > box.x0 && x < box.x1 && y > box.y0 && y < box.y1)
            {
                m += img.at(c, r);
            }
        }
    }
    return m;
}

bool pairwise_disjoint(const SceneState& s)
{
    for (size_t i = 0; i < s.objects.size(); ++i)
    {
        for (size_t j = i + 1; j < s.objects.size(); ++j)
        {
            const Cuboid& a = s.objects[i];
            const Cuboid& b = s.objects[j];
            const bool z_sep = a.top() <= b.z + 1e-12 || b.top() <= a.z + 1e-12;
            if (!z_sep && overlaps(a.footprint(), b.footprint(), 1e-7))
            {
                return false;
            }
        }
    }
    return true;
}

}  // namespace

TEST_SUITE("binsim")
{
    TEST_CASE("empty bin renders a zero interior and walls at wall height")
    {
        const SceneState s;
        const DepthImage img = render_depth(s);
        CHECK(img.width() == 160);
        CHECK(img.height() == 120);
        CHECK(interior_mass(s) == 0.0);
        CHECK(img.at(0, 0) == s.bin.wall_height);
        CHECK(img.at(80, 60) == 0.0);
    }

    TEST_CASE("axis-aligned 2.5 cm cube covers 10x10 pixels")
    {
        // Edges on pixel boundaries: x in [0.1, 0.125].
        const SceneState s = one_cube(0.1125, 0.1125);
        const DepthImage img = render_depth(s);
        int covered = 0;
        for (int r = 0; r < img.height(); ++r)
        {
            for (int c = 0; c < img.width(); ++c)
            {
                if (img.at(c, r) == 0.025)
                {
                    ++covered;
                    CHECK(c >= 40);
                    CHECK(c < 50);
                    CHECK(r >= 40);
                    CHECK(r < 50);
                }
            }
        }
        CHECK(covered == 100);
    }

    TEST_CASE("overlapping footprints take the larger height")
    {
        SceneState s = one_cube(0.15, 0.15, 0.03);
        Cuboid top;
        top.x = 0.155;
        top.y = 0.15;
        top.lx = top.ly = 0.02;
        top.lz = 0.01;
        top.z = 0.03;
        s.objects.push_back(top);
        const DepthImage img = render_depth(s);
        const ImageGeometry& g = img.geometry();
        CHECK(img.at(static_cast<int>(g.to_pixel_x(0.155)), static_cast<int>(g.to_pixel_y(0.15))) ==
              doctest::Approx(0.04));
        CHECK(img.at(static_cast<int>(g.to_pixel_x(0.137)), static_cast<int>(g.to_pixel_y(0.15))) ==
              doctest::Approx(0.03));
    }

    TEST_CASE("centered grasp on an isolated cube succeeds")
    {
        const SceneState s = one_cube(0.2, 0.15);
        Rng rng(1);
        const PrimitiveOutcome out = exec_grasp(s, PlanarPose(0.2, 0.15, 0.0), SimConfig{}.grasp(0), rng);
        CHECK(out.reward == 1.0);
        CHECK(out.grasped_count == 1);
        CHECK(out.final_gripper_width == doctest::Approx(0.025));
        CHECK(out.next_scene.objects.empty());
        CHECK(interior_mass(out.next_scene) < interior_mass(s));
    }

    TEST_CASE("grasp wider than the opening fails")
    {
        const SceneState s = one_cube(0.2, 0.15, 0.035);
        Rng rng(1);
        const PrimitiveOutcome out = exec_grasp(s, PlanarPose(0.2, 0.15, 0.0), SimConfig{}.grasp(0), rng);
        CHECK(out.reward == 0.0);
        CHECK(out.grasped_count == 0);
        const PrimitiveOutcome wide = exec_grasp(s, PlanarPose(0.2, 0.15, 0.0), SimConfig{}.grasp(1), rng);
        CHECK(wide.reward == 1.0);
    }

    TEST_CASE("grasp over empty floor leaves the scene unchanged")
    {
        const SceneState s = one_cube(0.1, 0.1);
        Rng rng(1);
        for (int p = 0; p < kNumGraspPrimitives; ++p)
        {
            const PrimitiveOutcome out = exec_grasp(s, PlanarPose(0.3, 0.2, 0.3), SimConfig{}.grasp(p), rng);
            CHECK(out.reward == 0.0);
            CHECK(out.next_scene.objects[0].x == s.objects[0].x);
            CHECK(out.next_scene.objects[0].y == s.objects[0].y);
        }
    }

    TEST_CASE("finger footprint on the wall means collision")
    {
        // Cube flush with the x0 wall, fingers closing along x.
        const SceneState s = one_cube(0.03 + 0.0125, 0.15);
        const GraspCheck along_x = check_grasp(s, PlanarPose(0.0425, 0.15, 0.0), SimConfig{}.grasp(0));
        CHECK(along_x.collision);
        CHECK_FALSE(along_x.success);
        const GraspCheck along_y = check_grasp(s, PlanarPose(0.0425, 0.15, std::numbers::pi / 2), SimConfig{}.grasp(0));
        CHECK_FALSE(along_y.collision);
        CHECK(along_y.success);
        Rng rng(2);
        CHECK(exec_grasp(s, PlanarPose(0.0425, 0.15, 0.0), SimConfig{}.grasp(0), rng).reward == 0.0);
    }

    TEST_CASE("two cubes between the fingers are captured together")
    {
        SceneState s = one_cube(0.2, 0.15, 0.02);
        Cuboid b = s.objects[0];
        b.x = 0.2 + 0.021;
        b.id = 1;
        s.objects.push_back(b);
        Rng rng(3);
        const PrimitiveOutcome out = exec_grasp(s, PlanarPose(0.2105, 0.15, 0.0), SimConfig{}.grasp(2), rng);
        CHECK(out.reward == 1.0);
        CHECK(out.grasped_count == 2);
        CHECK(out.final_gripper_width == doctest::Approx(0.041));
    }

    TEST_CASE("actions outside the interior throw PoseOutOfBin")
    {
        const SceneState s;
        Rng rng(1);
        try
        {
            (void)exec_grasp(s, PlanarPose(0.01, 0.15, 0.0), SimConfig{}.grasp(0), rng);
            FAIL("no throw");
        }
        catch (const Error& e)
        {
            CHECK(e.code() == ErrorCode::PoseOutOfBin);
        }
        CHECK_THROWS_AS((void)exec_shift(s, PlanarPose(0.2, 0.29, 0.0), SimConfig{}.shift(4), rng), Error);
    }

    TEST_CASE("shift over empty floor has zero reward")
    {
        const SceneState s = one_cube(0.1, 0.1);
        Rng rng(4);
        const PrimitiveOutcome out = exec_shift(s, PlanarPose(0.3, 0.2, 0.0), SimConfig{}.shift(4), rng);
        CHECK(out.reward == 0.0);
        CHECK(out.next_scene.objects[0].x == s.objects[0].x);
    }

    TEST_CASE("cube in a corner becomes graspable when shifted out")
    {
        const SceneState s = one_cube(0.03 + 0.0125, 0.03 + 0.0125);
        REQUIRE_FALSE(object_graspable(s, 0));
        Rng rng(5);
        const PrimitiveOutcome out =
            exec_shift(s, PlanarPose(0.046, 0.046, std::numbers::pi / 4), SimConfig{}.noiseless().shift(4), rng);
        CHECK(out.reward > 0.0);
        CHECK(object_graspable(out.next_scene, 0));
    }

    TEST_CASE("pushed cubes end in contact without interpenetration")
    {
        SceneState s = one_cube(0.15, 0.15);
        Cuboid b = s.objects[0];
        b.id = 1;
        b.x = 0.19;
        s.objects.push_back(b);
        Rng rng(6);
        SimConfig cfg;
        cfg.shift_travel = 0.05;
        const PrimitiveOutcome out = exec_shift(s, PlanarPose(0.13, 0.15, 0.0), cfg.noiseless().shift(4), rng, cfg);
        CHECK(out.next_scene.objects[0].x > 0.15 + 0.01);
        CHECK(out.next_scene.objects[1].x > 0.19 + 0.001);
        CHECK(pairwise_disjoint(out.next_scene));
        CHECK_NOTHROW(out.next_scene.check_invariants());
    }

    TEST_CASE("random actions keep scenes valid, rewards in range")
    {
        ScenarioSpec spec;
        spec.count = 25;
        Rng rng(7);
        SceneState s = spawn_scenario(spec, rng);
        const AxisBox box = s.bin.interior();
        std::uniform_real_distribution<double> ux(box.x0, box.x1), uy(box.y0, box.y1), ua(-3.1, 3.1);
        std::uniform_int_distribution<int> up(0, 5);
        for (int k = 0; k < 300; ++k)
        {
            const int p = up(rng);
            const PrimitiveOutcome out = execute(s, PlanarPose(ux(rng), uy(rng), ua(rng)), p, rng);
            if (is_grasp(p))
            {
                CHECK((out.reward == 0.0 || out.reward == 1.0));
                CHECK((out.grasped_count == 0) == (out.reward == 0.0));
                if (out.reward == 1.0)
                {
                    CHECK(interior_mass(out.next_scene) < interior_mass(s));
                }
            }
            else
            {
                CHECK(out.reward >= 0.0);
                CHECK(out.reward <= 1.0);
            }
            REQUIRE_NOTHROW(out.next_scene.check_invariants());
            REQUIRE(pairwise_disjoint(out.next_scene));
            s = out.next_scene;
        }
    }

    TEST_CASE("actions the gripper cannot fit do nothing")
    {
        ScenarioSpec spec;
        spec.count = 30;
        Rng rng(8);
        const SceneState s = spawn_scenario(spec, rng);
        const AxisBox box = s.bin.interior();
        std::uniform_real_distribution<double> ux(box.x0, box.x1), uy(box.y0, box.y1), ua(-3.1, 3.1);
        int tried = 0;
        for (int k = 0; k < 4000 && tried < 200; ++k)
        {
            const PlanarPose pose(ux(rng), uy(rng), ua(rng));
            const int p = k % kNumPrimitives;
            if (primitive_fits(s.bin, pose, p))
            {
                continue;
            }
            ++tried;
            const PrimitiveOutcome out = execute(s, pose, p, rng, SimConfig{}.noiseless());
            CHECK(out.reward == 0.0);
            if (!is_grasp(p))
            {
                for (size_t i = 0; i < s.objects.size(); ++i)
                {
                    CHECK(out.next_scene.objects[i].x == s.objects[i].x);
                    CHECK(out.next_scene.objects[i].y == s.objects[i].y);
                }
            }
        }
        CHECK(tried == 200);
    }

    TEST_CASE("row3 spawns three collinear cubes at a wall")
    {
        for (uint64_t seed = 0; seed < 30; ++seed)
        {
            ScenarioSpec spec;
            spec.kind = ScenarioKind::row3;
            Rng rng(seed);
            const SceneState s = spawn_scenario(spec, rng);
            REQUIRE(s.objects.size() == 3);
            const Cuboid& a = s.objects[0];
            const Cuboid& b = s.objects[1];
            const Cuboid& c = s.objects[2];
            CHECK(std::abs((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)) < 1e-12);
            const AxisBox box = s.bin.interior();
            double wall = 1.0;
            for (const Cuboid& o : s.objects)
            {
                const double h = 0.5 * o.lx;
                wall = std::min({wall, o.x - h - box.x0, box.x1 - o.x - h, o.y - h - box.y0, box.y1 - o.y - h});
            }
            CHECK(wall >= 0.0);
            CHECK(wall < 0.01);
            CHECK(pairwise_disjoint(s));
        }
    }

    TEST_CASE("bbt with zero count is empty and seeded spawns repeat")
    {
        ScenarioSpec spec;
        spec.count = 0;
        Rng rng(1);
        CHECK(spawn_scenario(spec, rng).objects.empty());
        spec.count = 30;
        Rng r1(42), r2(42);
        const SceneState s1 = spawn_scenario(spec, r1);
        const SceneState s2 = spawn_scenario(spec, r2);
        nlohmann::json j1 = s1, j2 = s2;
        CHECK(j1.dump() == j2.dump());
        CHECK(s1.objects.size() == 30);
        CHECK(pairwise_disjoint(s1));
    }

    TEST_CASE("mixed scenes and stacked bbt scenes satisfy the invariants")
    {
        for (uint64_t seed = 0; seed < 10; ++seed)
        {
            ScenarioSpec spec;
            spec.kind = ScenarioKind::mixed;
            spec.count = 12;
            Rng rng(seed);
            CHECK_NOTHROW(spawn_scenario(spec, rng).check_invariants());
            spec.kind = ScenarioKind::bbt;
            spec.stack_fraction = 0.2;
            CHECK_NOTHROW(spawn_scenario(spec, rng).check_invariants());
        }
    }

    TEST_CASE("overfull bin reports PackingFailure")
    {
        ScenarioSpec spec;
        spec.count = 400;
        Rng rng(1);
        try
        {
            (void)spawn_scenario(spec, rng);
            FAIL("no throw");
        }
        catch (const Error& e)
        {
            CHECK(e.code() == ErrorCode::PackingFailure);
        }
    }

    TEST_CASE("sensor model: identity, dropout and noise level")
    {
        ScenarioSpec spec;
        spec.count = 10;
        Rng rng(9);
        const SceneState s = spawn_scenario(spec, rng);
        CHECK(measure(s, NoiseConfig{}, rng) == render_depth(s));
        const DepthImage dropped = measure(s, NoiseConfig{0.0, 1.0}, rng);
        for (uint8_t v : dropped.valid_mask())
        {
            REQUIRE(v == 0);
        }
        // A pixel on a cube top, far from the zero clamp.
        const DepthImage clean = render_depth(s);
        const ImageGeometry& g = clean.geometry();
        const int c = static_cast<int>(g.to_pixel_x(s.objects[0].x));
        const int r = static_cast<int>(g.to_pixel_y(s.objects[0].y));
        double sum = 0.0, sq = 0.0;
        const int n = 1000;
        for (int k = 0; k < n; ++k)
        {
            const double d = measure(s, NoiseConfig{0.001, 0.0}, rng).at(c, r) - clean.at(c, r);
            sum += d;
            sq += d * d;
        }
        const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
        CHECK(sd > 0.0009);
        CHECK(sd < 0.0011);
    }

    TEST_CASE("fixed rng makes execution deterministic")
    {
        ScenarioSpec spec;
        Rng rs(3);
        const SceneState s = spawn_scenario(spec, rs);
        Rng a(17), b(17);
        const PrimitiveOutcome oa = execute(s, PlanarPose(0.2, 0.15, 0.2), 4, a);
        const PrimitiveOutcome ob = execute(s, PlanarPose(0.2, 0.15, 0.2), 4, b);
        nlohmann::json ja = oa.next_scene, jb = ob.next_scene;
        CHECK(ja.dump() == jb.dump());
        CHECK(oa.reward == ob.reward);
    }

    TEST_CASE("scene JSON roundtrip")
    {
        ScenarioSpec spec;
        spec.kind = ScenarioKind::mixed;
        spec.count = 5;
        Rng rng(2);
        const SceneState s = spawn_scenario(spec, rng);
        const nlohmann::json j = s;
        const SceneState back = j.get<SceneState>();
        CHECK(nlohmann::json(back).dump() == j.dump());
    }

    TEST_CASE("derived seeds differ per stream and repeat per call")
    {
        CHECK(derive_seed(1, 2) == derive_seed(1, 2));
        CHECK(derive_seed(1, 2) != derive_seed(1, 3));
        CHECK(derive_seed(1, 2) != derive_seed(2, 2));
    }
}
