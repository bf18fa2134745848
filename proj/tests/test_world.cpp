#include <cmath>
#include <numbers>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "flg/errors.hpp"
#include "flg/rng.hpp"
#include "flg/world.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace flg;
using testutil::rect_block;
using testutil::scene;

namespace {

double max_overlap(const WorldState& s) {
    double worst = 0.0;
    for (std::size_t a = 0; a < s.blocks.size(); ++a)
        for (std::size_t b = a + 1; b < s.blocks.size(); ++b)
            worst = std::max(worst, oracle::overlap_area(s.blocks[a].world_footprint(),
                                                         s.blocks[b].world_footprint()));
    return worst;
}

bool centroids_inside(const WorldState& s) {
    for (const auto& b : s.blocks)
        if (b.pose.x < s.bounds.xmin || b.pose.x > s.bounds.xmax || b.pose.y < s.bounds.ymin ||
            b.pose.y > s.bounds.ymax)
            return false;
    return true;
}

}  // namespace

TEST(Spawn, ZeroBlocksIsEmpty) {
    EXPECT_TRUE(is_empty(spawn_random_scene(0, 123)));
}

TEST(Spawn, SameSeedSameScene) {
    EXPECT_EQ(spawn_random_scene(10, 42), spawn_random_scene(10, 42));
    EXPECT_NE(spawn_random_scene(10, 42), spawn_random_scene(10, 43));
}

TEST(Spawn, BlocksDoNotOverlap) {
    const auto s = spawn_random_scene(10, 42);
    ASSERT_EQ(s.blocks.size(), 10u);
    EXPECT_LT(max_overlap(s), 1e-9);
    EXPECT_TRUE(centroids_inside(s));
}

TEST(Spawn, MaximumCountTerminates) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto s = spawn_random_scene(25, seed);
        ASSERT_EQ(s.blocks.size(), 25u) << "seed " << seed;
        EXPECT_LT(max_overlap(s), 1e-9);
    }
}

TEST(Spawn, OverMaximumIsRejected) {
    EXPECT_THROW(spawn_random_scene(26, 0), PlacementError);
    EXPECT_THROW(spawn_random_scene(-1, 0), OutOfRangeError);
}

TEST(Spawn, TinyBudgetFails) {
    WorldConfig cfg;
    cfg.placement_attempts = 3;
    EXPECT_THROW(spawn_random_scene(25, 0, cfg), PlacementError);
}

TEST(Preset, NoFeasibleGraspAnywhere) {
    const WorldConfig cfg;
    for (int v = 0; v < preset_count(); ++v) {
        const auto s = spawn_preset_clutter(v);
        int feasible = 0;
        for (int th = 0; th < kRotations; ++th)
            for (int y = 0; y < 64; ++y)
                for (int x = 0; x < 64; ++x) feasible += grasp_feasible(s, x + 0.5, y + 0.5, th, cfg);
        EXPECT_EQ(feasible, 0) << "variant " << v;
        EXPECT_LT(max_overlap(s), 1e-9);
    }
}

TEST(Preset, LibraryAndErrors) {
    EXPECT_GE(preset_count(), 3);
    EXPECT_EQ(spawn_preset_clutter(0).blocks.size(), 4u);
    EXPECT_EQ(spawn_preset_clutter(1), spawn_preset_clutter(1));
    EXPECT_THROW(spawn_preset_clutter(preset_count()), UnknownVariantError);
    EXPECT_THROW(spawn_preset_clutter(-1), UnknownVariantError);
}

TEST(GraspFeasible, IsolatedBlockAnyAngle) {
    const auto s = scene({rect_block(0, 32, 32, 8, 8, 0.3)});
    for (int th = 0; th < kRotations; ++th) EXPECT_TRUE(grasp_feasible(s, 32, 32, th)) << th;
    EXPECT_FALSE(grasp_feasible(s, 10, 10, 0));
}

// Finger rectangles built by hand for theta 0 (closing along x).
TEST(GraspFeasible, NeighbourAgainstFingerOracle) {
    const WorldConfig cfg;
    const double in = cfg.finger_span / 2, out = in + cfg.finger_width, half = cfg.finger_depth / 2;
    auto oracle_feasible = [&](const WorldState& s, double x, double y) {
        const oracle::Polygon right{{x + in, y - half}, {x + out, y - half}, {x + out, y + half}, {x + in, y + half}};
        const oracle::Polygon left{{x - out, y - half}, {x - in, y - half}, {x - in, y + half}, {x - out, y + half}};
        for (const auto& b : s.blocks) {
            const auto fp = b.world_footprint();
            if (oracle::overlap_area(fp, right) > 1e-9 || oracle::overlap_area(fp, left) > 1e-9) return false;
        }
        return true;
    };
    // Target spans x in [16, 24]. The right finger occupies [27, 31].
    for (double gap : {1.0, 2.0, 3.5, 7.5, 9.0}) {
        const auto s = scene({rect_block(0, 20, 32, 8, 8), rect_block(1, 24 + gap + 4, 32, 8, 8)});
        EXPECT_EQ(grasp_feasible(s, 20, 32, 0, cfg), oracle_feasible(s, 20, 32)) << "gap " << gap;
    }
    const auto tight = scene({rect_block(0, 20, 32, 8, 8), rect_block(1, 30, 32, 8, 8)});
    EXPECT_FALSE(grasp_feasible(tight, 20, 32, 0, cfg));
    const auto wide = scene({rect_block(0, 20, 32, 8, 8), rect_block(1, 36, 32, 8, 8)});
    EXPECT_TRUE(grasp_feasible(wide, 20, 32, 0, cfg));
}

TEST(Execute, GraspRemovesIsolatedBlock) {
    const auto s = scene({rect_block(7, 32, 32, 8, 8)});
    ActionPrimitive a{32, 32, 1, 3, Primitive::Grasp, std::nullopt};
    const auto res = execute(s, a);
    EXPECT_TRUE(res.outcome.grasp_success);
    ASSERT_TRUE(res.outcome.removed_block_id);
    EXPECT_EQ(*res.outcome.removed_block_id, 7);
    EXPECT_TRUE(is_empty(res.state));
}

TEST(Execute, PushMatchesSweepOracle) {
    const WorldConfig cfg;
    const auto s = scene({rect_block(0, 40, 32, 10, 10)});
    ActionPrimitive a{30, 32, 0, 0, Primitive::Move, std::nullopt};
    const auto res = execute(s, a, cfg);
    ASSERT_EQ(res.outcome.resolved_move, MoveKind::Push);
    const oracle::Polygon pusher{{28, 27}, {32, 27}, {32, 37}, {28, 37}};
    const double expected = oracle::sweep_push(pusher, s.blocks[0].world_footprint(), {1, 0}, cfg.push_length, 1e-3);
    EXPECT_NEAR(expected, 7.0, 2e-3);
    EXPECT_NEAR(res.state.blocks[0].pose.x - 40.0, expected, 2e-3);
    EXPECT_DOUBLE_EQ(res.state.blocks[0].pose.y, 32.0);
}

TEST(Execute, DiagonalPushMatchesSweepOracle) {
    const WorldConfig cfg;
    const auto s = scene({rect_block(0, 38, 38, 8, 8, 0.2)});
    const int th = 2;
    const double ang = rotation_angle(th);
    const oracle::Vec2 u{std::cos(ang), std::sin(ang)}, v{-u.y, u.x};
    const oracle::Vec2 p{29, 29};
    ActionPrimitive a{p.x, p.y, 0, th, Primitive::Move, std::nullopt};
    const auto res = execute(s, a, cfg);
    const double ht = cfg.pusher_thickness / 2, hw = cfg.pusher_width / 2;
    const oracle::Polygon pusher{p + (-ht) * u + (-hw) * v, p + ht * u + (-hw) * v, p + ht * u + hw * v,
                                 p + (-ht) * u + hw * v};
    const double expected = oracle::sweep_push(pusher, s.blocks[0].world_footprint(), u, cfg.push_length, 1e-3);
    ASSERT_GT(expected, 0.5);
    const double dx = res.state.blocks[0].pose.x - 38, dy = res.state.blocks[0].pose.y - 38;
    EXPECT_NEAR(std::hypot(dx, dy), expected, 2e-3);
}

TEST(Execute, ShiftMovesOnlyThatBlock) {
    const WorldConfig cfg;
    const auto s = scene({rect_block(0, 20, 20, 8, 8), rect_block(1, 45, 45, 8, 8)});
    ActionPrimitive a{20, 20, 1, 4, Primitive::Move, std::nullopt};
    const auto res = execute(s, a, cfg);
    ASSERT_EQ(res.outcome.resolved_move, MoveKind::Shift);
    EXPECT_NEAR(res.state.blocks[0].pose.x, 20.0, 1e-12);
    EXPECT_NEAR(res.state.blocks[0].pose.y, 20.0 + cfg.shift_offset, 1e-12);
    EXPECT_EQ(res.state.blocks[1], s.blocks[1]);
    EXPECT_EQ(res.outcome.moved_block_ids, std::vector<int>{0});
}

TEST(Execute, PushChainsThroughContact) {
    const auto s = scene({rect_block(0, 30, 32, 6, 6), rect_block(1, 36, 32, 6, 6)});
    ActionPrimitive a{24, 32, 0, 0, Primitive::Move, std::nullopt};
    const auto res = execute(s, a);
    EXPECT_EQ(res.outcome.moved_block_ids.size(), 2u);
    EXPECT_NEAR(res.state.blocks[0].pose.x - 30, res.state.blocks[1].pose.x - 36, 1e-6);
    EXPECT_LT(max_overlap(res.state), 1e-6);
}

TEST(Execute, PushClampsAtBoundary) {
    const auto s = scene({rect_block(0, 58, 32, 8, 8)});
    ActionPrimitive a{50, 32, 0, 0, Primitive::Move, std::nullopt};
    const auto res = execute(s, a);
    const auto fp = res.state.blocks[0].world_footprint();
    for (const auto& p : fp) EXPECT_LE(p.x, 64.0 + 1e-6);
}

TEST(Execute, RandomActionsKeepInvariants) {
    const WorldConfig cfg;
    Rng rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        auto s = spawn_random_scene(12, 1000 + trial);
        for (int k = 0; k < 10; ++k) {
            ActionPrimitive a;
            a.x = rng.uniform(1.0, 63.0);
            a.y = rng.uniform(1.0, 63.0);
            a.theta_index = static_cast<int>(rng.below(kRotations));
            a.phi = rng.bernoulli(0.5) ? Primitive::Grasp : Primitive::Move;
            const bool feasible = grasp_feasible(s, a.x, a.y, a.theta_index, cfg);
            const auto r1 = execute(s, a, cfg);
            const auto r2 = execute(s, a, cfg);
            ASSERT_EQ(r1.state, r2.state);
            if (a.phi == Primitive::Grasp) {
                EXPECT_EQ(feasible, r1.outcome.grasp_success);
                EXPECT_EQ(r1.state.blocks.size(), s.blocks.size() - (feasible ? 1 : 0));
            } else {
                EXPECT_EQ(r1.state.blocks.size(), s.blocks.size());
                EXPECT_FALSE(r1.outcome.removed_block_id);
            }
            EXPECT_TRUE(centroids_inside(r1.state));
            EXPECT_LE(max_penetration(r1.state), cfg.resolution_eps);
            EXPECT_LT(max_overlap(r1.state), 1e-4);
            s = r1.state;
        }
    }
}

TEST(Scene, JsonRoundTrip) {
    const auto s = spawn_random_scene(6, 5);
    const WorldState back = nlohmann::json(s).get<WorldState>();
    EXPECT_EQ(back, s);
    nlohmann::json bad = s;
    bad["schema"] = "other";
    EXPECT_THROW(bad.get<WorldState>(), FormatError);
}

TEST(Rotation, AngleTable) {
    EXPECT_DOUBLE_EQ(rotation_angle(0), 0.0);
    EXPECT_DOUBLE_EQ(rotation_angle(4), std::numbers::pi / 2);
    EXPECT_DOUBLE_EQ(rotation_angle(8), std::numbers::pi);
}
