#include <gtest/gtest.h>

#include "flg/errors.hpp"
#include "flg/perception.hpp"
#include "flg/rng.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace flg;
using testutil::rect_block;
using testutil::scene;

namespace {

BinaryMap random_mask(Rng& rng, int w, int h, double density) {
    BinaryMap m(w, h);
    for (auto& c : m.cells) c = rng.bernoulli(density) ? 1 : 0;
    return m;
}

}  // namespace

TEST(Render, EmptyWorldIsFlat) {
    const auto hm = render_heightmap(WorldState{}, PerceptionConfig{});
    ASSERT_EQ(hm.cells.size(), 64u * 64u);
    for (float v : hm.cells) EXPECT_EQ(v, 0.0f);
}

TEST(Render, SingleBlockMatchesPointInPolygon) {
    const auto s = scene({rect_block(0, 40.2, 32.3, 10, 10)});
    const auto hm = render_heightmap(s, PerceptionConfig{});
    EXPECT_EQ(hm.cells, oracle::rasterize(s, 64).cells);
    long ones = 0;
    for (float v : hm.cells) ones += v == 1.0f;
    EXPECT_EQ(ones, 100);
}

TEST(Render, RandomScenesMatchOracle) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto s = spawn_random_scene(15, seed);
        EXPECT_EQ(render_heightmap(s, PerceptionConfig{}).cells, oracle::rasterize(s, 64).cells) << seed;
    }
}

TEST(Binarize, Cases) {
    const auto s = scene({rect_block(0, 20.3, 20.1, 7, 9, 0.4)});
    const auto hm = render_heightmap(s, PerceptionConfig{});
    EXPECT_EQ(binarize(hm, 0.005), oracle::threshold(oracle::rasterize(s, 64), 0.005));
    EXPECT_EQ(binarize(hm, 2.0).count(), 0);
    EXPECT_EQ(binarize(render_heightmap(WorldState{}, PerceptionConfig{}), 0.005).count(), 0);
    // Raising the floor never adds ones.
    const auto lo = binarize(hm, 0.1), hi = binarize(hm, 0.9);
    for (std::size_t i = 0; i < lo.cells.size(); ++i) EXPECT_LE(hi.cells[i], lo.cells[i]);
}

TEST(Dilate, SinglePixelSquare) {
    BinaryMap m(64, 64);
    m.at(10, 10) = 1;
    const auto d = dilate(m, 2);
    EXPECT_EQ(d.count(), 25);
    for (int y = 8; y <= 12; ++y)
        for (int x = 8; x <= 12; ++x) EXPECT_EQ(d.at(x, y), 1);
    EXPECT_EQ(d, oracle::dilate_scan(m, 2));
}

TEST(Dilate, IdentityAndFixedPoint) {
    Rng rng(3);
    const auto m = random_mask(rng, 32, 32, 0.1);
    EXPECT_EQ(dilate(m, 0), m);
    const BinaryMap ones(20, 20, 1);
    EXPECT_EQ(dilate(ones, 3), ones);
}

TEST(Dilate, RandomMasksMatchScanAndCompose) {
    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const auto m = random_mask(rng, 40, 33, 0.03);
        const int a = static_cast<int>(rng.below(4)), b = static_cast<int>(rng.below(4));
        const auto da = dilate(m, a);
        EXPECT_EQ(da, oracle::dilate_scan(m, a));
        EXPECT_EQ(dilate(da, b), dilate(m, a + b));
        for (std::size_t i = 0; i < m.cells.size(); ++i) EXPECT_GE(da.cells[i], m.cells[i]);
    }
}

TEST(Cqm, IsolatedBlockCollar) {
    const PerceptionConfig cfg;
    const auto s = scene({rect_block(0, 32, 32, 10, 10)});
    const auto cqm = clutter_quantization_map(render_heightmap(s, cfg), cfg);
    const int side = 10 + 2 * cfg.effective_cqm_radius();
    EXPECT_EQ(cqm.count(), side * side);
    EXPECT_EQ(oracle::components(cqm), 1);
}

TEST(Cqm, NarrowGapCloses) {
    const PerceptionConfig cfg;
    const auto near = scene({rect_block(0, 20, 32, 8, 8), rect_block(1, 31, 32, 8, 8)});
    const auto far = scene({rect_block(0, 20, 32, 8, 8), rect_block(1, 40, 32, 8, 8)});
    EXPECT_EQ(oracle::components(oracle::threshold(render_heightmap(near, cfg), cfg.bin_floor)), 2);
    EXPECT_EQ(oracle::components(clutter_quantization_map(render_heightmap(near, cfg), cfg)), 1);
    EXPECT_EQ(oracle::components(clutter_quantization_map(render_heightmap(far, cfg), cfg)), 2);
}

TEST(Cqm, SeparationNeverShrinksCoverage) {
    const PerceptionConfig cfg;
    long prev = 0;
    for (double gap = 0.0; gap <= 12.0; gap += 1.0) {
        const auto s = scene({rect_block(0, 20, 32, 8, 8), rect_block(1, 28 + gap, 32, 8, 8)});
        const long n = clutter_quantization_map(render_heightmap(s, cfg), cfg).count();
        EXPECT_GE(n, prev) << "gap " << gap;
        prev = n;
    }
}

TEST(Cqm, RandomScenesMatchOracle) {
    const PerceptionConfig cfg;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto hm = render_heightmap(spawn_random_scene(10, 500 + seed), cfg);
        const auto bin = oracle::threshold(hm, cfg.bin_floor);
        EXPECT_EQ(clutter_quantization_map(hm, cfg), oracle::dilate_scan(bin, cfg.effective_cqm_radius()));
        EXPECT_EQ(moving_mask(binarize(hm, cfg.bin_floor), cfg), oracle::dilate_scan(bin, cfg.effective_move_radius()));
    }
}

TEST(MovingMask, SinglePixelAndContainment) {
    const PerceptionConfig cfg;
    BinaryMap g(64, 64);
    g.at(30, 30) = 1;
    EXPECT_EQ(moving_mask(g, cfg).count(), 81);
    EXPECT_EQ(moving_mask(BinaryMap(64, 64), cfg).count(), 0);
    const auto hm = render_heightmap(spawn_random_scene(8, 4), cfg);
    const auto rho_g = binarize(hm, cfg.bin_floor), rho_m = moving_mask(rho_g, cfg);
    for (std::size_t i = 0; i < rho_g.cells.size(); ++i) EXPECT_GE(rho_m.cells[i], rho_g.cells[i]);
}

TEST(Perception, RadiiScaleWithGrid) {
    PerceptionConfig cfg;
    EXPECT_EQ(cfg.effective_cqm_radius(), 2);
    cfg.grid_size = 128;
    EXPECT_EQ(cfg.effective_cqm_radius(), 4);
    EXPECT_EQ(cfg.effective_move_radius(), 8);
}

TEST(Observation, IdentityAndHalfTurn) {
    const PerceptionConfig cfg;
    const auto hm = render_heightmap(spawn_random_scene(8, 17), cfg);
    const auto obs = build_observation(hm, cfg);
    ASSERT_EQ(obs.rotations, kRotations);
    const auto occ = binarize(hm, cfg.bin_floor);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            EXPECT_EQ(obs.at(0, 0, y, x), hm.at(x, y));
            EXPECT_EQ(obs.at(0, 1, y, x), occ.at(x, y));
            EXPECT_EQ(obs.at(8, 0, y, x), hm.at(63 - x, 63 - y));
        }
}

TEST(Observation, EntryMatchesStack) {
    const PerceptionConfig cfg;
    const auto hm = render_heightmap(spawn_random_scene(8, 23), cfg);
    const auto obs = build_observation(hm, cfg);
    for (int r = 0; r < kRotations; ++r) {
        const auto e = observation_entry(hm, r, cfg);
        const auto ref = obs.entry(r);
        ASSERT_TRUE(std::equal(e.begin(), e.end(), ref.begin(), ref.end())) << r;
    }
}

TEST(Observation, OccupancyPreservedInsideDisk) {
    const PerceptionConfig cfg;
    const auto s = scene({rect_block(0, 28, 30, 8, 6, 0.3), rect_block(1, 38, 36, 6, 9, 1.1)});
    const auto hm = render_heightmap(s, cfg);
    const auto obs = build_observation(hm, cfg);
    const double base = binarize(hm, cfg.bin_floor).count();
    for (int r = 0; r < kRotations; ++r) {
        double n = 0;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) n += obs.at(r, 1, y, x);
        if (r % 4 == 0)
            EXPECT_EQ(n, base) << r;
        else
            EXPECT_LE(std::abs(n - base) / base, 0.05) << r;
    }
}

TEST(Observation, InverseRotationOnInteriorDisk) {
    Rng rng(5);
    std::vector<float> src(64 * 64);
    for (auto& v : src) v = static_cast<float>(rng.uniform());
    for (int r = 0; r < kRotations; r += 4) {
        const auto back = rotate_plane(rotate_plane(src, 64, 64, r), 64, 64, (kRotations - r) % kRotations);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                const double dx = x - 31.5, dy = y - 31.5;
                if (dx * dx + dy * dy < 30.0 * 30.0) {
                    EXPECT_EQ(back[y * 64 + x], src[y * 64 + x]);
                }
            }
    }
}

TEST(Observation, InverseRotationOfBlockScenes) {
    const PerceptionConfig cfg;
    const auto hm = render_heightmap(scene({rect_block(0, 30, 28, 10, 8, 0.2), rect_block(1, 38, 40, 6, 6)}), cfg);
    long total = 0;
    for (float v : hm.cells) total += v > 0;
    for (int r = 1; r < kRotations; ++r) {
        const auto back = rotate_plane(rotate_plane(hm.cells, 64, 64, r), 64, 64, kRotations - r);
        long diff = 0;
        for (std::size_t i = 0; i < back.size(); ++i) diff += back[i] != hm.cells[i];
        EXPECT_LE(static_cast<double>(diff) / total, 0.1) << r;
    }
}

TEST(PixelMap, CenterCornerAndRoundTrip) {
    const auto odd = GridSpec::from_bounds({0, 0, 65, 65}, 65, 65);
    for (int th = 0; th < kRotations; ++th) {
        const auto c = pixel_to_world(odd, 32, 32, th);
        EXPECT_NEAR(c.x, 32.5, 1e-12);
        EXPECT_NEAR(c.y, 32.5, 1e-12);
    }
    const auto spec = GridSpec::from_bounds({0, 0, 64, 64}, 64, 64);
    const auto corner = pixel_to_world(spec, 0, 0, 0);
    EXPECT_DOUBLE_EQ(corner.x, 0.5);
    EXPECT_DOUBLE_EQ(corner.y, 0.5);
    Rng rng(8);
    for (int th = 0; th < kRotations; ++th)
        for (int k = 0; k < 100; ++k) {
            const int px = static_cast<int>(rng.below(64)), py = static_cast<int>(rng.below(64));
            const auto back = world_to_pixel(spec, pixel_to_world(spec, px, py, th), th);
            EXPECT_NEAR(back.x, px, 1e-9);
            EXPECT_NEAR(back.y, py, 1e-9);
        }
    EXPECT_THROW(pixel_to_world(spec, 64, 0, 0), OutOfRangeError);
    EXPECT_THROW(pixel_to_world(spec, 0, 0, 16), OutOfRangeError);
}
