#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flg/geometry.hpp"
#include "flg/world.hpp"

namespace flg {

struct PerceptionConfig {
    int grid_size = 64;
    double bin_floor = 0.005;  ///< table level plus the binarization margin
    int cqm_radius = 2;        ///< dilation radius at the 64-pixel reference grid
    int move_radius = 4;       ///< dilation radius at the 64-pixel reference grid
    int channels = 2;

    /// Radius converted to the configured grid.
    int scaled(int radius_at_64) const;
    int effective_cqm_radius() const { return scaled(cqm_radius); }
    int effective_move_radius() const { return scaled(move_radius); }

    friend bool operator==(const PerceptionConfig&, const PerceptionConfig&) = default;
};

/// Affine map between pixel indices and workspace coordinates.
/// Pixel (0,0) is centered at `origin`.
struct GridSpec {
    int width = 64;
    int height = 64;
    double resolution = 1.0;
    geom::Vec2 origin{0.5, 0.5};

    static GridSpec from_bounds(const geom::Box& bounds, int width, int height);
    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct HeightMap {
    GridSpec spec;
    std::vector<float> cells;

    int width() const { return spec.width; }
    int height() const { return spec.height; }
    float at(int x, int y) const { return cells[static_cast<std::size_t>(y) * spec.width + x]; }
    float& at(int x, int y) { return cells[static_cast<std::size_t>(y) * spec.width + x]; }
};

struct BinaryMap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> cells;

    BinaryMap() = default;
    BinaryMap(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), cells(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t at(int x, int y) const { return cells[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return cells[static_cast<std::size_t>(y) * width + x]; }
    long count() const;
    friend bool operator==(const BinaryMap&, const BinaryMap&) = default;
};

/// R rotated copies of the C-channel observation, laid out [r][c][y][x].
struct ObservationStack {
    int rotations = kRotations;
    int channels = 2;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
    std::span<const float> entry(int r) const {
        return {data.data() + static_cast<std::size_t>(r) * channels * plane(), channels * plane()};
    }
    float at(int r, int c, int y, int x) const {
        return data[((static_cast<std::size_t>(r) * channels + c) * height + y) * width + x];
    }
};

HeightMap render_heightmap(const WorldState& state, const GridSpec& spec);
HeightMap render_heightmap(const WorldState& state, const PerceptionConfig& cfg);

BinaryMap binarize(const HeightMap& map, double floor);

/// Square structuring element of side 2*radius+1 (Chebyshev ball).
BinaryMap dilate(const BinaryMap& map, int radius);

BinaryMap clutter_quantization_map(const HeightMap& map, const PerceptionConfig& cfg = {});
BinaryMap moving_mask(const BinaryMap& grasp_mask, const PerceptionConfig& cfg = {});

/// Source pixel sampled by rotated-frame pixel (px, py) at rotation r, using
/// nearest-neighbour rounding about the grid center; nullopt when outside.
std::optional<std::pair<int, int>> source_pixel(int width, int height, int px, int py, int r);

/// Nearest-neighbour rotation by theta_r about ((W-1)/2, (H-1)/2), zero fill.
std::vector<float> rotate_plane(std::span<const float> src, int width, int height, int r);
BinaryMap rotate_mask(const BinaryMap& src, int r);

ObservationStack build_observation(const HeightMap& map, const PerceptionConfig& cfg = {});

/// Entry r of build_observation alone, laid out [c][y][x].
std::vector<float> observation_entry(const HeightMap& map, int r, const PerceptionConfig& cfg = {});

/// Rotated-frame pixel to workspace coordinates (continuous).
geom::Vec2 pixel_to_world(const GridSpec& spec, int px, int py, int theta_index);
/// Workspace coordinates to the continuous rotated-frame pixel position.
geom::Vec2 world_to_pixel(const GridSpec& spec, geom::Vec2 p, int theta_index);

/// 16-bit PGM with heights scaled by `levels_per_unit`.
void write_heightmap_pgm(const std::filesystem::path& path, const HeightMap& map,
                         double levels_per_unit = 1000.0);
void write_mask_pgm(const std::filesystem::path& path, const BinaryMap& map);
/// 8-bit PGM of an arbitrary float plane, min-max scaled; non-finite cells map to 0.
void write_heat_pgm(const std::filesystem::path& path, std::span<const float> plane, int width,
                    int height, const std::string& comment);

void to_json(nlohmann::json& j, const PerceptionConfig& c);
void from_json(const nlohmann::json& j, PerceptionConfig& c);

}  // namespace flg
