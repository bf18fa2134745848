#include "flg/perception.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>

#include <nlohmann/json.hpp>

#include "flg/errors.hpp"
#include "flg/json_fields.hpp"

namespace flg {

using geom::Vec2;

int PerceptionConfig::scaled(int radius_at_64) const {
    return static_cast<int>(std::lround(static_cast<double>(radius_at_64) * grid_size / 64.0));
}

GridSpec GridSpec::from_bounds(const geom::Box& bounds, int width, int height) {
    if (width <= 0 || height <= 0) throw OutOfRangeError("grid dimensions must be positive");
    const double rx = bounds.width() / width;
    const double ry = bounds.height() / height;
    if (std::abs(rx - ry) > 1e-12 * std::max(rx, ry))
        throw ShapeError("grid must have square cells over the workspace");
    return GridSpec{width, height, rx, {bounds.xmin + rx / 2, bounds.ymin + rx / 2}};
}

long BinaryMap::count() const {
    return static_cast<long>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

HeightMap render_heightmap(const WorldState& state, const GridSpec& spec) {
    HeightMap map{spec, std::vector<float>(static_cast<std::size_t>(spec.width) * spec.height, 0.0f)};
    for (const auto& block : state.blocks) {
        const auto poly = block.world_footprint();
        const auto bb = geom::bounding_box(poly);
        const int x0 = std::max(0, static_cast<int>(std::ceil((bb.xmin - spec.origin.x) / spec.resolution)));
        const int x1 = std::min(spec.width - 1, static_cast<int>(std::floor((bb.xmax - spec.origin.x) / spec.resolution)));
        const int y0 = std::max(0, static_cast<int>(std::ceil((bb.ymin - spec.origin.y) / spec.resolution)));
        const int y1 = std::min(spec.height - 1, static_cast<int>(std::floor((bb.ymax - spec.origin.y) / spec.resolution)));
        const auto h = static_cast<float>(block.height);
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const Vec2 c{spec.origin.x + x * spec.resolution, spec.origin.y + y * spec.resolution};
                if (geom::contains(poly, c)) map.at(x, y) = std::max(map.at(x, y), h);
            }
        }
    }
    return map;
}

HeightMap render_heightmap(const WorldState& state, const PerceptionConfig& cfg) {
    return render_heightmap(state, GridSpec::from_bounds(state.bounds, cfg.grid_size, cfg.grid_size));
}

BinaryMap binarize(const HeightMap& map, double floor) {
    BinaryMap out(map.width(), map.height());
    for (std::size_t i = 0; i < map.cells.size(); ++i) out.cells[i] = map.cells[i] > floor ? 1 : 0;
    return out;
}

BinaryMap dilate(const BinaryMap& map, int radius) {
    if (radius < 0) throw OutOfRangeError("dilation radius must be non-negative");
    if (radius == 0) return map;
    const int w = map.width, h = map.height;
    // The square element is separable: horizontal pass, then vertical pass.
    BinaryMap rows(w, h);
    for (int y = 0; y < h; ++y) {
        int last = -1000000;  // most recent set column at or before x + radius
        for (int x = 0; x < std::min(w, radius); ++x)
            if (map.at(x, y)) last = x;
        for (int x = 0; x < w; ++x) {
            const int ahead = x + radius;
            if (ahead < w && map.at(ahead, y)) last = ahead;
            rows.at(x, y) = (last >= x - radius) ? 1 : 0;
        }
    }
    BinaryMap out(w, h);
    for (int x = 0; x < w; ++x) {
        int last = -1000000;
        for (int y = 0; y < std::min(h, radius); ++y)
            if (rows.at(x, y)) last = y;
        for (int y = 0; y < h; ++y) {
            const int ahead = y + radius;
            if (ahead < h && rows.at(x, ahead)) last = ahead;
            out.at(x, y) = (last >= y - radius) ? 1 : 0;
        }
    }
    return out;
}

BinaryMap clutter_quantization_map(const HeightMap& map, const PerceptionConfig& cfg) {
    return dilate(binarize(map, cfg.bin_floor), cfg.effective_cqm_radius());
}

BinaryMap moving_mask(const BinaryMap& grasp_mask, const PerceptionConfig& cfg) {
    return dilate(grasp_mask, cfg.effective_move_radius());
}

namespace {

Vec2 rotation_cs(int r) {
    switch (((r % kRotations) + kRotations) % kRotations) {
        case 0: return {1.0, 0.0};
        case 4: return {0.0, 1.0};
        case 8: return {-1.0, 0.0};
        case 12: return {0.0, -1.0};
        default: return geom::direction(rotation_angle(r));
    }
}

/// Flat source index for each destination pixel, -1 outside the grid.
const std::vector<int>& rotation_table(int width, int height, int r) {
    static std::mutex mu;
    static std::map<std::tuple<int, int, int>, std::vector<int>> cache;
    const std::lock_guard lock(mu);
    auto key = std::make_tuple(width, height, r);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<int> table(static_cast<std::size_t>(width) * height, -1);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (auto s = source_pixel(width, height, x, y, r))
                table[static_cast<std::size_t>(y) * width + x] = s->second * width + s->first;
    return cache.emplace(key, std::move(table)).first->second;
}

void check_rotation(int r) {
    if (r < 0 || r >= kRotations) throw OutOfRangeError("rotation index out of range");
}

}  // namespace

std::optional<std::pair<int, int>> source_pixel(int width, int height, int px, int py, int r) {
    const Vec2 cs = rotation_cs(r);
    const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
    const double dx = px - cx, dy = py - cy;
    const double sx = cx + cs.x * dx - cs.y * dy;
    const double sy = cy + cs.y * dx + cs.x * dy;
    const int ix = static_cast<int>(std::floor(sx + 0.5));
    const int iy = static_cast<int>(std::floor(sy + 0.5));
    if (ix < 0 || iy < 0 || ix >= width || iy >= height) return std::nullopt;
    return std::make_pair(ix, iy);
}

std::vector<float> rotate_plane(std::span<const float> src, int width, int height, int r) {
    check_rotation(r);
    if (src.size() != static_cast<std::size_t>(width) * height) throw ShapeError("plane size mismatch");
    const auto& table = rotation_table(width, height, r);
    std::vector<float> out(src.size(), 0.0f);
    for (std::size_t i = 0; i < out.size(); ++i)
        if (table[i] >= 0) out[i] = src[static_cast<std::size_t>(table[i])];
    return out;
}

BinaryMap rotate_mask(const BinaryMap& src, int r) {
    check_rotation(r);
    const auto& table = rotation_table(src.width, src.height, r);
    BinaryMap out(src.width, src.height);
    for (std::size_t i = 0; i < out.cells.size(); ++i)
        if (table[i] >= 0) out.cells[i] = src.cells[static_cast<std::size_t>(table[i])];
    return out;
}

ObservationStack build_observation(const HeightMap& map, const PerceptionConfig& cfg) {
    if (cfg.channels < 1 || cfg.channels > 2) throw ShapeError("observation supports 1 or 2 channels");
    ObservationStack obs;
    obs.rotations = kRotations;
    obs.channels = cfg.channels;
    obs.height = map.height();
    obs.width = map.width();
    const std::size_t plane = obs.plane();
    obs.data.assign(plane * obs.channels * obs.rotations, 0.0f);

    std::vector<float> occupancy(plane);
    for (std::size_t i = 0; i < plane; ++i) occupancy[i] = map.cells[i] > cfg.bin_floor ? 1.0f : 0.0f;

    for (int r = 0; r < obs.rotations; ++r) {
        const auto& table = rotation_table(obs.width, obs.height, r);
        float* height_out = obs.data.data() + static_cast<std::size_t>(r) * obs.channels * plane;
        float* occ_out = height_out + plane;
        for (std::size_t i = 0; i < plane; ++i) {
            const int s = table[i];
            if (s < 0) continue;
            height_out[i] = map.cells[static_cast<std::size_t>(s)];
            if (obs.channels > 1) occ_out[i] = occupancy[static_cast<std::size_t>(s)];
        }
    }
    return obs;
}

std::vector<float> observation_entry(const HeightMap& map, int r, const PerceptionConfig& cfg) {
    check_rotation(r);
    if (cfg.channels < 1 || cfg.channels > 2) throw ShapeError("observation supports 1 or 2 channels");
    const std::size_t plane = map.cells.size();
    std::vector<float> out(plane * static_cast<std::size_t>(cfg.channels), 0.0f);
    const auto& table = rotation_table(map.width(), map.height(), r);
    for (std::size_t i = 0; i < plane; ++i) {
        const int s = table[i];
        if (s < 0) continue;
        const float h = map.cells[static_cast<std::size_t>(s)];
        out[i] = h;
        if (cfg.channels > 1) out[plane + i] = h > cfg.bin_floor ? 1.0f : 0.0f;
    }
    return out;
}

Vec2 pixel_to_world(const GridSpec& spec, int px, int py, int theta_index) {
    check_rotation(theta_index);
    if (px < 0 || py < 0 || px >= spec.width || py >= spec.height)
        throw OutOfRangeError("pixel (" + std::to_string(px) + ", " + std::to_string(py) + ") out of range");
    const Vec2 cs = rotation_cs(theta_index);
    const double cx = (spec.width - 1) / 2.0, cy = (spec.height - 1) / 2.0;
    const double dx = px - cx, dy = py - cy;
    const double gx = cx + cs.x * dx - cs.y * dy;
    const double gy = cy + cs.y * dx + cs.x * dy;
    return {spec.origin.x + gx * spec.resolution, spec.origin.y + gy * spec.resolution};
}

Vec2 world_to_pixel(const GridSpec& spec, Vec2 p, int theta_index) {
    check_rotation(theta_index);
    const Vec2 cs = rotation_cs(theta_index);
    const double cx = (spec.width - 1) / 2.0, cy = (spec.height - 1) / 2.0;
    const double gx = (p.x - spec.origin.x) / spec.resolution - cx;
    const double gy = (p.y - spec.origin.y) / spec.resolution - cy;
    // inverse rotation
    return {cx + cs.x * gx + cs.y * gy, cy - cs.y * gx + cs.x * gy};
}

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    return os;
}

}  // namespace

void write_heightmap_pgm(const std::filesystem::path& path, const HeightMap& map, double levels_per_unit) {
    auto os = open_for_write(path);
    os << "P5\n# flg-heightmap v1 levels_per_unit=" << levels_per_unit << "\n"
       << map.width() << " " << map.height() << "\n65535\n";
    for (float h : map.cells) {
        const double v = std::clamp(std::round(h * levels_per_unit), 0.0, 65535.0);
        const auto q = static_cast<std::uint16_t>(v);
        const char bytes[2] = {static_cast<char>(q >> 8), static_cast<char>(q & 0xff)};
        os.write(bytes, 2);
    }
}

void write_mask_pgm(const std::filesystem::path& path, const BinaryMap& map) {
    auto os = open_for_write(path);
    os << "P5\n# flg-mask v1\n" << map.width << " " << map.height << "\n255\n";
    for (auto c : map.cells) os.put(c ? static_cast<char>(255) : static_cast<char>(0));
}

void write_heat_pgm(const std::filesystem::path& path, std::span<const float> plane, int width,
                    int height, const std::string& comment) {
    float lo = std::numeric_limits<float>::infinity(), hi = -lo;
    for (float v : plane) {
        if (!std::isfinite(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    auto os = open_for_write(path);
    os << "P5\n# flg-heat v1 " << comment << " min=" << lo << " max=" << hi << "\n"
       << width << " " << height << "\n255\n";
    const float span = hi > lo ? hi - lo : 1.0f;
    for (float v : plane) {
        int level = 0;
        if (std::isfinite(v)) level = 1 + static_cast<int>(std::lround(254.0f * (v - lo) / span));
        os.put(static_cast<char>(level));
    }
}

void to_json(nlohmann::json& j, const PerceptionConfig& c) {
    j = {{"grid_size", c.grid_size},
         {"bin_floor", c.bin_floor},
         {"cqm_radius", c.cqm_radius},
         {"move_radius", c.move_radius},
         {"channels", c.channels}};
}

void from_json(const nlohmann::json& j, PerceptionConfig& c) {
    FieldReader r(j, "perception");
    r.get("grid_size", c.grid_size);
    r.get("bin_floor", c.bin_floor);
    r.get("cqm_radius", c.cqm_radius);
    r.get("move_radius", c.move_radius);
    r.get("channels", c.channels);
    r.finish();
    if (c.grid_size <= 0 || c.grid_size % 16 != 0)
        throw ConfigError("perception.grid_size must be a positive multiple of 16");
    if (c.bin_floor < 0.0) throw ConfigError("perception.bin_floor must be non-negative");
    if (c.cqm_radius < 0 || c.move_radius < 0) throw ConfigError("dilation radii must be non-negative");
    if (c.channels < 1 || c.channels > 2) throw ConfigError("perception.channels must be 1 or 2");
}

}  // namespace flg
