#include "flg/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <nlohmann/json.hpp>

#include "flg/errors.hpp"
#include "flg/json_fields.hpp"
#include "flg/rng.hpp"

namespace flg {

using geom::Polygon;
using geom::Vec2;

double rotation_angle(int theta_index) {
    return 2.0 * std::numbers::pi * static_cast<double>(theta_index) / kRotations;
}

namespace {

Vec2 axis_of(int theta_index) {
    switch (((theta_index % kRotations) + kRotations) % kRotations) {
        case 0: return {1.0, 0.0};
        case 4: return {0.0, 1.0};
        case 8: return {-1.0, 0.0};
        case 12: return {0.0, -1.0};
        default: return geom::direction(rotation_angle(theta_index));
    }
}

Polygon rect_footprint(double side_u, double side_v) {
    return geom::oriented_rect({0.0, 0.0}, side_u / 2, side_v / 2, 0.0);
}

BlockSpec make_block(int id, double side_x, double side_y, Pose pose, double height) {
    return BlockSpec{id, rect_footprint(side_x, side_y), height, pose};
}

bool inside_bounds(const Polygon& poly, const geom::Box& b, double eps) {
    const geom::Box bb = geom::bounding_box(poly);
    return bb.xmin >= b.xmin - eps && bb.ymin >= b.ymin - eps && bb.xmax <= b.xmax + eps &&
           bb.ymax <= b.ymax + eps;
}

/// Narrowest extent of the footprint over the gripper closing axes.
double min_axis_width(const Polygon& world) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kRotations / 2; ++i) {
        const auto iv = geom::project(world, axis_of(i));
        best = std::min(best, iv.hi - iv.lo);
    }
    return best;
}

std::vector<Polygon> world_polys(const WorldState& s) {
    std::vector<Polygon> out;
    out.reserve(s.blocks.size());
    for (const auto& b : s.blocks) out.push_back(b.world_footprint());
    return out;
}

/// Something that moves along a straight line and pushes blocks ahead of it:
/// a gripper part (no index) or one of the blocks.
struct Drive {
    Polygon shape;
    std::optional<std::size_t> block;
    Vec2 dir;
};

class MotionSolver {
public:
    MotionSolver(const std::vector<Polygon>& polys, const WorldConfig& cfg)
        : polys_(polys), cfg_(cfg) {}

    /// Per-block displacement along the drive direction for a drive of
    /// length `amount`, or nullopt when the result leaves the workspace or
    /// leaves residual penetration.
    std::optional<std::vector<double>> solve(const Drive& drive, double amount) const {
        const std::size_t n = polys_.size();
        const double eps = cfg_.resolution_eps;
        std::vector<double> disp(n, 0.0);
        std::vector<Polygon> cur = polys_;

        const Polygon driver_end = geom::translated(drive.shape, amount * drive.dir);
        const Polygon sweep = geom::swept_hull(drive.shape, drive.dir, amount);
        for (std::size_t j = 0; j < n; ++j) {
            if (drive.block && *drive.block == j) continue;
            if (geom::penetration(sweep, polys_[j]) > eps)
                disp[j] = geom::separation_along(driver_end, polys_[j], drive.dir);
        }
        if (drive.block) disp[*drive.block] = amount;
        for (std::size_t j = 0; j < n; ++j)
            if (disp[j] > 0.0) cur[j] = geom::translated(polys_[j], disp[j] * drive.dir);

        for (int iter = 0; iter < cfg_.chain_iterations; ++iter) {
            std::vector<std::size_t> order(n);
            std::vector<double> key(n);
            for (std::size_t j = 0; j < n; ++j) {
                order[j] = j;
                key[j] = geom::dot(geom::centroid(cur[j]), drive.dir);
            }
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
            bool changed = false;
            for (std::size_t i : order) {
                if (disp[i] <= 0.0) continue;
                const Polygon hull = geom::swept_hull(polys_[i], drive.dir, disp[i]);
                const double base = geom::dot(geom::centroid(polys_[i]), drive.dir);
                for (std::size_t j : order) {
                    if (j == i) continue;
                    if (geom::dot(geom::centroid(cur[j]), drive.dir) <= base) continue;
                    if (geom::penetration(hull, cur[j]) <= eps) continue;
                    const double t = geom::separation_along(cur[i], cur[j], drive.dir);
                    if (t <= eps) continue;
                    disp[j] += t;
                    cur[j] = geom::translated(polys_[j], disp[j] * drive.dir);
                    changed = true;
                }
            }
            if (!changed) break;
        }

        for (std::size_t j = 0; j < n; ++j) {
            if (disp[j] > 0.0 && !inside_bounds(cur[j], cfg_.bounds, eps)) return std::nullopt;
        }
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                if ((disp[a] > 0.0 || disp[b] > 0.0) && geom::penetration(cur[a], cur[b]) > eps)
                    return std::nullopt;
        return disp;
    }

    /// Full drive if valid, else the longest valid prefix found by bisection,
    /// else no motion.
    std::vector<double> solve_clamped(const Drive& drive, double amount) const {
        if (auto d = solve(drive, amount)) return *d;
        auto best = solve(drive, 0.0);
        if (!best) return std::vector<double>(polys_.size(), 0.0);
        double lo = 0.0, hi = amount;
        for (int it = 0; it < 40; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (auto d = solve(drive, mid)) {
                lo = mid;
                best = std::move(d);
            } else {
                hi = mid;
            }
        }
        return *best;
    }

private:
    const std::vector<Polygon>& polys_;
    const WorldConfig& cfg_;
};

/// Applies a drive to the state and records which blocks moved.
void apply_drive(WorldState& state, const Drive& drive, double amount, const WorldConfig& cfg,
                 std::vector<int>& moved) {
    const auto polys = world_polys(state);
    const MotionSolver solver(polys, cfg);
    const auto disp = solver.solve_clamped(drive, amount);
    for (std::size_t j = 0; j < disp.size(); ++j) {
        if (disp[j] <= 0.0) continue;
        state.blocks[j].pose.x += disp[j] * drive.dir.x;
        state.blocks[j].pose.y += disp[j] * drive.dir.y;
        if (std::find(moved.begin(), moved.end(), state.blocks[j].id) == moved.end())
            moved.push_back(state.blocks[j].id);
    }
}

bool hits_any(const std::vector<Polygon>& polys, const Polygon& probe, double eps,
              std::optional<std::size_t> skip = std::nullopt) {
    for (std::size_t j = 0; j < polys.size(); ++j) {
        if (skip && *skip == j) continue;
        if (geom::penetration(probe, polys[j]) > eps) return true;
    }
    return false;
}

}  // namespace

Polygon BlockSpec::world_footprint() const {
    const double c = std::cos(pose.yaw), s = std::sin(pose.yaw);
    Polygon out;
    out.reserve(footprint.size());
    for (const auto& p : footprint) out.push_back({pose.x + c * p.x - s * p.y, pose.y + s * p.x + c * p.y});
    return out;
}

WorldState spawn_random_scene(int count, std::uint64_t seed, const WorldConfig& cfg) {
    if (count < 0) throw OutOfRangeError("block count must be non-negative");
    if (count > cfg.max_blocks)
        throw PlacementError("block count " + std::to_string(count) + " exceeds max_blocks " +
                             std::to_string(cfg.max_blocks));
    WorldState state;
    state.bounds = cfg.bounds;
    state.rng_seed = seed;
    Rng rng(seed);
    std::vector<Polygon> placed;
    int attempts = 0;
    int since_progress = 0;
    while (static_cast<int>(state.blocks.size()) < count) {
        if (++attempts > cfg.placement_attempts)
            throw PlacementError("could not place " + std::to_string(count) +
                                 " blocks within the attempt budget");
        // A jammed layout rarely recovers; start over from an empty table.
        if (++since_progress > cfg.restart_attempts) {
            placed.clear();
            state.blocks.clear();
            since_progress = 0;
        }
        const double a = rng.uniform(cfg.block_side_min, cfg.block_side_max);
        const double b = rng.uniform(cfg.block_side_min, cfg.block_side_max);
        const double yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double ux = rng.uniform();
        const double uy = rng.uniform();
        BlockSpec block = make_block(static_cast<int>(state.blocks.size()), a, b, Pose{0.0, 0.0, yaw},
                                     cfg.block_height);
        const Polygon local = block.world_footprint();
        if (min_axis_width(local) > cfg.finger_span - cfg.grasp_margin) continue;
        const geom::Box bb = geom::bounding_box(local);
        const double xlo = cfg.bounds.xmin - bb.xmin, xhi = cfg.bounds.xmax - bb.xmax;
        const double ylo = cfg.bounds.ymin - bb.ymin, yhi = cfg.bounds.ymax - bb.ymax;
        if (xhi < xlo || yhi < ylo) continue;
        block.pose.x = xlo + ux * (xhi - xlo);
        block.pose.y = ylo + uy * (yhi - ylo);
        const Polygon world = block.world_footprint();
        bool clear = true;
        for (const auto& other : placed) {
            if (geom::penetration(world, other) > 0.0) {
                clear = false;
                break;
            }
        }
        if (!clear) continue;
        placed.push_back(world);
        state.blocks.push_back(std::move(block));
        since_progress = 0;
    }
    return state;
}

namespace {

struct PresetBlock {
    double cx, cy, sx, sy;
};

// Offsets are relative to the workspace center, in units at the 64-unit scale.
const std::vector<std::vector<PresetBlock>>& preset_library() {
    static const std::vector<std::vector<PresetBlock>> lib = {
        // 2 x 2 cluster of 10 x 10 squares
        {{-5, -5, 10, 10}, {5, -5, 10, 10}, {-5, 5, 10, 10}, {5, 5, 10, 10}},
        // 3 x 3 grid of 7 x 7 squares
        {{-7, -7, 7, 7}, {0, -7, 7, 7}, {7, -7, 7, 7},
         {-7, 0, 7, 7},  {0, 0, 7, 7},  {7, 0, 7, 7},
         {-7, 7, 7, 7},  {0, 7, 7, 7},  {7, 7, 7, 7}},
        // row of four 6 x 14 slabs
        {{-9, 0, 6, 14}, {-3, 0, 6, 14}, {3, 0, 6, 14}, {9, 0, 6, 14}},
        // 3 x 2 wall of 8 x 10 bricks
        {{-8, -5, 8, 10}, {0, -5, 8, 10}, {8, -5, 8, 10},
         {-8, 5, 8, 10},  {0, 5, 8, 10},  {8, 5, 8, 10}},
    };
    return lib;
}

}  // namespace

int preset_count() { return static_cast<int>(preset_library().size()); }

WorldState spawn_preset_clutter(int variant, const WorldConfig& cfg) {
    if (variant < 0 || variant >= preset_count())
        throw UnknownVariantError("unknown preset variant " + std::to_string(variant));
    WorldState state;
    state.bounds = cfg.bounds;
    state.rng_seed = static_cast<std::uint64_t>(variant);
    const Vec2 c = cfg.bounds.center();
    const double scale = cfg.bounds.width() / 64.0;
    // Turned by half a gripper step so no closing axis lines up with an
    // outer corner of the arrangement.
    const double yaw = std::numbers::pi / kRotations;
    const double cy = std::cos(yaw), sy = std::sin(yaw);
    int id = 0;
    for (const auto& pb : preset_library()[static_cast<std::size_t>(variant)]) {
        const double ox = pb.cx * scale, oy = pb.cy * scale;
        state.blocks.push_back(make_block(id++, pb.sx * scale, pb.sy * scale,
                                          Pose{c.x + cy * ox - sy * oy, c.y + sy * ox + cy * oy, yaw},
                                          cfg.block_height));
    }
    return state;
}

std::optional<std::size_t> block_at(const WorldState& state, Vec2 p) {
    for (std::size_t i = 0; i < state.blocks.size(); ++i)
        if (geom::contains(state.blocks[i].world_footprint(), p)) return i;
    return std::nullopt;
}

std::pair<Polygon, Polygon> finger_rects(Vec2 p, int theta_index, const WorldConfig& cfg) {
    const Vec2 u = axis_of(theta_index);
    const double in = cfg.finger_span / 2, out = in + cfg.finger_width, half = cfg.finger_depth / 2;
    return {geom::frame_rect(p, u, in, out, -half, half), geom::frame_rect(p, u, -out, -in, -half, half)};
}

namespace {

bool grasp_feasible_polys(const std::vector<Polygon>& polys, std::optional<std::size_t> target,
                          Vec2 p, int theta_index, const WorldConfig& cfg) {
    if (!target) return false;
    const double eps = cfg.resolution_eps;
    const auto [pos, neg] = finger_rects(p, theta_index, cfg);
    if (hits_any(polys, pos, eps) || hits_any(polys, neg, eps)) return false;
    // The closing region must hold only the target block.
    const double half = cfg.finger_depth / 2;
    const Polygon closing = geom::frame_rect(p, axis_of(theta_index), -cfg.finger_span / 2,
                                             cfg.finger_span / 2, -half, half);
    return !hits_any(polys, closing, eps, target);
}

}  // namespace

bool grasp_feasible(const WorldState& state, double x, double y, int theta_index,
                    const WorldConfig& cfg) {
    return grasp_feasible_polys(world_polys(state), block_at(state, {x, y}), {x, y}, theta_index, cfg);
}

ExecutionResult execute(const WorldState& state, const ActionPrimitive& action,
                        const WorldConfig& cfg) {
    ExecutionResult res{state, {}};
    WorldState& next = res.state;
    ExecutionOutcome& out = res.outcome;
    ++next.step_count;
    out.kind = action.phi;
    const Vec2 p{action.x, action.y};
    const Vec2 u = axis_of(action.theta_index);
    const auto target = block_at(state, p);

    if (action.phi == Primitive::Grasp) {
        const auto polys = world_polys(state);
        if (grasp_feasible_polys(polys, target, p, action.theta_index, cfg)) {
            out.grasp_success = true;
            out.removed_block_id = state.blocks[*target].id;
            next.blocks.erase(next.blocks.begin() + static_cast<std::ptrdiff_t>(*target));
            return res;
        }
        // Free fingers still close and drag whatever they meet toward the center.
        const auto [pos, neg] = finger_rects(p, action.theta_index, cfg);
        const std::pair<const Polygon*, Vec2> fingers[] = {{&pos, -1.0 * u}, {&neg, u}};
        for (const auto& [finger, dir] : fingers) {
            if (hits_any(world_polys(next), *finger, cfg.resolution_eps)) continue;
            apply_drive(next, Drive{*finger, std::nullopt, dir}, cfg.finger_span / 2, cfg,
                        out.moved_block_ids);
        }
        return res;
    }

    if (target) {
        out.resolved_move = MoveKind::Shift;
        const Polygon shape = state.blocks[*target].world_footprint();
        apply_drive(next, Drive{shape, *target, u}, cfg.shift_offset, cfg, out.moved_block_ids);
    } else {
        out.resolved_move = MoveKind::Push;
        const Polygon pusher = geom::frame_rect(p, u, -cfg.pusher_thickness / 2, cfg.pusher_thickness / 2,
                                                -cfg.pusher_width / 2, cfg.pusher_width / 2);
        apply_drive(next, Drive{pusher, std::nullopt, u}, cfg.push_length, cfg, out.moved_block_ids);
    }
    return res;
}

double max_penetration(const WorldState& state) {
    const auto polys = world_polys(state);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < polys.size(); ++a)
        for (std::size_t b = a + 1; b < polys.size(); ++b)
            worst = std::max(worst, geom::penetration(polys[a], polys[b]));
    return worst;
}

// ---- serialization ----

namespace {
constexpr int kSceneSchemaVersion = 1;
}

void to_json(nlohmann::json& j, const WorldState& s) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : s.blocks) {
        nlohmann::json verts = nlohmann::json::array();
        for (const auto& v : b.footprint) verts.push_back({v.x, v.y});
        blocks.push_back({{"id", b.id},
                          {"vertices", verts},
                          {"height", b.height},
                          {"pose", {{"x", b.pose.x}, {"y", b.pose.y}, {"yaw", b.pose.yaw}}}});
    }
    j = {{"schema", "flg-scene"},
         {"version", kSceneSchemaVersion},
         {"bounds", {s.bounds.xmin, s.bounds.ymin, s.bounds.xmax, s.bounds.ymax}},
         {"seed", s.rng_seed},
         {"step_count", s.step_count},
         {"blocks", blocks}};
}

void from_json(const nlohmann::json& j, WorldState& s) {
    try {
        if (j.value("schema", std::string{}) != "flg-scene") throw FormatError("not an flg-scene document");
        if (j.at("version").get<int>() != kSceneSchemaVersion)
            throw FormatError("unsupported scene version " + j.at("version").dump());
        const auto bounds = j.at("bounds").get<std::vector<double>>();
        if (bounds.size() != 4) throw FormatError("scene bounds must have 4 entries");
        s = WorldState{};
        s.bounds = {bounds[0], bounds[1], bounds[2], bounds[3]};
        s.rng_seed = j.at("seed").get<std::uint64_t>();
        s.step_count = j.value("step_count", 0);
        for (const auto& jb : j.at("blocks")) {
            BlockSpec b;
            b.id = jb.at("id").get<int>();
            for (const auto& v : jb.at("vertices")) b.footprint.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
            b.height = jb.at("height").get<double>();
            const auto& jp = jb.at("pose");
            b.pose = {jp.at("x").get<double>(), jp.at("y").get<double>(), jp.at("yaw").get<double>()};
            if (!geom::is_convex_ccw(b.footprint)) throw FormatError("block footprint is not convex CCW");
            if (b.height <= 0.0) throw FormatError("block height must be positive");
            s.blocks.push_back(std::move(b));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed scene: ") + e.what());
    }
}

void to_json(nlohmann::json& j, const WorldConfig& c) {
    j = {{"bounds", {c.bounds.xmin, c.bounds.ymin, c.bounds.xmax, c.bounds.ymax}},
         {"finger_span", c.finger_span},
         {"finger_width", c.finger_width},
         {"finger_depth", c.finger_depth},
         {"push_length", c.push_length},
         {"shift_offset", c.shift_offset},
         {"pusher_width", c.pusher_width},
         {"pusher_thickness", c.pusher_thickness},
         {"block_side_min", c.block_side_min},
         {"block_side_max", c.block_side_max},
         {"block_height", c.block_height},
         {"grasp_margin", c.grasp_margin},
         {"max_blocks", c.max_blocks},
         {"placement_attempts", c.placement_attempts},
         {"restart_attempts", c.restart_attempts},
         {"resolution_eps", c.resolution_eps},
         {"chain_iterations", c.chain_iterations}};
}

void from_json(const nlohmann::json& j, WorldConfig& c) {
    FieldReader r(j, "world");
    std::vector<double> bounds{c.bounds.xmin, c.bounds.ymin, c.bounds.xmax, c.bounds.ymax};
    r.get("bounds", bounds);
    if (bounds.size() != 4 || bounds[2] <= bounds[0] || bounds[3] <= bounds[1])
        throw ConfigError("world.bounds must be [xmin, ymin, xmax, ymax] with positive extent");
    c.bounds = {bounds[0], bounds[1], bounds[2], bounds[3]};
    r.get("finger_span", c.finger_span);
    r.get("finger_width", c.finger_width);
    r.get("finger_depth", c.finger_depth);
    r.get("push_length", c.push_length);
    r.get("shift_offset", c.shift_offset);
    r.get("pusher_width", c.pusher_width);
    r.get("pusher_thickness", c.pusher_thickness);
    r.get("block_side_min", c.block_side_min);
    r.get("block_side_max", c.block_side_max);
    r.get("block_height", c.block_height);
    r.get("grasp_margin", c.grasp_margin);
    r.get("max_blocks", c.max_blocks);
    r.get("placement_attempts", c.placement_attempts);
    r.get("restart_attempts", c.restart_attempts);
    r.get("resolution_eps", c.resolution_eps);
    r.get("chain_iterations", c.chain_iterations);
    r.finish();
    if (c.block_side_min <= 0.0 || c.block_side_max < c.block_side_min)
        throw ConfigError("world block side range is invalid");
    if (c.block_height <= 0.0) throw ConfigError("world.block_height must be positive");
    if (c.placement_attempts < 1 || c.restart_attempts < 1)
        throw ConfigError("world placement attempt budgets must be positive");
}

}  // namespace flg
