#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flg/geometry.hpp"

namespace flg {

/// Number of discrete gripper orientations; orientation i is 2*pi*i/16.
inline constexpr int kRotations = 16;

double rotation_angle(int theta_index);

/// Geometry of the workspace, gripper and block generator, in workspace
/// units. The workspace is 64 x 64 units regardless of the rendered grid,
/// so pixel-equivalents scale with the grid automatically.
struct WorldConfig {
    geom::Box bounds{0.0, 0.0, 64.0, 64.0};
    double finger_span = 14.0;   ///< clear opening between the inner finger faces
    double finger_width = 4.0;   ///< finger thickness along the closing axis
    double finger_depth = 10.0;  ///< finger extent across the closing axis
    double push_length = 10.0;
    double shift_offset = 8.0;
    double pusher_width = 10.0;     ///< closed-gripper extent across the push direction
    double pusher_thickness = 4.0;  ///< closed-gripper extent along the push direction
    double block_side_min = 6.0;
    double block_side_max = 14.0;
    double block_height = 1.0;
    /// Generated blocks must be at most finger_span - grasp_margin wide
    /// along at least one gripper axis.
    double grasp_margin = 2.0;
    int max_blocks = 25;
    int placement_attempts = 200000;
    /// Attempts without placing a block before the layout is restarted.
    int restart_attempts = 2000;
    double resolution_eps = 1e-6;
    int chain_iterations = 32;

    friend bool operator==(const WorldConfig&, const WorldConfig&) = default;
};

struct Pose {
    double x = 0.0;
    double y = 0.0;
    double yaw = 0.0;
    friend bool operator==(const Pose&, const Pose&) = default;
};

/// A rigid prism: convex footprint in the block frame (centroid at the
/// origin), extruded to `height`, placed at `pose`.
struct BlockSpec {
    int id = 0;
    geom::Polygon footprint;
    double height = 1.0;
    Pose pose;

    geom::Polygon world_footprint() const;
    friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

struct WorldState {
    std::vector<BlockSpec> blocks;
    geom::Box bounds{0.0, 0.0, 64.0, 64.0};
    std::uint64_t rng_seed = 0;
    int step_count = 0;

    friend bool operator==(const WorldState&, const WorldState&) = default;
};

enum class Primitive { Grasp, Move };
enum class MoveKind { Push, Shift };

struct ActionPrimitive {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    int theta_index = 0;
    Primitive phi = Primitive::Grasp;
    std::optional<MoveKind> resolved_move;
};

struct ExecutionOutcome {
    Primitive kind = Primitive::Grasp;
    std::optional<MoveKind> resolved_move;
    bool grasp_success = false;
    std::vector<int> moved_block_ids;
    std::optional<int> removed_block_id;
};

struct ExecutionResult {
    WorldState state;
    ExecutionOutcome outcome;
};

WorldState spawn_random_scene(int count, std::uint64_t seed, const WorldConfig& cfg = {});

/// Number of handcrafted dense arrangements in the preset library.
int preset_count();
WorldState spawn_preset_clutter(int variant, const WorldConfig& cfg = {});

/// Index of the first block whose footprint contains p.
std::optional<std::size_t> block_at(const WorldState& state, geom::Vec2 p);

/// Finger rectangles (positive side first) for a grasp at p along theta.
std::pair<geom::Polygon, geom::Polygon> finger_rects(geom::Vec2 p, int theta_index,
                                                     const WorldConfig& cfg);

bool grasp_feasible(const WorldState& state, double x, double y, int theta_index,
                    const WorldConfig& cfg = {});

ExecutionResult execute(const WorldState& state, const ActionPrimitive& action,
                        const WorldConfig& cfg = {});

inline bool is_empty(const WorldState& state) { return state.blocks.empty(); }

/// Largest pairwise penetration depth among all block footprints.
double max_penetration(const WorldState& state);

void to_json(nlohmann::json& j, const WorldState& s);
void from_json(const nlohmann::json& j, WorldState& s);
void to_json(nlohmann::json& j, const WorldConfig& c);
void from_json(const nlohmann::json& j, WorldConfig& c);

}  // namespace flg
