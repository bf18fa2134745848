#pragma once

#include <functional>
#include <limits>
#include <optional>

#include <nlohmann/json_fwd.hpp>

#include "flg/action_index.hpp"
#include "flg/perception.hpp"
#include "flg/qnet.hpp"
#include "flg/rng.hpp"
#include "flg/world.hpp"

namespace flg {

struct PolicyConfig {
    double epsilon_start = 0.5;
    double epsilon_end = 0.1;
    double epsilon_decay = 500.0;  ///< e-folding time in actions
    int top_m = 10;
    double gamma = 0.5;
    int trigger_failures = 2;
    int move_suppression_steps = 500;
    double move_suppression_prob = 0.8;

    double epsilon(long step) const;

    friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

void to_json(nlohmann::json& j, const PolicyConfig& c);
void from_json(const nlohmann::json& j, PolicyConfig& c);

inline constexpr float kMasked = -std::numeric_limits<float>::infinity();

/// Sets every grasp entry outside rho_g and every move entry outside rho_m
/// (both rotated into the entry's frame) to -inf.
QMaps masked_qmaps(const QMaps& q, const BinaryMap& rho_g, const BinaryMap& rho_m);

struct SelectionHistory {
    /// Previous action, set only when it left the observation unchanged.
    std::optional<ActionIndex> previous;
    int consecutive_failures = 0;
};

enum class SelectionPath { Greedy, Explore, RepeatAvoid };

struct Selection {
    ActionIndex action;
    SelectionPath path = SelectionPath::Greedy;
    bool forced_move = false;
};

struct SelectionOptions {
    double epsilon = 0.0;
    bool allow_move = true;  ///< false while the move channel is suppressed
};

/// Epsilon-greedy choice over the finite entries of the masked maps with
/// repeat avoidance and the consecutive-failure move trigger.
Selection select_action(const QMaps& masked, const SelectionHistory& history, const PolicyConfig& cfg,
                        const SelectionOptions& opts, Rng& rng);

/// Index of the largest finite entry restricted to one channel (or both when
/// channel < 0); ties go to the lowest flat index.
std::optional<ActionIndex> masked_argmax(const QMaps& masked, int channel = -1);

/// World pixel under a rotated-frame pixel, or nullopt when it rotates off the grid.
std::optional<std::pair<int, int>> action_source_pixel(const ActionIndex& a, const GridSpec& spec);

MoveKind resolve_move(const ActionIndex& action, const HeightMap& heightmap, double floor);

/// Executable primitive for a chosen entry: the world pixel under the
/// rotated-frame pixel, its center as (x, y) and its height as z.
ActionPrimitive to_primitive(const ActionIndex& action, const HeightMap& heightmap);

/// r for terminal transitions, otherwise r + gamma * target(a*) with a* the
/// argmax of the masked online maps of the next state. An empty masked set
/// contributes no future value.
double ddqn_target(double reward, bool terminal, const QMaps& next_online_masked,
                   const std::function<double(const ActionIndex&)>& target_value, double gamma);

}  // namespace flg
