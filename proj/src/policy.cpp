#include "flg/policy.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "flg/errors.hpp"
#include "flg/json_fields.hpp"

namespace flg {

double PolicyConfig::epsilon(long step) const {
    if (epsilon_decay <= 0.0) return epsilon_end;
    return epsilon_end + (epsilon_start - epsilon_end) * std::exp(-static_cast<double>(step) / epsilon_decay);
}

void to_json(nlohmann::json& j, const PolicyConfig& c) {
    j = {{"epsilon_start", c.epsilon_start},
         {"epsilon_end", c.epsilon_end},
         {"epsilon_decay", c.epsilon_decay},
         {"top_m", c.top_m},
         {"gamma", c.gamma},
         {"trigger_failures", c.trigger_failures},
         {"move_suppression_steps", c.move_suppression_steps},
         {"move_suppression_prob", c.move_suppression_prob}};
}

void from_json(const nlohmann::json& j, PolicyConfig& c) {
    FieldReader r(j, "policy");
    r.get("epsilon_start", c.epsilon_start);
    r.get("epsilon_end", c.epsilon_end);
    r.get("epsilon_decay", c.epsilon_decay);
    r.get("top_m", c.top_m);
    r.get("gamma", c.gamma);
    r.get("trigger_failures", c.trigger_failures);
    r.get("move_suppression_steps", c.move_suppression_steps);
    r.get("move_suppression_prob", c.move_suppression_prob);
    r.finish();
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(c.epsilon_start) || !unit(c.epsilon_end)) throw ConfigError("policy epsilon must lie in [0, 1]");
    if (c.top_m < 1) throw ConfigError("policy.top_m must be at least 1");
    if (c.gamma < 0.0 || c.gamma >= 1.0) throw ConfigError("policy.gamma must lie in [0, 1)");
    if (!unit(c.move_suppression_prob)) throw ConfigError("policy.move_suppression_prob must lie in [0, 1]");
}

QMaps masked_qmaps(const QMaps& q, const BinaryMap& rho_g, const BinaryMap& rho_m) {
    if (q.channels != 2) throw ShapeError("masking expects grasp and move channels");
    if (rho_g.width != q.width || rho_g.height != q.height || rho_m.width != q.width || rho_m.height != q.height)
        throw ShapeError("mask dimensions differ from the Q-maps");
    QMaps out = q;
    const std::size_t plane = q.plane();
    for (int r = 0; r < q.rotations; ++r) {
        const BinaryMap g = rotate_mask(rho_g, r);
        const BinaryMap m = rotate_mask(rho_m, r);
        float* grasp = out.data.data() + static_cast<std::size_t>(r) * 2 * plane;
        float* move = grasp + plane;
        for (std::size_t i = 0; i < plane; ++i) {
            if (!g.cells[i]) grasp[i] = kMasked;
            if (!m.cells[i]) move[i] = kMasked;
        }
    }
    return out;
}

namespace {

bool channel_has_finite(const QMaps& q, int channel) {
    const std::size_t plane = q.plane();
    for (int r = 0; r < q.rotations; ++r) {
        const float* p = q.data.data() + (static_cast<std::size_t>(r) * q.channels + channel) * plane;
        for (std::size_t i = 0; i < plane; ++i)
            if (std::isfinite(p[i])) return true;
    }
    return false;
}

std::vector<std::size_t> finite_entries(const QMaps& q, bool grasp, bool move) {
    std::vector<std::size_t> out;
    const std::size_t plane = q.plane();
    for (int r = 0; r < q.rotations; ++r) {
        for (int c = 0; c < q.channels; ++c) {
            if ((c == kGraspChannel && !grasp) || (c == kMoveChannel && !move)) continue;
            const std::size_t base = (static_cast<std::size_t>(r) * q.channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i)
                if (std::isfinite(q.data[base + i])) out.push_back(base + i);
        }
    }
    return out;
}

}  // namespace

std::optional<ActionIndex> masked_argmax(const QMaps& masked, int channel) {
    const auto entries = finite_entries(masked, channel < 0 || channel == kGraspChannel,
                                        channel < 0 || channel == kMoveChannel);
    if (entries.empty()) return std::nullopt;
    std::size_t best = entries.front();
    for (std::size_t i : entries)
        if (masked.data[i] > masked.data[best]) best = i;
    return ActionIndex::from_flat(best, masked.channels, masked.height, masked.width);
}

Selection select_action(const QMaps& masked, const SelectionHistory& history, const PolicyConfig& cfg,
                        const SelectionOptions& opts, Rng& rng) {
    Selection sel;
    bool grasp = true, move = true;
    if (cfg.trigger_failures > 0 && history.consecutive_failures >= cfg.trigger_failures) {
        grasp = false;
        sel.forced_move = true;
        if (!channel_has_finite(masked, kMoveChannel))
            throw NoFeasibleActionError("move trigger fired but the move mask is empty");
    } else if (!opts.allow_move) {
        move = !channel_has_finite(masked, kGraspChannel);
    }
    const auto candidates = finite_entries(masked, grasp, move);
    if (candidates.empty()) throw NoFeasibleActionError("no finite entry in the masked Q-maps");

    const auto index_of = [&](std::size_t flat) {
        return ActionIndex::from_flat(flat, masked.channels, masked.height, masked.width);
    };

    const bool explore = rng.uniform() < opts.epsilon;
    if (explore) {
        sel.action = index_of(candidates[rng.below(candidates.size())]);
        sel.path = SelectionPath::Explore;
        return sel;
    }

    std::size_t best = candidates.front();
    for (std::size_t i : candidates)
        if (masked.data[i] > masked.data[best]) best = i;
    sel.action = index_of(best);
    sel.path = SelectionPath::Greedy;

    if (history.previous && *history.previous == sel.action) {
        const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_m), candidates.size());
        std::vector<std::size_t> top = candidates;
        std::partial_sort(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(m), top.end(),
                          [&](std::size_t a, std::size_t b) {
                              if (masked.data[a] != masked.data[b]) return masked.data[a] > masked.data[b];
                              return a < b;
                          });
        top.resize(m);
        std::erase(top, best);
        if (!top.empty()) {
            sel.action = index_of(top[rng.below(top.size())]);
            sel.path = SelectionPath::RepeatAvoid;
        }
    }
    return sel;
}

std::optional<std::pair<int, int>> action_source_pixel(const ActionIndex& a, const GridSpec& spec) {
    if (a.px < 0 || a.py < 0 || a.px >= spec.width || a.py >= spec.height)
        throw OutOfRangeError("action pixel out of range");
    return source_pixel(spec.width, spec.height, a.px, a.py, a.rotation);
}

MoveKind resolve_move(const ActionIndex& action, const HeightMap& heightmap, double floor) {
    const auto src = action_source_pixel(action, heightmap.spec);
    if (!src) return MoveKind::Push;
    return heightmap.at(src->first, src->second) > floor ? MoveKind::Shift : MoveKind::Push;
}

ActionPrimitive to_primitive(const ActionIndex& action, const HeightMap& heightmap) {
    const GridSpec& spec = heightmap.spec;
    ActionPrimitive p;
    p.theta_index = action.rotation;
    p.phi = action.channel == kGraspChannel ? Primitive::Grasp : Primitive::Move;
    if (const auto src = action_source_pixel(action, spec)) {
        p.x = spec.origin.x + spec.resolution * src->first;
        p.y = spec.origin.y + spec.resolution * src->second;
        p.z = heightmap.at(src->first, src->second);
    } else {
        // Corners of the rotated frame fall off the grid; clamp onto it.
        const geom::Vec2 w = pixel_to_world(spec, action.px, action.py, action.rotation);
        const double lo_x = spec.origin.x, hi_x = spec.origin.x + spec.resolution * (spec.width - 1);
        const double lo_y = spec.origin.y, hi_y = spec.origin.y + spec.resolution * (spec.height - 1);
        p.x = std::clamp(w.x, lo_x, hi_x);
        p.y = std::clamp(w.y, lo_y, hi_y);
        p.z = 0.0;
    }
    return p;
}

double ddqn_target(double reward, bool terminal, const QMaps& next_online_masked,
                   const std::function<double(const ActionIndex&)>& target_value, double gamma) {
    if (terminal) return reward;
    const auto best = masked_argmax(next_online_masked);
    if (!best) return reward;
    return reward + gamma * target_value(*best);
}

}  // namespace flg
