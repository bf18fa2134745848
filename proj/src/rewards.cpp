#include "flg/rewards.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "flg/errors.hpp"
#include "flg/json_fields.hpp"

namespace flg {

namespace {
double area_scale(int width, int height) { return static_cast<double>(width) * height / (64.0 * 64.0); }
}  // namespace

double RewardConfig::scaled_tau1(int width, int height) const { return tau1 * area_scale(width, height); }
double RewardConfig::scaled_tau2(int width, int height) const { return tau2 * area_scale(width, height); }

double grasp_reward(const ExecutionOutcome& outcome, const RewardConfig& cfg) {
    if (outcome.kind != Primitive::Grasp) throw KindMismatchError("grasp reward requested for a move outcome");
    return outcome.grasp_success ? cfg.grasp_reward : 0.0;
}

long heightmap_change(const HeightMap& before, const HeightMap& after, double delta, bool symmetric) {
    if (before.width() != after.width() || before.height() != after.height())
        throw ShapeError("heightmap dimensions differ");
    long mu = 0;
    for (std::size_t i = 0; i < before.cells.size(); ++i) {
        const double d = static_cast<double>(after.cells[i]) - static_cast<double>(before.cells[i]);
        if ((symmetric ? std::abs(d) : d) > delta) ++mu;
    }
    return mu;
}

long coverage_change(const BinaryMap& before, const BinaryMap& after) {
    if (before.width != after.width || before.height != after.height)
        throw ShapeError("clutter map dimensions differ");
    return after.count() - before.count();
}

double move_reward(long mu, long eta, double tau1, double tau2, double value) {
    return (static_cast<double>(mu) > tau1 || static_cast<double>(eta) > tau2) ? value : 0.0;
}

RewardRecord compute_reward(const ExecutionOutcome& outcome, const HeightMap& before,
                            const HeightMap& after, const RewardConfig& rcfg,
                            const PerceptionConfig& pcfg) {
    RewardRecord rec;
    rec.kind = outcome.kind;
    rec.mu = heightmap_change(before, after, rcfg.delta, rcfg.symmetric_height_change);
    rec.eta = coverage_change(clutter_quantization_map(before, pcfg), clutter_quantization_map(after, pcfg));
    if (outcome.kind == Primitive::Grasp) {
        rec.r = grasp_reward(outcome, rcfg);
    } else {
        const int w = before.width(), h = before.height();
        rec.r = move_reward(rec.mu, rec.eta, rcfg.scaled_tau1(w, h), rcfg.scaled_tau2(w, h), rcfg.move_reward);
    }
    return rec;
}

void to_json(nlohmann::json& j, const RewardConfig& c) {
    j = {{"delta", c.delta},
         {"tau1", c.tau1},
         {"tau2", c.tau2},
         {"grasp_reward", c.grasp_reward},
         {"move_reward", c.move_reward},
         {"symmetric_height_change", c.symmetric_height_change}};
}

void from_json(const nlohmann::json& j, RewardConfig& c) {
    FieldReader r(j, "rewards");
    r.get("delta", c.delta);
    r.get("tau1", c.tau1);
    r.get("tau2", c.tau2);
    r.get("grasp_reward", c.grasp_reward);
    r.get("move_reward", c.move_reward);
    r.get("symmetric_height_change", c.symmetric_height_change);
    r.finish();
    if (c.delta <= 0.0) throw ConfigError("rewards.delta must be positive");
    if (c.tau1 < 0.0 || c.tau2 < 0.0) throw ConfigError("reward thresholds must be non-negative");
}

}  // namespace flg
