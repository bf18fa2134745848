#pragma once

#include <nlohmann/json_fwd.hpp>

#include "flg/perception.hpp"
#include "flg/world.hpp"

namespace flg {

struct RewardConfig {
    double delta = 0.01;  ///< height-increase threshold
    double tau1 = 20.0;   ///< changed-pixel threshold at the 64 x 64 reference grid
    double tau2 = 30.0;   ///< coverage-gain threshold at the 64 x 64 reference grid
    double grasp_reward = 1.0;
    double move_reward = 0.5;
    /// Count |after - before| > delta instead of the one-sided increase.
    bool symmetric_height_change = false;

    /// Thresholds rescaled by grid area relative to 64 x 64.
    double scaled_tau1(int width, int height) const;
    double scaled_tau2(int width, int height) const;

    friend bool operator==(const RewardConfig&, const RewardConfig&) = default;
};

struct RewardRecord {
    double r = 0.0;
    long mu = 0;
    long eta = 0;
    Primitive kind = Primitive::Grasp;
};

double grasp_reward(const ExecutionOutcome& outcome, const RewardConfig& cfg = {});

/// Number of pixels whose height rose by more than delta.
long heightmap_change(const HeightMap& before, const HeightMap& after, double delta,
                      bool symmetric = false);

/// Signed change in the number of set pixels between two clutter maps.
long coverage_change(const BinaryMap& before, const BinaryMap& after);

double move_reward(long mu, long eta, double tau1, double tau2, double value = 0.5);

/// Full reward for one executed action given the heightmaps around it.
RewardRecord compute_reward(const ExecutionOutcome& outcome, const HeightMap& before,
                            const HeightMap& after, const RewardConfig& rcfg,
                            const PerceptionConfig& pcfg);

void to_json(nlohmann::json& j, const RewardConfig& c);
void from_json(const nlohmann::json& j, RewardConfig& c);

}  // namespace flg
