#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json_fwd.hpp>

#include "flg/perception.hpp"
#include "flg/policy.hpp"
#include "flg/qnet.hpp"
#include "flg/replay.hpp"
#include "flg/rewards.hpp"
#include "flg/world.hpp"

namespace flg {

struct TrainerConfig {
    int start_objects = 10;
    int max_objects = 20;
    long ramp_start = 400;
    long ramp_end = 1000;
    long preset_start = 1500;
    double preset_probability = 0.2;
    int batch_size = 8;
    int train_every = 1;
    long max_actions = 2000;
    int episode_action_cap = 200;
    int target_sync_period = 100;  ///< in learning updates
    long checkpoint_period = 0;    ///< actions between checkpoints; 0 keeps only the final one
    long eval_period = 0;          ///< actions between evaluations; 0 disables
    int eval_episodes = 5;
    bool grasping_only = false;    ///< disables the move channel and the move trigger
    std::uint64_t seed = 0;

    friend bool operator==(const TrainerConfig&, const TrainerConfig&) = default;
};

void to_json(nlohmann::json& j, const TrainerConfig& c);
void from_json(const nlohmann::json& j, TrainerConfig& c);

inline constexpr int kConfigSchemaVersion = 1;

struct GlobalConfig {
    WorldConfig world;
    PerceptionConfig perception;
    RewardConfig rewards;
    NetworkConfig network;
    ReplayConfig replay;
    PolicyConfig policy;
    TrainerConfig trainer;

    friend bool operator==(const GlobalConfig&, const GlobalConfig&) = default;
};

void to_json(nlohmann::json& j, const GlobalConfig& c);
/// Omitted sections and keys keep their defaults; unknown keys are errors.
void from_json(const nlohmann::json& j, GlobalConfig& c);

GlobalConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const GlobalConfig& cfg);

}  // namespace flg
