#include "flg/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "flg/json_fields.hpp"

namespace flg {

void to_json(nlohmann::json& j, const TrainerConfig& c) {
    j = {{"start_objects", c.start_objects},
         {"max_objects", c.max_objects},
         {"ramp_start", c.ramp_start},
         {"ramp_end", c.ramp_end},
         {"preset_start", c.preset_start},
         {"preset_probability", c.preset_probability},
         {"batch_size", c.batch_size},
         {"train_every", c.train_every},
         {"max_actions", c.max_actions},
         {"episode_action_cap", c.episode_action_cap},
         {"target_sync_period", c.target_sync_period},
         {"checkpoint_period", c.checkpoint_period},
         {"eval_period", c.eval_period},
         {"eval_episodes", c.eval_episodes},
         {"grasping_only", c.grasping_only},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainerConfig& c) {
    FieldReader r(j, "trainer");
    r.get("start_objects", c.start_objects);
    r.get("max_objects", c.max_objects);
    r.get("ramp_start", c.ramp_start);
    r.get("ramp_end", c.ramp_end);
    r.get("preset_start", c.preset_start);
    r.get("preset_probability", c.preset_probability);
    r.get("batch_size", c.batch_size);
    r.get("train_every", c.train_every);
    r.get("max_actions", c.max_actions);
    r.get("episode_action_cap", c.episode_action_cap);
    r.get("target_sync_period", c.target_sync_period);
    r.get("checkpoint_period", c.checkpoint_period);
    r.get("eval_period", c.eval_period);
    r.get("eval_episodes", c.eval_episodes);
    r.get("grasping_only", c.grasping_only);
    r.get("seed", c.seed);
    r.finish();
    if (c.start_objects < 1 || c.max_objects < c.start_objects)
        throw ConfigError("trainer object counts must satisfy 1 <= start_objects <= max_objects");
    if (c.ramp_start < 0 || c.ramp_end < c.ramp_start || c.preset_start < c.ramp_end)
        throw ConfigError("trainer curriculum marks must be non-negative and non-decreasing");
    if (c.preset_probability < 0.0 || c.preset_probability > 1.0)
        throw ConfigError("trainer.preset_probability must lie in [0, 1]");
    if (c.batch_size < 1 || c.train_every < 1) throw ConfigError("trainer batch_size and train_every must be positive");
    if (c.max_actions < 0) throw ConfigError("trainer.max_actions must be non-negative");
    if (c.episode_action_cap < 1) throw ConfigError("trainer.episode_action_cap must be positive");
    if (c.target_sync_period < 1) throw ConfigError("trainer.target_sync_period must be positive");
    if (c.checkpoint_period < 0 || c.eval_period < 0 || c.eval_episodes < 0)
        throw ConfigError("trainer periods must be non-negative");
}

void to_json(nlohmann::json& j, const GlobalConfig& c) {
    j = nlohmann::json::object();
    j["schema"] = "flg-config";
    j["version"] = kConfigSchemaVersion;
    j["world"] = c.world;
    j["perception"] = c.perception;
    j["rewards"] = c.rewards;
    j["network"] = c.network;
    j["replay"] = c.replay;
    j["policy"] = c.policy;
    j["trainer"] = c.trainer;
}

void from_json(const nlohmann::json& j, GlobalConfig& c) {
    FieldReader r(j, "config");
    std::string schema = "flg-config";
    int version = kConfigSchemaVersion;
    r.get("schema", schema);
    r.get("version", version);
    if (schema != "flg-config") throw ConfigError("unexpected config schema '" + schema + "'");
    if (version != kConfigSchemaVersion) throw ConfigError("unsupported config version " + std::to_string(version));
    r.get("world", c.world);
    r.get("perception", c.perception);
    r.get("rewards", c.rewards);
    r.get("network", c.network);
    r.get("replay", c.replay);
    r.get("policy", c.policy);
    r.get("trainer", c.trainer);
    r.finish();
    if (c.network.in_channels != c.perception.channels)
        throw ConfigError("network.in_channels must equal perception.channels");
}

GlobalConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse " + path.string() + ": " + e.what());
    }
    GlobalConfig cfg;
    from_json(j, cfg);
    return cfg;
}

void save_config(const std::filesystem::path& path, const GlobalConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << nlohmann::json(cfg).dump(2) << '\n';
}

}  // namespace flg
