#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flg/config.hpp"
#include "flg/policy.hpp"
#include "flg/qnet.hpp"
#include "flg/replay.hpp"
#include "flg/rewards.hpp"
#include "flg/world.hpp"

namespace flg {

/// Scene chosen for the next episode.
struct ResetPlan {
    bool preset = false;
    int variant = 0;
    int count = 0;
    std::uint64_t scene_seed = 0;
};

/// Object count scheduled for resets at `step`: constant until the ramp
/// start, then linear up to the maximum at the ramp end.
int scheduled_object_count(long step, const TrainerConfig& cfg);

/// Draws the next episode's scene. Consumes the RNG identically for a given step.
ResetPlan plan_reset(long step, const TrainerConfig& cfg, Rng& rng);
WorldState materialize(const ResetPlan& plan, const WorldConfig& wcfg);

struct MetricsRow {
    long step = 0;
    long episode = 0;
    std::string kind;  ///< grasp, push or shift
    double reward = 0.0;
    bool grasp_success = false;
    double trailing_success = 0.0;  ///< grasp successes / attempts over the last 200 actions
    long mu = 0;
    long eta = 0;
    double loss = 0.0;  ///< NaN when no update ran
    double epsilon = 0.0;
    int objects = 0;  ///< blocks present before the action
    std::string path;  ///< greedy, explore or repeat-avoid
    bool forced_move = false;
};

inline constexpr int kTrailingWindow = 200;

std::string metrics_header();
std::string format_metrics_row(const MetricsRow& row);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

/// Single-threaded training loop with all state needed to resume exactly.
class Trainer {
public:
    explicit Trainer(const GlobalConfig& cfg);

    /// Runs one action: observe, select, execute, reward, store and learn.
    const MetricsRow& step();
    /// Steps until `total_actions` actions have been taken overall.
    void run_until(long total_actions, const std::function<void(const MetricsRow&)>& on_row = {});

    /// One prioritized learning update; returns the weighted mean Huber loss.
    double train_step();

    void save_snapshot(const std::filesystem::path& path) const;
    void load_snapshot(const std::filesystem::path& path);

    long actions() const { return step_; }
    long train_steps() const { return train_steps_; }
    const std::vector<MetricsRow>& metrics() const { return rows_; }
    const GlobalConfig& config() const { return cfg_; }
    nn::QNet<float>& online() { return *online_; }
    nn::QNet<float>& target() { return *target_; }
    PrioritizedReplay& replay() { return replay_; }
    const WorldState& world() const { return world_; }
    Rng& rng() { return rng_; }

private:
    void reset_episode();
    QMaps masked_online_maps(const HeightMap& hm);

    GlobalConfig cfg_;
    std::unique_ptr<nn::QNet<float>> online_, target_;
    Adam<float> adam_;
    PrioritizedReplay replay_;
    Rng rng_;
    WorldState world_;
    SelectionHistory history_;
    bool need_reset_ = true;
    long step_ = 0;
    long train_steps_ = 0;
    long episode_ = 0;
    int episode_actions_ = 0;
    std::deque<std::pair<bool, bool>> window_;  ///< (was grasp, succeeded) of the last actions
    std::vector<MetricsRow> rows_;
};

/// Runs training into `out_dir`: metrics.csv, model.ckpt, config.json and a
/// resumable snapshot. Resumes from `resume_from` when given.
void run_training(const GlobalConfig& cfg, const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& resume_from = std::nullopt);

enum class EvalPolicy { Network, Scripted, Random };

struct EvalOptions {
    std::string scenario = "random-5";  ///< random-N, preset-V or preset-all
    int episodes = 10;
    int max_actions = 30;
    EvalPolicy policy = EvalPolicy::Network;
    std::uint64_t seed = 0;
};

struct EvalSummary {
    std::string scenario;
    std::string policy;
    int episodes = 0;
    int completed = 0;
    long actions = 0;
    long grasp_attempts = 0;
    long grasp_successes = 0;
    long moves = 0;
    long objects_initial = 0;
    long objects_removed = 0;
    int first_action_moves = 0;

    double grasp_success_rate() const;
    double completion_rate() const;
    double actions_per_object() const;
    double first_action_move_fraction() const;
};

void to_json(nlohmann::json& j, const EvalSummary& s);

/// Greedy rollouts (epsilon 0, masks, repeat avoidance and move trigger on).
/// `net` may be null for the scripted and random policies.
EvalSummary run_eval(nn::QNet<float>* net, const GlobalConfig& cfg, const EvalOptions& opts);

EvalPolicy parse_eval_policy(const std::string& name);
std::string eval_policy_name(EvalPolicy p);

}  // namespace flg
