#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "flg/config.hpp"
#include "flg/perception.hpp"
#include "flg/policy.hpp"
#include "flg/qnet.hpp"
#include "flg/trainer.hpp"
#include "flg/world.hpp"

namespace fs = std::filesystem;
using namespace flg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitBadCheckpoint = 3;

/// Missing or unreadable user input.
struct InputError : Error {
    using Error::Error;
};

/// Checkpoint that cannot be opened or decoded.
struct CheckpointError : Error {
    using Error::Error;
};

void require_file(const fs::path& p, const char* what) {
    if (!fs::is_regular_file(p)) throw InputError(fmt::format("{} not found: {}", what, p.string()));
}

GlobalConfig config_or_default(const std::string& path) {
    if (path.empty()) return {};
    require_file(path, "config file");
    return load_config(path);
}

std::unique_ptr<nn::QNet<float>> open_checkpoint(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw CheckpointError("checkpoint not found: " + path.string());
    try {
        return load_checkpoint(path);
    } catch (const FormatError& e) {
        throw CheckpointError(e.what());
    } catch (const CorruptionError& e) {
        throw CheckpointError(e.what());
    }
}

WorldState read_scene(const fs::path& path) {
    require_file(path, "scene file");
    std::ifstream in(path);
    try {
        nlohmann::json j;
        in >> j;
        return j.get<WorldState>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(fmt::format("cannot parse scene {}: {}", path.string(), e.what()));
    } catch (const FormatError& e) {
        throw InputError(fmt::format("bad scene {}: {}", path.string(), e.what()));
    }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

int cmd_scene(int count, std::uint64_t seed, const fs::path& out, const std::string& config) {
    const GlobalConfig cfg = config_or_default(config);
    if (count < 0 || count > cfg.world.max_blocks)
        throw InputError(fmt::format("--count must lie in [0, {}]", cfg.world.max_blocks));
    const WorldState s = spawn_random_scene(count, seed, cfg.world);
    write_json(out, nlohmann::json(s));
    spdlog::info("wrote {} blocks to {}", s.blocks.size(), out.string());
    return kExitOk;
}

int cmd_render(const fs::path& scene_path, const std::string& ckpt, const fs::path& out, const std::string& config) {
    const GlobalConfig cfg = config_or_default(config);
    const WorldState scene = read_scene(scene_path);
    std::unique_ptr<nn::QNet<float>> net;
    if (!ckpt.empty()) net = open_checkpoint(ckpt);
    fs::create_directories(out);

    const PerceptionConfig& pc = cfg.perception;
    const HeightMap hm = render_heightmap(scene, pc);
    const BinaryMap rho_g = binarize(hm, pc.bin_floor);
    write_heightmap_pgm(out / "heightmap.pgm", hm);
    write_mask_pgm(out / "cqm.pgm", clutter_quantization_map(hm, pc));
    write_mask_pgm(out / "grasp_mask.pgm", rho_g);
    write_mask_pgm(out / "move_mask.pgm", moving_mask(rho_g, pc));
    if (net) {
        const QMaps q = q_maps(*net, build_observation(hm, pc));
        for (int r = 0; r < q.rotations; ++r)
            for (int c = 0; c < q.channels; ++c) {
                const std::span<const float> plane(q.data.data() + (static_cast<std::size_t>(r) * q.channels + c) * q.plane(),
                                                   q.plane());
                const char* name = c == kGraspChannel ? "grasp" : "move";
                write_heat_pgm(out / fmt::format("q_r{:02d}_{}.pgm", r, name), plane, q.width, q.height,
                               fmt::format("flg-qmap v1 rotation={} channel={}", r, name));
            }
    }
    spdlog::info("rendered {} to {}", scene_path.string(), out.string());
    return kExitOk;
}

int cmd_train(const fs::path& config, std::optional<std::uint64_t> seed, const fs::path& out,
              const std::string& resume) {
    require_file(config, "config file");
    GlobalConfig cfg = load_config(config);
    if (seed) cfg.trainer.seed = *seed;
    std::optional<fs::path> from;
    if (!resume.empty()) {
        if (!fs::is_regular_file(resume)) throw CheckpointError("snapshot not found: " + resume);
        from = resume;
    }
    try {
        run_training(cfg, out, from);
    } catch (const FormatError& e) {
        if (from) throw CheckpointError(e.what());
        throw;
    } catch (const CorruptionError& e) {
        if (from) throw CheckpointError(e.what());
        throw;
    }
    spdlog::info("training finished: {} actions, outputs in {}", cfg.trainer.max_actions, out.string());
    return kExitOk;
}

int cmd_eval(const std::string& ckpt, const std::string& scenario, int episodes, const fs::path& out,
             const std::string& policy_name, std::uint64_t seed, const std::string& config, int max_actions) {
    const GlobalConfig cfg = config_or_default(config);
    EvalOptions opts;
    opts.scenario = scenario;
    opts.episodes = episodes;
    opts.max_actions = max_actions;
    opts.seed = seed;
    try {
        opts.policy = parse_eval_policy(policy_name);
    } catch (const ConfigError& e) {
        throw InputError(e.what());
    }
    if (episodes < 0) throw InputError("--episodes must be non-negative");
    std::unique_ptr<nn::QNet<float>> net;
    if (opts.policy == EvalPolicy::Network) {
        if (ckpt.empty()) throw InputError("--ckpt is required for the network policy");
        net = open_checkpoint(ckpt);
    } else if (!ckpt.empty()) {
        net = open_checkpoint(ckpt);
    }
    const EvalSummary s = run_eval(net.get(), cfg, opts);
    write_json(out / "summary.json", nlohmann::json(s));
    spdlog::info("{} episodes: grasp success {:.3f}, completion {:.3f}, actions/object {:.2f}", s.episodes,
                 s.grasp_success_rate(), s.completion_rate(), s.actions_per_object());
    return kExitOk;
}

int cmd_inspect(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw CheckpointError("checkpoint not found: " + path.string());
    Checkpoint ck;
    try {
        ck = read_checkpoint(path);
    } catch (const FormatError& e) {
        throw CheckpointError(e.what());
    } catch (const CorruptionError& e) {
        throw CheckpointError(e.what());
    }
    const NetworkConfig& a = ck.arch;
    fmt::print("checkpoint {} (format v{})\n", path.string(), kCheckpointVersion);
    fmt::print("in_channels {}  stages {},{},{},{}  bottleneck {}  head {}\n", a.in_channels, a.stage_channels[0],
               a.stage_channels[1], a.stage_channels[2], a.stage_channels[3], a.bottleneck_channels, a.head_channels);
    fmt::print("{:<28} {:>18} {:>9} {:>12} {:>12} {:>12} {:>12}\n", "tensor", "shape", "count", "mean", "std", "min",
               "max");
    std::size_t total = 0;
    for (const auto& t : ck.tensors) {
        std::string shape;
        for (std::size_t i = 0; i < t.shape.size(); ++i) shape += (i ? "x" : "") + std::to_string(t.shape[i]);
        double sum = 0.0, sq = 0.0, lo = INFINITY, hi = -INFINITY;
        for (float v : t.values) {
            sum += v;
            sq += static_cast<double>(v) * v;
            lo = std::min(lo, static_cast<double>(v));
            hi = std::max(hi, static_cast<double>(v));
        }
        const double n = static_cast<double>(std::max<std::size_t>(t.values.size(), 1));
        const double mean = sum / n;
        const double sd = std::sqrt(std::max(0.0, sq / n - mean * mean));
        fmt::print("{:<28} {:>18} {:>9} {:>12.5g} {:>12.5g} {:>12.5g} {:>12.5g}\n", t.name, shape, t.values.size(),
                   mean, sd, lo, hi);
        total += t.values.size();
    }
    fmt::print("total values {}\n", total);
    return kExitOk;
}

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("flg");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* level = std::getenv("FLG_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"flg: clutter-grasping simulator and pixel-wise Q-learning"};
    app.require_subcommand(1);

    auto* scene = app.add_subcommand("scene", "generate a random scene");
    int count = 10;
    std::uint64_t scene_seed = 0;
    std::string scene_out, scene_config;
    scene->add_option("--count", count, "number of blocks")->required();
    scene->add_option("--seed", scene_seed, "scene seed")->required();
    scene->add_option("--out", scene_out, "output JSON path")->required();
    scene->add_option("--config", scene_config, "global config JSON");

    auto* render = app.add_subcommand("render", "render heightmap, masks and optional Q-maps");
    std::string render_scene, render_ckpt, render_out, render_config;
    render->add_option("--scene", render_scene, "scene JSON")->required();
    render->add_option("--ckpt", render_ckpt, "network checkpoint");
    render->add_option("--out", render_out, "output directory")->required();
    render->add_option("--config", render_config, "global config JSON");

    auto* train = app.add_subcommand("train", "train the Q network");
    std::string train_config, train_out, train_resume;
    std::optional<std::uint64_t> train_seed;
    train->add_option("--config", train_config, "global config JSON")->required();
    train->add_option("--seed", train_seed, "overrides trainer.seed");
    train->add_option("--out", train_out, "output directory")->required();
    train->add_option("--resume", train_resume, "snapshot.bin to resume from");

    auto* eval = app.add_subcommand("eval", "evaluate a policy");
    std::string eval_ckpt, eval_scenario = "random-5", eval_out, eval_policy = "network", eval_config;
    int eval_episodes = 10, eval_max_actions = 30;
    std::uint64_t eval_seed = 0;
    eval->add_option("--ckpt", eval_ckpt, "network checkpoint");
    eval->add_option("--scenario", eval_scenario, "empty, single, random-N, preset-V or preset-all");
    eval->add_option("--episodes", eval_episodes, "episode count");
    eval->add_option("--out", eval_out, "output directory")->required();
    eval->add_option("--policy", eval_policy, "network, scripted or random");
    eval->add_option("--seed", eval_seed, "scenario seed");
    eval->add_option("--config", eval_config, "global config JSON");
    eval->add_option("--max-actions", eval_max_actions, "action cap per episode");

    auto* inspect = app.add_subcommand("inspect-ckpt", "print the shape table and statistics of a checkpoint");
    std::string inspect_path;
    inspect->add_option("path", inspect_path, "checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitBadInput;
    }

    try {
        if (*scene) return cmd_scene(count, scene_seed, scene_out, scene_config);
        if (*render) return cmd_render(render_scene, render_ckpt, render_out, render_config);
        if (*train) return cmd_train(train_config, train_seed, train_out, train_resume);
        if (*eval)
            return cmd_eval(eval_ckpt, eval_scenario, eval_episodes, eval_out, eval_policy, eval_seed, eval_config,
                            eval_max_actions);
        if (*inspect) return cmd_inspect(inspect_path);
    } catch (const CheckpointError& e) {
        spdlog::error("{}", e.what());
        return kExitBadCheckpoint;
    } catch (const InputError& e) {
        spdlog::error("{}", e.what());
        return kExitBadInput;
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return kExitBadInput;
    } catch (const UnknownVariantError& e) {
        spdlog::error("{}", e.what());
        return kExitBadInput;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitFailure;
    }
    return kExitFailure;
}
