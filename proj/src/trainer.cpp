#include "flg/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "flg/binio.hpp"

namespace flg {

int scheduled_object_count(long step, const TrainerConfig& cfg) {
    if (step < cfg.ramp_start) return cfg.start_objects;
    if (step >= cfg.ramp_end) return cfg.max_objects;
    const long span = cfg.ramp_end - cfg.ramp_start;
    const long extra = static_cast<long>(cfg.max_objects - cfg.start_objects) * (step - cfg.ramp_start) / span;
    return cfg.start_objects + static_cast<int>(extra);
}

ResetPlan plan_reset(long step, const TrainerConfig& cfg, Rng& rng) {
    ResetPlan plan;
    if (step >= cfg.preset_start && cfg.preset_probability > 0.0 && rng.bernoulli(cfg.preset_probability)) {
        plan.preset = true;
        plan.variant = static_cast<int>(rng.below(static_cast<std::uint64_t>(preset_count())));
    } else {
        plan.count = scheduled_object_count(step, cfg);
    }
    plan.scene_seed = rng.next_u64();
    return plan;
}

WorldState materialize(const ResetPlan& plan, const WorldConfig& wcfg) {
    if (plan.preset) return spawn_preset_clutter(plan.variant, wcfg);
    return spawn_random_scene(plan.count, plan.scene_seed, wcfg);
}

// ---- metrics ----

std::string metrics_header() {
    return "# flg-metrics v1\n"
           "step,episode,kind,reward,grasp_success,trailing_success,mu,eta,loss,epsilon,objects,path,forced_move";
}

std::string format_metrics_row(const MetricsRow& r) {
    return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}", r.step, r.episode, r.kind, r.reward,
                       r.grasp_success ? 1 : 0, r.trailing_success, r.mu, r.eta, r.loss, r.epsilon, r.objects,
                       r.path, r.forced_move ? 1 : 0);
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << metrics_header() << '\n';
    for (const auto& r : rows) out << format_metrics_row(r) << '\n';
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "# flg-metrics v1") throw FormatError(path.string() + ": not a metrics file");
    std::getline(in, line);
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 13) throw FormatError(path.string() + ": bad row '" + line + "'");
        MetricsRow r;
        r.step = std::stol(f[0]);
        r.episode = std::stol(f[1]);
        r.kind = f[2];
        r.reward = std::stod(f[3]);
        r.grasp_success = f[4] == "1";
        r.trailing_success = std::stod(f[5]);
        r.mu = std::stol(f[6]);
        r.eta = std::stol(f[7]);
        r.loss = f[8] == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(f[8]);
        r.epsilon = std::stod(f[9]);
        r.objects = std::stoi(f[10]);
        r.path = f[11];
        r.forced_move = f[12] == "1";
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---- trainer ----

namespace {

const char* path_name(SelectionPath p) {
    switch (p) {
        case SelectionPath::Greedy: return "greedy";
        case SelectionPath::Explore: return "explore";
        case SelectionPath::RepeatAvoid: return "repeat-avoid";
    }
    return "?";
}

const char* kind_name(const ExecutionOutcome& o) {
    if (o.kind == Primitive::Grasp) return "grasp";
    return o.resolved_move == MoveKind::Shift ? "shift" : "push";
}

QMaps mask_for(const QMaps& q, const HeightMap& hm, const PerceptionConfig& pcfg, bool grasping_only) {
    const BinaryMap rho_g = binarize(hm, pcfg.bin_floor);
    const BinaryMap rho_m = grasping_only ? BinaryMap(hm.width(), hm.height()) : moving_mask(rho_g, pcfg);
    return masked_qmaps(q, rho_g, rho_m);
}

nn::Tensor4<float> as_batch(const std::vector<float>& entry, int channels, int h, int w) {
    nn::Tensor4<float> t(1, channels, h, w);
    std::copy(entry.begin(), entry.end(), t.data.begin());
    return t;
}

constexpr char kSnapshotMagic[4] = {'F', 'L', 'G', 'S'};
constexpr std::uint32_t kSnapshotVersion = 1;

void write_world(BinaryWriter& w, const WorldState& s) {
    w.f64(s.bounds.xmin);
    w.f64(s.bounds.ymin);
    w.f64(s.bounds.xmax);
    w.f64(s.bounds.ymax);
    w.u64(s.rng_seed);
    w.i32(s.step_count);
    w.u32(static_cast<std::uint32_t>(s.blocks.size()));
    for (const auto& b : s.blocks) {
        w.i32(b.id);
        w.f64(b.height);
        w.f64(b.pose.x);
        w.f64(b.pose.y);
        w.f64(b.pose.yaw);
        w.u32(static_cast<std::uint32_t>(b.footprint.size()));
        for (const auto& v : b.footprint) {
            w.f64(v.x);
            w.f64(v.y);
        }
    }
}

WorldState read_world(BinaryReader& r) {
    WorldState s;
    s.bounds.xmin = r.f64();
    s.bounds.ymin = r.f64();
    s.bounds.xmax = r.f64();
    s.bounds.ymax = r.f64();
    s.rng_seed = r.u64();
    s.step_count = r.i32();
    const std::uint32_t n = r.u32();
    if (n > 100000) throw CorruptionError("implausible block count in snapshot");
    s.blocks.resize(n);
    for (auto& b : s.blocks) {
        b.id = r.i32();
        b.height = r.f64();
        b.pose.x = r.f64();
        b.pose.y = r.f64();
        b.pose.yaw = r.f64();
        const std::uint32_t nv = r.u32();
        if (nv > 1000) throw CorruptionError("implausible vertex count in snapshot");
        b.footprint.resize(nv);
        for (auto& v : b.footprint) {
            v.x = r.f64();
            v.y = r.f64();
        }
    }
    return s;
}

void write_tensors(BinaryWriter& w, const nn::QNet<float>& net) {
    const auto t = net.state_tensors();
    w.u32(static_cast<std::uint32_t>(t.size()));
    for (const auto* p : t) {
        w.u64(p->value.size());
        for (float v : p->value) w.f32(v);
    }
}

void read_tensors(BinaryReader& r, nn::QNet<float>& net) {
    auto t = net.state_tensors();
    if (r.u32() != t.size()) throw FormatError("snapshot network layout differs");
    for (auto* p : t) {
        if (r.u64() != p->value.size()) throw FormatError("snapshot tensor size differs for " + p->name);
        for (float& v : p->value) v = r.f32();
    }
}

void write_row(BinaryWriter& w, const MetricsRow& m) {
    w.i64(m.step);
    w.i64(m.episode);
    w.str(m.kind);
    w.f64(m.reward);
    w.u8(m.grasp_success);
    w.f64(m.trailing_success);
    w.i64(m.mu);
    w.i64(m.eta);
    w.f64(m.loss);
    w.f64(m.epsilon);
    w.i32(m.objects);
    w.str(m.path);
    w.u8(m.forced_move);
}

MetricsRow read_row(BinaryReader& r) {
    MetricsRow m;
    m.step = r.i64();
    m.episode = r.i64();
    m.kind = r.str();
    m.reward = r.f64();
    m.grasp_success = r.u8() != 0;
    m.trailing_success = r.f64();
    m.mu = r.i64();
    m.eta = r.i64();
    m.loss = r.f64();
    m.epsilon = r.f64();
    m.objects = r.i32();
    m.path = r.str();
    m.forced_move = r.u8() != 0;
    return m;
}

}  // namespace

Trainer::Trainer(const GlobalConfig& cfg) : cfg_(cfg), replay_(cfg.replay), rng_(cfg.trainer.seed) {
    if (cfg.network.in_channels != cfg.perception.channels)
        throw ConfigError("network.in_channels must equal perception.channels");
    const std::uint64_t init_seed = rng_.next_u64();
    online_ = std::make_unique<nn::QNet<float>>(cfg.network, init_seed);
    target_ = std::make_unique<nn::QNet<float>>(cfg.network, init_seed);
    target_->copy_from(*online_);
    adam_ = Adam<float>({cfg.network.learning_rate, cfg.network.beta1, cfg.network.beta2, cfg.network.adam_eps},
                        online_->parameters());
}

void Trainer::reset_episode() {
    const ResetPlan plan = plan_reset(step_, cfg_.trainer, rng_);
    world_ = materialize(plan, cfg_.world);
    history_ = {};
    episode_actions_ = 0;
    need_reset_ = false;
    ++episode_;
}

QMaps Trainer::masked_online_maps(const HeightMap& hm) {
    const ObservationStack obs = build_observation(hm, cfg_.perception);
    return mask_for(q_maps(*online_, obs), hm, cfg_.perception, cfg_.trainer.grasping_only);
}

const MetricsRow& Trainer::step() {
    if (need_reset_ || is_empty(world_)) reset_episode();
    const TrainerConfig& tc = cfg_.trainer;
    const PerceptionConfig& pc = cfg_.perception;

    const HeightMap hm = render_heightmap(world_, pc);
    const QMaps masked = masked_online_maps(hm);

    PolicyConfig policy = cfg_.policy;
    bool allow_move = !tc.grasping_only;
    if (tc.grasping_only) policy.trigger_failures = 0;
    if (allow_move && step_ < policy.move_suppression_steps && rng_.bernoulli(policy.move_suppression_prob))
        allow_move = false;
    const double eps = policy.epsilon(step_);
    const Selection sel = select_action(masked, history_, policy, {eps, allow_move}, rng_);

    const int objects = static_cast<int>(world_.blocks.size());
    const ExecutionResult res = execute(world_, to_primitive(sel.action, hm), cfg_.world);
    const HeightMap hm_next = render_heightmap(res.state, pc);
    const RewardRecord rec = compute_reward(res.outcome, hm, hm_next, cfg_.rewards, pc);
    const bool terminal = is_empty(res.state);

    Transition t;
    t.obs = CompressedObservation::from(hm, pc, cfg_.replay.store_rotations);
    t.action = sel.action;
    t.reward = rec.r;
    t.next_obs = CompressedObservation::from(hm_next, pc, cfg_.replay.store_rotations);
    t.terminal = terminal;
    replay_.push(std::move(t));

    double loss = std::numeric_limits<double>::quiet_NaN();
    if (replay_.size() >= static_cast<std::size_t>(tc.batch_size) && step_ % tc.train_every == 0) loss = train_step();

    const bool is_grasp = res.outcome.kind == Primitive::Grasp;
    if (is_grasp && !res.outcome.grasp_success)
        ++history_.consecutive_failures;
    else
        history_.consecutive_failures = 0;
    history_.previous = hm_next.cells == hm.cells ? std::optional<ActionIndex>(sel.action) : std::nullopt;

    window_.emplace_back(is_grasp, res.outcome.grasp_success);
    if (window_.size() > static_cast<std::size_t>(kTrailingWindow)) window_.pop_front();
    long attempts = 0, successes = 0;
    for (const auto& [g, s] : window_) {
        attempts += g;
        successes += g && s;
    }

    MetricsRow row;
    row.step = step_;
    row.episode = episode_;
    row.kind = kind_name(res.outcome);
    row.reward = rec.r;
    row.grasp_success = res.outcome.grasp_success;
    row.trailing_success = attempts > 0 ? static_cast<double>(successes) / static_cast<double>(attempts) : 0.0;
    row.mu = rec.mu;
    row.eta = rec.eta;
    row.loss = loss;
    row.epsilon = eps;
    row.objects = objects;
    row.path = path_name(sel.path);
    row.forced_move = sel.forced_move;
    rows_.push_back(std::move(row));

    world_ = res.state;
    ++step_;
    ++episode_actions_;
    if (terminal || episode_actions_ >= tc.episode_action_cap) need_reset_ = true;
    return rows_.back();
}

void Trainer::run_until(long total_actions, const std::function<void(const MetricsRow&)>& on_row) {
    while (step_ < total_actions) {
        const MetricsRow& row = step();
        if (on_row) on_row(row);
    }
}

double Trainer::train_step() {
    const TrainerConfig& tc = cfg_.trainer;
    const PerceptionConfig& pc = cfg_.perception;
    const int batch = tc.batch_size;
    const double progress = tc.max_actions > 0 ? static_cast<double>(step_) / static_cast<double>(tc.max_actions) : 1.0;
    const ReplaySample sample = replay_.sample(batch, replay_.beta_at(progress), rng_);

    const int h = pc.grid_size, w = pc.grid_size, c = pc.channels;
    std::vector<double> targets(static_cast<std::size_t>(batch));
    nn::Tensor4<float> x(batch, c, h, w);
    for (int i = 0; i < batch; ++i) {
        const Transition& t = replay_.at(sample.indices[static_cast<std::size_t>(i)]);
        double y = t.reward;
        if (!t.terminal) {
            const HeightMap next_hm = t.next_obs.heightmap();
            const ObservationStack next_obs = t.next_obs.observation(pc);
            const QMaps next_masked = mask_for(q_maps(*online_, next_obs), next_hm, pc, tc.grasping_only);
            y = ddqn_target(
                t.reward, false, next_masked,
                [&](const ActionIndex& a) {
                    const auto out = target_->forward(as_batch(t.next_obs.entry(a.rotation, pc), c, h, w),
                                                      nn::Mode::Eval);
                    return static_cast<double>(out.q.at(0, a.channel, a.py, a.px));
                },
                cfg_.policy.gamma);
        }
        targets[static_cast<std::size_t>(i)] = y;
        const auto entry = t.obs.entry(t.action.rotation, pc);
        std::copy(entry.begin(), entry.end(), x.sample(i));
    }

    const auto out = online_->forward(x, nn::Mode::Train);
    nn::Tensor4<float> dq(batch, 2, h, w);
    std::vector<double> td(static_cast<std::size_t>(batch));
    double loss = 0.0;
    for (int i = 0; i < batch; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const ActionIndex& a = replay_.at(sample.indices[k]).action;
        const double q = out.q.at(i, a.channel, a.py, a.px);
        const HuberResult hr = huber_loss(q, targets[k], cfg_.network.huber_kappa);
        loss += sample.weights[k] * hr.loss;
        dq.at(i, a.channel, a.py, a.px) += static_cast<float>(sample.weights[k] * hr.grad / batch);
        td[k] = targets[k] - q;
    }
    loss /= batch;

    online_->zero_grad();
    online_->backward(dq);
    adam_.step(online_->parameters());
    replay_.update_priorities(sample.indices, td);

    ++train_steps_;
    if (train_steps_ % tc.target_sync_period == 0) target_->copy_from(*online_);
    return loss;
}

void Trainer::save_snapshot(const std::filesystem::path& path) const {
    BinaryWriter w;
    w.bytes(kSnapshotMagic, 4);
    w.u32(kSnapshotVersion);
    w.str(nlohmann::json(cfg_).dump());
    w.i64(step_);
    w.i64(train_steps_);
    w.i64(episode_);
    w.i32(episode_actions_);
    w.u8(need_reset_);
    w.str(rng_.state());
    write_world(w, world_);
    w.u8(history_.previous.has_value());
    const ActionIndex prev = history_.previous.value_or(ActionIndex{});
    w.i32(prev.rotation);
    w.i32(prev.channel);
    w.i32(prev.px);
    w.i32(prev.py);
    w.i32(history_.consecutive_failures);
    w.u32(static_cast<std::uint32_t>(window_.size()));
    for (const auto& [g, s] : window_) {
        w.u8(g);
        w.u8(s);
    }
    write_tensors(w, *online_);
    write_tensors(w, *target_);
    w.i64(adam_.steps());
    for (const auto* moments : {&adam_.m, &adam_.v}) {
        w.u32(static_cast<std::uint32_t>(moments->size()));
        for (const auto& vec : *moments) {
            w.u64(vec.size());
            for (float v : vec) w.f32(v);
        }
    }
    replay_.write(w);
    w.u64(rows_.size());
    for (const auto& r : rows_) write_row(w, r);
    w.save_with_checksum(path);
}

void Trainer::load_snapshot(const std::filesystem::path& path) {
    BinaryReader r = BinaryReader::open_checked(path, kSnapshotMagic);
    if (r.u32() != kSnapshotVersion) throw FormatError(path.string() + ": unsupported snapshot version");
    if (r.str() != nlohmann::json(cfg_).dump())
        throw FormatError(path.string() + ": snapshot was written with a different configuration");
    step_ = r.i64();
    train_steps_ = r.i64();
    episode_ = r.i64();
    episode_actions_ = r.i32();
    need_reset_ = r.u8() != 0;
    rng_.set_state(r.str());
    world_ = read_world(r);
    const bool has_prev = r.u8() != 0;
    ActionIndex prev;
    prev.rotation = r.i32();
    prev.channel = r.i32();
    prev.px = r.i32();
    prev.py = r.i32();
    history_.previous = has_prev ? std::optional<ActionIndex>(prev) : std::nullopt;
    history_.consecutive_failures = r.i32();
    window_.clear();
    const std::uint32_t nw = r.u32();
    for (std::uint32_t i = 0; i < nw; ++i) {
        const bool g = r.u8() != 0;
        const bool s = r.u8() != 0;
        window_.emplace_back(g, s);
    }
    read_tensors(r, *online_);
    read_tensors(r, *target_);
    adam_.set_steps(r.i64());
    for (auto* moments : {&adam_.m, &adam_.v}) {
        if (r.u32() != moments->size()) throw FormatError("snapshot optimizer layout differs");
        for (auto& vec : *moments) {
            if (r.u64() != vec.size()) throw FormatError("snapshot optimizer size differs");
            for (float& v : vec) v = r.f32();
        }
    }
    replay_.read(r);
    const std::uint64_t nrows = r.u64();
    rows_.clear();
    for (std::uint64_t i = 0; i < nrows; ++i) rows_.push_back(read_row(r));
    if (r.remaining() != 0) throw CorruptionError(path.string() + ": trailing bytes in snapshot");
}

void run_training(const GlobalConfig& cfg, const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& resume_from) {
    std::filesystem::create_directories(out_dir);
    save_config(out_dir / "config.json", cfg);
    Trainer trainer(cfg);
    if (resume_from) trainer.load_snapshot(*resume_from);
    const TrainerConfig& tc = cfg.trainer;
    save_checkpoint(out_dir / "model.ckpt", trainer.online());

    auto flush = [&] {
        write_metrics_csv(out_dir / "metrics.csv", trainer.metrics());
        save_checkpoint(out_dir / "model.ckpt", trainer.online());
        trainer.save_snapshot(out_dir / "snapshot.bin");
    };

    std::ofstream eval_log;
    if (tc.eval_period > 0) {
        eval_log.open(out_dir / "eval.csv", std::ios::trunc);
        eval_log << "# flg-eval-log v1\nstep,scenario,grasp_success_rate,completion_rate,actions_per_object\n";
    }

    try {
        trainer.run_until(tc.max_actions, [&](const MetricsRow& row) {
            const long done = row.step + 1;
            if (done % 100 == 0)
                spdlog::info("step {} trailing grasp success {:.3f} epsilon {:.3f} loss {:.5f} episode {}", done,
                             row.trailing_success, row.epsilon, row.loss, row.episode);
            if (tc.checkpoint_period > 0 && done % tc.checkpoint_period == 0) {
                std::filesystem::create_directories(out_dir / "checkpoints");
                save_checkpoint(out_dir / "checkpoints" / fmt::format("step_{:06d}.ckpt", done), trainer.online());
                flush();
            }
            if (tc.eval_period > 0 && done % tc.eval_period == 0) {
                EvalOptions eo;
                eo.scenario = "random-" + std::to_string(scheduled_object_count(row.step, tc));
                eo.episodes = tc.eval_episodes;
                eo.max_actions = tc.episode_action_cap;
                eo.seed = tc.seed + 7919;
                const EvalSummary s = run_eval(&trainer.online(), cfg, eo);
                eval_log << fmt::format("{},{},{},{},{}\n", done, eo.scenario, s.grasp_success_rate(),
                                        s.completion_rate(), s.actions_per_object());
                eval_log.flush();
            }
        });
    } catch (...) {
        spdlog::error("training aborted at step {}; flushing checkpoint", trainer.actions());
        flush();
        throw;
    }
    flush();
}

// ---- evaluation ----

double EvalSummary::grasp_success_rate() const {
    return grasp_attempts > 0 ? static_cast<double>(grasp_successes) / static_cast<double>(grasp_attempts) : 0.0;
}
double EvalSummary::completion_rate() const {
    return episodes > 0 ? static_cast<double>(completed) / episodes : 0.0;
}
double EvalSummary::actions_per_object() const {
    return objects_removed > 0 ? static_cast<double>(actions) / static_cast<double>(objects_removed) : 0.0;
}
double EvalSummary::first_action_move_fraction() const {
    return episodes > 0 ? static_cast<double>(first_action_moves) / episodes : 0.0;
}

void to_json(nlohmann::json& j, const EvalSummary& s) {
    j = {{"schema", "flg-eval-summary"},
         {"version", 1},
         {"scenario", s.scenario},
         {"policy", s.policy},
         {"episodes", s.episodes},
         {"completed", s.completed},
         {"actions", s.actions},
         {"grasp_attempts", s.grasp_attempts},
         {"grasp_successes", s.grasp_successes},
         {"moves", s.moves},
         {"objects_initial", s.objects_initial},
         {"objects_removed", s.objects_removed},
         {"first_action_moves", s.first_action_moves},
         {"grasp_success_rate", s.grasp_success_rate()},
         {"completion_rate", s.completion_rate()},
         {"actions_per_object", s.actions_per_object()},
         {"first_action_move_fraction", s.first_action_move_fraction()}};
}

EvalPolicy parse_eval_policy(const std::string& name) {
    if (name == "network") return EvalPolicy::Network;
    if (name == "scripted") return EvalPolicy::Scripted;
    if (name == "random") return EvalPolicy::Random;
    throw ConfigError("unknown policy '" + name + "' (expected network, scripted or random)");
}

std::string eval_policy_name(EvalPolicy p) {
    switch (p) {
        case EvalPolicy::Network: return "network";
        case EvalPolicy::Scripted: return "scripted";
        case EvalPolicy::Random: return "random";
    }
    return "?";
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

WorldState eval_scene(const std::string& scenario, int episode, std::uint64_t seed, const WorldConfig& wcfg) {
    const std::uint64_t scene_seed = splitmix(seed + static_cast<std::uint64_t>(episode));
    if (scenario == "empty") return spawn_random_scene(0, scene_seed, wcfg);
    if (scenario == "single") return spawn_random_scene(1, scene_seed, wcfg);
    if (scenario == "preset-all") return spawn_preset_clutter(episode % preset_count(), wcfg);
    auto number = [&](const std::string& prefix) -> std::optional<int> {
        if (scenario.rfind(prefix, 0) != 0) return std::nullopt;
        const std::string rest = scenario.substr(prefix.size());
        if (rest.empty() || rest.find_first_not_of("0123456789") != std::string::npos)
            throw ConfigError("bad scenario '" + scenario + "'");
        return std::stoi(rest);
    };
    if (auto n = number("random-")) return spawn_random_scene(*n, scene_seed, wcfg);
    if (auto v = number("preset-")) return spawn_preset_clutter(*v, wcfg);
    throw ConfigError("unknown scenario '" + scenario + "' (expected empty, single, random-N, preset-V or preset-all)");
}

QMaps zero_maps(const HeightMap& hm) {
    QMaps q;
    q.height = hm.height();
    q.width = hm.width();
    q.data.assign(static_cast<std::size_t>(q.rotations) * 2 * hm.cells.size(), 0.0f);
    return q;
}

/// First feasible grasp found scanning rotations and rotated pixels in order.
std::optional<ActionIndex> scripted_grasp(const WorldState& world, const HeightMap& hm, const PerceptionConfig& pc,
                                          const WorldConfig& wcfg) {
    const BinaryMap rho_g = binarize(hm, pc.bin_floor);
    for (int r = 0; r < kRotations; ++r) {
        const BinaryMap g = rotate_mask(rho_g, r);
        for (int y = 0; y < g.height; ++y)
            for (int x = 0; x < g.width; ++x) {
                if (!g.at(x, y)) continue;
                const ActionIndex a{r, kGraspChannel, x, y};
                const ActionPrimitive p = to_primitive(a, hm);
                if (grasp_feasible(world, p.x, p.y, r, wcfg)) return a;
            }
    }
    return std::nullopt;
}

}  // namespace

EvalSummary run_eval(nn::QNet<float>* net, const GlobalConfig& cfg, const EvalOptions& opts) {
    if (opts.policy == EvalPolicy::Network && net == nullptr) throw Error("network policy needs a checkpoint");
    if (opts.episodes < 0 || opts.max_actions < 0) throw ConfigError("episodes and max actions must be non-negative");
    const PerceptionConfig& pc = cfg.perception;
    const bool grasping_only = cfg.trainer.grasping_only;
    EvalSummary sum;
    sum.scenario = opts.scenario;
    sum.policy = eval_policy_name(opts.policy);
    sum.episodes = opts.episodes;
    Rng rng(splitmix(opts.seed ^ 0x5eedULL));

    PolicyConfig policy = cfg.policy;
    if (grasping_only || opts.policy == EvalPolicy::Random) policy.trigger_failures = 0;

    for (int ep = 0; ep < opts.episodes; ++ep) {
        WorldState world = eval_scene(opts.scenario, ep, opts.seed, cfg.world);
        sum.objects_initial += static_cast<long>(world.blocks.size());
        SelectionHistory history;
        for (int k = 0; k < opts.max_actions && !is_empty(world); ++k) {
            const HeightMap hm = render_heightmap(world, pc);
            ActionIndex action;
            if (opts.policy == EvalPolicy::Scripted) {
                if (auto g = scripted_grasp(world, hm, pc, cfg.world)) {
                    action = *g;
                } else {
                    // No feasible grasp: scatter with a uniformly drawn move.
                    const QMaps masked = masked_qmaps(zero_maps(hm), BinaryMap(hm.width(), hm.height()),
                                                      moving_mask(binarize(hm, pc.bin_floor), pc));
                    action = select_action(masked, {}, policy, {1.0, true}, rng).action;
                }
            } else if (opts.policy == EvalPolicy::Random) {
                const QMaps masked = mask_for(zero_maps(hm), hm, pc, grasping_only);
                action = select_action(masked, history, policy, {1.0, !grasping_only}, rng).action;
            } else {
                const QMaps masked = mask_for(q_maps(*net, build_observation(hm, pc)), hm, pc, grasping_only);
                action = select_action(masked, history, policy, {0.0, !grasping_only}, rng).action;
            }

            const ExecutionResult res = execute(world, to_primitive(action, hm), cfg.world);
            ++sum.actions;
            const bool is_grasp = res.outcome.kind == Primitive::Grasp;
            if (k == 0 && !is_grasp) ++sum.first_action_moves;
            if (is_grasp) {
                ++sum.grasp_attempts;
                if (res.outcome.grasp_success) {
                    ++sum.grasp_successes;
                    ++sum.objects_removed;
                }
            } else {
                ++sum.moves;
            }
            if (is_grasp && !res.outcome.grasp_success)
                ++history.consecutive_failures;
            else
                history.consecutive_failures = 0;
            const HeightMap hm_next = render_heightmap(res.state, pc);
            history.previous = hm_next.cells == hm.cells ? std::optional<ActionIndex>(action) : std::nullopt;
            world = res.state;
        }
        if (is_empty(world)) ++sum.completed;
    }
    return sum;
}

}  // namespace flg
