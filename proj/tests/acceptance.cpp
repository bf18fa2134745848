// Acceptance harness: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "flg/errors.hpp"
#include "flg/layers.hpp"
#include "flg/policy.hpp"
#include "flg/qnet.hpp"
#include "flg/replay.hpp"
#include "flg/rewards.hpp"
#include "flg/trainer.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace flg;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

// ---- 1: reward math ----

HeightMap flat_map(int n = 64) {
    HeightMap m;
    m.spec = GridSpec::from_bounds({0, 0, 64, 64}, n, n);
    m.cells.assign(static_cast<std::size_t>(n) * n, 0.0f);
    return m;
}

/// A rows x 6 slab whose copy one column to the right raises exactly `rows` cells
/// while leaving the clutter coverage unchanged.
std::pair<HeightMap, HeightMap> column_shift(int rows) {
    HeightMap a = flat_map(), b = flat_map();
    for (int y = 20; y < 20 + rows; ++y)
        for (int x = 0; x < 6; ++x) {
            a.at(30 + x, y) = 0.05f;
            b.at(31 + x, y) = 0.05f;
        }
    return {a, b};
}

Verdict criterion_rewards() {
    const RewardConfig rc;
    const PerceptionConfig pc;
    std::vector<std::string> bad;
    ExecutionOutcome ok{Primitive::Grasp, std::nullopt, true, {}, 0};
    ExecutionOutcome miss{Primitive::Grasp, std::nullopt, false, {}, std::nullopt};
    if (compute_reward(ok, flat_map(), flat_map(), rc, pc).r != 1.0) bad.push_back("grasp success != 1");
    if (compute_reward(miss, flat_map(), flat_map(), rc, pc).r != 0.0) bad.push_back("grasp failure != 0");

    HeightMap lo = flat_map(), hi = flat_map();
    hi.at(7, 9) = 0.05f;
    if (heightmap_change(lo, hi, rc.delta) != 1) bad.push_back("raised cell not counted");
    if (heightmap_change(hi, lo, rc.delta) != 0) bad.push_back("lowered cell counted");
    HeightMap tiny = flat_map();
    tiny.at(7, 9) = static_cast<float>(rc.delta);
    if (heightmap_change(lo, tiny, rc.delta) != 0) bad.push_back("rise equal to delta counted");

    const ExecutionOutcome push{Primitive::Move, MoveKind::Push, false, {0}, std::nullopt};
    const long t1 = std::lround(rc.scaled_tau1(64, 64));
    for (long mu : {t1, t1 + 1}) {
        const auto [a, b] = column_shift(static_cast<int>(mu));
        const RewardRecord rec = compute_reward(push, a, b, rc, pc);
        const double want = mu > t1 ? 0.5 : 0.0;
        if (rec.mu != mu || rec.eta != 0 || rec.r != want)
            bad.push_back(fmt::format("mu={} gave (mu {}, eta {}, r {})", mu, rec.mu, rec.eta, rec.r));
    }
    const long t2 = std::lround(rc.scaled_tau2(64, 64));
    if (move_reward(0, t2, rc.tau1, rc.tau2) != 0.0 || move_reward(0, t2 + 1, rc.tau1, rc.tau2) != 0.5)
        bad.push_back("eta boundary");
    return {bad.empty(), bad.empty() ? "grasp 1.0, one-sided mu, tau1 and tau2 boundaries exact" : fmt::format("{}", fmt::join(bad, "; "))};
}

// ---- 2: morphology ----

Verdict criterion_morphology() {
    PerceptionConfig pc;
    pc.grid_size = 64;
    int mismatches = 0;
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        const int count = static_cast<int>(rng.below(26));
        const WorldState s = spawn_random_scene(count, 1000 + static_cast<std::uint64_t>(i));
        const HeightMap hm = render_heightmap(s, pc);
        const BinaryMap bin = oracle::threshold(oracle::rasterize(s, 64), pc.bin_floor);
        const BinaryMap rho = binarize(hm, pc.bin_floor);
        mismatches += rho != bin;
        mismatches += clutter_quantization_map(hm, pc) != oracle::dilate_scan(bin, pc.effective_cqm_radius());
        mismatches += moving_mask(rho, pc) != oracle::dilate_scan(bin, pc.effective_move_radius());
        const int r = static_cast<int>(rng.below(5));
        mismatches += dilate(rho, r) != oracle::dilate_scan(bin, r);
    }
    return {mismatches == 0, fmt::format("{} mismatching maps over 200 scenes", mismatches)};
}

// ---- 3: gradients ----

using Tensor = nn::Tensor4<double>;

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

Verdict criterion_gradients() {
    const auto always = [] { return true; };
    std::map<std::string, double> worst;
    Rng rng(3);

    for (int stride : {1, 2})
        for (int kernel : {1, 3}) {
            nn::Conv2d<double> conv("c", 3, 4, kernel, stride, kernel / 2, kernel == 1);
            conv.init_kaiming(rng);
            for (auto& v : conv.bias.value) v = rng.uniform(-0.5, 0.5);
            Tensor x = gradcheck::random_tensor(rng, 2, 3, 8, 8);
            const Tensor y = conv.forward(x);
            const Tensor w = gradcheck::random_tensor(rng, y.n, y.c, y.h, y.w);
            std::fill(conv.weight.grad.begin(), conv.weight.grad.end(), 0.0);
            std::fill(conv.bias.grad.begin(), conv.bias.grad.end(), 0.0);
            const Tensor dx = conv.backward(w);
            auto loss = [&] { return gradcheck::weighted_sum(conv.forward(x), w); };
            gradcheck::Report rep;
            gradcheck::compare(x.data, dx.data, all_indices(x.size()), loss, always, "x", rep);
            const auto gw = conv.weight.grad, gb = conv.bias.grad;
            gradcheck::compare(conv.weight.value, gw, all_indices(gw.size()), loss, always, "w", rep);
            if (kernel == 1) gradcheck::compare(conv.bias.value, gb, all_indices(gb.size()), loss, always, "b", rep);
            worst[fmt::format("conv{}s{}", kernel, stride)] = rep.worst;
        }

    for (nn::Mode mode : {nn::Mode::Train, nn::Mode::Eval}) {
        nn::BatchNorm2d<double> bn("bn", 3);
        for (auto& v : bn.gamma.value) v = rng.uniform(0.5, 1.5);
        for (auto& v : bn.beta.value) v = rng.uniform(-0.5, 0.5);
        for (auto& v : bn.running_var.value) v = rng.uniform(0.5, 2.0);
        Tensor x = gradcheck::random_tensor(rng, 2, 3, 8, 8);
        const Tensor y = bn.forward(x, mode);
        const Tensor w = gradcheck::random_tensor(rng, y.n, y.c, y.h, y.w);
        std::fill(bn.gamma.grad.begin(), bn.gamma.grad.end(), 0.0);
        std::fill(bn.beta.grad.begin(), bn.beta.grad.end(), 0.0);
        const Tensor dx = bn.backward(w);
        auto loss = [&] { return gradcheck::weighted_sum(bn.forward(x, mode), w); };
        gradcheck::Report rep;
        gradcheck::compare(x.data, dx.data, all_indices(x.size()), loss, always, "x", rep);
        const auto gg = bn.gamma.grad, gb = bn.beta.grad;
        gradcheck::compare(bn.gamma.value, gg, all_indices(gg.size()), loss, always, "gamma", rep);
        gradcheck::compare(bn.beta.value, gb, all_indices(gb.size()), loss, always, "beta", rep);
        worst[mode == nn::Mode::Train ? "bn-train" : "bn-eval"] = rep.worst;
    }

    {
        nn::ReLU<double> relu;
        Tensor x = gradcheck::random_tensor(rng, 2, 3, 8, 8);
        const Tensor w = gradcheck::random_tensor(rng, 2, 3, 8, 8);
        relu.forward(x);
        const Tensor dx = relu.backward(w);
        const auto sig = relu.pattern_hash();
        gradcheck::Report rep;
        gradcheck::compare(
            x.data, dx.data, all_indices(x.size()), [&] { return gradcheck::weighted_sum(relu.forward(x), w); },
            [&] { return relu.pattern_hash() == sig; }, "x", rep);
        worst["relu"] = rep.worst;
    }

    for (int factor : {2, 4}) {
        nn::BilinearUpsample<double> up(factor);
        Tensor x = gradcheck::random_tensor(rng, 2, 3, 4, 5);
        const Tensor y = up.forward(x);
        const Tensor w = gradcheck::random_tensor(rng, y.n, y.c, y.h, y.w);
        const Tensor dx = up.backward(w);
        gradcheck::Report rep;
        gradcheck::compare(
            x.data, dx.data, all_indices(x.size()), [&] { return gradcheck::weighted_sum(up.forward(x), w); }, always,
            "x", rep);
        worst[fmt::format("bilinear-x{}", factor)] = rep.worst;
    }

    {
        Tensor a = gradcheck::random_tensor(rng, 2, 3, 4, 4), b = gradcheck::random_tensor(rng, 2, 2, 4, 4);
        const Tensor w = gradcheck::random_tensor(rng, 2, 5, 4, 4);
        Tensor da, db;
        nn::split_channels(w, 3, da, db);
        auto loss = [&] { return gradcheck::weighted_sum(nn::concat_channels(a, b), w); };
        gradcheck::Report rep;
        gradcheck::compare(a.data, da.data, all_indices(a.size()), loss, always, "a", rep);
        gradcheck::compare(b.data, db.data, all_indices(b.size()), loss, always, "b", rep);
        Tensor x = gradcheck::random_tensor(rng, 2, 3, 4, 6);
        const Tensor wp = gradcheck::random_tensor(rng, 2, 3, 1, 1);
        const Tensor dx = nn::global_avg_pool_backward(wp, 4, 6);
        gradcheck::compare(
            x.data, dx.data, all_indices(x.size()), [&] { return gradcheck::weighted_sum(nn::global_avg_pool(x), wp); },
            always, "pool", rep);
        worst["concat+pool"] = rep.worst;
    }

    const gradcheck::Report full = gradcheck::check_qnet(7, 40);
    worst["network"] = full.worst;

    double huber = 0.0;
    for (double kappa : {0.5, 1.0, 2.0})
        for (double e : {0.3, -0.3, 1.7, -1.7, 2.5}) {
            const double h = 1e-6;
            const double numeric = (huber_loss(e + h, 0.0, kappa).loss - huber_loss(e - h, 0.0, kappa).loss) / (2 * h);
            huber = std::max(huber, std::abs(huber_loss(e, 0.0, kappa).grad - numeric));
        }

    bool pass = huber < 1e-6 && full.checked > 500 && full.skipped < full.checked / 10;
    double overall = 0.0;
    for (const auto& [name, w] : worst) {
        pass = pass && w < 1e-3;
        overall = std::max(overall, w);
    }
    return {pass, fmt::format("worst relative error {:.2e} over {} layer checks ({} network entries), Huber {:.1e}",
                              overall, worst.size(), full.checked, huber)};
}

// ---- 4: replay statistics ----

Transition tiny_transition(int tag, const PerceptionConfig& pcfg) {
    HeightMap hm = render_heightmap(WorldState{}, pcfg);
    hm.cells[static_cast<std::size_t>(tag) % hm.cells.size()] = 1.0f;
    Transition t;
    t.obs = CompressedObservation::from(hm, pcfg, false);
    t.next_obs = t.obs;
    t.action = {tag % kRotations, tag % 2, tag % pcfg.grid_size, 0};
    return t;
}

Verdict criterion_replay() {
    const std::size_t cap = 64;
    SumTree tree(cap);
    std::vector<double> flat(cap, 0.0);
    Rng rng(4);
    int errors = 0;
    for (int op = 0; op < 10000; ++op) {
        if (rng.bernoulli(0.5)) {
            const std::size_t leaf = rng.below(cap);
            const double v = rng.bernoulli(0.1) ? 0.0 : rng.uniform(0.0, 5.0);
            tree.set(leaf, v);
            flat[leaf] = v;
        } else {
            double total = 0.0;
            for (double v : flat) total += v;
            if (std::abs(tree.total() - total) > 1e-6 * std::max(1.0, total)) ++errors;
            if (total <= 0.0) continue;
            const double prefix = rng.uniform() * total;
            if (tree.find(prefix) != oracle::prefix_scan(flat, prefix)) ++errors;
        }
    }

    PerceptionConfig pcfg;
    pcfg.grid_size = 16;
    ReplayConfig rc;
    rc.capacity = 16;
    PrioritizedReplay replay(rc);
    std::vector<std::size_t> idx(16);
    std::vector<double> td(16);
    for (int i = 0; i < 16; ++i) {
        replay.push(tiny_transition(i, pcfg));
        idx[static_cast<std::size_t>(i)] = static_cast<std::size_t>(i);
        td[static_cast<std::size_t>(i)] = 0.2 * (i + 1);
    }
    replay.update_priorities(idx, td);
    double z = 0.0;
    for (double t : td) z += std::pow(t + rc.priority_eps, rc.alpha);
    const int draws = 100000;
    std::vector<int> counts(16, 0);
    Rng draw_rng(2024);
    for (int d = 0; d < draws; ++d) ++counts[replay.sample(1, 0.4, draw_rng).indices[0]];
    double chi = 0.0;
    for (std::size_t i = 0; i < 16; ++i) {
        const double expected = draws * std::pow(td[i] + rc.priority_eps, rc.alpha) / z;
        chi += std::pow(counts[i] - expected, 2) / expected;
    }
    // Upper 5% point of chi-square with 15 degrees of freedom.
    const double critical = 24.996;
    return {errors == 0 && chi < critical,
            fmt::format("{} tree/oracle disagreements in 10^4 ops, chi-square {:.2f} < {}", errors, chi, critical)};
}

// ---- 5: policy invariants ----

QMaps random_q(Rng& rng, int n) {
    QMaps q;
    q.height = n;
    q.width = n;
    q.data.resize(static_cast<std::size_t>(kRotations) * 2 * n * n);
    for (auto& v : q.data) v = static_cast<float>(rng.uniform(-2.0, 2.0));
    return q;
}

BinaryMap random_blobs(Rng& rng, int n) {
    BinaryMap m(n, n);
    const int blobs = 1 + static_cast<int>(rng.below(3));
    for (int b = 0; b < blobs; ++b) {
        const int cx = static_cast<int>(rng.below(n)), cy = static_cast<int>(rng.below(n));
        const int r = 1 + static_cast<int>(rng.below(3));
        for (int y = std::max(0, cy - r); y <= std::min(n - 1, cy + r); ++y)
            for (int x = std::max(0, cx - r); x <= std::min(n - 1, cx + r); ++x) m.at(x, y) = 1;
    }
    return m;
}

Verdict criterion_policy() {
    const PolicyConfig cfg;
    const int n = 16;
    Rng rng(5);
    int unsound = 0, repeats = 0, trigger = 0, scaling = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const BinaryMap g = random_blobs(rng, n), m = dilate(g, 2);
        const QMaps q = masked_qmaps(random_q(rng, n), g, m);
        const auto sel = select_action(q, {}, cfg, {(trial % 4) * 0.33, trial % 3 != 0}, rng);
        const BinaryMap& base = sel.action.channel == kGraspChannel ? g : m;
        unsound += rotate_mask(base, sel.action.rotation).at(sel.action.px, sel.action.py) != 1;
    }
    for (int trial = 0; trial < 1000; ++trial) {
        const BinaryMap g = random_blobs(rng, n);
        const QMaps q = masked_qmaps(random_q(rng, n), g, dilate(g, 2));
        SelectionHistory h;
        h.previous = select_action(q, h, cfg, {0.0, true}, rng).action;
        repeats += select_action(q, h, cfg, {0.0, true}, rng).action == *h.previous;
    }
    for (int failures = cfg.trigger_failures; failures <= cfg.trigger_failures + 3; ++failures)
        for (double eps : {0.0, 0.1, 0.5, 1.0})
            for (int trial = 0; trial < 100; ++trial) {
                const BinaryMap g = random_blobs(rng, n);
                QMaps q = random_q(rng, n);
                for (int r = 0; r < kRotations; ++r)
                    for (int i = 0; i < n * n; ++i) q.data[static_cast<std::size_t>(r) * 2 * n * n + i] += 100.0f;
                SelectionHistory h;
                h.consecutive_failures = failures;
                const auto sel = select_action(masked_qmaps(q, g, dilate(g, 2)), h, cfg, {eps, true}, rng);
                trigger += sel.action.channel != kMoveChannel;
            }
    for (int trial = 0; trial < 300; ++trial) {
        const BinaryMap g = random_blobs(rng, n);
        const QMaps q = masked_qmaps(random_q(rng, n), g, dilate(g, 2));
        for (float c : {0.25f, 3.0f, 40.0f}) {
            QMaps s = q;
            for (auto& v : s.data)
                if (std::isfinite(v)) v *= c;
            scaling += masked_argmax(s) != masked_argmax(q);
        }
    }
    return {unsound + repeats + trigger + scaling == 0,
            fmt::format("violations: mask {}, repeat {}, trigger {}, scaling {}", unsound, repeats, trigger, scaling)};
}

// ---- 6: determinism and resume ----

std::vector<std::string> log_text(const std::vector<MetricsRow>& rows) {
    std::vector<std::string> out;
    for (const auto& r : rows) out.push_back(format_metrics_row(r));
    return out;
}

Verdict criterion_determinism(const fs::path& work) {
    GlobalConfig cfg;
    cfg.perception.grid_size = 32;
    cfg.trainer.max_actions = 500;
    cfg.trainer.seed = 6;
    Trainer a(cfg);
    a.run_until(500);
    Trainer b(cfg);
    b.run_until(250);
    b.save_snapshot(work / "resume.bin");
    b.run_until(500);
    Trainer c(cfg);
    c.load_snapshot(work / "resume.bin");
    c.run_until(500);
    const bool same = log_text(a.metrics()) == log_text(b.metrics());
    const bool resumed = log_text(a.metrics()) == log_text(c.metrics());
    bool weights = true;
    const auto wa = a.online().state_tensors(), wc = c.online().state_tensors();
    for (std::size_t i = 0; i < wa.size(); ++i) weights = weights && wa[i]->value == wc[i]->value;
    return {same && resumed && weights,
            fmt::format("repeat run identical: {}, 250+resume-250 identical log: {}, identical weights: {}", same,
                        resumed, weights)};
}

// ---- 7 and 8: learning ----

GlobalConfig learning_config(std::uint64_t seed) {
    GlobalConfig cfg;
    cfg.perception.grid_size = 64;
    cfg.trainer.start_objects = 5;
    cfg.trainer.max_objects = 5;
    cfg.trainer.max_actions = 2000;
    cfg.network.learning_rate = 1e-3;
    cfg.trainer.seed = seed;
    return cfg;
}

struct LearningRun {
    double trailing = 0.0;
    std::unique_ptr<nn::QNet<float>> net;
};

std::map<std::uint64_t, LearningRun> g_runs;

LearningRun& learned(std::uint64_t seed, const fs::path& work) {
    auto it = g_runs.find(seed);
    if (it != g_runs.end()) return it->second;
    const auto t0 = std::chrono::steady_clock::now();
    Trainer tr(learning_config(seed));
    tr.run_until(2000, [&](const MetricsRow& row) {
        if ((row.step + 1) % 250 == 0)
            spdlog::info("seed {} step {} trailing {:.3f}", seed, row.step + 1, row.trailing_success);
    });
    write_metrics_csv(work / fmt::format("learning_seed{}.csv", seed), tr.metrics());
    save_checkpoint(work / fmt::format("learning_seed{}.ckpt", seed), tr.online());
    LearningRun run;
    run.trailing = tr.metrics().back().trailing_success;
    run.net = load_checkpoint(work / fmt::format("learning_seed{}.ckpt", seed));
    spdlog::info("seed {} trained in {:.0f} s", seed,
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return g_runs.emplace(seed, std::move(run)).first->second;
}

Verdict criterion_learning(const fs::path& work) {
    EvalOptions base;
    base.scenario = "random-5";
    base.episodes = 100;
    base.max_actions = 30;
    base.policy = EvalPolicy::Random;
    base.seed = 77;
    const double baseline = run_eval(nullptr, learning_config(0), base).grasp_success_rate();
    int good = 0;
    std::vector<std::string> parts;
    for (std::uint64_t seed : {0, 1, 2}) {
        const double rate = learned(seed, work).trailing;
        const bool ok = rate >= 0.6 && rate >= 2.0 * baseline;
        good += ok;
        parts.push_back(fmt::format("seed {} {:.3f}", seed, rate));
    }
    return {good >= 2, fmt::format("random baseline {:.3f}; trailing-200 after 2000 actions: {}; {} of 3 seeds pass",
                                   baseline, fmt::join(parts, ", "), good)};
}

long feasible_grasps(const WorldState& w, const PerceptionConfig& pc) {
    const HeightMap hm = render_heightmap(w, pc);
    long n = 0;
    for (int r = 0; r < kRotations; ++r)
        for (int y = 0; y < pc.grid_size; ++y)
            for (int x = 0; x < pc.grid_size; ++x) {
                const auto p = pixel_to_world(hm.spec, x, y, r);
                n += grasp_feasible(w, p.x, p.y, r);
            }
    return n;
}

Verdict criterion_synergy(const fs::path& work) {
    const GlobalConfig cfg = learning_config(0);
    long feasible = 0;
    for (int v = 0; v < preset_count(); ++v) feasible += feasible_grasps(spawn_preset_clutter(v), cfg.perception);
    EvalOptions o;
    o.scenario = "preset-all";
    o.episodes = 20;
    o.max_actions = 30;
    o.policy = EvalPolicy::Network;
    const EvalSummary s = run_eval(learned(0, work).net.get(), cfg, o);
    const bool pass = feasible == 0 && s.completion_rate() >= 0.8 && s.first_action_move_fraction() >= 0.9;
    return {pass, fmt::format("feasible grasps in presets {}, completion {:.2f}, first-action moves {:.2f}, grasp "
                              "success {:.2f}",
                              feasible, s.completion_rate(), s.first_action_move_fraction(), s.grasp_success_rate())};
}

// ---- 9: scatter reward ----

Verdict criterion_scatter() {
    const PerceptionConfig pc;
    const RewardConfig rc;
    const WorldState before = spawn_preset_clutter(0);
    const ActionPrimitive push{18.0, 22.0, 0.0, 0, Primitive::Move, std::nullopt};
    const ExecutionResult res = execute(before, push);
    const RewardRecord rec =
        compute_reward(res.outcome, render_heightmap(before, pc), render_heightmap(res.state, pc), rc, pc);
    const bool pass = rec.eta > 0 && rec.r == 0.5 && res.outcome.resolved_move == MoveKind::Push;
    return {pass, fmt::format("push moved {} blocks: mu {}, eta {}, r_m {}", res.outcome.moved_block_ids.size(), rec.mu,
                              rec.eta, rec.r)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<int> only;
    std::string work = (fs::temp_directory_path() / "flg_acceptance").string();
    app.add_option("--only", only, "criteria to run (default: all)");
    app.add_option("--work", work, "directory for logs and checkpoints");
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(work);
    spdlog::set_level(spdlog::level::info);

    const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
        {1, criterion_rewards},
        {2, criterion_morphology},
        {3, criterion_gradients},
        {4, criterion_replay},
        {5, criterion_policy},
        {6, [&] { return criterion_determinism(work); }},
        {7, [&] { return criterion_learning(work); }},
        {8, [&] { return criterion_synergy(work); }},
        {9, criterion_scatter},
    };
    const std::set<int> wanted(only.begin(), only.end());
    int failed = 0;
    for (const auto& [id, fn] : criteria) {
        if (!wanted.empty() && !wanted.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        fmt::print("criterion {}: {} ({}) [{:.1f} s]\n", id, v.pass ? "PASS" : "FAIL", v.detail, secs);
        std::fflush(stdout);
        failed += !v.pass;
    }
    return failed == 0 ? 0 : 1;
}
