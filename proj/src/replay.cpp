#include "flg/replay.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include <nlohmann/json.hpp>

#include "flg/json_fields.hpp"

namespace flg {

SumTree::SumTree(std::size_t capacity) : capacity_(capacity), nodes_(2 * capacity, 0.0) {
    if (capacity == 0 || !std::has_single_bit(capacity))
        throw OutOfRangeError("sum tree capacity must be a power of two");
}

int SumTree::set(std::size_t leaf, double value) {
    if (leaf >= capacity_) throw OutOfRangeError("sum tree leaf out of range");
    std::size_t i = capacity_ + leaf;
    nodes_[i] = value;
    int touched = 0;
    for (i /= 2; i >= 1; i /= 2) {
        nodes_[i] = nodes_[2 * i] + nodes_[2 * i + 1];
        ++touched;
    }
    return touched;
}

std::size_t SumTree::find(double prefix) const {
    std::size_t i = 1;
    while (i < capacity_) {
        const std::size_t left = 2 * i;
        if (prefix < nodes_[left]) {
            i = left;
        } else {
            prefix -= nodes_[left];
            i = left + 1;
        }
    }
    std::size_t leaf = i - capacity_;
    // Rounding can land on an empty leaf at the right edge.
    while (nodes_[capacity_ + leaf] <= 0.0 && leaf > 0) --leaf;
    return leaf;
}

double SumTree::max_inconsistency() const {
    double worst = 0.0;
    for (std::size_t i = 1; i < capacity_; ++i) {
        const double s = nodes_[2 * i] + nodes_[2 * i + 1];
        const double scale = std::max({std::abs(s), std::abs(nodes_[i]), 1e-300});
        worst = std::max(worst, std::abs(nodes_[i] - s) / scale);
    }
    return worst;
}

namespace {

std::uint16_t quantize(float h) {
    const double q = std::round(static_cast<double>(h) * kHeightLevelsPerUnit);
    return static_cast<std::uint16_t>(std::clamp(q, 0.0, 65535.0));
}

float dequantize(std::uint16_t q) { return static_cast<float>(q / kHeightLevelsPerUnit); }

}  // namespace

CompressedObservation CompressedObservation::from(const HeightMap& map, const PerceptionConfig& pcfg,
                                                  bool store_rotations) {
    CompressedObservation c;
    c.spec = map.spec;
    c.heights.resize(map.cells.size());
    for (std::size_t i = 0; i < map.cells.size(); ++i) c.heights[i] = quantize(map.cells[i]);
    if (store_rotations) {
        const ObservationStack obs = build_observation(c.heightmap(), pcfg);
        c.stack.resize(obs.data.size());
        for (std::size_t i = 0; i < obs.data.size(); ++i) c.stack[i] = quantize(obs.data[i]);
    }
    return c;
}

HeightMap CompressedObservation::heightmap() const {
    HeightMap m;
    m.spec = spec;
    m.cells.resize(heights.size());
    for (std::size_t i = 0; i < heights.size(); ++i) m.cells[i] = dequantize(heights[i]);
    return m;
}

ObservationStack CompressedObservation::observation(const PerceptionConfig& pcfg) const {
    if (stack.empty()) return build_observation(heightmap(), pcfg);
    ObservationStack obs;
    obs.rotations = kRotations;
    obs.channels = pcfg.channels;
    obs.height = spec.height;
    obs.width = spec.width;
    obs.data.resize(stack.size());
    for (std::size_t i = 0; i < stack.size(); ++i) obs.data[i] = dequantize(stack[i]);
    return obs;
}

std::vector<float> CompressedObservation::entry(int rotation, const PerceptionConfig& pcfg) const {
    if (stack.empty()) return observation_entry(heightmap(), rotation, pcfg);
    const std::size_t n = static_cast<std::size_t>(pcfg.channels) * heights.size();
    std::vector<float> out(n);
    const std::size_t base = static_cast<std::size_t>(rotation) * n;
    for (std::size_t i = 0; i < n; ++i) out[i] = dequantize(stack[base + i]);
    return out;
}

void to_json(nlohmann::json& j, const ReplayConfig& c) {
    j = {{"capacity", c.capacity},
         {"alpha", c.alpha},
         {"beta_start", c.beta_start},
         {"beta_end", c.beta_end},
         {"priority_eps", c.priority_eps},
         {"store_rotations", c.store_rotations}};
}

void from_json(const nlohmann::json& j, ReplayConfig& c) {
    FieldReader r(j, "replay");
    r.get("capacity", c.capacity);
    r.get("alpha", c.alpha);
    r.get("beta_start", c.beta_start);
    r.get("beta_end", c.beta_end);
    r.get("priority_eps", c.priority_eps);
    r.get("store_rotations", c.store_rotations);
    r.finish();
    if (c.capacity < 1) throw ConfigError("replay.capacity must be positive");
    if (c.alpha < 0.0 || c.beta_start < 0.0 || c.beta_end < 0.0) throw ConfigError("replay exponents must be non-negative");
    if (c.priority_eps <= 0.0) throw ConfigError("replay.priority_eps must be positive");
}

PrioritizedReplay::PrioritizedReplay(const ReplayConfig& cfg)
    : cfg_(cfg), tree_(std::bit_ceil(static_cast<std::size_t>(std::max(cfg.capacity, 1)))) {
    slots_.resize(tree_.capacity());
    priorities_.assign(tree_.capacity(), 0.0);
}

std::size_t PrioritizedReplay::push(Transition t) {
    const std::size_t idx = cursor_;
    slots_[idx] = std::move(t);
    priorities_[idx] = max_priority_;
    tree_.set(idx, std::pow(max_priority_, cfg_.alpha));
    cursor_ = (cursor_ + 1) % tree_.capacity();
    size_ = std::min(size_ + 1, tree_.capacity());
    return idx;
}

ReplaySample PrioritizedReplay::sample(int batch, double beta, Rng& rng) const {
    if (batch <= 0) throw OutOfRangeError("batch size must be positive");
    if (size_ < static_cast<std::size_t>(batch))
        throw InsufficientDataError("replay holds " + std::to_string(size_) + " transitions, batch needs " +
                                    std::to_string(batch));
    ReplaySample s;
    const double total = tree_.total();
    const double segment = total / batch;
    const double n = static_cast<double>(size_);
    double max_w = 0.0;
    for (int i = 0; i < batch; ++i) {
        const double prefix = (i + rng.uniform()) * segment;
        const std::size_t leaf = tree_.find(prefix);
        const double p = tree_.get(leaf) / total;
        const double w = std::pow(n * p, -beta);
        s.indices.push_back(leaf);
        s.probabilities.push_back(p);
        s.weights.push_back(w);
        max_w = std::max(max_w, w);
    }
    for (double& w : s.weights) w /= max_w;
    return s;
}

void PrioritizedReplay::update_priorities(const std::vector<std::size_t>& indices,
                                          const std::vector<double>& td_errors) {
    if (indices.size() != td_errors.size()) throw ShapeError("indices and td errors differ in length");
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const std::size_t i = indices[k];
        if (i >= size_) throw OutOfRangeError("replay index " + std::to_string(i) + " not populated");
        const double p = std::abs(td_errors[k]) + cfg_.priority_eps;
        priorities_[i] = p;
        max_priority_ = std::max(max_priority_, p);
        tree_.set(i, std::pow(p, cfg_.alpha));
    }
}

const Transition& PrioritizedReplay::at(std::size_t index) const {
    if (index >= size_) throw OutOfRangeError("replay index out of range");
    return slots_[index];
}

double PrioritizedReplay::priority(std::size_t index) const {
    if (index >= size_) throw OutOfRangeError("replay index out of range");
    return priorities_[index];
}

double PrioritizedReplay::beta_at(double progress) const {
    const double t = std::clamp(progress, 0.0, 1.0);
    return cfg_.beta_start + (cfg_.beta_end - cfg_.beta_start) * t;
}

namespace {

void write_obs(BinaryWriter& w, const CompressedObservation& o) {
    w.i32(o.spec.width);
    w.i32(o.spec.height);
    w.f64(o.spec.resolution);
    w.f64(o.spec.origin.x);
    w.f64(o.spec.origin.y);
    w.u64(o.heights.size());
    w.bytes(o.heights.data(), o.heights.size() * 2);
    w.u64(o.stack.size());
    w.bytes(o.stack.data(), o.stack.size() * 2);
}

CompressedObservation read_obs(BinaryReader& r) {
    CompressedObservation o;
    o.spec.width = r.i32();
    o.spec.height = r.i32();
    o.spec.resolution = r.f64();
    o.spec.origin.x = r.f64();
    o.spec.origin.y = r.f64();
    const std::uint64_t nh = r.u64();
    if (nh > r.remaining() / 2) throw CorruptionError("observation larger than snapshot");
    o.heights.resize(nh);
    r.bytes(o.heights.data(), nh * 2);
    const std::uint64_t ns = r.u64();
    if (ns > r.remaining() / 2) throw CorruptionError("observation larger than snapshot");
    o.stack.resize(ns);
    r.bytes(o.stack.data(), ns * 2);
    return o;
}

}  // namespace

// The uint16 payloads are copied as host bytes; every supported target is
// little-endian, matching the rest of the binary formats.
static_assert(std::endian::native == std::endian::little);

void PrioritizedReplay::write(BinaryWriter& w) const {
    w.u64(tree_.capacity());
    w.u64(cursor_);
    w.u64(size_);
    w.f64(max_priority_);
    for (std::size_t i = 0; i < size_; ++i) {
        const Transition& t = slots_[i];
        w.f64(priorities_[i]);
        w.f64(tree_.get(i));
        write_obs(w, t.obs);
        w.i32(t.action.rotation);
        w.i32(t.action.channel);
        w.i32(t.action.px);
        w.i32(t.action.py);
        w.f64(t.reward);
        w.u8(t.terminal ? 1 : 0);
        write_obs(w, t.next_obs);
    }
}

void PrioritizedReplay::read(BinaryReader& r) {
    const std::uint64_t cap = r.u64();
    if (cap != tree_.capacity()) throw FormatError("replay capacity differs from configuration");
    cursor_ = r.u64();
    size_ = r.u64();
    if (cursor_ >= cap || size_ > cap) throw CorruptionError("replay cursor out of range");
    max_priority_ = r.f64();
    tree_ = SumTree(cap);
    slots_.assign(cap, Transition{});
    priorities_.assign(cap, 0.0);
    for (std::size_t i = 0; i < size_; ++i) {
        Transition& t = slots_[i];
        priorities_[i] = r.f64();
        const double leaf = r.f64();
        t.obs = read_obs(r);
        t.action.rotation = r.i32();
        t.action.channel = r.i32();
        t.action.px = r.i32();
        t.action.py = r.i32();
        t.reward = r.f64();
        t.terminal = r.u8() != 0;
        t.next_obs = read_obs(r);
        tree_.set(i, leaf);
    }
}

}  // namespace flg
