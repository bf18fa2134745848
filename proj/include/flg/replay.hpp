#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flg/action_index.hpp"
#include "flg/binio.hpp"
#include "flg/perception.hpp"
#include "flg/rng.hpp"

namespace flg {

/// Binary sum tree over a power-of-two number of leaves. Node 1 is the
/// root; leaf i lives at node capacity + i.
class SumTree {
public:
    explicit SumTree(std::size_t capacity = 1);

    /// Sets a leaf and repairs the path to the root. Returns the number of
    /// internal nodes rewritten.
    int set(std::size_t leaf, double value);
    double get(std::size_t leaf) const { return nodes_[capacity_ + leaf]; }
    double total() const { return nodes_[1]; }
    std::size_t capacity() const { return capacity_; }
    double node(std::size_t i) const { return nodes_[i]; }

    /// Leaf whose cumulative interval [lo, hi) contains `prefix`. Values at or
    /// past the total land in the last leaf with positive mass.
    std::size_t find(double prefix) const;

    /// Largest relative deviation between an internal node and its children.
    double max_inconsistency() const;

private:
    std::size_t capacity_;
    std::vector<double> nodes_;
};

/// Heightmap quantized to 16 bits (h * 1000), optionally with every rotated
/// observation entry stored as well.
struct CompressedObservation {
    GridSpec spec;
    std::vector<std::uint16_t> heights;
    std::vector<std::uint16_t> stack;  ///< empty unless rotations are stored

    static CompressedObservation from(const HeightMap& map, const PerceptionConfig& pcfg, bool store_rotations);
    HeightMap heightmap() const;
    ObservationStack observation(const PerceptionConfig& pcfg) const;
    /// One rotated entry [c][y][x].
    std::vector<float> entry(int rotation, const PerceptionConfig& pcfg) const;

    friend bool operator==(const CompressedObservation&, const CompressedObservation&) = default;
};

inline constexpr double kHeightLevelsPerUnit = 1000.0;

struct Transition {
    CompressedObservation obs;
    ActionIndex action;
    double reward = 0.0;
    CompressedObservation next_obs;
    bool terminal = false;

    friend bool operator==(const Transition&, const Transition&) = default;
};

struct ReplayConfig {
    int capacity = 2048;  ///< rounded up to a power of two
    double alpha = 0.6;
    double beta_start = 0.4;
    double beta_end = 1.0;
    double priority_eps = 1e-2;
    bool store_rotations = false;

    friend bool operator==(const ReplayConfig&, const ReplayConfig&) = default;
};

void to_json(nlohmann::json& j, const ReplayConfig& c);
void from_json(const nlohmann::json& j, ReplayConfig& c);

struct ReplaySample {
    std::vector<std::size_t> indices;
    std::vector<double> weights;  ///< importance weights normalized by the batch max
    std::vector<double> probabilities;
};

class PrioritizedReplay {
public:
    explicit PrioritizedReplay(const ReplayConfig& cfg = {});

    /// Stores at the write cursor with the current max priority, evicting the
    /// oldest entry when full.
    std::size_t push(Transition t);

    ReplaySample sample(int batch, double beta, Rng& rng) const;

    void update_priorities(const std::vector<std::size_t>& indices, const std::vector<double>& td_errors);

    const Transition& at(std::size_t index) const;
    /// Raw priority |delta| + eps of a slot (before the alpha exponent).
    double priority(std::size_t index) const;
    double max_priority() const { return max_priority_; }

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return tree_.capacity(); }
    const SumTree& tree() const { return tree_; }
    const ReplayConfig& config() const { return cfg_; }

    /// Linearly annealed importance exponent at `progress` in [0, 1].
    double beta_at(double progress) const;

    void write(BinaryWriter& w) const;
    void read(BinaryReader& r);

private:
    ReplayConfig cfg_;
    SumTree tree_;
    std::vector<Transition> slots_;
    std::vector<double> priorities_;
    std::size_t cursor_ = 0;
    std::size_t size_ = 0;
    double max_priority_ = 1.0;
};

}  // namespace flg
