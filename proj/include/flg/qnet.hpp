#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flg/layers.hpp"
#include "flg/perception.hpp"
#include "flg/rng.hpp"
#include "flg/tensor.hpp"

namespace flg {

struct NetworkConfig {
    int in_channels = 2;
    std::array<int, 4> stage_channels{16, 32, 64, 128};
    int bottleneck_channels = 64;  ///< output of the 1x1 conv on the deepest feature
    int head_channels = 32;        ///< conv block after the skip concatenation
    double bn_momentum = 0.1;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double huber_kappa = 1.0;

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);

namespace nn {

template <typename T>
struct DuelingOutput {
    Tensor4<T> q;       ///< (n, 2, H, W)
    Tensor4<T> a;       ///< advantage map, same shape as q
    std::vector<T> v;   ///< one state value per sample
};

/// Fully convolutional dueling Q network.
///
/// Encoder: four stages, each a stride-2 3x3 conv and a stride-1 3x3 conv
/// with batch norm and ReLU. Decoder: 1x1 conv on the deepest feature,
/// 4x bilinear upsample, concatenation with the second stage output, a 3x3
/// conv block, a 1x1 conv to two channels and a final 4x upsample. The value
/// head is a linear map of the globally pooled deepest feature.
template <typename T>
class QNet {
public:
    explicit QNet(const NetworkConfig& cfg = {}, std::uint64_t seed = 0);

    DuelingOutput<T> forward(const Tensor4<T>& x, Mode mode);

    /// Eval-mode forward over a large batch, processed in chunks.
    Tensor4<T> q_eval(const Tensor4<T>& x, int chunk = 16);

    /// Accumulates parameter gradients for dL/dQ of the last forward pass and
    /// returns dL/dx.
    Tensor4<T> backward(const Tensor4<T>& dq);

    /// Trainable parameters in a fixed order.
    std::vector<Param<T>*> parameters();
    /// Batch-norm running statistics.
    std::vector<Param<T>*> buffers();
    /// Parameters followed by buffers; the checkpoint order.
    std::vector<Param<T>*> state_tensors();
    std::vector<const Param<T>*> state_tensors() const;

    void zero_grad();
    void copy_from(const QNet& other);
    std::size_t parameter_count() const;
    /// Hash of every ReLU activation pattern of the last forward pass.
    std::uint64_t activation_signature() const;

    const NetworkConfig& config() const { return cfg_; }

private:
    struct Stage {
        Conv2d<T> conv_a, conv_b;
        BatchNorm2d<T> bn_a, bn_b;
        ReLU<T> relu_a, relu_b;
    };

    NetworkConfig cfg_;
    std::array<Stage, 4> stages_;
    Conv2d<T> bottleneck_;
    BatchNorm2d<T> bn_bottleneck_;
    ReLU<T> relu_bottleneck_;
    BilinearUpsample<T> up_a_{4};
    Conv2d<T> head_conv_;
    BatchNorm2d<T> bn_head_;
    ReLU<T> relu_head_;
    Conv2d<T> out_conv_;
    BilinearUpsample<T> up_b_{4};
    Param<T> value_w_, value_b_;

    int skip_channels_ = 0;
    int deep_h_ = 0, deep_w_ = 0;
    Tensor4<T> pooled_;
};

}  // namespace nn

/// Dense action values for every rotation: [r][channel][y][x].
struct QMaps {
    int rotations = kRotations;
    int channels = 2;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
    std::size_t size() const { return data.size(); }
    float at(int r, int c, int y, int x) const {
        return data[((static_cast<std::size_t>(r) * channels + c) * height + y) * width + x];
    }
    float& at(int r, int c, int y, int x) {
        return data[((static_cast<std::size_t>(r) * channels + c) * height + y) * width + x];
    }
};

/// Converts an observation stack (or the listed rotations of it) to a network batch.
nn::Tensor4<float> stack_to_batch(const ObservationStack& stack);
nn::Tensor4<float> stack_entry(const ObservationStack& stack, int rotation);

/// Runs the network on every rotated entry in evaluation mode.
QMaps q_maps(nn::QNet<float>& net, const ObservationStack& stack);

struct HuberResult {
    double loss = 0.0;
    double grad = 0.0;  ///< d loss / d prediction
};

HuberResult huber_loss(double prediction, double target, double kappa = 1.0);

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are keyed by parameter order.
template <typename T>
class Adam {
public:
    Adam() = default;
    Adam(AdamConfig cfg, const std::vector<nn::Param<T>*>& params);

    void step(const std::vector<nn::Param<T>*>& params);

    long steps() const { return t_; }
    void set_steps(long t) { t_ = t; }
    const AdamConfig& config() const { return cfg_; }

    std::vector<std::vector<T>> m, v;

private:
    AdamConfig cfg_;
    long t_ = 0;
};

struct TensorRecord {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;
};

struct Checkpoint {
    NetworkConfig arch;
    std::vector<TensorRecord> tensors;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const nn::QNet<float>& net);
Checkpoint read_checkpoint(const std::filesystem::path& path);
/// Copies tensors into `net`; names and shapes must match exactly.
void apply_checkpoint(const Checkpoint& ckpt, nn::QNet<float>& net);
std::unique_ptr<nn::QNet<float>> load_checkpoint(const std::filesystem::path& path);

}  // namespace flg
