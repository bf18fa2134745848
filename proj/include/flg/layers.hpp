#pragma once

#include <cstdint>
#include <vector>

#include "flg/rng.hpp"
#include "flg/tensor.hpp"

namespace flg::nn {

enum class Mode { Train, Eval };

/// 2-D convolution with square kernels, implemented as im2col + GEMM over
/// the whole batch. Caches its input for the backward pass.
template <typename T>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad, bool bias);

    Tensor4<T> forward(const Tensor4<T>& x);
    /// Accumulates parameter gradients and returns the input gradient.
    Tensor4<T> backward(const Tensor4<T>& dy);

    /// Kaiming-uniform weights, zero bias.
    void init_kaiming(Rng& rng);
    void init_zero();

    int out_size(int in) const { return (in + 2 * pad_ - kernel_) / stride_ + 1; }

    Param<T> weight;
    Param<T> bias;

private:
    void im2col(const T* x, int h, int w, int ho, int wo, T* col, int col_stride) const;
    void col2im(const T* col, int col_stride, int h, int w, int ho, int wo, T* dx) const;

    int in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1, pad_ = 0;
    bool has_bias_ = false;
    Tensor4<T> input_;
    std::vector<T> col_;
};

/// Per-channel batch normalization with running statistics.
template <typename T>
class BatchNorm2d {
public:
    BatchNorm2d() = default;
    BatchNorm2d(std::string name, int channels, double momentum = 0.1, double eps = 1e-5);

    Tensor4<T> forward(const Tensor4<T>& x, Mode mode);
    Tensor4<T> backward(const Tensor4<T>& dy);

    Param<T> gamma;
    Param<T> beta;
    /// Not trained; stored in checkpoints.
    Param<T> running_mean;
    Param<T> running_var;

private:
    int channels_ = 0;
    double momentum_ = 0.1, eps_ = 1e-5;
    Mode mode_ = Mode::Eval;
    Tensor4<T> xhat_;
    std::vector<T> inv_std_;
};

template <typename T>
class ReLU {
public:
    Tensor4<T> forward(const Tensor4<T>& x);
    Tensor4<T> backward(const Tensor4<T>& dy) const;
    /// FNV-1a hash of the active pattern of the last forward pass.
    std::uint64_t pattern_hash() const;

private:
    std::vector<std::uint8_t> active_;
};

/// Bilinear resize by an integer factor with half-pixel centers
/// (align_corners = false) and edge clamping.
template <typename T>
class BilinearUpsample {
public:
    explicit BilinearUpsample(int factor = 1) : factor_(factor) {}
    Tensor4<T> forward(const Tensor4<T>& x);
    Tensor4<T> backward(const Tensor4<T>& dy) const;
    int factor() const { return factor_; }

private:
    struct Tap {
        int i0, i1;
        T w0, w1;
    };
    static std::vector<Tap> taps(int in, int out, int factor);

    int factor_ = 1;
    int in_h_ = 0, in_w_ = 0, n_ = 0, c_ = 0;
};

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b);

/// Splits a channel-concatenated gradient back into its two parts.
template <typename T>
void split_channels(const Tensor4<T>& d, int first_channels, Tensor4<T>& da, Tensor4<T>& db);

template <typename T>
Tensor4<T> global_avg_pool(const Tensor4<T>& x);

template <typename T>
Tensor4<T> global_avg_pool_backward(const Tensor4<T>& dy, int h, int w);

}  // namespace flg::nn
