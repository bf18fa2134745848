#include "flg/layers.hpp"

#include <algorithm>
#include <cmath>

#include <cblas.h>

namespace flg::nn {

template <>
void gemm<float>(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
                 const float* b, int ldb, float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n, k,
                alpha, a, lda, b, ldb, beta, c, ldc);
}

template <>
void gemm<double>(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda,
                  const double* b, int ldb, double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n, k,
                alpha, a, lda, b, ldb, beta, c, ldc);
}

// ---- Conv2d ----

template <typename T>
Conv2d<T>::Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad, bool bias)
    : weight(name + ".weight", {out_ch, in_ch, kernel, kernel}),
      in_(in_ch),
      out_(out_ch),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      has_bias_(bias) {
    if (bias) this->bias = Param<T>(name + ".bias", {out_ch});
}

template <typename T>
void Conv2d<T>::init_kaiming(Rng& rng) {
    const double fan_in = static_cast<double>(in_) * kernel_ * kernel_;
    const double bound = std::sqrt(6.0 / fan_in);
    for (auto& v : weight.value) v = static_cast<T>(rng.uniform(-bound, bound));
    std::fill(bias.value.begin(), bias.value.end(), T(0));
}

template <typename T>
void Conv2d<T>::init_zero() {
    std::fill(weight.value.begin(), weight.value.end(), T(0));
    std::fill(bias.value.begin(), bias.value.end(), T(0));
}

template <typename T>
void Conv2d<T>::im2col(const T* x, int h, int w, int ho, int wo, T* col, int col_stride) const {
    for (int c = 0; c < in_; ++c) {
        const T* xc = x + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < kernel_; ++ky) {
            for (int kx = 0; kx < kernel_; ++kx) {
                T* dst = col + static_cast<std::size_t>((c * kernel_ + ky) * kernel_ + kx) * col_stride;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride_ - pad_ + ky;
                    T* row = dst + static_cast<std::size_t>(oy) * wo;
                    if (iy < 0 || iy >= h) {
                        std::fill(row, row + wo, T(0));
                        continue;
                    }
                    const T* src = xc + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride_ - pad_ + kx;
                        row[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void Conv2d<T>::col2im(const T* col, int col_stride, int h, int w, int ho, int wo, T* dx) const {
    for (int c = 0; c < in_; ++c) {
        T* dxc = dx + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < kernel_; ++ky) {
            for (int kx = 0; kx < kernel_; ++kx) {
                const T* src = col + static_cast<std::size_t>((c * kernel_ + ky) * kernel_ + kx) * col_stride;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride_ - pad_ + ky;
                    if (iy < 0 || iy >= h) continue;
                    const T* row = src + static_cast<std::size_t>(oy) * wo;
                    T* dst = dxc + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride_ - pad_ + kx;
                        if (ix >= 0 && ix < w) dst[ix] += row[ox];
                    }
                }
            }
        }
    }
}

template <typename T>
Tensor4<T> Conv2d<T>::forward(const Tensor4<T>& x) {
    if (x.c != in_) throw ShapeError("conv input channels " + std::to_string(x.c) + " != " + std::to_string(in_));
    const int ho = out_size(x.h), wo = out_size(x.w);
    if (ho <= 0 || wo <= 0) throw ShapeError("conv input too small: " + x.shape_str());
    const int p = ho * wo;
    const int np = x.n * p;
    const int kk = in_ * kernel_ * kernel_;
    input_ = x;
    col_.assign(static_cast<std::size_t>(kk) * np, T(0));
    for (int i = 0; i < x.n; ++i) im2col(x.sample(i), x.h, x.w, ho, wo, col_.data() + static_cast<std::size_t>(i) * p, np);

    std::vector<T> ymat(static_cast<std::size_t>(out_) * np);
    gemm<T>(false, false, out_, np, kk, T(1), weight.value.data(), kk, col_.data(), np, T(0), ymat.data(), np);

    Tensor4<T> y(x.n, out_, ho, wo);
    for (int i = 0; i < x.n; ++i) {
        for (int o = 0; o < out_; ++o) {
            const T b = has_bias_ ? bias.value[o] : T(0);
            const T* src = ymat.data() + static_cast<std::size_t>(o) * np + static_cast<std::size_t>(i) * p;
            T* dst = y.sample(i) + static_cast<std::size_t>(o) * p;
            for (int k = 0; k < p; ++k) dst[k] = src[k] + b;
        }
    }
    return y;
}

template <typename T>
Tensor4<T> Conv2d<T>::backward(const Tensor4<T>& dy) {
    const int ho = out_size(input_.h), wo = out_size(input_.w);
    if (dy.n != input_.n || dy.c != out_ || dy.h != ho || dy.w != wo)
        throw ShapeError("conv backward gradient shape " + dy.shape_str());
    const int p = ho * wo;
    const int np = dy.n * p;
    const int kk = in_ * kernel_ * kernel_;

    std::vector<T> dmat(static_cast<std::size_t>(out_) * np);
    for (int i = 0; i < dy.n; ++i)
        for (int o = 0; o < out_; ++o)
            std::copy_n(dy.sample(i) + static_cast<std::size_t>(o) * p, p,
                        dmat.data() + static_cast<std::size_t>(o) * np + static_cast<std::size_t>(i) * p);

    gemm<T>(false, true, out_, kk, np, T(1), dmat.data(), np, col_.data(), np, T(1), weight.grad.data(), kk);
    if (has_bias_) {
        for (int o = 0; o < out_; ++o) {
            T s = T(0);
            const T* row = dmat.data() + static_cast<std::size_t>(o) * np;
            for (int k = 0; k < np; ++k) s += row[k];
            bias.grad[o] += s;
        }
    }

    std::vector<T> dcol(static_cast<std::size_t>(kk) * np);
    gemm<T>(true, false, kk, np, out_, T(1), weight.value.data(), kk, dmat.data(), np, T(0), dcol.data(), np);
    Tensor4<T> dx(input_.n, input_.c, input_.h, input_.w);
    for (int i = 0; i < dy.n; ++i)
        col2im(dcol.data() + static_cast<std::size_t>(i) * p, np, input_.h, input_.w, ho, wo, dx.sample(i));
    return dx;
}

// ---- BatchNorm2d ----

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::string name, int channels, double momentum, double eps)
    : gamma(name + ".gamma", {channels}),
      beta(name + ".beta", {channels}),
      running_mean(name + ".running_mean", {channels}),
      running_var(name + ".running_var", {channels}),
      channels_(channels),
      momentum_(momentum),
      eps_(eps) {
    std::fill(gamma.value.begin(), gamma.value.end(), T(1));
    std::fill(running_var.value.begin(), running_var.value.end(), T(1));
}

template <typename T>
Tensor4<T> BatchNorm2d<T>::forward(const Tensor4<T>& x, Mode mode) {
    if (x.c != channels_) throw ShapeError("batchnorm channel mismatch");
    mode_ = mode;
    const std::size_t p = x.plane();
    const double m = static_cast<double>(x.n) * static_cast<double>(p);
    xhat_ = Tensor4<T>(x.n, x.c, x.h, x.w);
    inv_std_.assign(static_cast<std::size_t>(channels_), T(0));
    Tensor4<T> y(x.n, x.c, x.h, x.w);
    for (int c = 0; c < channels_; ++c) {
        double mean, var;
        if (mode == Mode::Train) {
            double s = 0.0;
            for (int i = 0; i < x.n; ++i) {
                const T* src = x.sample(i) + c * p;
                for (std::size_t k = 0; k < p; ++k) s += src[k];
            }
            mean = s / m;
            double sq = 0.0;
            for (int i = 0; i < x.n; ++i) {
                const T* src = x.sample(i) + c * p;
                for (std::size_t k = 0; k < p; ++k) {
                    const double d = src[k] - mean;
                    sq += d * d;
                }
            }
            var = sq / m;
            const double unbiased = m > 1.0 ? var * m / (m - 1.0) : var;
            running_mean.value[c] = static_cast<T>((1.0 - momentum_) * running_mean.value[c] + momentum_ * mean);
            running_var.value[c] = static_cast<T>((1.0 - momentum_) * running_var.value[c] + momentum_ * unbiased);
        } else {
            mean = running_mean.value[c];
            var = running_var.value[c];
        }
        const T inv = static_cast<T>(1.0 / std::sqrt(var + eps_));
        const T mu = static_cast<T>(mean);
        inv_std_[c] = inv;
        const T g = gamma.value[c], b = beta.value[c];
        for (int i = 0; i < x.n; ++i) {
            const T* src = x.sample(i) + c * p;
            T* xh = xhat_.sample(i) + c * p;
            T* dst = y.sample(i) + c * p;
            for (std::size_t k = 0; k < p; ++k) {
                xh[k] = (src[k] - mu) * inv;
                dst[k] = g * xh[k] + b;
            }
        }
    }
    return y;
}

template <typename T>
Tensor4<T> BatchNorm2d<T>::backward(const Tensor4<T>& dy) {
    require_same_shape(dy, xhat_, "batchnorm backward");
    const std::size_t p = dy.plane();
    const double m = static_cast<double>(dy.n) * static_cast<double>(p);
    Tensor4<T> dx(dy.n, dy.c, dy.h, dy.w);
    for (int c = 0; c < channels_; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int i = 0; i < dy.n; ++i) {
            const T* d = dy.sample(i) + c * p;
            const T* xh = xhat_.sample(i) + c * p;
            for (std::size_t k = 0; k < p; ++k) {
                sum_dy += d[k];
                sum_dy_xhat += d[k] * xh[k];
            }
        }
        gamma.grad[c] += static_cast<T>(sum_dy_xhat);
        beta.grad[c] += static_cast<T>(sum_dy);
        const T g = gamma.value[c];
        const T inv = inv_std_[c];
        if (mode_ == Mode::Eval) {
            for (int i = 0; i < dy.n; ++i) {
                const T* d = dy.sample(i) + c * p;
                T* out = dx.sample(i) + c * p;
                for (std::size_t k = 0; k < p; ++k) out[k] = d[k] * g * inv;
            }
            continue;
        }
        const T mean_dy = static_cast<T>(sum_dy / m);
        const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / m);
        for (int i = 0; i < dy.n; ++i) {
            const T* d = dy.sample(i) + c * p;
            const T* xh = xhat_.sample(i) + c * p;
            T* out = dx.sample(i) + c * p;
            for (std::size_t k = 0; k < p; ++k) out[k] = g * inv * (d[k] - mean_dy - xh[k] * mean_dy_xhat);
        }
    }
    return dx;
}

// ---- ReLU ----

template <typename T>
Tensor4<T> ReLU<T>::forward(const Tensor4<T>& x) {
    Tensor4<T> y = x;
    active_.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        active_[i] = x.data[i] > T(0);
        if (!active_[i]) y.data[i] = T(0);
    }
    return y;
}

template <typename T>
Tensor4<T> ReLU<T>::backward(const Tensor4<T>& dy) const {
    if (dy.size() != active_.size()) throw ShapeError("relu backward size mismatch");
    Tensor4<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
        if (!active_[i]) dx.data[i] = T(0);
    return dx;
}

template <typename T>
std::uint64_t ReLU<T>::pattern_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (auto a : active_) {
        h ^= a;
        h *= 1099511628211ull;
    }
    return h;
}

// ---- BilinearUpsample ----

template <typename T>
std::vector<typename BilinearUpsample<T>::Tap> BilinearUpsample<T>::taps(int in, int out, int factor) {
    std::vector<Tap> t(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) / factor - 0.5;
        if (src < 0.0) src = 0.0;
        int i0 = static_cast<int>(std::floor(src));
        if (i0 > in - 1) i0 = in - 1;
        const int i1 = std::min(i0 + 1, in - 1);
        const double l = src - i0;
        t[static_cast<std::size_t>(o)] = {i0, i1, static_cast<T>(1.0 - l), static_cast<T>(l)};
    }
    return t;
}

template <typename T>
Tensor4<T> BilinearUpsample<T>::forward(const Tensor4<T>& x) {
    n_ = x.n;
    c_ = x.c;
    in_h_ = x.h;
    in_w_ = x.w;
    const int oh = x.h * factor_, ow = x.w * factor_;
    const auto ty = taps(x.h, oh, factor_);
    const auto tx = taps(x.w, ow, factor_);
    Tensor4<T> y(x.n, x.c, oh, ow);
    for (int i = 0; i < x.n; ++i) {
        for (int c = 0; c < x.c; ++c) {
            const T* src = x.sample(i) + c * x.plane();
            T* dst = y.sample(i) + c * y.plane();
            for (int oy = 0; oy < oh; ++oy) {
                const Tap a = ty[static_cast<std::size_t>(oy)];
                const T* r0 = src + static_cast<std::size_t>(a.i0) * x.w;
                const T* r1 = src + static_cast<std::size_t>(a.i1) * x.w;
                T* out = dst + static_cast<std::size_t>(oy) * ow;
                for (int ox = 0; ox < ow; ++ox) {
                    const Tap b = tx[static_cast<std::size_t>(ox)];
                    out[ox] = a.w0 * (b.w0 * r0[b.i0] + b.w1 * r0[b.i1]) + a.w1 * (b.w0 * r1[b.i0] + b.w1 * r1[b.i1]);
                }
            }
        }
    }
    return y;
}

template <typename T>
Tensor4<T> BilinearUpsample<T>::backward(const Tensor4<T>& dy) const {
    const int oh = in_h_ * factor_, ow = in_w_ * factor_;
    if (dy.n != n_ || dy.c != c_ || dy.h != oh || dy.w != ow) throw ShapeError("upsample backward shape");
    const auto ty = taps(in_h_, oh, factor_);
    const auto tx = taps(in_w_, ow, factor_);
    Tensor4<T> dx(n_, c_, in_h_, in_w_);
    for (int i = 0; i < n_; ++i) {
        for (int c = 0; c < c_; ++c) {
            const T* src = dy.sample(i) + c * dy.plane();
            T* dst = dx.sample(i) + c * dx.plane();
            for (int oy = 0; oy < oh; ++oy) {
                const Tap a = ty[static_cast<std::size_t>(oy)];
                T* r0 = dst + static_cast<std::size_t>(a.i0) * in_w_;
                T* r1 = dst + static_cast<std::size_t>(a.i1) * in_w_;
                const T* g = src + static_cast<std::size_t>(oy) * ow;
                for (int ox = 0; ox < ow; ++ox) {
                    const Tap b = tx[static_cast<std::size_t>(ox)];
                    const T v = g[ox];
                    r0[b.i0] += a.w0 * b.w0 * v;
                    r0[b.i1] += a.w0 * b.w1 * v;
                    r1[b.i0] += a.w1 * b.w0 * v;
                    r1[b.i1] += a.w1 * b.w1 * v;
                }
            }
        }
    }
    return dx;
}

// ---- concat / pooling ----

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        throw ShapeError("concat shapes " + a.shape_str() + " and " + b.shape_str());
    Tensor4<T> y(a.n, a.c + b.c, a.h, a.w);
    for (int i = 0; i < a.n; ++i) {
        std::copy_n(a.sample(i), a.sample_size(), y.sample(i));
        std::copy_n(b.sample(i), b.sample_size(), y.sample(i) + a.sample_size());
    }
    return y;
}

template <typename T>
void split_channels(const Tensor4<T>& d, int first, Tensor4<T>& da, Tensor4<T>& db) {
    if (first < 0 || first > d.c) throw ShapeError("split point out of range");
    da = Tensor4<T>(d.n, first, d.h, d.w);
    db = Tensor4<T>(d.n, d.c - first, d.h, d.w);
    for (int i = 0; i < d.n; ++i) {
        std::copy_n(d.sample(i), da.sample_size(), da.sample(i));
        std::copy_n(d.sample(i) + da.sample_size(), db.sample_size(), db.sample(i));
    }
}

template <typename T>
Tensor4<T> global_avg_pool(const Tensor4<T>& x) {
    Tensor4<T> y(x.n, x.c, 1, 1);
    const std::size_t p = x.plane();
    for (int i = 0; i < x.n; ++i)
        for (int c = 0; c < x.c; ++c) {
            const T* src = x.sample(i) + c * p;
            T s = T(0);
            for (std::size_t k = 0; k < p; ++k) s += src[k];
            y.at(i, c, 0, 0) = s / static_cast<T>(p);
        }
    return y;
}

template <typename T>
Tensor4<T> global_avg_pool_backward(const Tensor4<T>& dy, int h, int w) {
    Tensor4<T> dx(dy.n, dy.c, h, w);
    const std::size_t p = dx.plane();
    for (int i = 0; i < dy.n; ++i)
        for (int c = 0; c < dy.c; ++c) {
            const T g = dy.at(i, c, 0, 0) / static_cast<T>(p);
            std::fill_n(dx.sample(i) + c * p, p, g);
        }
    return dx;
}

#define FLG_INSTANTIATE(T)                                                                   \
    template class Conv2d<T>;                                                                \
    template class BatchNorm2d<T>;                                                           \
    template class ReLU<T>;                                                                  \
    template class BilinearUpsample<T>;                                                      \
    template Tensor4<T> concat_channels<T>(const Tensor4<T>&, const Tensor4<T>&);            \
    template void split_channels<T>(const Tensor4<T>&, int, Tensor4<T>&, Tensor4<T>&);       \
    template Tensor4<T> global_avg_pool<T>(const Tensor4<T>&);                               \
    template Tensor4<T> global_avg_pool_backward<T>(const Tensor4<T>&, int, int);

FLG_INSTANTIATE(float)
FLG_INSTANTIATE(double)

#undef FLG_INSTANTIATE

}  // namespace flg::nn
