#include "flg/qnet.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "flg/binio.hpp"
#include "flg/json_fields.hpp"

namespace flg {

void to_json(nlohmann::json& j, const NetworkConfig& c) {
    j = {{"in_channels", c.in_channels},
         {"stage_channels", c.stage_channels},
         {"bottleneck_channels", c.bottleneck_channels},
         {"head_channels", c.head_channels},
         {"bn_momentum", c.bn_momentum},
         {"learning_rate", c.learning_rate},
         {"beta1", c.beta1},
         {"beta2", c.beta2},
         {"adam_eps", c.adam_eps},
         {"huber_kappa", c.huber_kappa}};
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
    FieldReader r(j, "network");
    r.get("in_channels", c.in_channels);
    r.get("stage_channels", c.stage_channels);
    r.get("bottleneck_channels", c.bottleneck_channels);
    r.get("head_channels", c.head_channels);
    r.get("bn_momentum", c.bn_momentum);
    r.get("learning_rate", c.learning_rate);
    r.get("beta1", c.beta1);
    r.get("beta2", c.beta2);
    r.get("adam_eps", c.adam_eps);
    r.get("huber_kappa", c.huber_kappa);
    r.finish();
    if (c.in_channels < 1) throw ConfigError("network.in_channels must be positive");
    for (int ch : c.stage_channels)
        if (ch < 1) throw ConfigError("network.stage_channels must be positive");
    if (c.bottleneck_channels < 1 || c.head_channels < 1) throw ConfigError("decoder channels must be positive");
    if (c.learning_rate <= 0.0) throw ConfigError("network.learning_rate must be positive");
    if (c.huber_kappa <= 0.0) throw ConfigError("network.huber_kappa must be positive");
}

namespace nn {

template <typename T>
QNet<T>::QNet(const NetworkConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    const double mom = cfg.bn_momentum;
    int in = cfg.in_channels;
    for (int s = 0; s < 4; ++s) {
        const int ch = cfg.stage_channels[static_cast<std::size_t>(s)];
        const std::string name = "enc" + std::to_string(s);
        Stage& st = stages_[static_cast<std::size_t>(s)];
        st.conv_a = Conv2d<T>(name + ".conv_a", in, ch, 3, 2, 1, false);
        st.bn_a = BatchNorm2d<T>(name + ".bn_a", ch, mom);
        st.conv_b = Conv2d<T>(name + ".conv_b", ch, ch, 3, 1, 1, false);
        st.bn_b = BatchNorm2d<T>(name + ".bn_b", ch, mom);
        st.conv_a.init_kaiming(rng);
        st.conv_b.init_kaiming(rng);
        in = ch;
    }
    skip_channels_ = cfg.stage_channels[1];
    bottleneck_ = Conv2d<T>("dec.reduce", in, cfg.bottleneck_channels, 1, 1, 0, false);
    bn_bottleneck_ = BatchNorm2d<T>("dec.reduce_bn", cfg.bottleneck_channels, mom);
    head_conv_ = Conv2d<T>("dec.fuse", cfg.bottleneck_channels + skip_channels_, cfg.head_channels, 3, 1, 1, false);
    bn_head_ = BatchNorm2d<T>("dec.fuse_bn", cfg.head_channels, mom);
    out_conv_ = Conv2d<T>("dec.out", cfg.head_channels, 2, 1, 1, 0, true);
    bottleneck_.init_kaiming(rng);
    head_conv_.init_kaiming(rng);
    out_conv_.init_zero();
    value_w_ = Param<T>("value.weight", {1, in});
    value_b_ = Param<T>("value.bias", {1});
}

template <typename T>
DuelingOutput<T> QNet<T>::forward(const Tensor4<T>& x, Mode mode) {
    if (x.c != cfg_.in_channels) throw ShapeError("network expects " + std::to_string(cfg_.in_channels) + " channels, got " + x.shape_str());
    if (x.h % 16 != 0 || x.w % 16 != 0 || x.h == 0 || x.w == 0)
        throw ShapeError("network input spatial size must be a positive multiple of 16: " + x.shape_str());

    Tensor4<T> h = x;
    Tensor4<T> skip;
    for (int s = 0; s < 4; ++s) {
        Stage& st = stages_[static_cast<std::size_t>(s)];
        h = st.relu_a.forward(st.bn_a.forward(st.conv_a.forward(h), mode));
        h = st.relu_b.forward(st.bn_b.forward(st.conv_b.forward(h), mode));
        if (s == 1) skip = h;
    }
    deep_h_ = h.h;
    deep_w_ = h.w;

    Tensor4<T> d = relu_bottleneck_.forward(bn_bottleneck_.forward(bottleneck_.forward(h), mode));
    d = up_a_.forward(d);
    Tensor4<T> f = relu_head_.forward(bn_head_.forward(head_conv_.forward(concat_channels(d, skip)), mode));
    DuelingOutput<T> out;
    out.a = up_b_.forward(out_conv_.forward(f));

    pooled_ = global_avg_pool(h);
    const int cdeep = h.c;
    out.v.assign(static_cast<std::size_t>(x.n), T(0));
    for (int i = 0; i < x.n; ++i) {
        T s = value_b_.value[0];
        for (int c = 0; c < cdeep; ++c) s += value_w_.value[static_cast<std::size_t>(c)] * pooled_.at(i, c, 0, 0);
        out.v[static_cast<std::size_t>(i)] = s;
    }

    out.q = out.a;
    const std::size_t per = out.a.sample_size();
    for (int i = 0; i < x.n; ++i) {
        const T* a = out.a.sample(i);
        T mean = T(0);
        for (std::size_t k = 0; k < per; ++k) mean += a[k];
        mean /= static_cast<T>(per);
        T* q = out.q.sample(i);
        const T off = out.v[static_cast<std::size_t>(i)] - mean;
        for (std::size_t k = 0; k < per; ++k) q[k] = a[k] + off;
    }
    return out;
}

template <typename T>
Tensor4<T> QNet<T>::q_eval(const Tensor4<T>& x, int chunk) {
    Tensor4<T> q(x.n, 2, x.h, x.w);
    for (int start = 0; start < x.n; start += chunk) {
        const int n = std::min(chunk, x.n - start);
        Tensor4<T> part(n, x.c, x.h, x.w);
        std::copy_n(x.sample(start), static_cast<std::size_t>(n) * x.sample_size(), part.data.begin());
        const DuelingOutput<T> out = forward(part, Mode::Eval);
        std::copy(out.q.data.begin(), out.q.data.end(), q.sample(start));
    }
    return q;
}

template <typename T>
Tensor4<T> QNet<T>::backward(const Tensor4<T>& dq) {
    const int n = dq.n;
    if (dq.c != 2 || pooled_.n != n) throw ShapeError("backward gradient does not match last forward: " + dq.shape_str());

    // Dueling combine: Q = V + A - mean(A).
    Tensor4<T> da = dq;
    std::vector<T> dv(static_cast<std::size_t>(n), T(0));
    const std::size_t per = dq.sample_size();
    for (int i = 0; i < n; ++i) {
        const T* g = dq.sample(i);
        T s = T(0);
        for (std::size_t k = 0; k < per; ++k) s += g[k];
        dv[static_cast<std::size_t>(i)] = s;
        const T mean = s / static_cast<T>(per);
        T* out = da.sample(i);
        for (std::size_t k = 0; k < per; ++k) out[k] = g[k] - mean;
    }

    const int cdeep = pooled_.c;
    Tensor4<T> dpooled(n, cdeep, 1, 1);
    for (int i = 0; i < n; ++i) {
        const T g = dv[static_cast<std::size_t>(i)];
        value_b_.grad[0] += g;
        for (int c = 0; c < cdeep; ++c) {
            value_w_.grad[static_cast<std::size_t>(c)] += g * pooled_.at(i, c, 0, 0);
            dpooled.at(i, c, 0, 0) = g * value_w_.value[static_cast<std::size_t>(c)];
        }
    }
    Tensor4<T> g_deep = global_avg_pool_backward(dpooled, deep_h_, deep_w_);

    Tensor4<T> g = out_conv_.backward(up_b_.backward(da));
    g = head_conv_.backward(bn_head_.backward(relu_head_.backward(g)));
    Tensor4<T> g_up, g_skip;
    split_channels(g, cfg_.bottleneck_channels, g_up, g_skip);
    g = bottleneck_.backward(bn_bottleneck_.backward(relu_bottleneck_.backward(up_a_.backward(g_up))));
    for (std::size_t k = 0; k < g.size(); ++k) g.data[k] += g_deep.data[k];

    for (int s = 3; s >= 0; --s) {
        if (s == 1)
            for (std::size_t k = 0; k < g.size(); ++k) g.data[k] += g_skip.data[k];
        Stage& st = stages_[static_cast<std::size_t>(s)];
        g = st.conv_b.backward(st.bn_b.backward(st.relu_b.backward(g)));
        g = st.conv_a.backward(st.bn_a.backward(st.relu_a.backward(g)));
    }
    return g;
}

template <typename T>
std::vector<Param<T>*> QNet<T>::parameters() {
    std::vector<Param<T>*> p;
    for (Stage& st : stages_) {
        p.push_back(&st.conv_a.weight);
        p.push_back(&st.bn_a.gamma);
        p.push_back(&st.bn_a.beta);
        p.push_back(&st.conv_b.weight);
        p.push_back(&st.bn_b.gamma);
        p.push_back(&st.bn_b.beta);
    }
    p.push_back(&bottleneck_.weight);
    p.push_back(&bn_bottleneck_.gamma);
    p.push_back(&bn_bottleneck_.beta);
    p.push_back(&head_conv_.weight);
    p.push_back(&bn_head_.gamma);
    p.push_back(&bn_head_.beta);
    p.push_back(&out_conv_.weight);
    p.push_back(&out_conv_.bias);
    p.push_back(&value_w_);
    p.push_back(&value_b_);
    return p;
}

template <typename T>
std::vector<Param<T>*> QNet<T>::buffers() {
    std::vector<Param<T>*> p;
    auto add = [&p](BatchNorm2d<T>& bn) {
        p.push_back(&bn.running_mean);
        p.push_back(&bn.running_var);
    };
    for (Stage& st : stages_) {
        add(st.bn_a);
        add(st.bn_b);
    }
    add(bn_bottleneck_);
    add(bn_head_);
    return p;
}

template <typename T>
std::vector<Param<T>*> QNet<T>::state_tensors() {
    std::vector<Param<T>*> p = parameters();
    for (Param<T>* b : buffers()) p.push_back(b);
    return p;
}

template <typename T>
std::vector<const Param<T>*> QNet<T>::state_tensors() const {
    auto all = const_cast<QNet*>(this)->state_tensors();
    return {all.begin(), all.end()};
}

template <typename T>
void QNet<T>::zero_grad() {
    for (Param<T>* p : parameters()) std::fill(p->grad.begin(), p->grad.end(), T(0));
}

template <typename T>
void QNet<T>::copy_from(const QNet& other) {
    if (!(cfg_ == other.cfg_)) throw ShapeError("cannot copy between networks of different architecture");
    auto dst = state_tensors();
    auto src = other.state_tensors();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value;
}

template <typename T>
std::size_t QNet<T>::parameter_count() const {
    std::size_t n = 0;
    for (const Param<T>* p : const_cast<QNet*>(this)->parameters()) n += p->value.size();
    return n;
}

template <typename T>
std::uint64_t QNet<T>::activation_signature() const {
    std::uint64_t h = 0;
    auto mix = [&h](std::uint64_t v) { h = (h ^ v) * 1099511628211ull + 0x9e3779b97f4a7c15ull; };
    for (const Stage& st : stages_) {
        mix(st.relu_a.pattern_hash());
        mix(st.relu_b.pattern_hash());
    }
    mix(relu_bottleneck_.pattern_hash());
    mix(relu_head_.pattern_hash());
    return h;
}

template class QNet<float>;
template class QNet<double>;

}  // namespace nn

nn::Tensor4<float> stack_to_batch(const ObservationStack& stack) {
    nn::Tensor4<float> t(stack.rotations, stack.channels, stack.height, stack.width);
    std::copy(stack.data.begin(), stack.data.end(), t.data.begin());
    return t;
}

nn::Tensor4<float> stack_entry(const ObservationStack& stack, int rotation) {
    if (rotation < 0 || rotation >= stack.rotations) throw OutOfRangeError("rotation index out of range");
    nn::Tensor4<float> t(1, stack.channels, stack.height, stack.width);
    const auto e = stack.entry(rotation);
    std::copy(e.begin(), e.end(), t.data.begin());
    return t;
}

QMaps q_maps(nn::QNet<float>& net, const ObservationStack& stack) {
    const nn::Tensor4<float> q = net.q_eval(stack_to_batch(stack));
    QMaps m;
    m.rotations = stack.rotations;
    m.channels = 2;
    m.height = stack.height;
    m.width = stack.width;
    m.data = q.data;
    return m;
}

HuberResult huber_loss(double prediction, double target, double kappa) {
    const double e = prediction - target;
    const double ae = std::abs(e);
    if (ae <= kappa) return {0.5 * e * e, e};
    return {kappa * (ae - 0.5 * kappa), e > 0.0 ? kappa : -kappa};
}

template <typename T>
Adam<T>::Adam(AdamConfig cfg, const std::vector<nn::Param<T>*>& params) : cfg_(cfg) {
    for (const auto* p : params) {
        m.emplace_back(p->value.size(), T(0));
        v.emplace_back(p->value.size(), T(0));
    }
}

template <typename T>
void Adam<T>::step(const std::vector<nn::Param<T>*>& params) {
    if (params.size() != m.size()) throw ShapeError("optimizer state does not match parameter list");
    ++t_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t j = 0; j < params.size(); ++j) {
        nn::Param<T>& p = *params[j];
        auto& mj = m[j];
        auto& vj = v[j];
        if (mj.size() != p.value.size()) throw ShapeError("optimizer state size mismatch for " + p.name);
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            const double mi = b1 * mj[i] + (1.0 - b1) * g;
            const double vi = b2 * vj[i] + (1.0 - b2) * g * g;
            mj[i] = static_cast<T>(mi);
            vj[i] = static_cast<T>(vi);
            const double step = cfg_.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg_.eps);
            p.value[i] = static_cast<T>(p.value[i] - step);
        }
    }
}

template class Adam<float>;
template class Adam<double>;

namespace {
constexpr char kMagic[4] = {'F', 'L', 'G', 'Q'};
}

void save_checkpoint(const std::filesystem::path& path, const nn::QNet<float>& net) {
    BinaryWriter w;
    w.bytes(kMagic, 4);
    w.u32(kCheckpointVersion);
    const NetworkConfig& a = net.config();
    w.i32(a.in_channels);
    for (int c : a.stage_channels) w.i32(c);
    w.i32(a.bottleneck_channels);
    w.i32(a.head_channels);
    w.f64(a.bn_momentum);
    const auto tensors = net.state_tensors();
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto* t : tensors) {
        w.str(t->name);
        w.u32(static_cast<std::uint32_t>(t->shape.size()));
        for (int d : t->shape) w.i32(d);
    }
    for (const auto* t : tensors)
        for (float v : t->value) w.f32(v);
    w.save_with_checksum(path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    BinaryReader r = BinaryReader::open_checked(path, kMagic);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.arch.in_channels = r.i32();
    for (int& c : ck.arch.stage_channels) c = r.i32();
    ck.arch.bottleneck_channels = r.i32();
    ck.arch.head_channels = r.i32();
    ck.arch.bn_momentum = r.f64();
    const std::uint32_t count = r.u32();
    if (count > 4096) throw CorruptionError(path.string() + ": implausible tensor count");
    ck.tensors.resize(count);
    for (auto& t : ck.tensors) {
        t.name = r.str();
        const std::uint32_t nd = r.u32();
        if (nd > 8) throw CorruptionError(path.string() + ": implausible tensor rank");
        std::size_t n = 1;
        for (std::uint32_t k = 0; k < nd; ++k) {
            const int d = r.i32();
            if (d < 0) throw CorruptionError(path.string() + ": negative dimension");
            t.shape.push_back(d);
            n *= static_cast<std::size_t>(d);
        }
        if (n > r.remaining() / 4) throw CorruptionError(path.string() + ": tensor larger than file");
        t.values.resize(n);
    }
    for (auto& t : ck.tensors)
        for (float& v : t.values) v = r.f32();
    if (r.remaining() != 0) throw CorruptionError(path.string() + ": trailing bytes");
    return ck;
}

void apply_checkpoint(const Checkpoint& ck, nn::QNet<float>& net) {
    const NetworkConfig& a = net.config();
    if (ck.arch.in_channels != a.in_channels || ck.arch.stage_channels != a.stage_channels ||
        ck.arch.bottleneck_channels != a.bottleneck_channels || ck.arch.head_channels != a.head_channels)
        throw FormatError("checkpoint architecture does not match the network");
    auto tensors = net.state_tensors();
    if (tensors.size() != ck.tensors.size()) throw FormatError("checkpoint tensor count mismatch");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (tensors[i]->name != ck.tensors[i].name || tensors[i]->shape != ck.tensors[i].shape)
            throw FormatError("checkpoint tensor mismatch at " + ck.tensors[i].name);
        tensors[i]->value = ck.tensors[i].values;
    }
}

std::unique_ptr<nn::QNet<float>> load_checkpoint(const std::filesystem::path& path) {
    const Checkpoint ck = read_checkpoint(path);
    NetworkConfig cfg;
    cfg.in_channels = ck.arch.in_channels;
    cfg.stage_channels = ck.arch.stage_channels;
    cfg.bottleneck_channels = ck.arch.bottleneck_channels;
    cfg.head_channels = ck.arch.head_channels;
    cfg.bn_momentum = ck.arch.bn_momentum;
    auto net = std::make_unique<nn::QNet<float>>(cfg, 0);
    apply_checkpoint(ck, *net);
    return net;
}

}  // namespace flg
