#include "vet/model.hpp"

#include <algorithm>
#include <cmath>

#include "vet/common.hpp"

namespace vet {

void VetConfig::validate() const {
    if (channels == 0) throw ConfigError("model: channels must be positive");
    if (heads == 0 || channels % heads != 0)
        throw ConfigError("model: channels must divide evenly into heads");
    if (ffn_hidden == 0) throw ConfigError("model: ffn_hidden must be positive");
    if (input_channels == 0 || output_channels == 0)
        throw ConfigError("model: input/output channels must be positive");
    if (residual_scale < 0.0 || residual_scale > 1.0)
        throw ConfigError("model: residual scale must be in [0,1]");
}

std::size_t vet_param_count(const VetConfig& cfg) {
    const std::size_t c = cfg.channels, dh = cfg.ffn_hidden;
    const auto conv = [](std::size_t ci, std::size_t co) { return 9 * ci * co + co; };
    const std::size_t shallow = conv(cfg.input_channels, c);
    const std::size_t per_layer = conv(c, c)            // down
                                  + 2 * c               // ln1
                                  + 3 * conv(c, c)      // q, k, v projections
                                  + (c * c + c)         // attention output mix
                                  + 2 * c               // ln2
                                  + (c * dh + dh)       // ffn1
                                  + (dh * c + c)        // ffn2
                                  + conv(c, c);         // up
    const std::size_t recon = conv(c, c) + conv(c, cfg.output_channels);
    return shallow + cfg.vfe_layers * per_layer + recon;
}

FlopsBreakdown vet_flops_estimate(const VetConfig& cfg, std::size_t h, std::size_t w) {
    if (h % 2 != 0 || w % 2 != 0) throw ConfigError("flops estimate: H and W must be even");
    FlopsBreakdown f;
    const std::uint64_t c = cfg.channels;
    const std::uint64_t hw = static_cast<std::uint64_t>(h) * w;
    const std::uint64_t t = hw / 4;  // tokens per VFE layer
    // convs are counted as out_positions * kh * kw * Cin * Cout MACs x2,
    // border taps included; the transpose conv is charged at its input grid
    f.conv += 2 * hw * 9 * cfg.input_channels * c;  // shallow
    for (std::size_t l = 0; l < cfg.vfe_layers; ++l) {
        f.conv += 2 * t * 9 * c * c;          // down (output grid is H/2 x W/2)
        f.conv += 3 * 2 * t * 9 * c * c;      // q, k, v
        f.conv += 2 * t * 9 * c * c;          // up
        f.dense += 2 * t * c * c;             // mix
        f.dense += 2 * t * (c * cfg.ffn_hidden + cfg.ffn_hidden * c);
        f.attention += 2 * 2 * t * t * c;     // QK^T and SV
    }
    f.conv += 2 * hw * 9 * c * c;                       // recon.conv1
    f.conv += 2 * hw * 9 * c * cfg.output_channels;     // recon.conv2
    return f;
}

namespace {

// Glorot-uniform over [-limit, limit], limit = sqrt(6/(fan_in+fan_out)).
template <typename T>
void glorot_fill(std::vector<T>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& x : w) x = static_cast<T>(rng.uniform(-limit, limit));
}

void require_even_spatial(const std::vector<std::size_t>& shape, const char* who) {
    if (shape.size() != 4) throw ConfigError(std::string(who) + ": input must be [N,H,W,C]");
    if (shape[1] % 2 != 0 || shape[2] % 2 != 0)
        throw ConfigError(std::string(who) + ": spatial dims must be even");
}

}  // namespace

template <typename T>
VetModel<T>::VetModel(const VetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    const std::size_t c = cfg.channels;

    add_param("shallow.conv.w", {3, 3, cfg.input_channels, c});
    add_param("shallow.conv.b", {c});
    for (std::size_t i = 1; i <= cfg.vfe_layers; ++i) {
        const std::string pre = "vfe" + std::to_string(i) + ".";
        add_param(pre + "down.w", {3, 3, c, c});
        add_param(pre + "down.b", {c});
        add_param(pre + "ln1.gamma", {c});
        add_param(pre + "ln1.beta", {c});
        for (const char* proj : {"q", "k", "v"}) {
            add_param(pre + proj + ".w", {3, 3, c, c});
            add_param(pre + proj + ".b", {c});
        }
        add_param(pre + "mix.w", {c, c});
        add_param(pre + "mix.b", {c});
        add_param(pre + "ln2.gamma", {c});
        add_param(pre + "ln2.beta", {c});
        add_param(pre + "ffn1.w", {c, cfg.ffn_hidden});
        add_param(pre + "ffn1.b", {cfg.ffn_hidden});
        add_param(pre + "ffn2.w", {cfg.ffn_hidden, c});
        add_param(pre + "ffn2.b", {c});
        add_param(pre + "up.w", {3, 3, c, c});
        add_param(pre + "up.b", {c});
    }
    add_param("recon.conv1.w", {3, 3, c, c});
    add_param("recon.conv1.b", {c});
    add_param("recon.conv2.w", {3, 3, c, cfg.output_channels});
    add_param("recon.conv2.b", {cfg.output_channels});

    // seeded Glorot for kernels, ones/zeros for LN, zeros for biases;
    // initialization order is the construction order above
    Rng rng(seed);
    for (auto& up : params_) {
        auto& t = up->value;
        const auto& name = up->name;
        const auto& s = t.shape();
        if (name.ends_with(".gamma")) {
            std::fill(t.data().begin(), t.data().end(), T(1));
        } else if (name.ends_with(".b") || name.ends_with(".beta")) {
            std::fill(t.data().begin(), t.data().end(), T(0));
        } else if (s.size() == 4) {
            glorot_fill(t.data(), 9 * s[2], 9 * s[3], rng);
        } else {
            glorot_fill(t.data(), s[0], s[1], rng);
        }
    }
}

template <typename T>
void VetModel<T>::add_param(const std::string& name, std::vector<std::size_t> shape) {
    auto p = std::make_unique<nn::Parameter<T>>(name, nn::Tensor<T>::zeros(std::move(shape)));
    index_[name] = p.get();
    params_.push_back(std::move(p));
}

template <typename T>
const nn::Tensor<T>& VetModel<T>::p(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ArgumentError("unknown parameter: " + name);
    return it->second->value;
}

template <typename T>
nn::Parameter<T>& VetModel<T>::param(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ArgumentError("unknown parameter: " + name);
    return *it->second;
}

template <typename T>
nn::Tensor<T> VetModel<T>::shallow_extract(const nn::Tensor<T>& x) const {
    require_even_spatial(x.shape(), "shallow_extract");
    if (x.extent(3) != cfg_.input_channels)
        throw ConfigError("shallow_extract: unexpected input channel count");
    return nn::leaky_relu(nn::conv2d(x, p("shallow.conv.w"), p("shallow.conv.b"), 1),
                          static_cast<T>(cfg_.leaky_alpha));
}

template <typename T>
nn::Tensor<T> VetModel<T>::vfe_layer(const nn::Tensor<T>& f_in, std::size_t layer,
                                     ForwardStats* stats) const {
    require_even_spatial(f_in.shape(), "vfe_layer");
    if (layer < 1 || layer > cfg_.vfe_layers) throw ArgumentError("vfe_layer: layer index out of range");
    const std::string pre = "vfe" + std::to_string(layer) + ".";
    const std::size_t n = f_in.extent(0), h2 = f_in.extent(1) / 2, w2 = f_in.extent(2) / 2;
    const std::size_t c = cfg_.channels;
    const std::size_t tokens = h2 * w2;
    if (stats) stats->tokens_per_layer.push_back(tokens);

    auto f_c1 = nn::conv2d(f_in, p(pre + "down.w"), p(pre + "down.b"), 2);
    auto normed = nn::layer_norm(f_c1, p(pre + "ln1.gamma"), p(pre + "ln1.beta"));
    auto q = nn::reshape(nn::conv2d(normed, p(pre + "q.w"), p(pre + "q.b"), 1), {n, tokens, c});
    auto k = nn::reshape(nn::conv2d(normed, p(pre + "k.w"), p(pre + "k.b"), 1), {n, tokens, c});
    auto v = nn::reshape(nn::conv2d(normed, p(pre + "v.w"), p(pre + "v.b"), 1), {n, tokens, c});
    auto att = nn::multi_head_attention(q, k, v, cfg_.heads);
    auto mixed = nn::linear(att, p(pre + "mix.w"), p(pre + "mix.b"));
    auto y = nn::add(nn::reshape(mixed, {n, h2, w2, c}), f_c1);

    auto normed2 = nn::layer_norm(y, p(pre + "ln2.gamma"), p(pre + "ln2.beta"));
    auto f = nn::ffn(normed2, p(pre + "ffn1.w"), p(pre + "ffn1.b"), p(pre + "ffn2.w"),
                     p(pre + "ffn2.b"));
    auto z = nn::add(f, y);
    return nn::conv2d_transpose(z, p(pre + "up.w"), p(pre + "up.b"), 2);
}

template <typename T>
nn::Tensor<T> VetModel<T>::rvfe(const nn::Tensor<T>& f_s, ForwardStats* stats) const {
    nn::Tensor<T> f = f_s;
    for (std::size_t i = 1; i <= cfg_.vfe_layers; ++i)
        f = nn::add(nn::scale(f, static_cast<T>(cfg_.residual_scale)), vfe_layer(f, i, stats));
    return f;
}

template <typename T>
nn::Tensor<T> VetModel<T>::reconstruct(const nn::Tensor<T>& f_s, const nn::Tensor<T>& f_rvfe) const {
    if (f_s.shape() != f_rvfe.shape()) throw ArgumentError("reconstruct: feature shapes differ");
    auto sum = nn::add(f_s, f_rvfe);
    auto hidden = nn::leaky_relu(nn::conv2d(sum, p("recon.conv1.w"), p("recon.conv1.b"), 1),
                                 static_cast<T>(cfg_.leaky_alpha));
    return nn::conv2d(hidden, p("recon.conv2.w"), p("recon.conv2.b"), 1);
}

template <typename T>
nn::Tensor<T> VetModel<T>::forward(const nn::Tensor<T>& x, ForwardStats* stats) const {
    auto f_s = shallow_extract(x);
    auto f_r = rvfe(f_s, stats);
    return reconstruct(f_s, f_r);
}

template <typename T>
std::vector<nn::Parameter<T>*> VetModel<T>::parameters() {
    std::vector<nn::Parameter<T>*> out;
    out.reserve(params_.size());
    for (auto& p_ : params_) out.push_back(p_.get());
    return out;
}

template <typename T>
std::vector<const nn::Parameter<T>*> VetModel<T>::parameters() const {
    std::vector<const nn::Parameter<T>*> out;
    out.reserve(params_.size());
    for (const auto& p_ : params_) out.push_back(p_.get());
    return out;
}

template <typename T>
void VetModel<T>::zero_grad() {
    for (auto& p_ : params_) p_->value.zero_grad();
}

template <typename T>
void VetModel<T>::fill_all(T v) {
    for (auto& p_ : params_) std::fill(p_->value.data().begin(), p_->value.data().end(), v);
}

template class VetModel<float>;
template class VetModel<double>;

}  // namespace vet
