#include <cmath>
#include <filesystem>
#include <utility>

#include "doctest.h"
#include "vet/common.hpp"
#include "vet/model.hpp"
#include "vet/nn/checkpoint.hpp"

using namespace vet;
using nn::Tensor;

namespace {

VetConfig tiny_config() {
    VetConfig cfg;
    cfg.channels = 8;
    cfg.vfe_layers = 2;
    cfg.heads = 2;
    cfg.ffn_hidden = 16;
    return cfg;
}

Tensor<float> random_input(std::size_t n, std::size_t h, std::size_t w, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> data(n * h * w);
    for (auto& v : data) v = static_cast<float>(rng.uniform());
    return Tensor<float>::from({n, h, w, 1}, std::move(data));
}

}  // namespace

TEST_CASE("paper configuration parameter count") {
    const VetConfig paper;  // defaults are the paper configuration
    const std::size_t count = vet_param_count(paper);
    // frozen analytic total for C=64, 4 VFE layers, FFN 256/64, 1->1 channels
    CHECK(count == 926721);
    // within +-2% of the published 0.929M
    CHECK(static_cast<double>(count) >= 0.98 * 929000.0);
    CHECK(static_cast<double>(count) <= 1.02 * 929000.0);

    VetModel<float> model(paper, 1);
    std::size_t actual = 0;
    for (const auto* p : model.parameters()) actual += p->value.size();
    CHECK(actual == count);
}

TEST_CASE("hand-counted parameter total for a degenerate config") {
    VetConfig cfg;
    cfg.channels = 1;
    cfg.vfe_layers = 0;
    cfg.heads = 1;
    cfg.ffn_hidden = 1;
    // shallow: 3*3*1*1+1 = 10; recon1: 3*3*1*1+1 = 10; recon2: 3*3*1*1+1 = 10
    CHECK(vet_param_count(cfg) == 30);
}

TEST_CASE("parameter count is linear in the layer count") {
    VetConfig a = tiny_config(), b = tiny_config();
    a.vfe_layers = 2;
    b.vfe_layers = 5;
    const std::size_t per_layer = (vet_param_count(b) - vet_param_count(a)) / 3;
    VetConfig c = tiny_config();
    c.vfe_layers = 9;
    CHECK(vet_param_count(c) == vet_param_count(a) + 7 * per_layer);
}

TEST_CASE("flops: single conv example and zero-layer config") {
    VetConfig cfg;
    cfg.channels = 1;
    cfg.vfe_layers = 0;
    cfg.heads = 1;
    cfg.ffn_hidden = 1;
    cfg.input_channels = 1;
    cfg.output_channels = 1;
    const auto f = vet_flops_estimate(cfg, 4, 4);
    // one 3x3 conv 1->1 on 4x4 is 4*4*9*2 = 288 FLOPs; this config has three
    // such convs (shallow + two reconstruction convs)
    CHECK(f.conv == 3 * 288);
    CHECK(f.attention == 0);
    CHECK(f.dense == 0);
    CHECK(f.total_with_attention() == f.total_without_attention());
}

TEST_CASE("flops: paper config subtotals are reported, attention dominates") {
    const VetConfig paper;
    const auto f = vet_flops_estimate(paper, 192, 192);
    CHECK(f.conv > 0);
    CHECK(f.attention > f.conv);  // the attention matmuls dwarf the convs at 192x192
    MESSAGE("paper 192x192 FLOPs: conv=", f.conv, " dense=", f.dense, " attention=", f.attention,
            " with=", f.total_with_attention(), " without=", f.total_without_attention());
}

TEST_CASE("shallow_extract keeps spatial dims and emits the configured channels") {
    VetConfig cfg;  // C=64 paper width
    VetModel<float> model(cfg, 3);
    auto y = model.shallow_extract(random_input(1, 8, 8, 5));
    CHECK(y.shape() == std::vector<std::size_t>{1, 8, 8, 64});
}

TEST_CASE("shallow_extract rejects odd spatial dims before compute") {
    VetModel<float> model(tiny_config(), 3);
    CHECK_THROWS_AS(model.shallow_extract(random_input(1, 7, 8, 5)), ConfigError);
}

TEST_CASE("vfe layer: token count law and shape preservation") {
    VetConfig cfg;
    cfg.channels = 64;
    cfg.vfe_layers = 1;
    VetModel<float> model(cfg, 7);
    Rng rng(8);
    std::vector<float> data(48 * 48 * 64);
    for (auto& v : data) v = static_cast<float>(rng.uniform(-0.5, 0.5));
    auto f_in = Tensor<float>::from({1, 48, 48, 64}, std::move(data));
    ForwardStats stats;
    auto y = model.vfe_layer(f_in, 1, &stats);
    CHECK(y.shape() == f_in.shape());
    REQUIRE(stats.tokens_per_layer.size() == 1);
    CHECK(stats.tokens_per_layer[0] == 576);  // (48/2)*(48/2) = HW/4
}

TEST_CASE("vfe layer with all weights zero outputs zero") {
    VetConfig cfg = tiny_config();
    cfg.vfe_layers = 1;
    VetModel<float> model(cfg, 9);
    model.fill_all(0.0f);
    Rng rng(10);
    std::vector<float> data(6 * 6 * 8);
    for (auto& v : data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    auto f_in = Tensor<float>::from({1, 6, 6, 8}, std::move(data));
    auto y = model.vfe_layer(f_in, 1);
    for (float v : y.data()) CHECK(v == 0.0f);
}

TEST_CASE("attention-path weights zeroed reduce the inner residual to the downsample") {
    // with LN1 gamma/beta, q/k/v and mix all zero, Y = f_c1(F_in) exactly, so
    // the layer collapses to up(FFN(LN2(F_c1)) + F_c1)
    VetConfig cfg = tiny_config();
    cfg.vfe_layers = 1;
    VetModel<float> model(cfg, 11);
    for (const char* name : {"vfe1.ln1.gamma", "vfe1.ln1.beta", "vfe1.q.w", "vfe1.q.b", "vfe1.k.w",
                             "vfe1.k.b", "vfe1.v.w", "vfe1.v.b", "vfe1.mix.w", "vfe1.mix.b"}) {
        auto& p = model.param(name);
        std::fill(p.value.data().begin(), p.value.data().end(), 0.0f);
    }
    Rng rng(12);
    std::vector<float> data(6 * 6 * 8);
    for (auto& v : data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    auto f_in = Tensor<float>::from({1, 6, 6, 8}, std::move(data));

    auto full = model.vfe_layer(f_in, 1);

    // reference: the same composition with Y replaced by conv alone
    auto f_c1 = nn::conv2d(f_in, model.param("vfe1.down.w").value, model.param("vfe1.down.b").value, 2);
    auto n2 = nn::layer_norm(f_c1, model.param("vfe1.ln2.gamma").value, model.param("vfe1.ln2.beta").value);
    auto ff = nn::ffn(n2, model.param("vfe1.ffn1.w").value, model.param("vfe1.ffn1.b").value,
                      model.param("vfe1.ffn2.w").value, model.param("vfe1.ffn2.b").value);
    auto expect = nn::conv2d_transpose(nn::add(ff, f_c1), model.param("vfe1.up.w").value,
                                       model.param("vfe1.up.b").value, 2);
    REQUIRE(full.size() == expect.size());
    for (std::size_t i = 0; i < full.size(); ++i) CHECK(full.data()[i] == expect.data()[i]);
}

TEST_CASE("rvfe with zero VFE weights scales the input by beta^layers") {
    VetConfig cfg = tiny_config();
    cfg.vfe_layers = 4;
    cfg.residual_scale = 0.4;
    VetModel<float> model(cfg, 13);
    model.fill_all(0.0f);
    Rng rng(14);
    std::vector<float> data(4 * 4 * 8);
    for (auto& v : data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    auto f_s = Tensor<float>::from({1, 4, 4, 8}, data);
    auto y = model.rvfe(f_s);
    // 0.4^4 = 0.0256
    for (std::size_t i = 0; i < y.size(); ++i)
        CHECK(y.data()[i] == doctest::Approx(0.0256f * data[i]).epsilon(1e-6));
}

TEST_CASE("rvfe with beta=0 is the plain composition of VFE layers") {
    VetConfig cfg = tiny_config();
    cfg.vfe_layers = 2;
    cfg.residual_scale = 0.0;
    VetModel<float> model(cfg, 15);
    Rng rng(16);
    std::vector<float> data(4 * 4 * 8);
    for (auto& v : data) v = static_cast<float>(rng.uniform(-0.3, 0.3));
    auto f_s = Tensor<float>::from({1, 4, 4, 8}, data);
    auto composed = model.vfe_layer(model.vfe_layer(f_s, 1), 2);
    auto y = model.rvfe(f_s);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y.data()[i] == composed.data()[i]);
}

TEST_CASE("reconstruct: zero deep features leave the skip path") {
    VetConfig cfg = tiny_config();
    VetModel<float> model(cfg, 17);
    Rng rng(18);
    std::vector<float> data(4 * 4 * 8);
    for (auto& v : data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    auto f_s = Tensor<float>::from({1, 4, 4, 8}, data);
    auto zero = Tensor<float>::zeros({1, 4, 4, 8});

    auto direct = model.reconstruct(f_s, zero);
    CHECK(direct.shape() == std::vector<std::size_t>{1, 4, 4, 1});

    auto hidden = nn::leaky_relu(
        nn::conv2d(f_s, model.param("recon.conv1.w").value, model.param("recon.conv1.b").value, 1),
        0.3f);
    auto expect =
        nn::conv2d(hidden, model.param("recon.conv2.w").value, model.param("recon.conv2.b").value, 1);
    for (std::size_t i = 0; i < direct.size(); ++i) CHECK(direct.data()[i] == expect.data()[i]);
}

TEST_CASE("zero weights give identically zero output") {
    VetModel<float> model(tiny_config(), 19);
    model.fill_all(0.0f);
    auto y = model.forward(random_input(1, 8, 8, 20));
    for (float v : y.data()) CHECK(v == 0.0f);
}

TEST_CASE("forward shape contract across sizes including the paper patch") {
    VetConfig cfg;
    cfg.channels = 8;
    cfg.vfe_layers = 1;
    cfg.heads = 2;
    cfg.ffn_hidden = 16;
    VetModel<float> model(cfg, 21);
    for (std::size_t hw : {8u, 32u, 48u}) {
        auto y = model.forward(random_input(1, hw, hw, 22));
        CHECK(y.shape() == std::vector<std::size_t>{1, hw, hw, 1});
    }
    // paper-sized tile through a narrow config: still 192x192 -> 192x192
    auto y = model.forward(random_input(1, 192, 192, 23));
    CHECK(y.shape() == std::vector<std::size_t>{1, 192, 192, 1});
    ForwardStats stats;
    (void)model.forward(random_input(1, 48, 48, 24), &stats);
    CHECK(stats.tokens_per_layer == std::vector<std::size_t>{576});
}

TEST_CASE("checkpoint round trip reproduces the forward pass bit for bit") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "vet_model_tests";
    fs::create_directories(dir);
    const auto path = (dir / "model.vetw").string();

    VetModel<float> model(tiny_config(), 25);
    auto x = random_input(2, 8, 8, 26);
    auto before = model.forward(x);

    nn::save_checkpoint(path, std::as_const(model).parameters());
    VetModel<float> restored(tiny_config(), 999);  // different init, fully overwritten
    auto params = restored.parameters();
    nn::apply_checkpoint(nn::load_checkpoint(path), params);
    auto after = restored.forward(x);
    CHECK(before.data() == after.data());
}

TEST_CASE("model config validation") {
    VetConfig cfg = tiny_config();
    cfg.heads = 3;  // does not divide 8
    CHECK_THROWS_AS(VetModel<float>(cfg, 1), ConfigError);
    cfg = tiny_config();
    cfg.residual_scale = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
