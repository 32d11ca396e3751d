#ifndef VET_MODEL_HPP
#define VET_MODEL_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vet/nn/adam.hpp"
#include "vet/nn/ops.hpp"

namespace vet {

struct VetConfig {
    std::size_t channels = 64;
    std::size_t vfe_layers = 4;
    std::size_t heads = 4;
    std::size_t ffn_hidden = 256;
    std::size_t input_channels = 1;
    std::size_t output_channels = 1;
    double residual_scale = 0.4;
    double leaky_alpha = 0.3;

    void validate() const;
    bool operator==(const VetConfig&) const = default;
};

// Exact count of trainable scalars implied by the configuration.
std::size_t vet_param_count(const VetConfig& cfg);

// Multiply-accumulate counts x2 at the given input resolution, split so the
// attention matmul cost can be included or excluded.
struct FlopsBreakdown {
    std::uint64_t conv = 0;
    std::uint64_t dense = 0;       // FFN and attention output mix
    std::uint64_t attention = 0;   // QK^T and SV matmuls
    std::uint64_t total_with_attention() const { return conv + dense + attention; }
    std::uint64_t total_without_attention() const { return conv + dense; }
};
FlopsBreakdown vet_flops_estimate(const VetConfig& cfg, std::size_t h, std::size_t w);

struct ForwardStats {
    std::vector<std::size_t> tokens_per_layer;
};

// The vasculature extraction network: a shallow conv front end, a stack of
// residual-scaled VFE layers (stride-2 conv, conv-projection multi-head
// attention, FFN, stride-2 transpose conv), and a two-conv reconstruction
// head fed by a global skip from the shallow features.
//
// Parameter names are frozen as:
//   shallow.conv.{w,b}
//   vfe{i}.down.{w,b}  vfe{i}.ln1.{gamma,beta}  vfe{i}.{q,k,v}.{w,b}
//   vfe{i}.mix.{w,b}   vfe{i}.ln2.{gamma,beta}  vfe{i}.ffn1.{w,b}
//   vfe{i}.ffn2.{w,b}  vfe{i}.up.{w,b}          (i is 1-based)
//   recon.conv1.{w,b}  recon.conv2.{w,b}
template <typename T>
class VetModel {
public:
    VetModel(const VetConfig& cfg, std::uint64_t seed);

    const VetConfig& config() const { return cfg_; }

    nn::Tensor<T> forward(const nn::Tensor<T>& x, ForwardStats* stats = nullptr) const;

    nn::Tensor<T> shallow_extract(const nn::Tensor<T>& x) const;
    nn::Tensor<T> vfe_layer(const nn::Tensor<T>& f_in, std::size_t layer,
                            ForwardStats* stats = nullptr) const;
    nn::Tensor<T> rvfe(const nn::Tensor<T>& f_s, ForwardStats* stats = nullptr) const;
    nn::Tensor<T> reconstruct(const nn::Tensor<T>& f_s, const nn::Tensor<T>& f_rvfe) const;

    std::vector<nn::Parameter<T>*> parameters();
    std::vector<const nn::Parameter<T>*> parameters() const;
    nn::Parameter<T>& param(const std::string& name);
    void zero_grad();
    void fill_all(T v);  // mostly for tests: set every weight to v

private:
    const nn::Tensor<T>& p(const std::string& name) const;
    void add_param(const std::string& name, std::vector<std::size_t> shape);

    VetConfig cfg_;
    std::vector<std::unique_ptr<nn::Parameter<T>>> params_;
    std::map<std::string, nn::Parameter<T>*> index_;
};

extern template class VetModel<float>;
extern template class VetModel<double>;

}  // namespace vet

#endif
