#ifndef VET_NN_ADAM_HPP
#define VET_NN_ADAM_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vet/nn/tensor.hpp"

namespace vet::nn {

// Named trainable tensor with its optimizer state.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    std::vector<T> m;  // first-moment estimate
    std::vector<T> v;  // second-moment estimate
    std::int64_t steps = 0;

    Parameter() = default;
    Parameter(std::string name_, Tensor<T> value_) : name(std::move(name_)), value(std::move(value_)) {
        value.set_requires_grad(true);
        m.assign(value.size(), T(0));
        v.assign(value.size(), T(0));
    }
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.8;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard bias-corrected Adam update. Gradients are left untouched; the
// caller zeroes them between steps.
template <typename T>
void adam_step(std::vector<Parameter<T>*>& params, const AdamConfig& cfg) {
    for (Parameter<T>* p : params) {
        if (!p->value.has_grad())
            throw ContractError("adam_step: parameter '" + p->name + "' has no gradient");
        ++p->steps;
        const auto& g = p->value.grad();
        auto& w = p->value.data();
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p->steps));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p->steps));
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = static_cast<double>(g[i]);
            const double mi = cfg.beta1 * static_cast<double>(p->m[i]) + (1.0 - cfg.beta1) * gi;
            const double vi = cfg.beta2 * static_cast<double>(p->v[i]) + (1.0 - cfg.beta2) * gi * gi;
            p->m[i] = static_cast<T>(mi);
            p->v[i] = static_cast<T>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            w[i] = static_cast<T>(static_cast<double>(w[i]) - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

template <typename T>
void zero_grads(std::vector<Parameter<T>*>& params) {
    for (Parameter<T>* p : params) p->value.zero_grad();
}

}  // namespace vet::nn

#endif
