#ifndef VET_NN_TENSOR_HPP
#define VET_NN_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <vector>

#include "vet/common.hpp"

namespace vet::nn {

namespace detail {

template <typename T>
struct Node {
    std::vector<std::size_t> shape;
    std::vector<T> value;
    std::vector<T> grad;  // persistent accumulator; only leaves receive it
    std::vector<T> flow;  // transient per-backward-pass stream
    bool requires_grad = false;
    bool is_leaf = true;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // reads this->flow, pushes into parents

    std::size_t size() const { return value.size(); }

    // Backward deltas land in grad for leaves and in flow for interior nodes.
    T* grad_sink() {
        auto& buf = is_leaf ? grad : flow;
        if (buf.empty()) buf.assign(size(), T(0));
        return buf.data();
    }
};

inline std::size_t shape_product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace detail

template <typename T>
class Tape;

// Dense row-major N-D array handle with optional gradient tracking. Copies
// share the underlying node (value semantics are not needed; graph identity
// is).
template <typename T>
class Tensor {
public:
    using NodePtr = std::shared_ptr<detail::Node<T>>;

    Tensor() = default;
    explicit Tensor(NodePtr n) : node_(std::move(n)) {}

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
        return filled(std::move(shape), T(0), requires_grad);
    }

    static Tensor filled(std::vector<std::size_t> shape, T fill, bool requires_grad = false) {
        auto n = std::make_shared<detail::Node<T>>();
        n->value.assign(detail::shape_product(shape), fill);
        n->shape = std::move(shape);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor from(std::vector<std::size_t> shape, std::vector<T> data, bool requires_grad = false) {
        if (detail::shape_product(shape) != data.size())
            throw ArgumentError("Tensor::from: shape does not match data length");
        auto n = std::make_shared<detail::Node<T>>();
        n->shape = std::move(shape);
        n->value = std::move(data);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor scalar(T v, bool requires_grad = false) { return from({1}, {v}, requires_grad); }

    bool defined() const { return static_cast<bool>(node_); }
    const std::vector<std::size_t>& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t extent(std::size_t i) const { return node_->shape[i]; }
    std::size_t size() const { return node_->value.size(); }

    std::vector<T>& data() { return node_->value; }
    const std::vector<T>& data() const { return node_->value; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool rg) {
        if (!node_->is_leaf) throw ArgumentError("set_requires_grad: only leaves may change");
        node_->requires_grad = rg;
    }

    bool has_grad() const { return !node_->grad.empty(); }
    const std::vector<T>& grad() const {
        if (node_->grad.empty()) throw ContractError("Tensor::grad: no gradient accumulated");
        return node_->grad;
    }
    void zero_grad() { node_->grad.clear(); }

    T item() const {
        if (size() != 1) throw ArgumentError("Tensor::item: tensor is not scalar");
        return node_->value[0];
    }

    const NodePtr& node() const { return node_; }

private:
    NodePtr node_;
};

// Execution-order recorder. Constructing a Tape makes it the active tape for
// scalar type T on this thread; ops whose inputs require gradients append
// their output nodes. backward() walks the record in exact reverse execution
// order. Leaves accumulate into .grad across calls, so running backward twice
// without zeroing doubles every gradient.
template <typename T>
class Tape {
public:
    Tape() : prev_(active_) { active_ = this; }
    ~Tape() {
        active_ = prev_;
    }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active() { return active_; }

    void record(std::shared_ptr<detail::Node<T>> n) { ops_.push_back(std::move(n)); }

    std::size_t recorded() const { return ops_.size(); }

    void backward(const Tensor<T>& loss) {
        if (!loss.defined()) throw ArgumentError("backward: undefined loss");
        if (loss.size() != 1) throw ArgumentError("backward: loss must be a scalar");
        auto& seed = *loss.node();
        if (seed.is_leaf) {
            if (seed.requires_grad) seed.grad_sink()[0] += T(1);
            return;
        }
        seed.grad_sink()[0] += T(1);
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
            detail::Node<T>& n = **it;
            if (!n.flow.empty() && n.backprop) n.backprop(n);
        }
        for (auto& n : ops_) n->flow.clear();
    }

    void clear() { ops_.clear(); }

private:
    std::vector<std::shared_ptr<detail::Node<T>>> ops_;
    Tape* prev_ = nullptr;
    inline static thread_local Tape* active_ = nullptr;
};

namespace detail {

// Create an op output node; records on the active tape when any parent
// requires a gradient.
template <typename T>
Tensor<T> make_op(std::vector<std::size_t> shape, std::vector<T> value,
                  std::vector<std::shared_ptr<Node<T>>> parents,
                  std::function<void(Node<T>&)> backprop) {
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->is_leaf = false;
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    Tape<T>* tape = Tape<T>::active();
    if (rg && tape) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
        tape->record(n);
    }
    return Tensor<T>(n);
}

}  // namespace detail

// ---- elementwise / structural ops ----

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) throw ArgumentError("add: shape mismatch");
    std::vector<T> out(a.size());
    const auto& av = a.data();
    const auto& bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    auto pa = a.node(), pb = b.node();
    return detail::make_op<T>(
        a.shape(), std::move(out), {pa, pb}, [pa, pb](detail::Node<T>& self) {
            const T* g = self.flow.data();
            if (pa->requires_grad) {
                T* s = pa->grad_sink();
                for (std::size_t i = 0; i < self.size(); ++i) s[i] += g[i];
            }
            if (pb->requires_grad) {
                T* s = pb->grad_sink();
                for (std::size_t i = 0; i < self.size(); ++i) s[i] += g[i];
            }
        });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
    std::vector<T> out(a.size());
    const auto& av = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
    auto pa = a.node();
    return detail::make_op<T>(a.shape(), std::move(out), {pa}, [pa, c](detail::Node<T>& self) {
        if (!pa->requires_grad) return;
        const T* g = self.flow.data();
        T* s = pa->grad_sink();
        for (std::size_t i = 0; i < self.size(); ++i) s[i] += c * g[i];
    });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, std::vector<std::size_t> shape) {
    if (detail::shape_product(shape) != a.size()) throw ArgumentError("reshape: element count differs");
    auto pa = a.node();
    return detail::make_op<T>(std::move(shape), a.data(), {pa}, [pa](detail::Node<T>& self) {
        if (!pa->requires_grad) return;
        const T* g = self.flow.data();
        T* s = pa->grad_sink();
        for (std::size_t i = 0; i < self.size(); ++i) s[i] += g[i];
    });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, T alpha = T(0.3)) {
    std::vector<T> out(a.size());
    const auto& av = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] >= T(0) ? av[i] : alpha * av[i];
    auto pa = a.node();
    return detail::make_op<T>(a.shape(), std::move(out), {pa}, [pa, alpha](detail::Node<T>& self) {
        if (!pa->requires_grad) return;
        const T* g = self.flow.data();
        const T* x = pa->value.data();
        T* s = pa->grad_sink();
        for (std::size_t i = 0; i < self.size(); ++i) s[i] += (x[i] >= T(0) ? T(1) : alpha) * g[i];
    });
}

// tanh-approximation GELU with the customary fixed constants
template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
    constexpr T c0 = T(0.7978845608);  // sqrt(2/pi)
    constexpr T c1 = T(0.044715);
    std::vector<T> out(a.size());
    const auto& av = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const T x = av[i];
        const T u = c0 * (x + c1 * x * x * x);
        out[i] = T(0.5) * x * (T(1) + std::tanh(u));
    }
    auto pa = a.node();
    return detail::make_op<T>(a.shape(), std::move(out), {pa}, [pa](detail::Node<T>& self) {
        if (!pa->requires_grad) return;
        const T* g = self.flow.data();
        const T* xv = pa->value.data();
        T* s = pa->grad_sink();
        for (std::size_t i = 0; i < self.size(); ++i) {
            const T x = xv[i];
            const T u = c0 * (x + c1 * x * x * x);
            const T th = std::tanh(u);
            const T du = c0 * (T(1) + T(3) * c1 * x * x);
            const T d = T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * du;
            s[i] += d * g[i];
        }
    });
}

// Mean over all elements of the squared difference.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    if (pred.shape() != target.shape()) throw ArgumentError("mse_loss: shape mismatch");
    const auto& p = pred.data();
    const auto& t = target.data();
    // accumulate in double regardless of T so large batches stay accurate
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
        acc += d * d;
    }
    const T loss = static_cast<T>(acc / static_cast<double>(p.size()));
    auto pp = pred.node(), pt = target.node();
    return detail::make_op<T>(
        {1}, {loss}, {pp, pt}, [pp, pt](detail::Node<T>& self) {
            const T g = self.flow[0];
            const T inv = T(2) / static_cast<T>(pp->size());
            const T* p = pp->value.data();
            const T* t = pt->value.data();
            if (pp->requires_grad) {
                T* s = pp->grad_sink();
                for (std::size_t i = 0; i < pp->size(); ++i) s[i] += inv * (p[i] - t[i]) * g;
            }
            if (pt->requires_grad) {
                T* s = pt->grad_sink();
                for (std::size_t i = 0; i < pt->size(); ++i) s[i] -= inv * (p[i] - t[i]) * g;
            }
        });
}

// Fixed-coefficient reduction to a scalar; the workhorse of gradient checks.
template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& a, std::vector<T> weights) {
    if (weights.size() != a.size()) throw ArgumentError("weighted_sum: weight count mismatch");
    const auto& av = a.data();
    T acc = T(0);
    for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * weights[i];
    auto pa = a.node();
    return detail::make_op<T>(
        {1}, {acc}, {pa}, [pa, w = std::move(weights)](detail::Node<T>& self) {
            if (!pa->requires_grad) return;
            const T g = self.flow[0];
            T* s = pa->grad_sink();
            for (std::size_t i = 0; i < w.size(); ++i) s[i] += w[i] * g;
        });
}

}  // namespace vet::nn

#endif
