#ifndef VET_NN_OPS_HPP
#define VET_NN_OPS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "vet/nn/tensor.hpp"

namespace vet::nn {

namespace detail {

// "Same" padding: output extent is ceil(in/stride); when the total padding is
// odd the extra pixel goes to the bottom/right.
inline std::size_t conv_out_extent(std::size_t in, std::size_t stride) {
    return (in + stride - 1) / stride;
}

inline std::ptrdiff_t pad_before(std::size_t in, std::size_t out, std::size_t k, std::size_t stride) {
    const std::ptrdiff_t total = static_cast<std::ptrdiff_t>((out - 1) * stride + k) -
                                 static_cast<std::ptrdiff_t>(in);
    return total > 0 ? total / 2 : 0;
}

struct ConvDims {
    std::size_t n, h, w, ci;      // input
    std::size_t kh, kw, co;       // kernel
    std::size_t ho, wo;           // output
    std::size_t stride;
    std::ptrdiff_t pt, pl;        // top/left padding
};

inline ConvDims conv_dims(std::size_t n, std::size_t h, std::size_t w, std::size_t ci,
                          std::size_t kh, std::size_t kw, std::size_t co, std::size_t stride) {
    ConvDims d{n, h, w, ci, kh, kw, co, 0, 0, stride, 0, 0};
    d.ho = conv_out_extent(h, stride);
    d.wo = conv_out_extent(w, stride);
    d.pt = pad_before(h, d.ho, kh, stride);
    d.pl = pad_before(w, d.wo, kw, stride);
    return d;
}

// y[n,oy,ox,co] += sum_{ky,kx,ci} x[n, oy*s+ky-pt, ox*s+kx-pl, ci] * w[ky,kx,ci,co]
template <typename T>
void conv_forward(const ConvDims& d, const T* x, const T* w, T* y) {
    for (std::size_t n = 0; n < d.n; ++n)
        for (std::size_t oy = 0; oy < d.ho; ++oy)
            for (std::size_t ox = 0; ox < d.wo; ++ox) {
                T* yrow = y + ((n * d.ho + oy) * d.wo + ox) * d.co;
                for (std::size_t ky = 0; ky < d.kh; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * d.stride + ky) - d.pt;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
                    for (std::size_t kx = 0; kx < d.kw; ++kx) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * d.stride + kx) - d.pl;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
                        const T* xrow = x + ((n * d.h + static_cast<std::size_t>(iy)) * d.w +
                                             static_cast<std::size_t>(ix)) * d.ci;
                        const T* wrow = w + (ky * d.kw + kx) * d.ci * d.co;
                        for (std::size_t ci = 0; ci < d.ci; ++ci) {
                            const T xv = xrow[ci];
                            if (xv == T(0)) continue;
                            const T* wc = wrow + ci * d.co;
                            for (std::size_t co = 0; co < d.co; ++co) yrow[co] += xv * wc[co];
                        }
                    }
                }
            }
}

// dx[n,iy,ix,ci] += sum_{oy,ox,ky,kx,co} dy[n,oy,ox,co] * w[ky,kx,ci,co]
template <typename T>
void conv_backward_input(const ConvDims& d, const T* dy, const T* w, T* dx) {
    for (std::size_t n = 0; n < d.n; ++n)
        for (std::size_t oy = 0; oy < d.ho; ++oy)
            for (std::size_t ox = 0; ox < d.wo; ++ox) {
                const T* grow = dy + ((n * d.ho + oy) * d.wo + ox) * d.co;
                for (std::size_t ky = 0; ky < d.kh; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * d.stride + ky) - d.pt;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
                    for (std::size_t kx = 0; kx < d.kw; ++kx) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * d.stride + kx) - d.pl;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
                        T* xrow = dx + ((n * d.h + static_cast<std::size_t>(iy)) * d.w +
                                        static_cast<std::size_t>(ix)) * d.ci;
                        const T* wrow = w + (ky * d.kw + kx) * d.ci * d.co;
                        for (std::size_t ci = 0; ci < d.ci; ++ci) {
                            const T* wc = wrow + ci * d.co;
                            T acc = T(0);
                            for (std::size_t co = 0; co < d.co; ++co) acc += grow[co] * wc[co];
                            xrow[ci] += acc;
                        }
                    }
                }
            }
}

// dw[ky,kx,ci,co] += sum_{n,oy,ox} x[n,iy,ix,ci] * dy[n,oy,ox,co]
template <typename T>
void conv_backward_weight(const ConvDims& d, const T* x, const T* dy, T* dw) {
    for (std::size_t n = 0; n < d.n; ++n)
        for (std::size_t oy = 0; oy < d.ho; ++oy)
            for (std::size_t ox = 0; ox < d.wo; ++ox) {
                const T* grow = dy + ((n * d.ho + oy) * d.wo + ox) * d.co;
                for (std::size_t ky = 0; ky < d.kh; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * d.stride + ky) - d.pt;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
                    for (std::size_t kx = 0; kx < d.kw; ++kx) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * d.stride + kx) - d.pl;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
                        const T* xrow = x + ((n * d.h + static_cast<std::size_t>(iy)) * d.w +
                                             static_cast<std::size_t>(ix)) * d.ci;
                        T* wrow = dw + (ky * d.kw + kx) * d.ci * d.co;
                        for (std::size_t ci = 0; ci < d.ci; ++ci) {
                            const T xv = xrow[ci];
                            if (xv == T(0)) continue;
                            T* wc = wrow + ci * d.co;
                            for (std::size_t co = 0; co < d.co; ++co) wc[co] += xv * grow[co];
                        }
                    }
                }
            }
}

template <typename T>
void check_conv_args(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride,
                     const char* who) {
    if (x.rank() != 4) throw ArgumentError(std::string(who) + ": input must be [N,H,W,C]");
    if (w.rank() != 4) throw ArgumentError(std::string(who) + ": kernel must be [kh,kw,Cin,Cout]");
    if (b.defined() && b.rank() != 1) throw ArgumentError(std::string(who) + ": bias must be rank 1");
    if (stride != 1 && stride != 2) throw ArgumentError(std::string(who) + ": stride must be 1 or 2");
}

}  // namespace detail

// Cross-correlation with zero "same" padding, NHWC layout, kernel
// [kh,kw,Cin,Cout]. H and W must divide by the stride.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride = 1) {
    detail::check_conv_args(x, w, b, stride, "conv2d");
    if (x.extent(3) != w.extent(2)) throw ArgumentError("conv2d: input channels do not match kernel");
    if (b.defined() && b.extent(0) != w.extent(3)) throw ArgumentError("conv2d: bias size mismatch");
    if (x.extent(1) % stride != 0 || x.extent(2) % stride != 0)
        throw ArgumentError("conv2d: spatial dims must divide by the stride");

    const auto d = detail::conv_dims(x.extent(0), x.extent(1), x.extent(2), x.extent(3),
                                     w.extent(0), w.extent(1), w.extent(3), stride);
    std::vector<T> out(d.n * d.ho * d.wo * d.co, T(0));
    if (b.defined()) {
        const auto& bv = b.data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = bv[i % d.co];
    }
    detail::conv_forward(d, x.data().data(), w.data().data(), out.data());

    auto px = x.node(), pw = w.node(), pb = b.node();
    std::vector<typename Tensor<T>::NodePtr> parents{px, pw};
    if (pb) parents.push_back(pb);
    return detail::make_op<T>(
        {d.n, d.ho, d.wo, d.co}, std::move(out), std::move(parents),
        [px, pw, pb, d](detail::Node<T>& self) {
            const T* g = self.flow.data();
            if (px->requires_grad)
                detail::conv_backward_input(d, g, pw->value.data(), px->grad_sink());
            if (pw->requires_grad)
                detail::conv_backward_weight(d, px->value.data(), g, pw->grad_sink());
            if (pb && pb->requires_grad) {
                T* s = pb->grad_sink();
                for (std::size_t i = 0; i < self.size(); ++i) s[i % d.co] += g[i];
            }
        });
}

// Exact adjoint of conv2d with the same kernel: maps [N,H,W,Cout] to
// [N,stride*H,stride*W,Cin] for kernel [kh,kw,Cin,Cout].
template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                           std::size_t stride = 2) {
    detail::check_conv_args(x, w, b, stride, "conv2d_transpose");
    if (x.extent(3) != w.extent(3))
        throw ArgumentError("conv2d_transpose: input channels must match kernel Cout");
    if (b.defined() && b.extent(0) != w.extent(2))
        throw ArgumentError("conv2d_transpose: bias size mismatch");

    // dims of the conv this op is the adjoint of
    const std::size_t H = x.extent(1) * stride, W = x.extent(2) * stride;
    const auto d = detail::conv_dims(x.extent(0), H, W, w.extent(2), w.extent(0), w.extent(1),
                                     w.extent(3), stride);
    std::vector<T> out(d.n * H * W * d.ci, T(0));
    if (b.defined()) {
        const auto& bv = b.data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = bv[i % d.ci];
    }
    detail::conv_backward_input(d, x.data().data(), w.data().data(), out.data());

    auto px = x.node(), pw = w.node(), pb = b.node();
    std::vector<typename Tensor<T>::NodePtr> parents{px, pw};
    if (pb) parents.push_back(pb);
    return detail::make_op<T>(
        {d.n, H, W, d.ci}, std::move(out), std::move(parents), [px, pw, pb, d](detail::Node<T>& self) {
            const T* g = self.flow.data();
            if (px->requires_grad) {
                // d/dx <g, C^T x> = C g
                detail::conv_forward(d, g, pw->value.data(), px->grad_sink());
            }
            if (pw->requires_grad) {
                // d/dw <g, C^T(w) x> = d/dw <C(w) g, x>
                detail::conv_backward_weight(d, g, px->value.data(), pw->grad_sink());
            }
            if (pb && pb->requires_grad) {
                T* s = pb->grad_sink();
                for (std::size_t i = 0; i < self.size(); ++i) s[i % d.ci] += g[i];
            }
        });
}

// Normalization over the trailing (channel) axis at every position.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5)) {
    if (x.rank() < 1) throw ArgumentError("layer_norm: input must have a channel axis");
    const std::size_t c = x.extent(x.rank() - 1);
    if (gamma.size() != c || beta.size() != c) throw ArgumentError("layer_norm: gamma/beta size mismatch");
    const std::size_t rows = x.size() / c;

    std::vector<T> out(x.size());
    auto xhat = std::make_shared<std::vector<T>>(x.size());
    auto inv_std = std::make_shared<std::vector<T>>(rows);
    const auto& xv = x.data();
    const auto& gv = gamma.data();
    const auto& bv = beta.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const T* row = xv.data() + r * c;
        T mean = T(0);
        for (std::size_t i = 0; i < c; ++i) mean += row[i];
        mean /= static_cast<T>(c);
        T var = T(0);
        for (std::size_t i = 0; i < c; ++i) {
            const T dlt = row[i] - mean;
            var += dlt * dlt;
        }
        var /= static_cast<T>(c);
        const T inv = T(1) / std::sqrt(var + eps);
        (*inv_std)[r] = inv;
        for (std::size_t i = 0; i < c; ++i) {
            const T xh = (row[i] - mean) * inv;
            (*xhat)[r * c + i] = xh;
            out[r * c + i] = gv[i] * xh + bv[i];
        }
    }

    auto px = x.node(), pg = gamma.node(), pb = beta.node();
    return detail::make_op<T>(
        x.shape(), std::move(out), {px, pg, pb},
        [px, pg, pb, xhat, inv_std, rows, c](detail::Node<T>& self) {
            const T* g = self.flow.data();
            const T* gv = pg->value.data();
            T* dgamma = pg->requires_grad ? pg->grad_sink() : nullptr;
            T* dbeta = pb->requires_grad ? pb->grad_sink() : nullptr;
            T* dx = px->requires_grad ? px->grad_sink() : nullptr;
            for (std::size_t r = 0; r < rows; ++r) {
                const T* grow = g + r * c;
                const T* xh = xhat->data() + r * c;
                if (dgamma)
                    for (std::size_t i = 0; i < c; ++i) dgamma[i] += grow[i] * xh[i];
                if (dbeta)
                    for (std::size_t i = 0; i < c; ++i) dbeta[i] += grow[i];
                if (dx) {
                    // dx = inv/C * (C*dxh - sum(dxh) - xh * sum(dxh*xh))
                    T s1 = T(0), s2 = T(0);
                    for (std::size_t i = 0; i < c; ++i) {
                        const T dxh = grow[i] * gv[i];
                        s1 += dxh;
                        s2 += dxh * xh[i];
                    }
                    const T inv = (*inv_std)[r];
                    T* drow = dx + r * c;
                    for (std::size_t i = 0; i < c; ++i) {
                        const T dxh = grow[i] * gv[i];
                        drow[i] += inv * (dxh - (s1 + xh[i] * s2) / static_cast<T>(c));
                    }
                }
            }
        });
}

// x: [..., C] times w: [C, D] plus b: [D]; leading axes are flattened.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    if (w.rank() != 2) throw ArgumentError("linear: weight must be [C, D]");
    const std::size_t c = w.extent(0), dd = w.extent(1);
    if (x.extent(x.rank() - 1) != c) throw ArgumentError("linear: trailing axis does not match weight");
    if (b.defined() && b.size() != dd) throw ArgumentError("linear: bias size mismatch");
    const std::size_t rows = x.size() / c;

    std::vector<T> out(rows * dd, T(0));
    const auto& xv = x.data();
    const auto& wv = w.data();
    for (std::size_t r = 0; r < rows; ++r) {
        T* yrow = out.data() + r * dd;
        if (b.defined()) {
            const auto& bv = b.data();
            for (std::size_t j = 0; j < dd; ++j) yrow[j] = bv[j];
        }
        const T* xrow = xv.data() + r * c;
        for (std::size_t i = 0; i < c; ++i) {
            const T xval = xrow[i];
            if (xval == T(0)) continue;
            const T* wrow = wv.data() + i * dd;
            for (std::size_t j = 0; j < dd; ++j) yrow[j] += xval * wrow[j];
        }
    }

    std::vector<std::size_t> out_shape(x.shape());
    out_shape.back() = dd;
    auto px = x.node(), pw = w.node(), pb = b.node();
    std::vector<typename Tensor<T>::NodePtr> parents{px, pw};
    if (pb) parents.push_back(pb);
    return detail::make_op<T>(
        std::move(out_shape), std::move(out), std::move(parents),
        [px, pw, pb, rows, c, dd](detail::Node<T>& self) {
            const T* g = self.flow.data();
            const T* xv = px->value.data();
            const T* wv = pw->value.data();
            if (px->requires_grad) {
                T* dx = px->grad_sink();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t i = 0; i < c; ++i) {
                        const T* grow = g + r * dd;
                        const T* wrow = wv + i * dd;
                        T acc = T(0);
                        for (std::size_t j = 0; j < dd; ++j) acc += grow[j] * wrow[j];
                        dx[r * c + i] += acc;
                    }
            }
            if (pw->requires_grad) {
                T* dw = pw->grad_sink();
                for (std::size_t r = 0; r < rows; ++r) {
                    const T* grow = g + r * dd;
                    const T* xrow = xv + r * c;
                    for (std::size_t i = 0; i < c; ++i) {
                        const T xval = xrow[i];
                        if (xval == T(0)) continue;
                        T* wrow = dw + i * dd;
                        for (std::size_t j = 0; j < dd; ++j) wrow[j] += xval * grow[j];
                    }
                }
            }
            if (pb && pb->requires_grad) {
                T* db = pb->grad_sink();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < dd; ++j) db[j] += g[r * dd + j];
            }
        });
}

// Scaled dot-product attention over M heads. q, k, v are [T, C] or [N, T, C];
// each head takes a contiguous channel slice of width C/M, scores are
// softmax(Q K^T / sqrt(C/M)) and head outputs are concatenated back.
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               std::size_t heads) {
    if (q.shape() != k.shape() || q.shape() != v.shape())
        throw ArgumentError("multi_head_attention: q/k/v shapes differ");
    if (q.rank() != 2 && q.rank() != 3)
        throw ArgumentError("multi_head_attention: expected [T,C] or [N,T,C]");
    const std::size_t n = q.rank() == 3 ? q.extent(0) : 1;
    const std::size_t t = q.extent(q.rank() - 2);
    const std::size_t c = q.extent(q.rank() - 1);
    if (heads == 0 || c % heads != 0)
        throw ConfigError("multi_head_attention: channels must divide evenly into heads");
    const std::size_t dh = c / heads;
    const T scl = T(1) / std::sqrt(static_cast<T>(dh));

    // softmax probabilities are cached for backward only when this call is
    // actually recorded; inference stays row-local in memory
    const bool recording = Tape<T>::active() != nullptr &&
                           (q.requires_grad() || k.requires_grad() || v.requires_grad());
    auto probs = std::make_shared<std::vector<T>>();
    if (recording) probs->assign(n * heads * t * t, T(0));
    std::vector<T> out(q.size(), T(0));
    const auto& qv = q.data();
    const auto& kv = k.data();
    const auto& vv = v.data();

    std::vector<T> row(t);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t base = b * t * c + h * dh;
            T* sp = recording ? probs->data() + ((b * heads + h) * t) * t : nullptr;
            for (std::size_t i = 0; i < t; ++i) {
                const T* qi = qv.data() + base + i * c;
                T mx = -std::numeric_limits<T>::infinity();
                for (std::size_t j = 0; j < t; ++j) {
                    const T* kj = kv.data() + base + j * c;
                    T acc = T(0);
                    for (std::size_t e = 0; e < dh; ++e) acc += qi[e] * kj[e];
                    row[j] = acc * scl;
                    mx = std::max(mx, row[j]);
                }
                T denom = T(0);
                for (std::size_t j = 0; j < t; ++j) {
                    row[j] = std::exp(row[j] - mx);
                    denom += row[j];
                }
                T* orow = out.data() + base + i * c;
                for (std::size_t j = 0; j < t; ++j) {
                    const T p = row[j] / denom;
                    if (sp) sp[i * t + j] = p;
                    const T* vj = vv.data() + base + j * c;
                    for (std::size_t e = 0; e < dh; ++e) orow[e] += p * vj[e];
                }
            }
        }

    auto pq = q.node(), pk = k.node(), pv = v.node();
    return detail::make_op<T>(
        q.shape(), std::move(out), {pq, pk, pv},
        [pq, pk, pv, probs, n, t, c, heads, dh, scl](detail::Node<T>& self) {
            const T* g = self.flow.data();
            const T* qv = pq->value.data();
            const T* kv = pk->value.data();
            const T* vv = pv->value.data();
            T* dq = pq->requires_grad ? pq->grad_sink() : nullptr;
            T* dk = pk->requires_grad ? pk->grad_sink() : nullptr;
            T* dv = pv->requires_grad ? pv->grad_sink() : nullptr;
            std::vector<T> ds(t);
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t h = 0; h < heads; ++h) {
                    const std::size_t base = b * t * c + h * dh;
                    const T* sp = probs->data() + ((b * heads + h) * t) * t;
                    for (std::size_t i = 0; i < t; ++i) {
                        const T* grow = g + base + i * c;
                        const T* srow = sp + i * t;
                        // dV += S^T G and dS = G V^T
                        T dot = T(0);
                        for (std::size_t j = 0; j < t; ++j) {
                            const T* vj = vv + base + j * c;
                            T acc = T(0);
                            for (std::size_t e = 0; e < dh; ++e) acc += grow[e] * vj[e];
                            ds[j] = acc;
                            dot += acc * srow[j];
                            if (dv) {
                                T* dvj = dv + base + j * c;
                                const T p = srow[j];
                                for (std::size_t e = 0; e < dh; ++e) dvj[e] += p * grow[e];
                            }
                        }
                        if (!dq && !dk) continue;
                        // softmax backward then the two matmul adjoints
                        const T* qi = qv + base + i * c;
                        for (std::size_t j = 0; j < t; ++j) {
                            const T dz = srow[j] * (ds[j] - dot) * scl;
                            if (dz == T(0)) continue;
                            const T* kj = kv + base + j * c;
                            if (dq) {
                                T* dqi = dq + base + i * c;
                                for (std::size_t e = 0; e < dh; ++e) dqi[e] += dz * kj[e];
                            }
                            if (dk) {
                                T* dkj = dk + base + j * c;
                                for (std::size_t e = 0; e < dh; ++e) dkj[e] += dz * qi[e];
                            }
                        }
                    }
                }
        });
}

// Two dense layers with a GELU between them.
template <typename T>
Tensor<T> ffn(const Tensor<T>& x, const Tensor<T>& w1, const Tensor<T>& b1, const Tensor<T>& w2,
              const Tensor<T>& b2) {
    return linear(gelu(linear(x, w1, b1)), w2, b2);
}

}  // namespace vet::nn

#endif
