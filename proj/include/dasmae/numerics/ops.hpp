#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dasmae/numerics/autograd.hpp"

// Differentiable primitives. Every reduction runs in a fixed sequential
// row-major order so results are bitwise reproducible.
namespace dasmae::num {

namespace kernel {

// c[m,n] (+)= a[m,k] * b[k,n]; four rows of c share each streamed row of b.
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, T{0});
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        T* c0 = c + i * n;
        T* c1 = c0 + n;
        T* c2 = c1 + n;
        T* c3 = c2 + n;
        const T* a0 = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const T s0 = a0[p], s1 = a0[k + p], s2 = a0[2 * k + p], s3 = a0[3 * k + p];
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                const T bv = brow[j];
                c0[j] += s0 * bv;
                c1[j] += s1 * bv;
                c2[j] += s2 * bv;
                c3[j] += s3 * bv;
            }
        }
    }
    for (; i < m; ++i) {
        T* crow = c + i * n;
        const T* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const T s = arow[p];
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += s * brow[j];
        }
    }
}

// c[m,n] (+)= a[m,k] * b[n,k]^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    std::vector<T> bt(k * n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
    }
    gemm_nn(a, bt.data(), c, m, k, n, accumulate);
}

// c[k,n] += a[m,k]^T * g[m,n]
template <typename T>
void gemm_tn_acc(const T* a, const T* g, T* c, std::size_t m, std::size_t k, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        const T* a0 = a + i * k;
        const T* g0 = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T s0 = a0[p], s1 = a0[k + p], s2 = a0[2 * k + p], s3 = a0[3 * k + p];
            T* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += s0 * g0[j] + s1 * g0[n + j] + s2 * g0[2 * n + j] + s3 * g0[3 * n + j];
            }
        }
    }
    for (; i < m; ++i) {
        const T* arow = a + i * k;
        const T* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T s = arow[p];
            T* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += s * grow[j];
        }
    }
}

}  // namespace kernel

namespace detail {

template <typename T>
void require_same_shape(const char* op, const Var<T>& a, const Var<T>& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
    }
}

template <typename T>
NdArray<T>* grad_of(const std::shared_ptr<Node<T>>& n) {
    return n->requires_grad ? &n->grad_buffer() : nullptr;
}

}  // namespace detail

template <typename T>
Var<T> constant(NdArray<T> value) {
    return Var<T>(std::move(value), false);
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
    if (a.value().rank() != 2 || b.value().rank() != 2 || a.shape()[1] != b.shape()[0]) {
        throw DimensionError("matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                             shape_string(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    NdArray<T> out(Shape{m, n});
    kernel::gemm_nn(a.value().data(), b.value().data(), out.data(), m, k, n, false);
    auto an = a.node(), bn = b.node();
    return make_result<T>(std::move(out), {a, b}, [an, bn, m, k, n](Node<T>& self) {
        if (auto* ga = detail::grad_of(an)) kernel::gemm_nt(self.grad.data(), bn->value.data(), ga->data(), m, n, k, true);
        if (auto* gb = detail::grad_of(bn)) kernel::gemm_tn_acc(an->value.data(), self.grad.data(), gb->data(), m, k, n);
    });
}

/// a: [B,M,K]; b: [B,K,N], or [B,N,K] when transpose_b.
template <typename T>
Var<T> batched_matmul(const Var<T>& a, const Var<T>& b, bool transpose_b = false) {
    const auto& as = a.shape();
    const auto& bs = b.shape();
    if (as.size() != 3 || bs.size() != 3 || as[0] != bs[0] || as[2] != (transpose_b ? bs[2] : bs[1])) {
        throw DimensionError("batched_matmul: incompatible shapes " + shape_string(as) + " and " + shape_string(bs));
    }
    const std::size_t batch = as[0], m = as[1], k = as[2], n = transpose_b ? bs[1] : bs[2];
    NdArray<T> out(Shape{batch, m, n});
    for (std::size_t i = 0; i < batch; ++i) {
        const T* ap = a.value().data() + i * m * k;
        const T* bp = b.value().data() + i * k * n;
        T* cp = out.data() + i * m * n;
        if (transpose_b) {
            kernel::gemm_nt(ap, bp, cp, m, k, n, false);
        } else {
            kernel::gemm_nn(ap, bp, cp, m, k, n, false);
        }
    }
    auto an = a.node(), bn = b.node();
    return make_result<T>(std::move(out), {a, b}, [an, bn, batch, m, k, n, transpose_b](Node<T>& self) {
        auto* ga = detail::grad_of(an);
        auto* gb = detail::grad_of(bn);
        for (std::size_t i = 0; i < batch; ++i) {
            const T* g = self.grad.data() + i * m * n;
            const T* ap = an->value.data() + i * m * k;
            const T* bp = bn->value.data() + i * k * n;
            if (transpose_b) {
                if (ga) kernel::gemm_nn(g, bp, ga->data() + i * m * k, m, n, k, true);
                if (gb) kernel::gemm_tn_acc(g, ap, gb->data() + i * k * n, m, n, k);
            } else {
                if (ga) kernel::gemm_nt(g, bp, ga->data() + i * m * k, m, n, k, true);
                if (gb) kernel::gemm_tn_acc(ap, g, gb->data() + i * k * n, m, k, n);
            }
        }
    });
}

/// x: [..., K] times weight [K, N] plus bias [N].
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
    const auto& ws = weight.shape();
    if (ws.size() != 2 || x.value().rank() == 0 || x.shape().back() != ws[0] || bias.shape() != Shape{ws[1]}) {
        throw DimensionError("linear: input " + shape_string(x.shape()) + " weight " + shape_string(ws) + " bias " +
                             shape_string(bias.shape()));
    }
    const std::size_t k = ws[0], n = ws[1], rows = x.value().size() / k;
    Shape out_shape = x.shape();
    out_shape.back() = n;
    NdArray<T> out(out_shape);
    T* o = out.data();
    const T* bv = bias.value().data();
    for (std::size_t r = 0; r < rows; ++r) std::copy(bv, bv + n, o + r * n);
    kernel::gemm_nn(x.value().data(), weight.value().data(), o, rows, k, n, true);
    auto xn = x.node(), wn = weight.node(), bn = bias.node();
    return make_result<T>(std::move(out), {x, weight, bias}, [xn, wn, bn, rows, k, n](Node<T>& self) {
        const T* g = self.grad.data();
        if (auto* gx = detail::grad_of(xn)) kernel::gemm_nt(g, wn->value.data(), gx->data(), rows, n, k, true);
        if (auto* gw = detail::grad_of(wn)) kernel::gemm_tn_acc(xn->value.data(), g, gw->data(), rows, k, n);
        if (auto* gb = detail::grad_of(bn)) {
            T* d = gb->data();
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t j = 0; j < n; ++j) d[j] += g[r * n + j];
            }
        }
    });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    detail::require_same_shape("add", a, b);
    NdArray<T> out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    auto an = a.node(), bn = b.node();
    return make_result<T>(std::move(out), {a, b}, [an, bn](Node<T>& self) {
        for (auto* g : {detail::grad_of(an), detail::grad_of(bn)}) {
            if (!g) continue;
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
        }
    });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    detail::require_same_shape("sub", a, b);
    NdArray<T> out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    auto an = a.node(), bn = b.node();
    return make_result<T>(std::move(out), {a, b}, [an, bn](Node<T>& self) {
        if (auto* g = detail::grad_of(an)) {
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
        }
        if (auto* g = detail::grad_of(bn)) {
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
        }
    });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    detail::require_same_shape("mul", a, b);
    NdArray<T> out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    auto an = a.node(), bn = b.node();
    return make_result<T>(std::move(out), {a, b}, [an, bn](Node<T>& self) {
        if (auto* g = detail::grad_of(an)) {
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bn->value[i];
        }
        if (auto* g = detail::grad_of(bn)) {
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * an->value[i];
        }
    });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
    NdArray<T> out = a.value();
    for (auto& v : out.storage()) v *= s;
    auto an = a.node();
    return make_result<T>(std::move(out), {a}, [an, s](Node<T>& self) {
        if (auto* g = detail::grad_of(an)) {
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * s;
        }
    });
}

/// tanh approximation of the Gaussian error linear unit.
template <typename T>
Var<T> gelu(const Var<T>& x) {
    constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double kA = 0.044715;
    NdArray<T> out(x.shape());
    NdArray<T> th(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const T v = x.value()[i];
        const T t = std::tanh(static_cast<T>(kC) * (v + static_cast<T>(kA) * v * v * v));
        th[i] = t;
        out[i] = T(0.5) * v * (T(1) + t);
    }
    auto xn = x.node();
    return make_result<T>(std::move(out), {x}, [xn, th = std::move(th)](Node<T>& self) {
        auto* g = detail::grad_of(xn);
        if (!g) return;
        for (std::size_t i = 0; i < g->size(); ++i) {
            const T v = xn->value[i];
            const T t = th[i];
            const T du = static_cast<T>(kC) * (T(1) + T(3) * static_cast<T>(kA) * v * v);
            (*g)[i] += self.grad[i] * (T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * du);
        }
    });
}

/// Normalizes over the last axis, then applies gain and bias of that extent.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps = T(1e-5)) {
    if (x.value().rank() == 0) throw DimensionError("layer_norm: input has no last axis");
    const std::size_t d = x.shape().back();
    if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
        throw DimensionError("layer_norm: gain " + shape_string(gain.shape()) + " / bias " +
                             shape_string(bias.shape()) + " do not match last axis of " + shape_string(x.shape()));
    }
    const std::size_t rows = x.value().size() / d;
    NdArray<T> out(x.shape());
    NdArray<T> xhat(x.shape());
    std::vector<T> rstd(rows);
    const T* g = gain.value().data();
    const T* b = bias.value().data();
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = x.value().data() + r * d;
        T mean = 0;
        for (std::size_t j = 0; j < d; ++j) mean += xr[j];
        mean /= static_cast<T>(d);
        T var = 0;
        for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= static_cast<T>(d);
        const T rs = T(1) / std::sqrt(var + eps);
        rstd[r] = rs;
        T* hr = xhat.data() + r * d;
        T* orow = out.data() + r * d;
        for (std::size_t j = 0; j < d; ++j) {
            hr[j] = (xr[j] - mean) * rs;
            orow[j] = hr[j] * g[j] + b[j];
        }
    }
    auto xn = x.node(), gn = gain.node(), bn = bias.node();
    return make_result<T>(
        std::move(out), {x, gain, bias},
        [xn, gn, bn, d, rows, xhat = std::move(xhat), rstd = std::move(rstd)](Node<T>& self) {
            auto* gx = detail::grad_of(xn);
            auto* gg = detail::grad_of(gn);
            auto* gb = detail::grad_of(bn);
            const T* gain_v = gn->value.data();
            std::vector<T> dxhat(d);
            for (std::size_t r = 0; r < rows; ++r) {
                const T* dy = self.grad.data() + r * d;
                const T* hr = xhat.data() + r * d;
                if (gg) {
                    for (std::size_t j = 0; j < d; ++j) (*gg)[j] += dy[j] * hr[j];
                }
                if (gb) {
                    for (std::size_t j = 0; j < d; ++j) (*gb)[j] += dy[j];
                }
                if (gx) {
                    T mean_dh = 0, mean_dh_h = 0;
                    for (std::size_t j = 0; j < d; ++j) {
                        dxhat[j] = dy[j] * gain_v[j];
                        mean_dh += dxhat[j];
                        mean_dh_h += dxhat[j] * hr[j];
                    }
                    mean_dh /= static_cast<T>(d);
                    mean_dh_h /= static_cast<T>(d);
                    T* dx = gx->data() + r * d;
                    for (std::size_t j = 0; j < d; ++j) dx[j] += rstd[r] * (dxhat[j] - mean_dh - hr[j] * mean_dh_h);
                }
            }
        });
}

/// Max-subtracted softmax along `axis`.
template <typename T>
Var<T> softmax(const Var<T>& x, std::size_t axis) {
    const auto& s = x.shape();
    if (axis >= s.size()) {
        throw IndexError("softmax: axis " + std::to_string(axis) + " out of range for shape " + shape_string(s));
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t n = s[axis];
    NdArray<T> out(s);
    const T* xv = x.value().data();
    T* ov = out.data();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * n * inner + in;
            T mx = xv[base];
            for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xv[base + j * inner]);
            T total = 0;
            for (std::size_t j = 0; j < n; ++j) {
                const T e = std::exp(xv[base + j * inner] - mx);
                ov[base + j * inner] = e;
                total += e;
            }
            for (std::size_t j = 0; j < n; ++j) ov[base + j * inner] /= total;
        }
    }
    auto xn = x.node();
    return make_result<T>(out, {x}, [xn, y = out, outer, inner, n](Node<T>& self) {
        auto* g = detail::grad_of(xn);
        if (!g) return;
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t in = 0; in < inner; ++in) {
                const std::size_t base = o * n * inner + in;
                T dot = 0;
                for (std::size_t j = 0; j < n; ++j) dot += self.grad[base + j * inner] * y[base + j * inner];
                for (std::size_t j = 0; j < n; ++j) {
                    const std::size_t idx = base + j * inner;
                    (*g)[idx] += y[idx] * (self.grad[idx] - dot);
                }
            }
        }
    });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
    T total = 0;
    for (T v : x.value().values()) total += v;
    auto xn = x.node();
    return make_result<T>(NdArray<T>::scalar(total), {x}, [xn](Node<T>& self) {
        if (auto* g = detail::grad_of(xn)) {
            const T d = self.grad[0];
            for (auto& v : g->storage()) v += d;
        }
    });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
    return scale(sum(x), T(1) / static_cast<T>(x.value().size()));
}

/// Mean of squared elementwise differences.
template <typename T>
Var<T> mse(const Var<T>& pred, const Var<T>& target) {
    detail::require_same_shape("mse", pred, target);
    const std::size_t n = pred.value().size();
    T total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const T diff = pred.value()[i] - target.value()[i];
        total += diff * diff;
    }
    auto pn = pred.node(), tn = target.node();
    return make_result<T>(NdArray<T>::scalar(total / static_cast<T>(n)), {pred, target}, [pn, tn, n](Node<T>& self) {
        const T c = T(2) * self.grad[0] / static_cast<T>(n);
        auto* gp = detail::grad_of(pn);
        auto* gt = detail::grad_of(tn);
        for (std::size_t i = 0; i < n; ++i) {
            const T diff = pn->value[i] - tn->value[i];
            if (gp) (*gp)[i] += c * diff;
            if (gt) (*gt)[i] -= c * diff;
        }
    });
}

/// Mean cross-entropy of logits [B, M] against class indices, log-sum-exp stabilized.
template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const int> labels) {
    if (logits.value().rank() != 2 || logits.shape()[0] != labels.size()) {
        throw DimensionError("cross_entropy: logits " + shape_string(logits.shape()) + " vs " +
                             std::to_string(labels.size()) + " labels");
    }
    const std::size_t batch = logits.shape()[0], classes = logits.shape()[1];
    NdArray<T> prob(logits.shape());
    T total = 0;
    for (std::size_t b = 0; b < batch; ++b) {
        if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= classes) {
            throw IndexError("cross_entropy: label " + std::to_string(labels[b]) + " outside [0, " +
                             std::to_string(classes) + ")");
        }
        const T* z = logits.value().data() + b * classes;
        T mx = *std::max_element(z, z + classes);
        T se = 0;
        for (std::size_t j = 0; j < classes; ++j) se += std::exp(z[j] - mx);
        const T lse = mx + std::log(se);
        for (std::size_t j = 0; j < classes; ++j) prob.at(b, j) = std::exp(z[j] - lse);
        total += lse - z[labels[b]];
    }
    auto ln = logits.node();
    std::vector<int> lab(labels.begin(), labels.end());
    return make_result<T>(NdArray<T>::scalar(total / static_cast<T>(batch)), {logits},
                          [ln, prob = std::move(prob), lab = std::move(lab), batch, classes](Node<T>& self) {
                              auto* g = detail::grad_of(ln);
                              if (!g) return;
                              const T c = self.grad[0] / static_cast<T>(batch);
                              for (std::size_t b = 0; b < batch; ++b) {
                                  for (std::size_t j = 0; j < classes; ++j) {
                                      const T onehot = static_cast<int>(j) == lab[b] ? T(1) : T(0);
                                      g->at(b, j) += c * (prob.at(b, j) - onehot);
                                  }
                              }
                          });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
    NdArray<T> out = x.value();
    out.reshape(std::move(shape));
    auto xn = x.node();
    return make_result<T>(std::move(out), {x}, [xn](Node<T>& self) {
        if (auto* g = detail::grad_of(xn)) {
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
        }
    });
}

/// Axis permutation: output axis i is input axis perm[i].
template <typename T>
Var<T> permute(const Var<T>& x, const std::vector<std::size_t>& perm) {
    const auto& s = x.shape();
    const std::size_t r = s.size();
    std::vector<bool> used(r, false);
    if (perm.size() != r) throw DimensionError("permute: permutation rank differs from " + shape_string(s));
    for (std::size_t p : perm) {
        if (p >= r || used[p]) throw IndexError("permute: invalid permutation for " + shape_string(s));
        used[p] = true;
    }
    std::vector<std::size_t> in_strides(r, 1);
    for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * s[i];
    Shape out_shape(r);
    std::vector<std::size_t> src_strides(r);
    for (std::size_t i = 0; i < r; ++i) {
        out_shape[i] = s[perm[i]];
        src_strides[i] = in_strides[perm[i]];
    }
    // map[out_index] = in_index
    std::vector<std::size_t> map(x.value().size());
    std::vector<std::size_t> counter(r, 0);
    std::size_t src = 0;
    for (std::size_t o = 0; o < map.size(); ++o) {
        map[o] = src;
        for (std::size_t ax = r; ax-- > 0;) {
            ++counter[ax];
            src += src_strides[ax];
            if (counter[ax] < out_shape[ax]) break;
            src -= src_strides[ax] * out_shape[ax];
            counter[ax] = 0;
        }
    }
    NdArray<T> out(out_shape);
    for (std::size_t o = 0; o < map.size(); ++o) out[o] = x.value()[map[o]];
    auto xn = x.node();
    return make_result<T>(std::move(out), {x}, [xn, map = std::move(map)](Node<T>& self) {
        if (auto* g = detail::grad_of(xn)) {
            for (std::size_t o = 0; o < map.size(); ++o) (*g)[map[o]] += self.grad[o];
        }
    });
}

/// Selects slices along the first axis; repeated indices accumulate gradient.
template <typename T>
Var<T> gather_rows(const Var<T>& x, std::span<const std::size_t> index) {
    if (x.value().rank() == 0) throw DimensionError("gather_rows: scalar input");
    if (index.empty()) throw ContractError("gather_rows: empty index");
    const std::size_t rows = x.shape()[0];
    const std::size_t width = x.value().size() / rows;
    Shape out_shape = x.shape();
    out_shape[0] = index.size();
    NdArray<T> out(out_shape);
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= rows) {
            throw IndexError("gather_rows: row " + std::to_string(index[i]) + " out of range for " +
                             shape_string(x.shape()));
        }
        const T* src = x.value().data() + index[i] * width;
        std::copy(src, src + width, out.data() + i * width);
    }
    auto xn = x.node();
    std::vector<std::size_t> idx(index.begin(), index.end());
    return make_result<T>(std::move(out), {x}, [xn, idx = std::move(idx), width](Node<T>& self) {
        auto* g = detail::grad_of(xn);
        if (!g) return;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            T* dst = g->data() + idx[i] * width;
            const T* src = self.grad.data() + i * width;
            for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
        }
    });
}

/// Stacks b under a along the first axis.
template <typename T>
Var<T> concat_rows(const Var<T>& a, const Var<T>& b) {
    const auto& as = a.shape();
    const auto& bs = b.shape();
    if (as.empty() || bs.empty() || !std::equal(as.begin() + 1, as.end(), bs.begin() + 1, bs.end())) {
        throw DimensionError("concat_rows: incompatible shapes " + shape_string(as) + " and " + shape_string(bs));
    }
    Shape out_shape = as;
    out_shape[0] += bs[0];
    NdArray<T> out(out_shape);
    std::copy(a.value().data(), a.value().data() + a.value().size(), out.data());
    std::copy(b.value().data(), b.value().data() + b.value().size(), out.data() + a.value().size());
    auto an = a.node(), bn = b.node();
    const std::size_t split = a.value().size();
    return make_result<T>(std::move(out), {a, b}, [an, bn, split](Node<T>& self) {
        if (auto* g = detail::grad_of(an)) {
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
        }
        if (auto* g = detail::grad_of(bn)) {
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[split + i];
        }
    });
}

/// Arithmetic mean along one axis; the axis is removed from the shape.
template <typename T>
Var<T> mean_axis(const Var<T>& x, std::size_t axis) {
    const auto& s = x.shape();
    if (axis >= s.size()) {
        throw IndexError("mean_axis: axis " + std::to_string(axis) + " out of range for shape " + shape_string(s));
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t n = s[axis];
    Shape out_shape;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i != axis) out_shape.push_back(s[i]);
    }
    NdArray<T> out(out_shape);
    const T* xv = x.value().data();
    for (std::size_t o = 0; o < outer; ++o) {
        T* dst = out.data() + o * inner;
        for (std::size_t j = 0; j < n; ++j) {
            const T* src = xv + (o * n + j) * inner;
            for (std::size_t in = 0; in < inner; ++in) dst[in] += src[in];
        }
        for (std::size_t in = 0; in < inner; ++in) dst[in] /= static_cast<T>(n);
    }
    auto xn = x.node();
    return make_result<T>(std::move(out), {x}, [xn, outer, inner, n](Node<T>& self) {
        auto* g = detail::grad_of(xn);
        if (!g) return;
        const T c = T(1) / static_cast<T>(n);
        for (std::size_t o = 0; o < outer; ++o) {
            const T* src = self.grad.data() + o * inner;
            for (std::size_t j = 0; j < n; ++j) {
                T* dst = g->data() + (o * n + j) * inner;
                for (std::size_t in = 0; in < inner; ++in) dst[in] += src[in] * c;
            }
        }
    });
}

}  // namespace dasmae::num
