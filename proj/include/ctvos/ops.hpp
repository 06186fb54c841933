// Differentiable primitives over TensorNode: conv2d, matmul, softmax,
// elementwise math, reductions, resizing, concatenation, gather. The set is
// deliberately small; everything higher-level composes these.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ctvos/tensor.hpp"

namespace ctvos {

namespace detail {

// C[m,n] += A[m,k] * B[k,n]
template <typename T>
void gemm_nn(int64_t m, int64_t n, int64_t k, const T* a, const T* b, T* c) {
    parallel_for(m, [=](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            T* crow = c + i * n;
            const T* arow = a + i * k;
            for (int64_t p = 0; p < k; ++p) {
                T av = arow[p];
                if (av == T(0)) continue;
                const T* brow = b + p * n;
                for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
}

// C[m,n] += A[m,k] * B[n,k]^T
template <typename T>
void gemm_nt(int64_t m, int64_t n, int64_t k, const T* a, const T* b, T* c) {
    parallel_for(m, [=](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            const T* arow = a + i * k;
            T* crow = c + i * n;
            for (int64_t j = 0; j < n; ++j) {
                const T* brow = b + j * k;
                T acc = T(0);
                for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
                crow[j] += acc;
            }
        }
    });
}

// C[m,n] += A[k,m]^T * B[k,n]
template <typename T>
void gemm_tn(int64_t m, int64_t n, int64_t k, const T* a, const T* b, T* c) {
    for (int64_t p = 0; p < k; ++p) {
        const T* arow = a + p * m;
        const T* brow = b + p * n;
        for (int64_t i = 0; i < m; ++i) {
            T av = arow[i];
            if (av == T(0)) continue;
            T* crow = c + i * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

struct ConvGeom {
    int n, c, h, w;       // input
    int o, kh, kw;        // kernel
    int stride, pad;
    int oh, ow;
    int64_t cols_rows() const { return int64_t(c) * kh * kw; }
    int64_t cols_cols() const { return int64_t(oh) * ow; }
};

// One sample: image [C,H,W] -> cols [C*kh*kw, OH*OW], zero padding.
template <typename T>
void im2col(const ConvGeom& g, const T* img, T* cols) {
    const int64_t plane = int64_t(g.h) * g.w;
    const int64_t ocols = g.cols_cols();
    int64_t row = 0;
    for (int ch = 0; ch < g.c; ++ch) {
        const T* src = img + ch * plane;
        for (int ky = 0; ky < g.kh; ++ky) {
            for (int kx = 0; kx < g.kw; ++kx, ++row) {
                T* dst = cols + row * ocols;
                for (int oy = 0; oy < g.oh; ++oy) {
                    int iy = oy * g.stride - g.pad + ky;
                    if (iy < 0 || iy >= g.h) {
                        std::fill(dst + int64_t(oy) * g.ow, dst + int64_t(oy + 1) * g.ow, T(0));
                        continue;
                    }
                    const T* srow = src + int64_t(iy) * g.w;
                    T* drow = dst + int64_t(oy) * g.ow;
                    for (int ox = 0; ox < g.ow; ++ox) {
                        int ix = ox * g.stride - g.pad + kx;
                        drow[ox] = (ix >= 0 && ix < g.w) ? srow[ix] : T(0);
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-add cols back into the image.
template <typename T>
void col2im_add(const ConvGeom& g, const T* cols, T* img) {
    const int64_t plane = int64_t(g.h) * g.w;
    const int64_t ocols = g.cols_cols();
    int64_t row = 0;
    for (int ch = 0; ch < g.c; ++ch) {
        T* dst = img + ch * plane;
        for (int ky = 0; ky < g.kh; ++ky) {
            for (int kx = 0; kx < g.kw; ++kx, ++row) {
                const T* src = cols + row * ocols;
                for (int oy = 0; oy < g.oh; ++oy) {
                    int iy = oy * g.stride - g.pad + ky;
                    if (iy < 0 || iy >= g.h) continue;
                    T* drow = dst + int64_t(iy) * g.w;
                    const T* srow = src + int64_t(oy) * g.ow;
                    for (int ox = 0; ox < g.ow; ++ox) {
                        int ix = ox * g.stride - g.pad + kx;
                        if (ix >= 0 && ix < g.w) drow[ix] += srow[ox];
                    }
                }
            }
        }
    }
}

// Half-pixel-center bilinear weights for one output coordinate.
struct LerpTap {
    int i0, i1;
    double w0, w1;
};

inline LerpTap lerp_tap(int out_i, int out_n, int in_n) {
    double scale = double(in_n) / double(out_n);
    double src = (out_i + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    if (src > in_n - 1) src = in_n - 1;
    int i0 = int(std::floor(src));
    int i1 = std::min(i0 + 1, in_n - 1);
    double w1 = src - i0;
    return {i0, i1, 1.0 - w1, w1};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename T>
void check_same_shape(const TensorPtr<T>& a, const TensorPtr<T>& b, const char* op) {
    check(a->shape == b->shape, op, ": shape mismatch ", shape_str(a->shape), " vs ",
          shape_str(b->shape));
}

template <typename T>
TensorPtr<T> add(Tape<T>& tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
    check_same_shape(a, b, "add");
    auto out = make_op_output(tape, a->shape, a->requires_grad || b->requires_grad);
    for (int64_t i = 0; i < a->numel(); ++i) out->value[i] = a->value[i] + b->value[i];
    check_finite(*out, "add");
    if (out->requires_grad)
        tape.record([a, b, out] {
            if (a->requires_grad)
                for (int64_t i = 0; i < a->numel(); ++i) a->grad[i] += out->grad[i];
            if (b->requires_grad)
                for (int64_t i = 0; i < b->numel(); ++i) b->grad[i] += out->grad[i];
        });
    return out;
}

template <typename T>
TensorPtr<T> sub(Tape<T>& tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
    check_same_shape(a, b, "sub");
    auto out = make_op_output(tape, a->shape, a->requires_grad || b->requires_grad);
    for (int64_t i = 0; i < a->numel(); ++i) out->value[i] = a->value[i] - b->value[i];
    check_finite(*out, "sub");
    if (out->requires_grad)
        tape.record([a, b, out] {
            if (a->requires_grad)
                for (int64_t i = 0; i < a->numel(); ++i) a->grad[i] += out->grad[i];
            if (b->requires_grad)
                for (int64_t i = 0; i < b->numel(); ++i) b->grad[i] -= out->grad[i];
        });
    return out;
}

template <typename T>
TensorPtr<T> mul(Tape<T>& tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
    check_same_shape(a, b, "mul");
    auto out = make_op_output(tape, a->shape, a->requires_grad || b->requires_grad);
    for (int64_t i = 0; i < a->numel(); ++i) out->value[i] = a->value[i] * b->value[i];
    check_finite(*out, "mul");
    if (out->requires_grad)
        tape.record([a, b, out] {
            if (a->requires_grad)
                for (int64_t i = 0; i < a->numel(); ++i) a->grad[i] += out->grad[i] * b->value[i];
            if (b->requires_grad)
                for (int64_t i = 0; i < b->numel(); ++i) b->grad[i] += out->grad[i] * a->value[i];
        });
    return out;
}

// scale * x + shift, elementwise with scalar coefficients.
template <typename T>
TensorPtr<T> affine(Tape<T>& tape, const TensorPtr<T>& x, T scale, T shift) {
    auto out = make_op_output(tape, x->shape, x->requires_grad);
    for (int64_t i = 0; i < x->numel(); ++i) out->value[i] = scale * x->value[i] + shift;
    check_finite(*out, "affine");
    if (out->requires_grad)
        tape.record([x, out, scale] {
            for (int64_t i = 0; i < x->numel(); ++i) x->grad[i] += scale * out->grad[i];
        });
    return out;
}

// x - s, with s a 1-element tensor broadcast over x.
template <typename T>
TensorPtr<T> sub_scalar(Tape<T>& tape, const TensorPtr<T>& x, const TensorPtr<T>& s) {
    check(s->numel() == 1, "sub_scalar: scalar operand has shape ", shape_str(s->shape));
    auto out = make_op_output(tape, x->shape, x->requires_grad || s->requires_grad);
    T sv = s->value[0];
    for (int64_t i = 0; i < x->numel(); ++i) out->value[i] = x->value[i] - sv;
    check_finite(*out, "sub_scalar");
    if (out->requires_grad)
        tape.record([x, s, out] {
            if (x->requires_grad)
                for (int64_t i = 0; i < x->numel(); ++i) x->grad[i] += out->grad[i];
            if (s->requires_grad) {
                T acc = T(0);
                for (int64_t i = 0; i < out->numel(); ++i) acc += out->grad[i];
                s->grad[0] -= acc;
            }
        });
    return out;
}

template <typename T>
TensorPtr<T> relu(Tape<T>& tape, const TensorPtr<T>& x) {
    auto out = make_op_output(tape, x->shape, x->requires_grad);
    for (int64_t i = 0; i < x->numel(); ++i) out->value[i] = x->value[i] > T(0) ? x->value[i] : T(0);
    if (out->requires_grad)
        tape.record([x, out] {
            for (int64_t i = 0; i < x->numel(); ++i)
                if (x->value[i] > T(0)) x->grad[i] += out->grad[i];
        });
    return out;
}

template <typename T>
TensorPtr<T> sigmoid(Tape<T>& tape, const TensorPtr<T>& x) {
    auto out = make_op_output(tape, x->shape, x->requires_grad);
    for (int64_t i = 0; i < x->numel(); ++i) out->value[i] = T(1) / (T(1) + std::exp(-x->value[i]));
    check_finite(*out, "sigmoid");
    if (out->requires_grad)
        tape.record([x, out] {
            for (int64_t i = 0; i < x->numel(); ++i) {
                T y = out->value[i];
                x->grad[i] += out->grad[i] * y * (T(1) - y);
            }
        });
    return out;
}

template <typename T>
TensorPtr<T> tanh_op(Tape<T>& tape, const TensorPtr<T>& x) {
    auto out = make_op_output(tape, x->shape, x->requires_grad);
    for (int64_t i = 0; i < x->numel(); ++i) out->value[i] = std::tanh(x->value[i]);
    check_finite(*out, "tanh");
    if (out->requires_grad)
        tape.record([x, out] {
            for (int64_t i = 0; i < x->numel(); ++i) {
                T y = out->value[i];
                x->grad[i] += out->grad[i] * (T(1) - y * y);
            }
        });
    return out;
}

template <typename T>
TensorPtr<T> log_op(Tape<T>& tape, const TensorPtr<T>& x) {
    auto out = make_op_output(tape, x->shape, x->requires_grad);
    for (int64_t i = 0; i < x->numel(); ++i) {
        check(x->value[i] > T(0), "log: non-positive input ", x->value[i]);
        out->value[i] = std::log(x->value[i]);
    }
    check_finite(*out, "log");
    if (out->requires_grad)
        tape.record([x, out] {
            for (int64_t i = 0; i < x->numel(); ++i) x->grad[i] += out->grad[i] / x->value[i];
        });
    return out;
}

template <typename T>
TensorPtr<T> abs_op(Tape<T>& tape, const TensorPtr<T>& x) {
    auto out = make_op_output(tape, x->shape, x->requires_grad);
    for (int64_t i = 0; i < x->numel(); ++i) out->value[i] = std::abs(x->value[i]);
    if (out->requires_grad)
        tape.record([x, out] {
            for (int64_t i = 0; i < x->numel(); ++i) {
                if (x->value[i] > T(0)) x->grad[i] += out->grad[i];
                else if (x->value[i] < T(0)) x->grad[i] -= out->grad[i];
            }
        });
    return out;
}

// Gradient passes only where the input is strictly inside (lo, hi).
template <typename T>
TensorPtr<T> clamp_op(Tape<T>& tape, const TensorPtr<T>& x, T lo, T hi) {
    check(lo < hi, "clamp: lo must be < hi");
    auto out = make_op_output(tape, x->shape, x->requires_grad);
    for (int64_t i = 0; i < x->numel(); ++i) out->value[i] = std::min(hi, std::max(lo, x->value[i]));
    if (out->requires_grad)
        tape.record([x, out, lo, hi] {
            for (int64_t i = 0; i < x->numel(); ++i)
                if (x->value[i] > lo && x->value[i] < hi) x->grad[i] += out->grad[i];
        });
    return out;
}

// ---------------------------------------------------------------------------
// shape manipulation
// ---------------------------------------------------------------------------

template <typename T>
TensorPtr<T> reshape(Tape<T>& tape, const TensorPtr<T>& x, Shape shape) {
    check(shape_numel(shape) == x->numel(), "reshape: ", shape_str(x->shape), " -> ",
          shape_str(shape), " changes element count");
    auto out = make_op_output(tape, std::move(shape), x->requires_grad);
    out->value = x->value;
    if (out->requires_grad)
        tape.record([x, out] {
            for (int64_t i = 0; i < x->numel(); ++i) x->grad[i] += out->grad[i];
        });
    return out;
}

template <typename T>
TensorPtr<T> transpose2d(Tape<T>& tape, const TensorPtr<T>& x) {
    check(x->shape.size() == 2, "transpose2d: expected rank 2, got ", shape_str(x->shape));
    int m = x->shape[0], n = x->shape[1];
    auto out = make_op_output(tape, Shape{n, m}, x->requires_grad);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out->value[int64_t(j) * m + i] = x->value[int64_t(i) * n + j];
    if (out->requires_grad)
        tape.record([x, out, m, n] {
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    x->grad[int64_t(i) * n + j] += out->grad[int64_t(j) * m + i];
        });
    return out;
}

template <typename T>
TensorPtr<T> concat(Tape<T>& tape, const std::vector<TensorPtr<T>>& parts, int axis) {
    check(!parts.empty(), "concat: no inputs");
    const Shape& s0 = parts[0]->shape;
    check(axis >= 0 && axis < int(s0.size()), "concat: axis ", axis, " out of range for ",
          shape_str(s0));
    Shape out_shape = s0;
    bool any_grad = false;
    for (const auto& p : parts) {
        check(p->shape.size() == s0.size(), "concat: rank mismatch ", shape_str(p->shape), " vs ",
              shape_str(s0));
        for (size_t d = 0; d < s0.size(); ++d)
            if (int(d) != axis)
                check(p->shape[d] == s0[d], "concat: extent mismatch at dim ", d, ": ",
                      shape_str(p->shape), " vs ", shape_str(s0));
        any_grad = any_grad || p->requires_grad;
    }
    out_shape[axis] = 0;
    for (const auto& p : parts) out_shape[axis] += p->shape[axis];

    int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= s0[d];
    for (size_t d = axis + 1; d < s0.size(); ++d) inner *= s0[d];

    auto out = make_op_output(tape, out_shape, any_grad);
    int64_t out_axis = out_shape[axis];
    int64_t offset = 0;
    for (const auto& p : parts) {
        int64_t pa = p->shape[axis];
        for (int64_t o = 0; o < outer; ++o)
            std::copy(p->value.begin() + o * pa * inner, p->value.begin() + (o + 1) * pa * inner,
                      out->value.begin() + (o * out_axis + offset) * inner);
        offset += pa;
    }
    if (out->requires_grad)
        tape.record([parts, out, outer, inner, out_axis] {
            int64_t off = 0;
            for (const auto& p : parts) {
                int64_t axis_len = p->numel() / (outer * inner);
                if (p->requires_grad) {
                    for (int64_t o = 0; o < outer; ++o) {
                        const T* g = out->grad.data() + (o * out_axis + off) * inner;
                        T* dst = p->grad.data() + o * axis_len * inner;
                        for (int64_t i = 0; i < axis_len * inner; ++i) dst[i] += g[i];
                    }
                }
                off += axis_len;
            }
        });
    return out;
}

// Contiguous slice [start, start+len) along one axis.
template <typename T>
TensorPtr<T> narrow(Tape<T>& tape, const TensorPtr<T>& x, int axis, int start, int len) {
    const Shape& s = x->shape;
    check(axis >= 0 && axis < int(s.size()), "narrow: axis ", axis, " out of range for ",
          shape_str(s));
    check(start >= 0 && len > 0 && start + len <= s[axis], "narrow: range [", start, ", ",
          start + len, ") exceeds extent ", s[axis]);
    Shape out_shape = s;
    out_shape[axis] = len;
    int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= s[d];
    for (size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
    int64_t in_axis = s[axis];

    auto out = make_op_output(tape, out_shape, x->requires_grad);
    for (int64_t o = 0; o < outer; ++o)
        std::copy(x->value.begin() + (o * in_axis + start) * inner,
                  x->value.begin() + (o * in_axis + start + len) * inner,
                  out->value.begin() + o * len * inner);
    if (out->requires_grad)
        tape.record([x, out, outer, inner, in_axis, start, len] {
            for (int64_t o = 0; o < outer; ++o) {
                const T* g = out->grad.data() + o * len * inner;
                T* dst = x->grad.data() + (o * in_axis + start) * inner;
                for (int64_t i = 0; i < int64_t(len) * inner; ++i) dst[i] += g[i];
            }
        });
    return out;
}

// Picks flat indices out of x as a 1-D tensor; backward scatter-adds.
template <typename T>
TensorPtr<T> gather_flat(Tape<T>& tape, const TensorPtr<T>& x, std::vector<int> indices) {
    for (int idx : indices)
        check(idx >= 0 && int64_t(idx) < x->numel(), "gather: index ", idx, " out of range for ",
              shape_str(x->shape));
    auto out = make_op_output(tape, Shape{int(indices.size())}, x->requires_grad);
    for (size_t i = 0; i < indices.size(); ++i) out->value[i] = x->value[indices[i]];
    if (out->requires_grad)
        tape.record([x, out, indices = std::move(indices)] {
            for (size_t i = 0; i < indices.size(); ++i) x->grad[indices[i]] += out->grad[i];
        });
    return out;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <typename T>
TensorPtr<T> sum_all(Tape<T>& tape, const TensorPtr<T>& x) {
    auto out = make_op_output(tape, Shape{1}, x->requires_grad);
    T acc = T(0);
    for (T v : x->value) acc += v;
    out->value[0] = acc;
    check_finite(*out, "sum");
    if (out->requires_grad)
        tape.record([x, out] {
            T g = out->grad[0];
            for (int64_t i = 0; i < x->numel(); ++i) x->grad[i] += g;
        });
    return out;
}

template <typename T>
TensorPtr<T> mean_all(Tape<T>& tape, const TensorPtr<T>& x) {
    auto out = make_op_output(tape, Shape{1}, x->requires_grad);
    T acc = T(0);
    for (T v : x->value) acc += v;
    out->value[0] = acc / T(x->numel());
    check_finite(*out, "mean");
    if (out->requires_grad)
        tape.record([x, out] {
            T g = out->grad[0] / T(x->numel());
            for (int64_t i = 0; i < x->numel(); ++i) x->grad[i] += g;
        });
    return out;
}

// ---------------------------------------------------------------------------
// softmax
// ---------------------------------------------------------------------------

template <typename T>
TensorPtr<T> softmax(Tape<T>& tape, const TensorPtr<T>& x, int axis) {
    const Shape& s = x->shape;
    check(axis >= 0 && axis < int(s.size()), "softmax: axis ", axis, " out of range for ",
          shape_str(s));
    int64_t outer = 1, inner = 1, len = s[axis];
    for (int d = 0; d < axis; ++d) outer *= s[d];
    for (size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];

    auto out = make_op_output(tape, s, x->requires_grad);
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
            const int64_t base = o * len * inner + in;
            T mx = x->value[base];
            for (int64_t i = 1; i < len; ++i) mx = std::max(mx, x->value[base + i * inner]);
            T denom = T(0);
            for (int64_t i = 0; i < len; ++i) {
                T e = std::exp(x->value[base + i * inner] - mx);
                out->value[base + i * inner] = e;
                denom += e;
            }
            for (int64_t i = 0; i < len; ++i) out->value[base + i * inner] /= denom;
        }
    }
    check_finite(*out, "softmax");
    if (out->requires_grad)
        tape.record([x, out, outer, inner, len] {
            for (int64_t o = 0; o < outer; ++o) {
                for (int64_t in = 0; in < inner; ++in) {
                    const int64_t base = o * len * inner + in;
                    T dot = T(0);
                    for (int64_t i = 0; i < len; ++i)
                        dot += out->grad[base + i * inner] * out->value[base + i * inner];
                    for (int64_t i = 0; i < len; ++i) {
                        int64_t at = base + i * inner;
                        x->grad[at] += out->value[at] * (out->grad[at] - dot);
                    }
                }
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// matmul / conv2d
// ---------------------------------------------------------------------------

template <typename T>
TensorPtr<T> matmul(Tape<T>& tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
    check(a->shape.size() == 2 && b->shape.size() == 2, "matmul: expected rank-2 operands, got ",
          shape_str(a->shape), " and ", shape_str(b->shape));
    int64_t m = a->shape[0], k = a->shape[1], k2 = b->shape[0], n = b->shape[1];
    check(k == k2, "matmul: inner extents differ: ", shape_str(a->shape), " x ",
          shape_str(b->shape));
    auto out = make_op_output(tape, Shape{int(m), int(n)}, a->requires_grad || b->requires_grad);
    detail::gemm_nn(m, n, k, a->value.data(), b->value.data(), out->value.data());
    check_finite(*out, "matmul");
    if (out->requires_grad)
        tape.record([a, b, out, m, n, k] {
            if (a->requires_grad)
                detail::gemm_nt(m, k, n, out->grad.data(), b->value.data(), a->grad.data());
            if (b->requires_grad)
                detail::gemm_tn(k, n, m, a->value.data(), out->grad.data(), b->grad.data());
        });
    return out;
}

// input [N,C,H,W], kernel [O,C,kh,kw], optional bias [O]. Zero padding.
template <typename T>
TensorPtr<T> conv2d(Tape<T>& tape, const TensorPtr<T>& x, const TensorPtr<T>& w,
                    const TensorPtr<T>& bias, int stride, int pad) {
    check(x->shape.size() == 4, "conv2d: input must be [N,C,H,W], got ", shape_str(x->shape));
    check(w->shape.size() == 4, "conv2d: kernel must be [O,C,kh,kw], got ", shape_str(w->shape));
    check(stride >= 1, "conv2d: stride must be positive");
    check(pad >= 0, "conv2d: pad must be non-negative");
    detail::ConvGeom g;
    g.n = x->shape[0];
    g.c = x->shape[1];
    g.h = x->shape[2];
    g.w = x->shape[3];
    g.o = w->shape[0];
    g.kh = w->shape[2];
    g.kw = w->shape[3];
    g.stride = stride;
    g.pad = pad;
    check(w->shape[1] == g.c, "conv2d: channel mismatch between input ", shape_str(x->shape),
          " and kernel ", shape_str(w->shape));
    check(g.h + 2 * pad >= g.kh && g.w + 2 * pad >= g.kw, "conv2d: kernel ", shape_str(w->shape),
          " larger than padded input ", shape_str(x->shape));
    g.oh = (g.h + 2 * pad - g.kh) / stride + 1;
    g.ow = (g.w + 2 * pad - g.kw) / stride + 1;
    if (bias) check(bias->shape == Shape{g.o}, "conv2d: bias must be [O], got ",
                    shape_str(bias->shape));

    const int64_t ckk = g.cols_rows(), ohw = g.cols_cols();
    const int64_t in_plane = int64_t(g.c) * g.h * g.w;
    const int64_t out_plane = int64_t(g.o) * ohw;

    bool any_grad = x->requires_grad || w->requires_grad || (bias && bias->requires_grad);
    auto out = make_op_output(tape, Shape{g.n, g.o, g.oh, g.ow}, any_grad);

    std::vector<T> cols(size_t(ckk * ohw));
    for (int n = 0; n < g.n; ++n) {
        detail::im2col(g, x->value.data() + n * in_plane, cols.data());
        detail::gemm_nn(g.o, ohw, ckk, w->value.data(), cols.data(),
                        out->value.data() + n * out_plane);
    }
    if (bias) {
        for (int n = 0; n < g.n; ++n)
            for (int o = 0; o < g.o; ++o) {
                T bv = bias->value[o];
                T* dst = out->value.data() + n * out_plane + o * ohw;
                for (int64_t i = 0; i < ohw; ++i) dst[i] += bv;
            }
    }
    check_finite(*out, "conv2d");

    if (out->requires_grad)
        tape.record([x, w, bias, out, g, ckk, ohw, in_plane, out_plane] {
            std::vector<T> cols(size_t(ckk * ohw));
            std::vector<T> dcols;
            for (int n = 0; n < g.n; ++n) {
                const T* dy = out->grad.data() + n * out_plane;
                if (w->requires_grad) {
                    detail::im2col(g, x->value.data() + n * in_plane, cols.data());
                    detail::gemm_nt(g.o, ckk, ohw, dy, cols.data(), w->grad.data());
                }
                if (x->requires_grad) {
                    dcols.assign(size_t(ckk * ohw), T(0));
                    detail::gemm_tn(ckk, ohw, g.o, w->value.data(), dy, dcols.data());
                    detail::col2im_add(g, dcols.data(), x->grad.data() + n * in_plane);
                }
            }
            if (bias && bias->requires_grad) {
                for (int n = 0; n < g.n; ++n)
                    for (int o = 0; o < g.o; ++o) {
                        const T* dy = out->grad.data() + n * out_plane + o * ohw;
                        T acc = T(0);
                        for (int64_t i = 0; i < ohw; ++i) acc += dy[i];
                        bias->grad[o] += acc;
                    }
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// resizing
// ---------------------------------------------------------------------------

// [N,C,H,W] -> [N,C,H*f,W*f], integer factor, nearest neighbor.
template <typename T>
TensorPtr<T> upsample_nearest(Tape<T>& tape, const TensorPtr<T>& x, int factor) {
    check(x->shape.size() == 4, "upsample: input must be [N,C,H,W], got ", shape_str(x->shape));
    check(factor >= 1, "upsample: factor must be >= 1");
    int n = x->shape[0], c = x->shape[1], h = x->shape[2], w = x->shape[3];
    int oh = h * factor, ow = w * factor;
    auto out = make_op_output(tape, Shape{n, c, oh, ow}, x->requires_grad);
    const int64_t planes = int64_t(n) * c;
    for (int64_t p = 0; p < planes; ++p) {
        const T* src = x->value.data() + p * h * w;
        T* dst = out->value.data() + p * int64_t(oh) * ow;
        for (int oy = 0; oy < oh; ++oy) {
            const T* srow = src + int64_t(oy / factor) * w;
            T* drow = dst + int64_t(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) drow[ox] = srow[ox / factor];
        }
    }
    if (out->requires_grad)
        tape.record([x, out, planes, h, w, oh, ow, factor] {
            for (int64_t p = 0; p < planes; ++p) {
                T* dst = x->grad.data() + p * h * w;
                const T* g = out->grad.data() + p * int64_t(oh) * ow;
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox)
                        dst[int64_t(oy / factor) * w + ox / factor] += g[int64_t(oy) * ow + ox];
            }
        });
    return out;
}

// [N,C,H,W] -> [N,C,oh,ow], bilinear with half-pixel centers.
template <typename T>
TensorPtr<T> resize_bilinear(Tape<T>& tape, const TensorPtr<T>& x, int oh, int ow) {
    check(x->shape.size() == 4, "resize: input must be [N,C,H,W], got ", shape_str(x->shape));
    check(oh >= 1 && ow >= 1, "resize: target size must be positive");
    int n = x->shape[0], c = x->shape[1], h = x->shape[2], w = x->shape[3];
    auto out = make_op_output(tape, Shape{n, c, oh, ow}, x->requires_grad);
    std::vector<detail::LerpTap> ty(oh), tx(ow);
    for (int i = 0; i < oh; ++i) ty[i] = detail::lerp_tap(i, oh, h);
    for (int j = 0; j < ow; ++j) tx[j] = detail::lerp_tap(j, ow, w);
    const int64_t planes = int64_t(n) * c;
    for (int64_t p = 0; p < planes; ++p) {
        const T* src = x->value.data() + p * h * w;
        T* dst = out->value.data() + p * int64_t(oh) * ow;
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                const auto& a = ty[i];
                const auto& b = tx[j];
                dst[int64_t(i) * ow + j] =
                    T(a.w0 * (b.w0 * src[int64_t(a.i0) * w + b.i0] +
                              b.w1 * src[int64_t(a.i0) * w + b.i1]) +
                      a.w1 * (b.w0 * src[int64_t(a.i1) * w + b.i0] +
                              b.w1 * src[int64_t(a.i1) * w + b.i1]));
            }
    }
    if (out->requires_grad)
        tape.record([x, out, planes, h, w, oh, ow, ty, tx] {
            for (int64_t p = 0; p < planes; ++p) {
                T* dst = x->grad.data() + p * h * w;
                const T* g = out->grad.data() + p * int64_t(oh) * ow;
                for (int i = 0; i < oh; ++i)
                    for (int j = 0; j < ow; ++j) {
                        const auto& a = ty[i];
                        const auto& b = tx[j];
                        T gv = g[int64_t(i) * ow + j];
                        dst[int64_t(a.i0) * w + b.i0] += T(a.w0 * b.w0) * gv;
                        dst[int64_t(a.i0) * w + b.i1] += T(a.w0 * b.w1) * gv;
                        dst[int64_t(a.i1) * w + b.i0] += T(a.w1 * b.w0) * gv;
                        dst[int64_t(a.i1) * w + b.i1] += T(a.w1 * b.w1) * gv;
                    }
            }
        });
    return out;
}

}  // namespace ctvos
