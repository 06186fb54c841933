// The correspondence network: three convolutional encoders producing
// query/key/value, scaled dot-product attention over all past-frame
// locations, and a decoder emitting a bounded 3-channel reconstruction plus a
// 1-channel tag map. Templated so the whole forward pass runs in double for
// finite-difference verification.
#pragma once

#include <functional>
#include <numeric>

#include "ctvos/image.hpp"
#include "ctvos/ops.hpp"

namespace ctvos {

struct ModelDims {
    int in_channels = 3;
    std::array<int, 4> enc_channels{16, 32, 64, 64};
    std::array<int, 4> enc_strides{2, 2, 2, 1};
    // fuse-conv output followed by one entry per x2 upsample stage
    std::vector<int> dec_channels{64, 32, 16, 16};

    static ModelDims desk() { return {}; }

    // Small enough for finite-difference checks: stride 4, 2x2 features on
    // an 8x8 frame, a few thousand parameters.
    static ModelDims tiny() {
        ModelDims d;
        d.enc_channels = {4, 4, 6, 6};
        d.enc_strides = {2, 2, 1, 1};
        d.dec_channels = {8, 6, 6};
        return d;
    }

    int stride() const {
        return std::accumulate(enc_strides.begin(), enc_strides.end(), 1, std::multiplies<int>());
    }
    int feat_dim() const { return enc_channels.back(); }
    int up_stages() const { return int(dec_channels.size()) - 1; }

    void validate() const {
        check(in_channels > 0, "model: non-positive input channel count");
        for (int c : enc_channels) check(c > 0, "model: non-positive encoder width");
        int s = stride();
        check(s >= 1 && (s & (s - 1)) == 0, "model: total stride must be a power of two, got ", s);
        check(!dec_channels.empty(), "model: decoder needs at least the fuse stage");
        check((1 << up_stages()) == s, "model: ", up_stages(), " upsample stages cannot undo stride ",
              s);
    }
};

template <typename T>
struct ConvParam {
    TensorPtr<T> w, b;
    int stride = 1;
    int pad = 1;
};

template <typename T>
struct DecodeOut {
    TensorPtr<T> recon;  // [1,3,H,W], tanh-bounded
    TensorPtr<T> tags;   // [1,1,H,W], sigmoid-bounded
};

template <typename T>
struct ModelParams {
    ModelDims dims;
    std::vector<ConvParam<T>> enc_cur, enc_key, enc_val;
    std::vector<ConvParam<T>> dec;  // fuse, up stages..., head

    static ModelParams init(const ModelDims& dims, uint64_t seed);

    std::vector<std::pair<std::string, TensorPtr<T>>> named_params() const;
    std::vector<TensorPtr<T>> param_list() const;
    void set_requires_grad(bool on);
    void zero_grad();
};

namespace detail {

template <typename T>
ConvParam<T> init_conv(Rng& rng, int out_ch, int in_ch, int k, int stride, bool requires_grad) {
    std::vector<T> w(size_t(out_ch) * in_ch * k * k);
    T stddev = std::sqrt(T(2) / T(in_ch * k * k));
    for (auto& v : w) v = T(rng.normal()) * stddev;
    ConvParam<T> p;
    p.w = make_tensor<T>({out_ch, in_ch, k, k}, std::move(w), requires_grad);
    p.b = make_zeros<T>({out_ch}, requires_grad);
    p.stride = stride;
    p.pad = (k - 1) / 2;
    return p;
}

template <typename T>
void name_stack(const char* prefix, const std::vector<ConvParam<T>>& stack,
                std::vector<std::pair<std::string, TensorPtr<T>>>& out) {
    for (size_t i = 0; i < stack.size(); ++i) {
        out.emplace_back(cat(prefix, ".", i, ".w"), stack[i].w);
        out.emplace_back(cat(prefix, ".", i, ".b"), stack[i].b);
    }
}

}  // namespace detail

template <typename T>
ModelParams<T> ModelParams<T>::init(const ModelDims& dims, uint64_t seed) {
    dims.validate();
    Rng rng(seed);
    ModelParams<T> p;
    p.dims = dims;
    auto build_encoder = [&]() {
        std::vector<ConvParam<T>> enc;
        int in_ch = dims.in_channels;
        for (int i = 0; i < 4; ++i) {
            enc.push_back(detail::init_conv<T>(rng, dims.enc_channels[i], in_ch, 3,
                                               dims.enc_strides[i], true));
            in_ch = dims.enc_channels[i];
        }
        return enc;
    };
    p.enc_cur = build_encoder();
    p.enc_key = build_encoder();
    p.enc_val = build_encoder();

    int in_ch = 2 * dims.feat_dim();  // decoder fuses (context, query)
    for (int c : dims.dec_channels) {
        p.dec.push_back(detail::init_conv<T>(rng, c, in_ch, 3, 1, true));
        in_ch = c;
    }
    p.dec.push_back(detail::init_conv<T>(rng, 4, in_ch, 3, 1, true));  // 3 recon + 1 tag
    return p;
}

template <typename T>
std::vector<std::pair<std::string, TensorPtr<T>>> ModelParams<T>::named_params() const {
    std::vector<std::pair<std::string, TensorPtr<T>>> out;
    detail::name_stack("enc_cur", enc_cur, out);
    detail::name_stack("enc_key", enc_key, out);
    detail::name_stack("enc_val", enc_val, out);
    detail::name_stack("dec", dec, out);
    return out;
}

template <typename T>
std::vector<TensorPtr<T>> ModelParams<T>::param_list() const {
    std::vector<TensorPtr<T>> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
}

template <typename T>
void ModelParams<T>::set_requires_grad(bool on) {
    for (auto& t : param_list()) {
        t->requires_grad = on;
        if (on) t->ensure_grad();
    }
}

template <typename T>
void ModelParams<T>::zero_grad() {
    for (auto& t : param_list()) t->zero_grad();
}

// Runs one encoder stack over a batch of frames: [N,3,H,W] -> [N,d,h,w].
template <typename T>
TensorPtr<T> encode_batch(Tape<T>& tape, const std::vector<ConvParam<T>>& enc,
                          const TensorPtr<T>& frames) {
    auto h = frames;
    for (const auto& stage : enc) h = relu(tape, conv2d(tape, h, stage.w, stage.b, stage.stride,
                                                        stage.pad));
    return h;
}

template <typename T>
void check_stride_divides(const TensorPtr<T>& frame, int stride) {
    check(frame->shape.size() == 4, "encoder input must be [N,C,H,W], got ",
          shape_str(frame->shape));
    check(frame->shape[2] % stride == 0 && frame->shape[3] % stride == 0, "frame ",
          frame->shape[3], "x", frame->shape[2], " is not divisible by the feature stride ",
          stride);
}

// Current frame -> query feature map [d, h, w].
template <typename T>
TensorPtr<T> encode_current(Tape<T>& tape, const ModelParams<T>& params,
                            const TensorPtr<T>& frame) {
    check_stride_divides(frame, params.dims.stride());
    auto f = encode_batch(tape, params.enc_cur, frame);
    return reshape(tape, f, {f->shape[1], f->shape[2], f->shape[3]});
}

namespace detail {

// [P,d,h,w] -> [d, P*h*w]: per-frame maps flattened and stacked along the
// location axis.
template <typename T>
TensorPtr<T> to_columns(Tape<T>& tape, const TensorPtr<T>& feats) {
    int p = feats->shape[0], d = feats->shape[1];
    int hw = feats->shape[2] * feats->shape[3];
    std::vector<TensorPtr<T>> blocks;
    blocks.reserve(p);
    for (int i = 0; i < p; ++i)
        blocks.push_back(reshape(tape, narrow(tape, feats, 0, i, 1), {d, hw}));
    return blocks.size() == 1 ? blocks[0] : concat(tape, blocks, 1);
}

template <typename T>
TensorPtr<T> stack_frames(Tape<T>& tape, const std::vector<TensorPtr<T>>& frames) {
    check(!frames.empty(), "encoder: empty frame list");
    for (const auto& f : frames)
        check(f->shape == frames[0]->shape, "encoder: mixed frame shapes ", shape_str(f->shape),
              " vs ", shape_str(frames[0]->shape));
    return frames.size() == 1 ? frames[0] : concat(tape, frames, 0);
}

}  // namespace detail

// Past frames -> comprehensive key [d, P*h*w].
template <typename T>
TensorPtr<T> encode_keys(Tape<T>& tape, const ModelParams<T>& params,
                         const std::vector<TensorPtr<T>>& frames) {
    auto batch = detail::stack_frames(tape, frames);
    check_stride_divides(batch, params.dims.stride());
    return detail::to_columns(tape, encode_batch(tape, params.enc_key, batch));
}

// Value inputs (cutout frames at training time, stacked masks at inference)
// -> [d_v, P*h*w], column-aligned with the keys.
template <typename T>
TensorPtr<T> encode_values(Tape<T>& tape, const ModelParams<T>& params,
                           const std::vector<TensorPtr<T>>& inputs) {
    auto batch = detail::stack_frames(tape, inputs);
    check(batch->shape[1] == 3, "value inputs must be 3-channel, got ", shape_str(batch->shape));
    check_stride_divides(batch, params.dims.stride());
    return detail::to_columns(tape, encode_batch(tape, params.enc_val, batch));
}

// context(x) = sum_c softmax_c(q_x . k_c / sqrt(d)) * v_c
template <typename T>
TensorPtr<T> attention_read(Tape<T>& tape, const TensorPtr<T>& q, const TensorPtr<T>& k,
                            const TensorPtr<T>& v) {
    check(q->shape.size() == 3, "attention: query must be [d,h,w], got ", shape_str(q->shape));
    check(k->shape.size() == 2 && v->shape.size() == 2, "attention: key/value must be [d,cols]");
    int d = q->shape[0], h = q->shape[1], w = q->shape[2];
    check(k->shape[0] == d, "attention: query dim ", d, " vs key dim ", k->shape[0]);
    check(k->shape[1] == v->shape[1], "attention: key has ", k->shape[1], " columns, value has ",
          v->shape[1]);
    auto qm = transpose2d(tape, reshape(tape, q, {d, h * w}));          // [hw, d]
    auto logits = affine(tape, matmul(tape, qm, k), T(1) / std::sqrt(T(d)), T(0));
    auto attn = softmax(tape, logits, 1);                               // rows sum to 1
    auto ctx = matmul(tape, attn, transpose2d(tape, v));                // [hw, dv]
    return reshape(tape, transpose2d(tape, ctx), {v->shape[0], h, w});
}

// (context, query) -> full-resolution reconstruction and tag map.
template <typename T>
DecodeOut<T> decode(Tape<T>& tape, const ModelParams<T>& params, const TensorPtr<T>& context,
                    const TensorPtr<T>& q) {
    check(context->shape.size() == 3 && q->shape.size() == 3,
          "decode: expected [c,h,w] inputs, got ", shape_str(context->shape), " and ",
          shape_str(q->shape));
    check(context->shape[1] == q->shape[1] && context->shape[2] == q->shape[2],
          "decode: context ", shape_str(context->shape), " not aligned with query ",
          shape_str(q->shape));
    auto x = concat(tape, {context, q}, 0);
    x = reshape(tape, x, {1, x->shape[0], x->shape[1], x->shape[2]});
    x = relu(tape, conv2d(tape, x, params.dec[0].w, params.dec[0].b, 1, params.dec[0].pad));
    for (size_t i = 1; i + 1 < params.dec.size(); ++i) {
        x = upsample_nearest(tape, x, 2);
        x = relu(tape, conv2d(tape, x, params.dec[i].w, params.dec[i].b, 1, params.dec[i].pad));
    }
    const auto& head = params.dec.back();
    auto y = conv2d(tape, x, head.w, head.b, 1, head.pad);
    DecodeOut<T> out;
    out.recon = tanh_op(tape, narrow(tape, y, 1, 0, 3));
    out.tags = sigmoid(tape, narrow(tape, y, 1, 3, 1));
    return out;
}

// Pipeline stages as values, so inference code runs against either the
// trained network or synthetic feature extractors in tests.
template <typename T>
struct PipelineFns {
    int stride = 8;
    std::function<TensorPtr<T>(Tape<T>&, const TensorPtr<T>&)> encode_query;
    std::function<TensorPtr<T>(Tape<T>&, const std::vector<TensorPtr<T>>&)> encode_keys;
    std::function<TensorPtr<T>(Tape<T>&, const std::vector<TensorPtr<T>>&)> encode_values;
    std::function<DecodeOut<T>(Tape<T>&, const TensorPtr<T>&, const TensorPtr<T>&)> decode;
};

template <typename T>
PipelineFns<T> make_model_pipeline(const ModelParams<T>& params) {
    PipelineFns<T> fns;
    fns.stride = params.dims.stride();
    fns.encode_query = [&params](Tape<T>& t, const TensorPtr<T>& f) {
        return encode_current(t, params, f);
    };
    fns.encode_keys = [&params](Tape<T>& t, const std::vector<TensorPtr<T>>& f) {
        return encode_keys(t, params, f);
    };
    fns.encode_values = [&params](Tape<T>& t, const std::vector<TensorPtr<T>>& f) {
        return encode_values(t, params, f);
    };
    fns.decode = [&params](Tape<T>& t, const TensorPtr<T>& c, const TensorPtr<T>& q) {
        return decode(t, params, c, q);
    };
    return fns;
}

// Content-free probe encoders: every location gets a unique (scaled) one-hot
// code, values are block means, decoding is nearest upsampling. With
// identical frames, attention reduces to the identity correspondence.
template <typename T>
PipelineFns<T> make_coordinate_stub_pipeline(int stride, T scale = T(32));

template <typename T>
PipelineFns<T> make_coordinate_stub_pipeline(int stride, T scale) {
    check(stride >= 1, "stub: stride must be positive");
    PipelineFns<T> fns;
    fns.stride = stride;

    auto onehot = [stride, scale](Tape<T>&, const TensorPtr<T>& frame) {
        check(frame->shape.size() == 4 && frame->shape[0] == 1, "stub: expected [1,C,H,W]");
        int h = frame->shape[2] / stride, w = frame->shape[3] / stride;
        check(h * stride == frame->shape[2] && w * stride == frame->shape[3],
              "stub: frame not divisible by stride ", stride);
        int hw = h * w;
        std::vector<T> data(size_t(hw) * hw, T(0));
        for (int l = 0; l < hw; ++l) data[size_t(l) * hw + l] = scale;
        return make_tensor<T>({hw, h, w}, std::move(data));
    };

    fns.encode_query = onehot;
    fns.encode_keys = [onehot](Tape<T>& t, const std::vector<TensorPtr<T>>& frames) {
        check(!frames.empty(), "stub: empty frame list");
        auto q0 = onehot(t, frames[0]);
        int d = q0->shape[0], hw = q0->shape[1] * q0->shape[2];
        std::vector<T> data(size_t(d) * hw * frames.size());
        for (size_t p = 0; p < frames.size(); ++p) {
            auto qp = onehot(t, frames[p]);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < hw; ++j)
                    data[size_t(i) * hw * frames.size() + p * hw + j] = qp->value[size_t(i) * hw + j];
        }
        return make_tensor<T>({d, int(hw * frames.size())}, std::move(data));
    };
    fns.encode_values = [stride](Tape<T>&, const std::vector<TensorPtr<T>>& inputs) {
        check(!inputs.empty(), "stub: empty value list");
        int c = inputs[0]->shape[1];
        int h = inputs[0]->shape[2] / stride, w = inputs[0]->shape[3] / stride;
        int hw = h * w;
        int cols = int(inputs.size()) * hw;
        std::vector<T> data(size_t(c) * cols, T(0));
        for (size_t p = 0; p < inputs.size(); ++p) {
            const auto& in = *inputs[p];
            for (int ch = 0; ch < c; ++ch)
                for (int by = 0; by < h; ++by)
                    for (int bx = 0; bx < w; ++bx) {
                        T acc = T(0);
                        for (int dy = 0; dy < stride; ++dy)
                            for (int dx = 0; dx < stride; ++dx)
                                acc += in.value[(size_t(ch) * in.shape[2] + by * stride + dy) *
                                                    in.shape[3] +
                                                bx * stride + dx];
                        data[size_t(ch) * cols + p * hw + by * w + bx] =
                            acc / T(stride * stride);
                    }
        }
        return make_tensor<T>({c, cols}, std::move(data));
    };
    fns.decode = [stride](Tape<T>& t, const TensorPtr<T>& ctx, const TensorPtr<T>& q) {
        (void)q;
        auto x = reshape(t, ctx, {1, ctx->shape[0], ctx->shape[1], ctx->shape[2]});
        DecodeOut<T> out;
        out.recon = clamp_op(t, upsample_nearest(t, x, stride), T(-1), T(1));
        out.tags = make_full<T>({1, 1, ctx->shape[1] * stride, ctx->shape[2] * stride}, T(0.5));
        return out;
    };
    return fns;
}

}  // namespace ctvos
