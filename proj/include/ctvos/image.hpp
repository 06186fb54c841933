// Plain image containers used outside the autodiff graph. Frames are CHW
// float planes; gt/predicted segmentations are per-pixel object indices
// (0 = background) so occlusions stay resolved.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ctvos/tensor.hpp"

namespace ctvos {

struct Image {
    int h = 0, w = 0, c = 0;
    std::vector<float> data;  // CHW

    Image() = default;
    Image(int h_, int w_, int c_, float fill = 0.f)
        : h(h_), w(w_), c(c_), data(size_t(h_) * w_ * c_, fill) {}

    float& at(int ch, int y, int x) { return data[(size_t(ch) * h + y) * w + x]; }
    float at(int ch, int y, int x) const { return data[(size_t(ch) * h + y) * w + x]; }
    size_t pixels() const { return size_t(h) * w; }
    bool same_dims(const Image& o) const { return h == o.h && w == o.w && c == o.c; }
};

struct IndexMask {
    int h = 0, w = 0;
    std::vector<uint8_t> idx;

    IndexMask() = default;
    IndexMask(int h_, int w_) : h(h_), w(w_), idx(size_t(h_) * w_, 0) {}

    uint8_t& at(int y, int x) { return idx[size_t(y) * w + x]; }
    uint8_t at(int y, int x) const { return idx[size_t(y) * w + x]; }
    int max_index() const;
};

struct BinMask {
    int h = 0, w = 0;
    std::vector<uint8_t> v;  // 0 or 1

    BinMask() = default;
    BinMask(int h_, int w_) : h(h_), w(w_), v(size_t(h_) * w_, 0) {}

    uint8_t& at(int y, int x) { return v[size_t(y) * w + x]; }
    uint8_t at(int y, int x) const { return v[size_t(y) * w + x]; }
    int64_t area() const;
    bool empty() const { return area() == 0; }
};

BinMask object_mask(const IndexMask& m, int object);

// Tensor bridges; frames travel through the model as [1,C,H,W].
template <typename T>
TensorPtr<T> image_to_tensor(const Image& img) {
    std::vector<T> data(img.data.size());
    for (size_t i = 0; i < data.size(); ++i) data[i] = T(img.data[i]);
    return make_tensor<T>({1, img.c, img.h, img.w}, std::move(data));
}

Image tensor_to_image(const TensorNode<float>& t);

// Fixed overlay/mask palette: 8 well-separated hues, index 0 black.
const std::array<std::array<uint8_t, 3>, 9>& mask_palette();

Image overlay(const Image& frame, const IndexMask& masks, float alpha = 0.5f);

}  // namespace ctvos
