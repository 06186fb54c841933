#include "ctvos/image.hpp"

#include <array>

namespace ctvos {

int IndexMask::max_index() const {
    uint8_t m = 0;
    for (uint8_t v : idx) m = std::max(m, v);
    return m;
}

int64_t BinMask::area() const {
    int64_t n = 0;
    for (uint8_t x : v) n += x;
    return n;
}

BinMask object_mask(const IndexMask& m, int object) {
    check(object >= 1, "object ids start at 1, got ", object);
    BinMask out(m.h, m.w);
    for (size_t i = 0; i < m.idx.size(); ++i) out.v[i] = m.idx[i] == object ? 1 : 0;
    return out;
}

Image tensor_to_image(const TensorNode<float>& t) {
    const Shape& s = t.shape;
    check(s.size() == 3 || (s.size() == 4 && s[0] == 1),
          "tensor_to_image: expected [C,H,W] or [1,C,H,W], got ", shape_str(s));
    int off = s.size() == 4 ? 1 : 0;
    Image img(s[off + 1], s[off + 2], s[off]);
    img.data.assign(t.value.begin(), t.value.end());
    return img;
}

const std::array<std::array<uint8_t, 3>, 9>& mask_palette() {
    static const std::array<std::array<uint8_t, 3>, 9> p = {{
        {0, 0, 0},        // background
        {230, 25, 75},    // red
        {60, 180, 75},    // green
        {255, 225, 25},   // yellow
        {0, 130, 200},    // blue
        {245, 130, 48},   // orange
        {145, 30, 180},   // purple
        {70, 240, 240},   // cyan
        {240, 50, 230},   // magenta
    }};
    return p;
}

Image overlay(const Image& frame, const IndexMask& masks, float alpha) {
    check(frame.c == 3, "overlay: frame must be RGB");
    check(frame.h == masks.h && frame.w == masks.w, "overlay: frame ", frame.h, "x", frame.w,
          " vs mask ", masks.h, "x", masks.w);
    const auto& palette = mask_palette();
    Image out = frame;
    for (int y = 0; y < frame.h; ++y)
        for (int x = 0; x < frame.w; ++x) {
            int id = masks.at(y, x);
            if (id == 0) continue;
            const auto& color = palette[size_t(1 + (id - 1) % 8)];
            for (int ch = 0; ch < 3; ++ch)
                out.at(ch, y, x) =
                    (1.f - alpha) * frame.at(ch, y, x) + alpha * float(color[ch]) / 255.f;
        }
    return out;
}

}  // namespace ctvos
