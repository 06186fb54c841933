// Training-time transforms: cutout injection, zoom-in views, flips, random
// crops, and the [0,1] <-> [-1,1] value mapping.
#pragma once

#include <vector>

#include "ctvos/videogen.hpp"

namespace ctvos {

enum class CutoutShape { square, rectangle, circle, triangle };

CutoutShape cutout_shape_from_name(const std::string& name);
std::string cutout_shape_name(CutoutShape shape);

// Geometry of the zeroed region. One spec is shared by every frame of a clip.
struct CutoutSpec {
    CutoutShape shape = CutoutShape::square;
    // square/rectangle: top-left anchor + extent
    int x = 0, y = 0, w = 0, h = 0;
    // circle: center + radius
    double cx = 0, cy = 0, radius = 0;
    // triangle: vertices
    std::array<Vec2, 3> tri{};
    float fill = 0.f;
};

struct CutoutMask {
    int h = 0, w = 0;
    std::vector<uint8_t> m;  // 1 = cutout pixel, 0 = untouched pixel

    CutoutMask() = default;
    CutoutMask(int h_, int w_) : h(h_), w(w_), m(size_t(h_) * w_, 0) {}
    uint8_t at(int y, int x) const { return m[size_t(y) * w + x]; }
    int64_t area() const;
};

// Rasterizes and validates the spec: footprint inside the frame and covering
// at most half of it.
CutoutMask rasterize_cutout(const CutoutSpec& spec, int frame_h, int frame_w);

// Random spec of the given shape honoring the 50%-area cap. Square sides are
// drawn from [25%, 50%] of min(H, W).
CutoutSpec sample_cutout_spec(Rng& rng, CutoutShape shape, int frame_h, int frame_w,
                              float fill = 0.f);

// Same footprint stamped into every frame; pixels outside it are untouched.
std::vector<Image> apply_cutout(const std::vector<Image>& frames, const CutoutMask& mask,
                                float fill);
Image apply_cutout(const Image& frame, const CutoutMask& mask, float fill);

// Zoom-in views: level k crops the central 1/f_k portion (f = 1, 1.5, 2, ...)
// and resizes it back to frame resolution. Level 1 is the identity.
struct ZoomWindow {
    int y0 = 0, x0 = 0, h = 0, w = 0;
};
std::vector<ZoomWindow> zoom_windows(int frame_h, int frame_w, int levels);
std::vector<ZoomWindow> zoom_windows_random(int frame_h, int frame_w, int levels, Rng& rng);
Image apply_zoom(const Image& frame, const ZoomWindow& win);
std::vector<Image> make_zoom_views(const Image& frame, int levels);

struct AugmentFlags {
    bool hflip = false;
    bool treverse = false;
    bool rcrop = false;
    double crop_min_scale = 0.75;
};

// Identical spatial transform on every frame (and gt mask); temporal reversal
// flips the frame order.
Clip augment_clip(const Clip& clip, Rng& rng, const AugmentFlags& flags);

Image resize_image(const Image& img, int out_h, int out_w);       // bilinear
IndexMask resize_mask(const IndexMask& m, int out_h, int out_w);  // nearest

Image to_model_range(const Image& img);    // [0,1] -> [-1,1]
Image from_model_range(const Image& img);  // [-1,1] -> [0,1]

// Decorrelated color space utility (not part of the default pipeline).
// Channels are rescaled into [0,1]: L/100, (a+110)/220, (b+110)/220.
Image rgb_to_lab(const Image& img);
Image lab_to_rgb(const Image& img);

}  // namespace ctvos
