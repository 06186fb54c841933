#include "ctvos/augment.hpp"

#include <algorithm>
#include <cmath>

#include "ctvos/ops.hpp"

namespace ctvos {

namespace {

bool point_in_triangle(const std::array<Vec2, 3>& v, double px, double py) {
    auto edge = [&](const Vec2& a, const Vec2& b) {
        return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
    };
    double e0 = edge(v[0], v[1]), e1 = edge(v[1], v[2]), e2 = edge(v[2], v[0]);
    return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
}

double triangle_area(const std::array<Vec2, 3>& v) {
    return 0.5 * std::abs((v[1].x - v[0].x) * (v[2].y - v[0].y) -
                          (v[2].x - v[0].x) * (v[1].y - v[0].y));
}

}  // namespace

CutoutShape cutout_shape_from_name(const std::string& name) {
    if (name == "square") return CutoutShape::square;
    if (name == "rectangle") return CutoutShape::rectangle;
    if (name == "circle") return CutoutShape::circle;
    if (name == "triangle") return CutoutShape::triangle;
    fail("unknown cutout shape '", name, "' (square|rectangle|circle|triangle)");
}

std::string cutout_shape_name(CutoutShape shape) {
    switch (shape) {
        case CutoutShape::square: return "square";
        case CutoutShape::rectangle: return "rectangle";
        case CutoutShape::circle: return "circle";
        case CutoutShape::triangle: return "triangle";
    }
    return "?";
}

int64_t CutoutMask::area() const {
    int64_t n = 0;
    for (uint8_t v : m) n += v;
    return n;
}

CutoutMask rasterize_cutout(const CutoutSpec& spec, int frame_h, int frame_w) {
    check(frame_h > 0 && frame_w > 0, "cutout: empty frame");
    CutoutMask mask(frame_h, frame_w);
    switch (spec.shape) {
        case CutoutShape::square:
        case CutoutShape::rectangle: {
            check(spec.w > 0 && spec.h > 0, "cutout: non-positive extent");
            if (spec.shape == CutoutShape::square)
                check(spec.w == spec.h, "square cutout with unequal sides ", spec.w, "x", spec.h);
            check(spec.x >= 0 && spec.y >= 0 && spec.x + spec.w <= frame_w &&
                      spec.y + spec.h <= frame_h,
                  "cutout rectangle [", spec.x, ",", spec.y, " ", spec.w, "x", spec.h,
                  "] leaves the ", frame_w, "x", frame_h, " frame");
            for (int y = spec.y; y < spec.y + spec.h; ++y)
                for (int x = spec.x; x < spec.x + spec.w; ++x) mask.m[size_t(y) * frame_w + x] = 1;
            break;
        }
        case CutoutShape::circle: {
            check(spec.radius > 0, "cutout: non-positive radius");
            check(spec.cx - spec.radius >= -0.5 && spec.cx + spec.radius <= frame_w - 0.5 &&
                      spec.cy - spec.radius >= -0.5 && spec.cy + spec.radius <= frame_h - 0.5,
                  "cutout circle leaves the frame");
            double r2 = spec.radius * spec.radius;
            for (int y = 0; y < frame_h; ++y)
                for (int x = 0; x < frame_w; ++x) {
                    double dx = x - spec.cx, dy = y - spec.cy;
                    if (dx * dx + dy * dy <= r2) mask.m[size_t(y) * frame_w + x] = 1;
                }
            break;
        }
        case CutoutShape::triangle: {
            for (const auto& v : spec.tri)
                check(v.x >= -0.5 && v.x <= frame_w - 0.5 && v.y >= -0.5 && v.y <= frame_h - 0.5,
                      "cutout triangle vertex leaves the frame");
            check(triangle_area(spec.tri) >= 4.0, "degenerate cutout triangle");
            for (int y = 0; y < frame_h; ++y)
                for (int x = 0; x < frame_w; ++x)
                    if (point_in_triangle(spec.tri, x, y)) mask.m[size_t(y) * frame_w + x] = 1;
            break;
        }
    }
    int64_t cap = int64_t(frame_h) * frame_w / 2;
    check(mask.area() <= cap, "cutout covers ", mask.area(), " px, more than half of the ",
          frame_w, "x", frame_h, " frame");
    check(mask.area() > 0, "cutout footprint is empty");
    return mask;
}

CutoutSpec sample_cutout_spec(Rng& rng, CutoutShape shape, int frame_h, int frame_w, float fill) {
    const int side_min = std::max(2, int(0.25 * std::min(frame_h, frame_w)));
    const int side_max = std::max(side_min, int(0.50 * std::min(frame_h, frame_w)));
    const int64_t cap = int64_t(frame_h) * frame_w / 2;

    for (int attempt = 0; attempt < 1000; ++attempt) {
        CutoutSpec spec;
        spec.shape = shape;
        spec.fill = fill;
        switch (shape) {
            case CutoutShape::square: {
                int side = rng.uniform_int(side_min, side_max);
                spec.w = spec.h = side;
                spec.x = rng.uniform_int(0, frame_w - side);
                spec.y = rng.uniform_int(0, frame_h - side);
                break;
            }
            case CutoutShape::rectangle: {
                spec.w = rng.uniform_int(side_min, std::max(side_min, frame_w / 2));
                spec.h = rng.uniform_int(side_min, std::max(side_min, frame_h / 2));
                if (spec.w == spec.h) spec.w = std::max(side_min, spec.w - 1);
                spec.x = rng.uniform_int(0, frame_w - spec.w);
                spec.y = rng.uniform_int(0, frame_h - spec.h);
                break;
            }
            case CutoutShape::circle: {
                double rmax = 0.30 * std::min(frame_h, frame_w);
                double rmin = std::max(2.0, 0.15 * std::min(frame_h, frame_w));
                spec.radius = rng.uniform(rmin, std::max(rmin, rmax));
                spec.cx = rng.uniform(spec.radius, frame_w - 1 - spec.radius);
                spec.cy = rng.uniform(spec.radius, frame_h - 1 - spec.radius);
                break;
            }
            case CutoutShape::triangle: {
                double span = rng.uniform(0.35, 0.85) * std::min(frame_h, frame_w);
                double x0 = rng.uniform(0.0, frame_w - 1 - span);
                double y0 = rng.uniform(0.0, frame_h - 1 - span);
                for (auto& v : spec.tri) {
                    v.x = x0 + rng.uniform(0.0, span);
                    v.y = y0 + rng.uniform(0.0, span);
                }
                if (triangle_area(spec.tri) < 16.0) continue;
                break;
            }
        }
        CutoutMask mask = rasterize_cutout(spec, frame_h, frame_w);
        if (mask.area() <= cap) return spec;
    }
    fail("could not sample a valid ", cutout_shape_name(shape), " cutout for a ", frame_w, "x",
         frame_h, " frame");
}

Image apply_cutout(const Image& frame, const CutoutMask& mask, float fill) {
    check(frame.h == mask.h && frame.w == mask.w, "cutout mask ", mask.h, "x", mask.w,
          " does not match frame ", frame.h, "x", frame.w);
    Image out = frame;
    for (int ch = 0; ch < frame.c; ++ch)
        for (size_t p = 0; p < frame.pixels(); ++p)
            if (mask.m[p]) out.data[ch * frame.pixels() + p] = fill;
    return out;
}

std::vector<Image> apply_cutout(const std::vector<Image>& frames, const CutoutMask& mask,
                                float fill) {
    check(!frames.empty(), "cutout: empty clip");
    std::vector<Image> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(apply_cutout(f, mask, fill));
    return out;
}

std::vector<ZoomWindow> zoom_windows(int frame_h, int frame_w, int levels) {
    check(levels >= 1, "zoom: need at least 1 level");
    check(frame_h >= 32 && frame_w >= 32, "zoom: frame must be at least 32x32, got ", frame_w,
          "x", frame_h);
    std::vector<ZoomWindow> wins;
    for (int k = 0; k < levels; ++k) {
        double f = 1.0 + 0.5 * k;
        ZoomWindow w;
        w.h = int(std::lround(frame_h / f));
        w.w = int(std::lround(frame_w / f));
        check(w.h >= 8 && w.w >= 8, "zoom level ", k + 1, " crop ", w.w, "x", w.h,
              " is smaller than 8x8");
        w.y0 = (frame_h - w.h) / 2;
        w.x0 = (frame_w - w.w) / 2;
        wins.push_back(w);
    }
    return wins;
}

std::vector<ZoomWindow> zoom_windows_random(int frame_h, int frame_w, int levels, Rng& rng) {
    auto wins = zoom_windows(frame_h, frame_w, levels);
    for (auto& w : wins) {
        w.y0 = rng.uniform_int(0, frame_h - w.h);
        w.x0 = rng.uniform_int(0, frame_w - w.w);
    }
    return wins;
}

Image apply_zoom(const Image& frame, const ZoomWindow& win) {
    check(win.y0 >= 0 && win.x0 >= 0 && win.y0 + win.h <= frame.h && win.x0 + win.w <= frame.w,
          "zoom window leaves the frame");
    if (win.h == frame.h && win.w == frame.w) return frame;
    Image crop(win.h, win.w, frame.c);
    for (int ch = 0; ch < frame.c; ++ch)
        for (int y = 0; y < win.h; ++y)
            for (int x = 0; x < win.w; ++x) crop.at(ch, y, x) = frame.at(ch, win.y0 + y, win.x0 + x);
    return resize_image(crop, frame.h, frame.w);
}

std::vector<Image> make_zoom_views(const Image& frame, int levels) {
    auto wins = zoom_windows(frame.h, frame.w, levels);
    std::vector<Image> views;
    views.reserve(wins.size());
    for (const auto& w : wins) views.push_back(apply_zoom(frame, w));
    return views;
}

Clip augment_clip(const Clip& clip, Rng& rng, const AugmentFlags& flags) {
    check(!clip.frames.empty(), "augment: empty clip");
    Clip out = clip;

    if (flags.hflip) {
        for (auto& f : out.frames) {
            Image flipped = f;
            for (int ch = 0; ch < f.c; ++ch)
                for (int y = 0; y < f.h; ++y)
                    for (int x = 0; x < f.w; ++x) flipped.at(ch, y, x) = f.at(ch, y, f.w - 1 - x);
            f = std::move(flipped);
        }
        for (auto& m : out.gt) {
            IndexMask flipped = m;
            for (int y = 0; y < m.h; ++y)
                for (int x = 0; x < m.w; ++x) flipped.at(y, x) = m.at(y, m.w - 1 - x);
            m = std::move(flipped);
        }
    }

    if (flags.treverse) {
        std::reverse(out.frames.begin(), out.frames.end());
        std::reverse(out.gt.begin(), out.gt.end());
    }

    if (flags.rcrop) {
        int h = out.frames.front().h, w = out.frames.front().w;
        double scale = rng.uniform(flags.crop_min_scale, 1.0);
        int ch = std::max(8, int(std::lround(h * scale)));
        int cw = std::max(8, int(std::lround(w * scale)));
        check(ch <= h && cw <= w, "crop ", cw, "x", ch, " larger than frame ", w, "x", h);
        int y0 = rng.uniform_int(0, h - ch);
        int x0 = rng.uniform_int(0, w - cw);
        for (auto& f : out.frames) {
            Image crop(ch, cw, f.c);
            for (int c = 0; c < f.c; ++c)
                for (int y = 0; y < ch; ++y)
                    for (int x = 0; x < cw; ++x) crop.at(c, y, x) = f.at(c, y0 + y, x0 + x);
            f = resize_image(crop, h, w);
        }
        for (auto& m : out.gt) {
            IndexMask crop(ch, cw);
            for (int y = 0; y < ch; ++y)
                for (int x = 0; x < cw; ++x) crop.at(y, x) = m.at(y0 + y, x0 + x);
            m = resize_mask(crop, h, w);
        }
    }
    return out;
}

Image resize_image(const Image& img, int out_h, int out_w) {
    if (img.h == out_h && img.w == out_w) return img;
    Image out(out_h, out_w, img.c);
    std::vector<detail::LerpTap> ty(out_h), tx(out_w);
    for (int i = 0; i < out_h; ++i) ty[i] = detail::lerp_tap(i, out_h, img.h);
    for (int j = 0; j < out_w; ++j) tx[j] = detail::lerp_tap(j, out_w, img.w);
    for (int ch = 0; ch < img.c; ++ch)
        for (int i = 0; i < out_h; ++i)
            for (int j = 0; j < out_w; ++j) {
                const auto& a = ty[i];
                const auto& b = tx[j];
                out.at(ch, i, j) = float(
                    a.w0 * (b.w0 * img.at(ch, a.i0, b.i0) + b.w1 * img.at(ch, a.i0, b.i1)) +
                    a.w1 * (b.w0 * img.at(ch, a.i1, b.i0) + b.w1 * img.at(ch, a.i1, b.i1)));
            }
    return out;
}

IndexMask resize_mask(const IndexMask& m, int out_h, int out_w) {
    if (m.h == out_h && m.w == out_w) return m;
    IndexMask out(out_h, out_w);
    for (int i = 0; i < out_h; ++i) {
        int sy = std::min(m.h - 1, int((i + 0.5) * m.h / out_h));
        for (int j = 0; j < out_w; ++j) {
            int sx = std::min(m.w - 1, int((j + 0.5) * m.w / out_w));
            out.at(i, j) = m.at(sy, sx);
        }
    }
    return out;
}

Image to_model_range(const Image& img) {
    Image out = img;
    for (auto& v : out.data) {
        check(v >= -1e-6f && v <= 1.f + 1e-6f, "to_model_range: value ", v, " outside [0, 1]");
        v = 2.f * v - 1.f;
    }
    return out;
}

Image from_model_range(const Image& img) {
    Image out = img;
    for (auto& v : out.data) {
        check(v >= -1.f - 1e-6f && v <= 1.f + 1e-6f, "from_model_range: value ", v,
              " outside [-1, 1]");
        v = 0.5f * (v + 1.f);
    }
    return out;
}

namespace {

float srgb_to_linear(float c) {
    return c <= 0.04045f ? c / 12.92f : std::pow((c + 0.055f) / 1.055f, 2.4f);
}
float linear_to_srgb(float c) {
    return c <= 0.0031308f ? 12.92f * c : 1.055f * std::pow(c, 1.f / 2.4f) - 0.055f;
}
float lab_f(float t) {
    constexpr float d = 6.f / 29.f;
    return t > d * d * d ? std::cbrt(t) : t / (3 * d * d) + 4.f / 29.f;
}
float lab_finv(float t) {
    constexpr float d = 6.f / 29.f;
    return t > d ? t * t * t : 3 * d * d * (t - 4.f / 29.f);
}

}  // namespace

Image rgb_to_lab(const Image& img) {
    check(img.c == 3, "rgb_to_lab: expected 3 channels");
    Image out(img.h, img.w, 3);
    for (size_t p = 0; p < img.pixels(); ++p) {
        float r = srgb_to_linear(img.data[p]);
        float g = srgb_to_linear(img.data[img.pixels() + p]);
        float b = srgb_to_linear(img.data[2 * img.pixels() + p]);
        // D65 white point
        float xn = (0.4124f * r + 0.3576f * g + 0.1805f * b) / 0.95047f;
        float yn = 0.2126f * r + 0.7152f * g + 0.0722f * b;
        float zn = (0.0193f * r + 0.1192f * g + 0.9505f * b) / 1.08883f;
        float fx = lab_f(xn), fy = lab_f(yn), fz = lab_f(zn);
        out.data[p] = (116.f * fy - 16.f) / 100.f;
        out.data[img.pixels() + p] = (500.f * (fx - fy) + 110.f) / 220.f;
        out.data[2 * img.pixels() + p] = (200.f * (fy - fz) + 110.f) / 220.f;
    }
    return out;
}

Image lab_to_rgb(const Image& img) {
    check(img.c == 3, "lab_to_rgb: expected 3 channels");
    Image out(img.h, img.w, 3);
    for (size_t p = 0; p < img.pixels(); ++p) {
        float L = img.data[p] * 100.f;
        float a = img.data[img.pixels() + p] * 220.f - 110.f;
        float b = img.data[2 * img.pixels() + p] * 220.f - 110.f;
        float fy = (L + 16.f) / 116.f;
        float fx = fy + a / 500.f;
        float fz = fy - b / 200.f;
        float x = 0.95047f * lab_finv(fx);
        float y = lab_finv(fy);
        float z = 1.08883f * lab_finv(fz);
        float r = 3.2406f * x - 1.5372f * y - 0.4986f * z;
        float g = -0.9689f * x + 1.8758f * y + 0.0415f * z;
        float bl = 0.0557f * x - 0.2040f * y + 1.0570f * z;
        auto clamp01 = [](float v) { return std::min(1.f, std::max(0.f, v)); };
        out.data[p] = clamp01(linear_to_srgb(r));
        out.data[img.pixels() + p] = clamp01(linear_to_srgb(g));
        out.data[2 * img.pixels() + p] = clamp01(linear_to_srgb(bl));
    }
    return out;
}

}  // namespace ctvos
