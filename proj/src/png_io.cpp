#include "ctvos/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

namespace ctvos {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

uint8_t to_byte(float v) {
    float x = v <= 0.f ? 0.f : (v >= 1.f ? 1.f : v);
    return uint8_t(x * 255.f + 0.5f);
}

}  // namespace

void write_rgb_png(const std::string& path, const Image& img) {
    check(img.c == 3, "write_rgb_png: expected 3 channels, got ", img.c);
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    check(fp != nullptr, "cannot open ", path, " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    check(png, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail("png write error for ", path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, png_uint_32(img.w), png_uint_32(img.h), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<uint8_t> row(size_t(img.w) * 3);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < 3; ++ch) row[size_t(x) * 3 + ch] = to_byte(img.at(ch, y, x));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_rgb_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    check(fp != nullptr, "cannot open ", path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    check(png, "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("unreadable PNG: ", path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    // Normalize whatever we find to 8-bit RGB.
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_set_palette_to_rgb(png);
    png_read_update_info(png, info);

    int w = int(png_get_image_width(png, info));
    int h = int(png_get_image_height(png, info));
    check(png_get_channels(png, info) == 3, "unexpected channel count in ", path);

    Image img(h, w, 3);
    std::vector<uint8_t> row(size_t(w) * 3);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = float(row[size_t(x) * 3 + ch]) / 255.f;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_indexed_png(const std::string& path, const IndexMask& mask) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    check(fp != nullptr, "cannot open ", path, " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    check(png, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail("png write error for ", path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, png_uint_32(mask.w), png_uint_32(mask.h), 8, PNG_COLOR_TYPE_PALETTE,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_color palette[256];
    const auto& base = mask_palette();
    for (int i = 0; i < 256; ++i) {
        const auto& c = i == 0 ? base[0] : base[size_t(1 + (i - 1) % 8)];
        palette[i] = {c[0], c[1], c[2]};
    }
    png_set_PLTE(png, info, palette, 256);
    png_write_info(png, info);
    for (int y = 0; y < mask.h; ++y)
        png_write_row(png, const_cast<png_bytep>(mask.idx.data() + size_t(y) * mask.w));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

IndexMask read_indexed_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    check(fp != nullptr, "cannot open ", path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    check(png, "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("unreadable PNG: ", path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    int color = png_get_color_type(png, info);
    check(color == PNG_COLOR_TYPE_PALETTE || color == PNG_COLOR_TYPE_GRAY,
          "mask PNG must be palette or gray: ", path);
    if (png_get_bit_depth(png, info) < 8) png_set_packing(png);
    png_set_strip_16(png);
    png_read_update_info(png, info);

    int w = int(png_get_image_width(png, info));
    int h = int(png_get_image_height(png, info));
    IndexMask mask(h, w);
    for (int y = 0; y < h; ++y)
        png_read_row(png, mask.idx.data() + size_t(y) * w, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return mask;
}

}  // namespace ctvos
