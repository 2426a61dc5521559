// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#include "lumitex/image.hpp"

#include <png.h>

#include <cstdio>
#include <filesystem>

namespace lumitex {

double Image::sample_bilinear(double y, double x, int c) const {
    double fx = std::clamp(x, 0.0, double(w - 1));
    double fy = std::clamp(y, 0.0, double(h - 1));
    int x0 = int(std::floor(fx)), y0 = int(std::floor(fy));
    int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    double tx = fx - x0, ty = fy - y0;
    double a = at(y0, x0, c) * (1 - tx) + at(y0, x1, c) * tx;
    double b = at(y1, x0, c) * (1 - tx) + at(y1, x1, c) * tx;
    return a * (1 - ty) + b * ty;
}

namespace {

struct FileCloser {
    FILE* f;
    ~FileCloser() {
        if (f) std::fclose(f);
    }
};

void write_png_impl(const std::string& path, const Image& im, int bit_depth) {
    require(im.ch == 1 || im.ch == 3, "write_png: image must have 1 or 3 channels");
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    FILE* f = std::fopen(path.c_str(), "wb");
    require(f != nullptr, "write_png: cannot open " + path);
    FileCloser closer{f};

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ContractError("write_png: libpng failure on " + path);
    }
    png_init_io(png, f);
    int color = im.ch == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, png_uint_32(im.w), png_uint_32(im.h), bit_depth, color,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);  // we feed little-endian u16

    double maxv = bit_depth == 8 ? 255.0 : 65535.0;
    if (bit_depth == 8) {
        std::vector<unsigned char> row(size_t(im.w) * im.ch);
        for (int y = 0; y < im.h; ++y) {
            for (int x = 0; x < im.w; ++x)
                for (int c = 0; c < im.ch; ++c)
                    row[size_t(x) * im.ch + c] = (unsigned char)std::lround(
                        std::clamp(im.at(y, x, c), 0.0, 1.0) * maxv);
            png_write_row(png, row.data());
        }
    } else {
        std::vector<uint16_t> row(size_t(im.w) * im.ch);
        for (int y = 0; y < im.h; ++y) {
            for (int x = 0; x < im.w; ++x)
                for (int c = 0; c < im.ch; ++c)
                    row[size_t(x) * im.ch + c] =
                        (uint16_t)std::lround(std::clamp(im.at(y, x, c), 0.0, 1.0) * maxv);
            png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
        }
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png8(const std::string& path, const Image& im) { write_png_impl(path, im, 8); }
void write_png16(const std::string& path, const Image& im) { write_png_impl(path, im, 16); }

Image read_png(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    require(f != nullptr, "read_png: cannot open " + path);
    FileCloser closer{f};

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ContractError("read_png: libpng failure on " + path);
    }
    png_init_io(png, f);
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int depth = png_get_bit_depth(png, info);
    int color = png_get_color_type(png, info);

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);
    png_read_update_info(png, info);

    depth = png_get_bit_depth(png, info);
    int ch = int(png_get_channels(png, info));
    Image im = Image::zeros(int(w), int(h), ch);
    double maxv = depth == 8 ? 255.0 : 65535.0;

    if (depth == 8) {
        std::vector<unsigned char> row(size_t(w) * ch);
        for (png_uint_32 y = 0; y < h; ++y) {
            png_read_row(png, row.data(), nullptr);
            for (png_uint_32 x = 0; x < w; ++x)
                for (int c = 0; c < ch; ++c)
                    im.at(int(y), int(x), c) = double(row[size_t(x) * ch + c]) / maxv;
        }
    } else {
        std::vector<uint16_t> row(size_t(w) * ch);
        for (png_uint_32 y = 0; y < h; ++y) {
            png_read_row(png, reinterpret_cast<png_bytep>(row.data()), nullptr);
            for (png_uint_32 x = 0; x < w; ++x)
                for (int c = 0; c < ch; ++c)
                    im.at(int(y), int(x), c) = double(row[size_t(x) * ch + c]) / maxv;
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return im;
}

}  // namespace lumitex
