// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "lumitex/common.hpp"

namespace lumitex {

// Dense row-major image, fp64 channels, nominal range [0,1].
struct Image {
    int w = 0, h = 0, ch = 0;
    std::vector<double> px;

    static Image zeros(int w, int h, int ch) {
        Image im;
        im.w = w;
        im.h = h;
        im.ch = ch;
        im.px.assign(size_t(w) * h * ch, 0.0);
        return im;
    }

    double at(int y, int x, int c) const { return px[(size_t(y) * w + x) * ch + c]; }
    double& at(int y, int x, int c) { return px[(size_t(y) * w + x) * ch + c]; }

    bool same_shape(const Image& o) const { return w == o.w && h == o.h && ch == o.ch; }

    // Bilinear sample at continuous pixel coordinates (centers at integers),
    // clamped at borders.
    double sample_bilinear(double y, double x, int c) const;
};

// Quantizes to the PNG bit depth (values clamped to [0,1]). 1 or 3 channels.
void write_png8(const std::string& path, const Image& im);
void write_png16(const std::string& path, const Image& im);
Image read_png(const std::string& path);  // 8- or 16-bit, returns [0,1]

// Round-trip helper: the value an 8-bit PNG write-then-read yields.
inline double quantize8(double v) {
    double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    return q / 255.0;
}

}  // namespace lumitex
