// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#include "lumitex/tokens.hpp"

#include <algorithm>

namespace lumitex {

Tensor patchify(const Image& im, int patch) {
    require(im.w == im.h && im.w % patch == 0,
            "patchify: image " + std::to_string(im.w) + "x" + std::to_string(im.h) +
                " not divisible by patch " + std::to_string(patch));
    int grid = im.w / patch;
    int64_t L = int64_t(grid) * grid;
    int64_t pd = int64_t(patch) * patch * im.ch;
    Tensor out = Tensor::zeros({L, pd});
    for (int pr = 0; pr < grid; ++pr)
        for (int pc = 0; pc < grid; ++pc) {
            double* row = out.data().data() + (int64_t(pr) * grid + pc) * pd;
            int64_t at = 0;
            for (int py = 0; py < patch; ++py)
                for (int px = 0; px < patch; ++px)
                    for (int c = 0; c < im.ch; ++c)
                        row[at++] = im.at(pr * patch + py, pc * patch + px, c);
        }
    return out;
}

Tensor patchify_views(const std::vector<Image>& ims, int patch) {
    require(!ims.empty(), "patchify_views: empty view list");
    std::vector<Tensor> per;
    per.reserve(ims.size());
    for (const auto& im : ims) per.push_back(patchify(im, patch));
    return concat_rows(per);
}

std::vector<Image> unpatchify_views(const Tensor& x, int n_views, int res, int patch, int channels,
                                    bool clamp) {
    int grid = res / patch;
    int64_t L = int64_t(grid) * grid;
    int64_t pd = int64_t(patch) * patch * channels;
    require(x.rows() == n_views * L && x.cols() == pd,
            "unpatchify_views: tensor " + shape_str(x.shape()) + " does not match " +
                std::to_string(n_views) + " views of " + std::to_string(res) + "^2/" +
                std::to_string(patch));
    std::vector<Image> out;
    for (int v = 0; v < n_views; ++v) {
        Image im = Image::zeros(res, res, channels);
        for (int pr = 0; pr < grid; ++pr)
            for (int pc = 0; pc < grid; ++pc) {
                const double* row = x.data().data() + ((int64_t(v) * L) + pr * grid + pc) * pd;
                int64_t at = 0;
                for (int py = 0; py < patch; ++py)
                    for (int px = 0; px < patch; ++px)
                        for (int c = 0; c < channels; ++c) {
                            double val = row[at++];
                            im.at(pr * patch + py, pc * patch + px, c) =
                                clamp ? std::clamp(val, 0.0, 1.0) : val;
                        }
            }
        out.push_back(std::move(im));
    }
    return out;
}

}  // namespace lumitex
