// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "lumitex/image.hpp"
#include "lumitex/tensor.hpp"

namespace lumitex {

enum class TokenTag { Image, Geometry, MaterialEmbedding, Latent };

struct TokenInfo {
    TokenTag tag = TokenTag::Latent;
    int view = 0;
    int row = 0;
    int col = 0;
};

// A [T, d] token tensor plus per-token provenance (tag, view, grid cell).
struct TokenSet {
    Tensor tokens;
    std::vector<TokenInfo> info;
};

// image [res, res, C] -> [L, patch*patch*C], patches in row-major order,
// each row laid out (py, px, c).
Tensor patchify(const Image& im, int patch);
// n stacked views -> [n*L, pd]
Tensor patchify_views(const std::vector<Image>& ims, int patch);
std::vector<Image> unpatchify_views(const Tensor& x, int n_views, int res, int patch, int channels,
                                    bool clamp);

}  // namespace lumitex
