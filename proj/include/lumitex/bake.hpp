// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include "lumitex/raster.hpp"

namespace lumitex {

// Tracks which occupied texels have been covered by some view, plus the
// best back-projection score seen per texel.
struct CoverageState {
    int res = 0;
    std::vector<uint8_t> occupied;
    std::vector<uint8_t> covered;
    std::vector<double> best_score;

    static CoverageState from_atlas(const MeshAtlas& atlas);

    int64_t occupied_count() const;
    int64_t covered_count() const;
    double ratio() const;  // covered / occupied, 0 when nothing occupied
    // adds a view's visible set; returns the number of newly covered texels
    int64_t add(const std::vector<uint8_t>& visible);
};

// UV-space PBR texture set. covered marks baked texels, dilated marks
// seam-fill texels; everything else is zero.
struct TextureAtlas {
    int res = 0;
    Image albedo;     // res x res, 3ch, row = ty (v grows with row index)
    Image metallic;   // 1ch
    Image roughness;  // 1ch
    std::vector<uint8_t> occupied;
    std::vector<uint8_t> covered;
    std::vector<uint8_t> dilated;

    static TextureAtlas zeros(int res);

    // Bilinear sample with texel centers at (t+0.5)/res; c in 0..4 mapping
    // (albedo rgb, metallic, roughness).
    double sample(double u, double v, int c) const;
};

// K cameras on a Fibonacci sphere looking at the origin.
std::vector<ViewSpec> candidate_set(int K, double radius, double fov, int res);

struct GreedyReport {
    std::vector<int> picked;       // candidate indices, selection order
    std::vector<int64_t> gains;    // newly covered texels per pick
    std::vector<double> coverage;  // ratio after each pick
    double coverage_before = 0;
};

// Greedy uncovered-area view selection. Iterative mode re-ranks after each
// pick; static mode ranks once against the initial coverage and takes the
// top M. Ties break toward the lower candidate index.
std::vector<ViewSpec> greedy_select(const TriMesh& mesh, const MeshAtlas& atlas,
                                    const std::vector<ViewSpec>& candidates,
                                    const std::vector<ViewSpec>& initial_views, int M,
                                    GreedyReport* report = nullptr, bool iterative = true);

// One view's contribution to the bake. mr may be empty (w == 0); its
// channels are (metallic, roughness, unused).
struct BakeView {
    ViewSpec view;
    Image albedo;
    Image mr;
};

struct BakeResult {
    TextureAtlas atlas;
    CoverageState coverage;
};

// Back-projects per-view images into the atlas. Winner-take-all by
// frontality score |n . view_dir| unless weighted, which blends by score.
BakeResult bake(const TriMesh& mesh, const MeshAtlas& atlas, const std::vector<BakeView>& views,
                bool weighted = false);

// Fills uncovered occupied texels within `radius` (euclidean, in texels) of
// a covered texel with the nearest covered value. Covered texels and the
// coverage mask are untouched; fills are tracked in `dilated`.
TextureAtlas seam_dilate(const TextureAtlas& atlas, int radius);

// JSON-serializable report: occupied/covered counts, ratio, per-pick gains.
nlohmann::json coverage_report(const CoverageState& state, const GreedyReport* greedy = nullptr);

}  // namespace lumitex
