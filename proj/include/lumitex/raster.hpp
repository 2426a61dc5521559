// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lumitex/camera.hpp"
#include "lumitex/image.hpp"
#include "lumitex/mesh.hpp"

namespace lumitex {

struct RasterDiag {
    int degenerate_tris = 0;
    int behind_camera_tris = 0;
    int uv_wraps = 0;
};

// Per-view pixel-aligned geometry conditions. normal/canonical are remapped
// to [0,1]; depth is raw camera distance; all zero where mask is 0.
struct GeoMaps {
    Image normal;     // 3ch, (n+1)/2
    Image canonical;  // 3ch, (p+1)/2
    Image plucker;    // 6ch raw (d, m)
    Image depth;      // 1ch camera distance
    Image mask;       // 1ch 0/1
};

// Winning fragment per pixel after the z-buffered pass (tri < 0 = empty).
struct Fragment {
    int tri = -1;
    double beta[3] = {0, 0, 0};  // perspective-correct surface barycentrics
    double depth = 0;
};

// Z-buffered perspective rasterization with perspective-correct barycentrics.
// Backfaces are culled (single-sided); zero-area triangles are skipped and
// counted in diag.
std::vector<Fragment> rasterize_fragments(const TriMesh& mesh, const ViewSpec& view,
                                          RasterDiag* diag = nullptr);

GeoMaps rasterize(const TriMesh& mesh, const ViewSpec& view, RasterDiag* diag = nullptr);

// Per-pixel atlas texel id (-1 where empty). UVs outside [0,1]^2 wrap with
// repeat addressing (counted in diag).
std::vector<int32_t> rasterize_uv_ids(const TriMesh& mesh, const ViewSpec& view, int atlas_res,
                                      RasterDiag* diag = nullptr);

// UV-space occupancy table: one entry per texel with the owning triangle,
// its surface point/normal, and whether the texel center lies strictly
// inside the owner's UV footprint. Occupancy is conservative (texels whose
// square overlaps a UV triangle), with clamped surface points for the
// boundary ring so every occupied texel is bake-able.
struct MeshAtlas {
    int res = 0;
    struct Texel {
        int tri = -1;
        Vec3 pos;
        Vec3 normal;
        bool strict = false;
    };
    std::vector<Texel> texels;      // res*res, id = ty*res+tx
    std::vector<uint8_t> occupied;  // 0/1 per texel
    int64_t occupied_count = 0;
};

MeshAtlas build_mesh_atlas(const TriMesh& mesh, int atlas_res);

constexpr double kGrazingCutoff = 0.2;

// Texels of the atlas observed by this view: texel surface point in front,
// inside the image, unoccluded (segment cast against all triangles), facing
// the camera, and not grazing (|n . view_dir| >= cutoff).
std::vector<uint8_t> visible_texels(const TriMesh& mesh, const MeshAtlas& atlas,
                                    const ViewSpec& view, double grazing_cutoff = kGrazingCutoff);
std::vector<uint8_t> visible_texels(const TriMesh& mesh, const ViewSpec& view, int atlas_res,
                                    double grazing_cutoff = kGrazingCutoff);

// True if the open segment origin->target is blocked by any triangle
// (hit parameter in (eps, 1-eps)); skip_tri is exempt.
bool segment_occluded(const TriMesh& mesh, const Vec3& origin, const Vec3& target, int skip_tri);

// Raw little-endian bitmap (LSB-first within each byte) + JSON sidecar
// {"atlas_res", "count"} at path + ".json".
void bitset_save(const std::string& path, const std::vector<uint8_t>& bits, int atlas_res);
std::vector<uint8_t> bitset_load(const std::string& path, int* atlas_res = nullptr);

}  // namespace lumitex
