// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "lumitex/vec.hpp"

namespace lumitex {

// Triangle mesh in canonical object space: positions inside [-1,1]^3 after
// load-time normalization, per-corner UVs in [0,1]^2.
struct TriMesh {
    struct Tri {
        int v[3];
        Vec2 uv[3];
    };

    std::vector<Vec3> positions;
    std::vector<Vec3> vnormals;  // optional; empty or one per position
    std::vector<Tri> tris;

    bool has_vertex_normals() const { return vnormals.size() == positions.size(); }

    Vec3 face_normal(int t) const {
        const Tri& tr = tris[size_t(t)];
        return normalized(cross(positions[size_t(tr.v[1])] - positions[size_t(tr.v[0])],
                                positions[size_t(tr.v[2])] - positions[size_t(tr.v[0])]));
    }
};

// Centers the bounding box at the origin and scales the largest half-extent
// to 1 so the mesh tightly fits [-1,1]^3.
void normalize_mesh(TriMesh& mesh);

// Wavefront OBJ with v/vt/f (vn optional). Polygons are fan-triangulated.
// Faces without UV indices raise "mesh has no UV atlas".
TriMesh load_obj(const std::string& path);
void save_obj(const std::string& path, const TriMesh& mesh);

// Procedural primitives (already canonical scale, outward CCW winding).
TriMesh make_cube();                              // 8 positions, 12 tris, 3x2 UV chart grid
TriMesh make_icosphere(int subdiv);               // per-face UV chart grid
TriMesh make_uv_sphere(int stacks, int slices);   // lat-long UVs, seam duplicated
TriMesh make_cylinder(int segments);              // side chart + two cap discs

}  // namespace lumitex
