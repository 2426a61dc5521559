// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#include "lumitex/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "lumitex/common.hpp"

namespace lumitex {

namespace {
constexpr double kNearClip = 1e-4;
}  // namespace

std::vector<Fragment> rasterize_fragments(const TriMesh& mesh, const ViewSpec& view,
                                          RasterDiag* diag) {
    view.validate();
    const int w = view.width, h = view.height;
    std::vector<Fragment> frags(size_t(w) * h);
    for (auto& f : frags) f.depth = std::numeric_limits<double>::infinity();
    Mat3 w2c = view.rot.transposed();

    for (int t = 0; t < int(mesh.tris.size()); ++t) {
        const auto& tr = mesh.tris[size_t(t)];
        Vec3 p[3] = {mesh.positions[size_t(tr.v[0])], mesh.positions[size_t(tr.v[1])],
                     mesh.positions[size_t(tr.v[2])]};
        // single-sided: cull triangles facing away from the camera
        Vec3 fn = cross(p[1] - p[0], p[2] - p[0]);
        if (dot(fn, view.pos - p[0]) <= 0.0) continue;

        Vec3 pc[3];
        bool behind = false;
        for (int i = 0; i < 3; ++i) {
            pc[i] = w2c * (p[i] - view.pos);
            if (pc[i].z > -kNearClip) behind = true;
        }
        if (behind) {
            if (diag) diag->behind_camera_tris++;
            continue;
        }

        double tan_half = std::tan(view.fov * 0.5);
        double aspect = double(w) / double(h);
        double sx[3], sy[3], invw[3];
        for (int i = 0; i < 3; ++i) {
            double wz = -pc[i].z;
            invw[i] = 1.0 / wz;
            double ndc_x = pc[i].x / wz / (tan_half * aspect);
            double ndc_y = pc[i].y / wz / tan_half;
            sx[i] = (ndc_x + 1.0) * 0.5 * w - 0.5;
            sy[i] = (1.0 - ndc_y) * 0.5 * h - 0.5;
        }
        double area2 = (sx[1] - sx[0]) * (sy[2] - sy[0]) - (sy[1] - sy[0]) * (sx[2] - sx[0]);
        if (std::abs(area2) < 1e-12) {
            if (diag) diag->degenerate_tris++;
            continue;
        }
        int x0 = std::max(0, int(std::ceil(std::min({sx[0], sx[1], sx[2]}))));
        int x1 = std::min(w - 1, int(std::floor(std::max({sx[0], sx[1], sx[2]}))));
        int y0 = std::max(0, int(std::ceil(std::min({sy[0], sy[1], sy[2]}))));
        int y1 = std::min(h - 1, int(std::floor(std::max({sy[0], sy[1], sy[2]}))));
        double inv_area = 1.0 / area2;

        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                double l0 = ((sx[1] - x) * (sy[2] - y) - (sy[1] - y) * (sx[2] - x)) * inv_area;
                double l1 = ((sx[2] - x) * (sy[0] - y) - (sy[2] - y) * (sx[0] - x)) * inv_area;
                double l2 = 1.0 - l0 - l1;
                if (l0 < 0 || l1 < 0 || l2 < 0) continue;
                double d0 = l0 * invw[0], d1 = l1 * invw[1], d2 = l2 * invw[2];
                double denom = d0 + d1 + d2;
                double b0 = d0 / denom, b1 = d1 / denom, b2 = d2 / denom;
                Vec3 sp = p[0] * b0 + p[1] * b1 + p[2] * b2;
                double depth = norm(sp - view.pos);
                Fragment& fr = frags[size_t(y) * w + x];
                if (depth < fr.depth) {
                    fr.tri = t;
                    fr.beta[0] = b0;
                    fr.beta[1] = b1;
                    fr.beta[2] = b2;
                    fr.depth = depth;
                }
            }
        }
    }
    return frags;
}

GeoMaps rasterize(const TriMesh& mesh, const ViewSpec& view, RasterDiag* diag) {
    auto frags = rasterize_fragments(mesh, view, diag);
    const int w = view.width, h = view.height;
    GeoMaps g;
    g.normal = Image::zeros(w, h, 3);
    g.canonical = Image::zeros(w, h, 3);
    g.depth = Image::zeros(w, h, 1);
    g.mask = Image::zeros(w, h, 1);
    g.plucker = plucker_map(view);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Fragment& fr = frags[size_t(y) * w + x];
            if (fr.tri < 0) continue;
            const auto& tr = mesh.tris[size_t(fr.tri)];
            Vec3 p = mesh.positions[size_t(tr.v[0])] * fr.beta[0] +
                     mesh.positions[size_t(tr.v[1])] * fr.beta[1] +
                     mesh.positions[size_t(tr.v[2])] * fr.beta[2];
            Vec3 n;
            if (mesh.has_vertex_normals()) {
                n = normalized(mesh.vnormals[size_t(tr.v[0])] * fr.beta[0] +
                               mesh.vnormals[size_t(tr.v[1])] * fr.beta[1] +
                               mesh.vnormals[size_t(tr.v[2])] * fr.beta[2]);
            } else {
                n = mesh.face_normal(fr.tri);
            }
            for (int c = 0; c < 3; ++c) {
                g.normal.at(y, x, c) = (n[c] + 1.0) * 0.5;
                g.canonical.at(y, x, c) = (p[c] + 1.0) * 0.5;
            }
            g.depth.at(y, x, 0) = fr.depth;
            g.mask.at(y, x, 0) = 1.0;
        }
    }
    return g;
}

std::vector<int32_t> rasterize_uv_ids(const TriMesh& mesh, const ViewSpec& view, int atlas_res,
                                      RasterDiag* diag) {
    auto frags = rasterize_fragments(mesh, view, diag);
    const int w = view.width, h = view.height;
    std::vector<int32_t> ids(size_t(w) * h, -1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Fragment& fr = frags[size_t(y) * w + x];
            if (fr.tri < 0) continue;
            const auto& tr = mesh.tris[size_t(fr.tri)];
            double u = tr.uv[0].u * fr.beta[0] + tr.uv[1].u * fr.beta[1] + tr.uv[2].u * fr.beta[2];
            double v = tr.uv[0].v * fr.beta[0] + tr.uv[1].v * fr.beta[1] + tr.uv[2].v * fr.beta[2];
            if (u < 0 || u >= 1 || v < 0 || v >= 1) {
                if (diag) diag->uv_wraps++;
                u -= std::floor(u);
                v -= std::floor(v);
            }
            int tx = std::min(atlas_res - 1, int(u * atlas_res));
            int ty = std::min(atlas_res - 1, int(v * atlas_res));
            ids[size_t(y) * w + x] = int32_t(ty) * atlas_res + tx;
        }
    }
    return ids;
}

namespace {

// distance from point to a 2D triangle (0 inside), plus the closest point
double point_tri_dist2d(Vec2 q, Vec2 a, Vec2 b, Vec2 c, Vec2* closest) {
    auto cross2 = [](Vec2 p, Vec2 r) { return p.u * r.v - p.v * r.u; };
    double area = cross2(b - a, c - a);
    double l0 = area != 0 ? cross2(b - q, c - q) / area : -1;
    double l1 = area != 0 ? cross2(c - q, a - q) / area : -1;
    double l2 = 1.0 - l0 - l1;
    if (l0 >= 0 && l1 >= 0 && l2 >= 0) {
        *closest = q;
        return 0.0;
    }
    // closest point on one of the segments
    auto seg = [&](Vec2 s0, Vec2 s1) -> std::pair<double, Vec2> {
        Vec2 d = s1 - s0;
        double len2 = d.u * d.u + d.v * d.v;
        double t = len2 > 0 ? ((q.u - s0.u) * d.u + (q.v - s0.v) * d.v) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        Vec2 cp = s0 + d * t;
        double du = q.u - cp.u, dv = q.v - cp.v;
        return {std::sqrt(du * du + dv * dv), cp};
    };
    auto [da, ca] = seg(a, b);
    auto [db, cb] = seg(b, c);
    auto [dc, cc] = seg(c, a);
    double best = da;
    Vec2 cp = ca;
    if (db < best) {
        best = db;
        cp = cb;
    }
    if (dc < best) {
        best = dc;
        cp = cc;
    }
    *closest = cp;
    return best;
}

// UV barycentrics of point q in triangle (a,b,c)
void uv_barycentrics(Vec2 q, Vec2 a, Vec2 b, Vec2 c, double out[3]) {
    auto cross2 = [](Vec2 p, Vec2 r) { return p.u * r.v - p.v * r.u; };
    double area = cross2(b - a, c - a);
    if (area == 0) {
        out[0] = 1;
        out[1] = 0;
        out[2] = 0;
        return;
    }
    out[0] = cross2(b - q, c - q) / area;
    out[1] = cross2(c - q, a - q) / area;
    out[2] = 1.0 - out[0] - out[1];
}

}  // namespace

MeshAtlas build_mesh_atlas(const TriMesh& mesh, int atlas_res) {
    require(atlas_res >= 1, "build_mesh_atlas: atlas_res must be >= 1");
    MeshAtlas atlas;
    atlas.res = atlas_res;
    atlas.texels.assign(size_t(atlas_res) * atlas_res, {});
    atlas.occupied.assign(size_t(atlas_res) * atlas_res, 0);
    std::vector<double> best_dist(size_t(atlas_res) * atlas_res,
                                  std::numeric_limits<double>::infinity());
    const double half_diag = 0.5 * std::sqrt(2.0) / atlas_res;

    for (int t = 0; t < int(mesh.tris.size()); ++t) {
        const auto& tr = mesh.tris[size_t(t)];
        Vec2 a = tr.uv[0], b = tr.uv[1], c = tr.uv[2];
        double umin = std::min({a.u, b.u, c.u}), umax = std::max({a.u, b.u, c.u});
        double vmin = std::min({a.v, b.v, c.v}), vmax = std::max({a.v, b.v, c.v});
        int tx0 = std::max(0, int(umin * atlas_res) - 1);
        int tx1 = std::min(atlas_res - 1, int(umax * atlas_res) + 1);
        int ty0 = std::max(0, int(vmin * atlas_res) - 1);
        int ty1 = std::min(atlas_res - 1, int(vmax * atlas_res) + 1);
        Vec3 fnorm = mesh.face_normal(t);
        for (int ty = ty0; ty <= ty1; ++ty) {
            for (int tx = tx0; tx <= tx1; ++tx) {
                size_t id = size_t(ty) * atlas_res + tx;
                if (atlas.texels[id].strict) continue;
                Vec2 center{(tx + 0.5) / atlas_res, (ty + 0.5) / atlas_res};
                Vec2 closest;
                double dist = point_tri_dist2d(center, a, b, c, &closest);
                if (dist == 0.0) {
                    // strict ownership: first (lowest-index) triangle wins
                    double l[3];
                    uv_barycentrics(center, a, b, c, l);
                    auto& tex = atlas.texels[id];
                    tex.tri = t;
                    tex.strict = true;
                    tex.pos = mesh.positions[size_t(tr.v[0])] * l[0] +
                              mesh.positions[size_t(tr.v[1])] * l[1] +
                              mesh.positions[size_t(tr.v[2])] * l[2];
                    tex.normal = fnorm;
                    atlas.occupied[id] = 1;
                } else if (dist <= half_diag && dist < best_dist[id]) {
                    best_dist[id] = dist;
                    double l[3];
                    uv_barycentrics(closest, a, b, c, l);
                    auto& tex = atlas.texels[id];
                    tex.tri = t;
                    tex.strict = false;
                    tex.pos = mesh.positions[size_t(tr.v[0])] * l[0] +
                              mesh.positions[size_t(tr.v[1])] * l[1] +
                              mesh.positions[size_t(tr.v[2])] * l[2];
                    tex.normal = fnorm;
                    atlas.occupied[id] = 1;
                }
            }
        }
    }
    for (uint8_t o : atlas.occupied) atlas.occupied_count += o;
    return atlas;
}

bool segment_occluded(const TriMesh& mesh, const Vec3& origin, const Vec3& target, int skip_tri) {
    Vec3 dir = target - origin;
    const double eps = 1e-9;
    for (int t = 0; t < int(mesh.tris.size()); ++t) {
        if (t == skip_tri) continue;
        const auto& tr = mesh.tris[size_t(t)];
        const Vec3& p0 = mesh.positions[size_t(tr.v[0])];
        Vec3 e1 = mesh.positions[size_t(tr.v[1])] - p0;
        Vec3 e2 = mesh.positions[size_t(tr.v[2])] - p0;
        Vec3 pv = cross(dir, e2);
        double det = dot(e1, pv);
        if (std::abs(det) < 1e-15) continue;
        double inv = 1.0 / det;
        Vec3 tv = origin - p0;
        double u = dot(tv, pv) * inv;
        if (u < -eps || u > 1 + eps) continue;
        Vec3 qv = cross(tv, e1);
        double v = dot(dir, qv) * inv;
        if (v < -eps || u + v > 1 + eps) continue;
        double s = dot(e2, qv) * inv;
        if (s > 1e-6 && s < 1.0 - 1e-6) return true;
    }
    return false;
}

std::vector<uint8_t> visible_texels(const TriMesh& mesh, const MeshAtlas& atlas,
                                    const ViewSpec& view, double grazing_cutoff) {
    std::vector<uint8_t> vis(atlas.texels.size(), 0);
    for (size_t id = 0; id < atlas.texels.size(); ++id) {
        const auto& tex = atlas.texels[id];
        if (tex.tri < 0) continue;
        Vec3 to_cam = view.pos - tex.pos;
        double facing = dot(tex.normal, normalized(to_cam));
        if (facing <= 0.0) continue;  // backface (single-sided)
        if (std::abs(facing) < grazing_cutoff) continue;
        auto pr = view.project(tex.pos);
        if (!pr.in_front || !view.inside_image(pr.px, pr.py)) continue;
        if (segment_occluded(mesh, view.pos, tex.pos, tex.tri)) continue;
        vis[id] = 1;
    }
    return vis;
}

std::vector<uint8_t> visible_texels(const TriMesh& mesh, const ViewSpec& view, int atlas_res,
                                    double grazing_cutoff) {
    MeshAtlas atlas = build_mesh_atlas(mesh, atlas_res);
    return visible_texels(mesh, atlas, view, grazing_cutoff);
}

void bitset_save(const std::string& path, const std::vector<uint8_t>& bits, int atlas_res) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(bool(f), "bitset_save: cannot open " + path);
    std::vector<uint8_t> packed((bits.size() + 7) / 8, 0);
    int64_t count = 0;
    for (size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) {
            packed[i / 8] |= uint8_t(1u << (i % 8));
            ++count;
        }
    }
    f.write(reinterpret_cast<const char*>(packed.data()), std::streamsize(packed.size()));
    nlohmann::json side;
    side["atlas_res"] = atlas_res;
    side["count"] = count;
    std::ofstream sf(path + ".json");
    sf << side.dump(2) << "\n";
}

std::vector<uint8_t> bitset_load(const std::string& path, int* atlas_res) {
    std::ifstream sf(path + ".json");
    require(bool(sf), "bitset_load: missing sidecar " + path + ".json");
    nlohmann::json side = nlohmann::json::parse(sf);
    int res = side.at("atlas_res").get<int>();
    if (atlas_res) *atlas_res = res;
    size_t n = size_t(res) * size_t(res);
    std::ifstream f(path, std::ios::binary);
    require(bool(f), "bitset_load: cannot open " + path);
    std::vector<uint8_t> packed((n + 7) / 8);
    f.read(reinterpret_cast<char*>(packed.data()), std::streamsize(packed.size()));
    std::vector<uint8_t> bits(n, 0);
    for (size_t i = 0; i < n; ++i) bits[i] = (packed[i / 8] >> (i % 8)) & 1u;
    return bits;
}

}  // namespace lumitex
