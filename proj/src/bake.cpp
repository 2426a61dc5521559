// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#include "lumitex/bake.hpp"

#include <algorithm>
#include <cmath>

namespace lumitex {

CoverageState CoverageState::from_atlas(const MeshAtlas& atlas) {
    CoverageState s;
    s.res = atlas.res;
    s.occupied = atlas.occupied;
    s.covered.assign(atlas.occupied.size(), 0);
    s.best_score.assign(atlas.occupied.size(), 0.0);
    return s;
}

int64_t CoverageState::occupied_count() const {
    int64_t n = 0;
    for (uint8_t o : occupied) n += o;
    return n;
}

int64_t CoverageState::covered_count() const {
    int64_t n = 0;
    for (uint8_t c : covered) n += c;
    return n;
}

double CoverageState::ratio() const {
    int64_t occ = occupied_count();
    return occ > 0 ? double(covered_count()) / double(occ) : 0.0;
}

int64_t CoverageState::add(const std::vector<uint8_t>& visible) {
    int64_t gained = 0;
    for (size_t i = 0; i < covered.size(); ++i) {
        if (visible[i] && occupied[i] && !covered[i]) {
            covered[i] = 1;
            ++gained;
        }
    }
    return gained;
}

TextureAtlas TextureAtlas::zeros(int res) {
    TextureAtlas a;
    a.res = res;
    a.albedo = Image::zeros(res, res, 3);
    a.metallic = Image::zeros(res, res, 1);
    a.roughness = Image::zeros(res, res, 1);
    a.occupied.assign(size_t(res) * res, 0);
    a.covered.assign(size_t(res) * res, 0);
    a.dilated.assign(size_t(res) * res, 0);
    return a;
}

double TextureAtlas::sample(double u, double v, int c) const {
    double x = u * res - 0.5;
    double y = v * res - 0.5;
    if (c < 3) return albedo.sample_bilinear(y, x, c);
    if (c == 3) return metallic.sample_bilinear(y, x, 0);
    return roughness.sample_bilinear(y, x, 0);
}

std::vector<ViewSpec> candidate_set(int K, double radius, double fov, int res) {
    require(K >= 1, "candidate_set: K must be >= 1");
    return fibonacci_views(K, radius, fov, res);
}

std::vector<ViewSpec> greedy_select(const TriMesh& mesh, const MeshAtlas& atlas,
                                    const std::vector<ViewSpec>& candidates,
                                    const std::vector<ViewSpec>& initial_views, int M,
                                    GreedyReport* report, bool iterative) {
    require(M <= int(candidates.size()),
            "greedy_select: M=" + std::to_string(M) + " exceeds K=" +
                std::to_string(candidates.size()));
    CoverageState state = CoverageState::from_atlas(atlas);
    for (const auto& v : initial_views) state.add(visible_texels(mesh, atlas, v));
    if (report) report->coverage_before = state.ratio();

    std::vector<std::vector<uint8_t>> cand_vis;
    cand_vis.reserve(candidates.size());
    for (const auto& c : candidates) cand_vis.push_back(visible_texels(mesh, atlas, c));

    auto gain_of = [&](size_t ci) {
        int64_t g = 0;
        const auto& vis = cand_vis[ci];
        for (size_t i = 0; i < vis.size(); ++i)
            if (vis[i] && state.occupied[i] && !state.covered[i]) ++g;
        return g;
    };

    std::vector<ViewSpec> picked;
    std::vector<char> used(candidates.size(), 0);

    if (!iterative) {
        // static ranking against the initial coverage only
        std::vector<std::pair<int64_t, size_t>> ranked;
        for (size_t ci = 0; ci < candidates.size(); ++ci) ranked.push_back({gain_of(ci), ci});
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (int k = 0; k < M; ++k) {
            size_t ci = ranked[size_t(k)].second;
            picked.push_back(candidates[ci]);
            if (report) {
                report->picked.push_back(int(ci));
                report->gains.push_back(state.add(cand_vis[ci]));
                report->coverage.push_back(state.ratio());
            } else {
                state.add(cand_vis[ci]);
            }
        }
        return picked;
    }

    for (int k = 0; k < M; ++k) {
        int64_t best_gain = -1;
        size_t best_ci = 0;
        for (size_t ci = 0; ci < candidates.size(); ++ci) {
            if (used[ci]) continue;
            int64_t g = gain_of(ci);
            if (g > best_gain) {
                best_gain = g;
                best_ci = ci;
            }
        }
        used[best_ci] = 1;
        picked.push_back(candidates[best_ci]);
        int64_t gained = state.add(cand_vis[best_ci]);
        if (report) {
            report->picked.push_back(int(best_ci));
            report->gains.push_back(gained);
            report->coverage.push_back(state.ratio());
        }
    }
    return picked;
}

BakeResult bake(const TriMesh& mesh, const MeshAtlas& atlas, const std::vector<BakeView>& views,
                bool weighted) {
    BakeResult out;
    out.atlas = TextureAtlas::zeros(atlas.res);
    out.atlas.occupied = atlas.occupied;
    out.coverage = CoverageState::from_atlas(atlas);

    std::vector<std::vector<uint8_t>> vis;
    vis.reserve(views.size());
    for (const auto& bv : views) vis.push_back(visible_texels(mesh, atlas, bv.view));

    int res = atlas.res;
    std::vector<double> wsum(size_t(res) * res, 0.0);
    for (size_t vi = 0; vi < views.size(); ++vi) {
        const auto& bv = views[vi];
        for (int64_t id = 0; id < int64_t(atlas.texels.size()); ++id) {
            if (!vis[vi][size_t(id)]) continue;
            const auto& tex = atlas.texels[size_t(id)];
            double score = dot(tex.normal, normalized(bv.view.pos - tex.pos));
            auto pr = bv.view.project(tex.pos);
            int ty = int(id / res), tx = int(id % res);
            double al[3], mr[2] = {0, 0};
            for (int c = 0; c < 3; ++c) al[c] = bv.albedo.sample_bilinear(pr.py, pr.px, c);
            if (bv.mr.w > 0)
                for (int c = 0; c < 2; ++c) mr[c] = bv.mr.sample_bilinear(pr.py, pr.px, c);

            out.coverage.covered[size_t(id)] = 1;
            out.atlas.covered[size_t(id)] = 1;
            if (weighted) {
                wsum[size_t(id)] += score;
                for (int c = 0; c < 3; ++c) out.atlas.albedo.at(ty, tx, c) += score * al[c];
                out.atlas.metallic.at(ty, tx, 0) += score * mr[0];
                out.atlas.roughness.at(ty, tx, 0) += score * mr[1];
            } else if (score > out.coverage.best_score[size_t(id)]) {
                out.coverage.best_score[size_t(id)] = score;
                for (int c = 0; c < 3; ++c) out.atlas.albedo.at(ty, tx, c) = al[c];
                out.atlas.metallic.at(ty, tx, 0) = mr[0];
                out.atlas.roughness.at(ty, tx, 0) = mr[1];
            }
        }
    }
    if (weighted) {
        for (int64_t id = 0; id < int64_t(wsum.size()); ++id) {
            if (wsum[size_t(id)] <= 0) continue;
            int ty = int(id / res), tx = int(id % res);
            double inv = 1.0 / wsum[size_t(id)];
            for (int c = 0; c < 3; ++c) out.atlas.albedo.at(ty, tx, c) *= inv;
            out.atlas.metallic.at(ty, tx, 0) *= inv;
            out.atlas.roughness.at(ty, tx, 0) *= inv;
        }
    }
    return out;
}

TextureAtlas seam_dilate(const TextureAtlas& atlas, int radius) {
    require(radius >= 0, "seam_dilate: radius must be >= 0");
    TextureAtlas out = atlas;
    if (radius == 0) return out;
    int res = atlas.res;
    for (int ty = 0; ty < res; ++ty) {
        for (int tx = 0; tx < res; ++tx) {
            size_t id = size_t(ty) * res + tx;
            if (!atlas.occupied[id] || atlas.covered[id]) continue;
            // nearest covered texel within the window, euclidean distance,
            // ties resolved toward the lowest texel id
            double best = double(radius) + 0.5;
            int64_t best_id = -1;
            for (int dy = -radius; dy <= radius; ++dy) {
                int ny = ty + dy;
                if (ny < 0 || ny >= res) continue;
                for (int dx = -radius; dx <= radius; ++dx) {
                    int nx = tx + dx;
                    if (nx < 0 || nx >= res) continue;
                    size_t nid = size_t(ny) * res + nx;
                    if (!atlas.covered[nid]) continue;
                    double d = std::sqrt(double(dx) * dx + double(dy) * dy);
                    if (d <= radius + 1e-12 && (d < best - 1e-12 ||
                                                (std::abs(d - best) <= 1e-12 &&
                                                 int64_t(nid) < best_id))) {
                        best = d;
                        best_id = int64_t(nid);
                    }
                }
            }
            if (best_id >= 0) {
                int sy = int(best_id / res), sx = int(best_id % res);
                for (int c = 0; c < 3; ++c) out.albedo.at(ty, tx, c) = atlas.albedo.at(sy, sx, c);
                out.metallic.at(ty, tx, 0) = atlas.metallic.at(sy, sx, 0);
                out.roughness.at(ty, tx, 0) = atlas.roughness.at(sy, sx, 0);
                out.dilated[id] = 1;
            }
        }
    }
    return out;
}

nlohmann::json coverage_report(const CoverageState& state, const GreedyReport* greedy) {
    nlohmann::json j;
    j["atlas_res"] = state.res;
    j["occupied"] = state.occupied_count();
    j["covered"] = state.covered_count();
    j["ratio"] = state.ratio();
    if (greedy) {
        j["coverage_before"] = greedy->coverage_before;
        j["picks"] = nlohmann::json::array();
        for (size_t i = 0; i < greedy->picked.size(); ++i) {
            nlohmann::json p;
            p["candidate"] = greedy->picked[i];
            p["gain"] = greedy->gains[i];
            p["coverage_after"] = greedy->coverage[i];
            j["picks"].push_back(p);
        }
    }
    return j;
}

}  // namespace lumitex
