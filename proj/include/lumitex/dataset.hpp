// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "lumitex/relight.hpp"

namespace lumitex {

// Procedural toy dataset: textured primitives (cube / sphere / cylinder)
// with checkerboard, gradient, and two-tone PBR atlases, rendered under one
// of three preset light rigs.
struct DatasetConfig {
    int scene_count = 4;
    int views_per_scene = 8;
    int image_res = 32;
    int gt_atlas_res = 64;
    double cam_radius = 2.8;
    double cam_fov = 1.0;
    uint64_t seed = 0;

    nlohmann::json to_json() const;
    static DatasetConfig from_json(const nlohmann::json& j);
};

// Rows of scenes.json; all paths are relative to the dataset root.
struct SceneRecord {
    std::string id;
    std::string mesh;
    std::string rig;
    std::string reference;
    std::string cameras;
    std::string gt_albedo;
    std::string gt_metallic;
    std::string gt_roughness;
    int light_rig = 0;
    std::vector<std::string> shaded;  // per view
    std::vector<std::string> albedo;
    std::vector<std::string> mr;
    bool has_mr = true;

    nlohmann::json to_json() const;
    static SceneRecord from_json(const nlohmann::json& j);
};

// One of the three preset rigs standing in for environment maps.
LightRig preset_rig(int id);

// Builds meshes, ground-truth atlases and per-view target renders under
// `root` and writes scenes.json. Deterministic per seed (bit-identical
// files). The reference image of a scene is its first shaded view.
std::vector<SceneRecord> gen_dataset(const DatasetConfig& cfg, const std::string& root);

std::vector<SceneRecord> load_scene_index(const std::string& root);

// Ground-truth atlas loaded back from the dataset PNGs (covered everywhere).
TextureAtlas load_gt_atlas(const std::string& root, const SceneRecord& rec);

TriMesh scene_mesh(const std::string& root, const SceneRecord& rec);
LightRig scene_rig(const std::string& root, const SceneRecord& rec);
std::vector<ViewSpec> scene_cameras(const std::string& root, const SceneRecord& rec);

}  // namespace lumitex
