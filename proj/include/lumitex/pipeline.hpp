// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <json.hpp>

#include "lumitex/dataset.hpp"
#include "lumitex/lvsm.hpp"
#include "lumitex/mvpbr.hpp"

namespace lumitex {

// One JSON config drives every stage. Fields mirror the CLI documentation
// in the README; defaults give the bundled toy pipeline.
struct PipelineConfig {
    std::string out_dir = "out";
    std::string scene = "scene_000";  // the scene the per-scene stages act on

    DatasetConfig dataset;
    NetConfig net;    // generation branches (net.views = N)
    LvsmConfig lvsm;  // inpainting model

    int m_targets = 6;       // M inpainted views
    int k_candidates = 64;   // K candidate views
    int atlas_res = 128;     // bake resolution
    int relight_views = 8;   // evaluation cameras
    int sample_steps = 32;   // Euler steps
    int seam_radius = 3;
    int stage1_steps = 2000;
    int stage2_steps = 400;
    int lvsm_steps = 2000;
    int lvsm_n_cond = 3;
    int lvsm_n_target = 1;
    double lr = 1e-3;
    uint64_t seed = 0;
    int threads = 1;
    double min_coverage_after = 0.95;  // eval threshold

    void validate() const;
    nlohmann::json to_json() const;
    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig load(const std::string& path);

    std::string dataset_dir() const { return out_dir + "/dataset"; }
    std::string ckpt_dir() const { return out_dir + "/ckpt"; }
    std::string stage1_ckpt() const { return ckpt_dir() + "/pbr_stage1.ckpt"; }
    std::string stage2_ckpt() const { return ckpt_dir() + "/pbr_stage2.ckpt"; }
    std::string lvsm_ckpt() const { return ckpt_dir() + "/lvsm.ckpt"; }
};

// Pipeline stages, in order. Each one reads and writes only its declared
// artifacts and raises StageOrderError when an upstream product is missing.
void stage_gen_dataset(const PipelineConfig& cfg);
void stage_render_geo(const PipelineConfig& cfg);
void stage_train_pbr(const PipelineConfig& cfg);
void stage_train_lvsm(const PipelineConfig& cfg);
void stage_infer(const PipelineConfig& cfg);
void stage_select_views(const PipelineConfig& cfg);
void stage_inpaint(const PipelineConfig& cfg);
void stage_bake(const PipelineConfig& cfg);
void stage_relight(const PipelineConfig& cfg);
nlohmann::json stage_eval(const PipelineConfig& cfg);

// Geo maps reloaded from the render-geo artifacts (plucker rebuilt exactly
// from the camera, depth rescaled from its 16-bit encoding).
GeoMaps load_geo_maps(const std::string& dir, const ViewSpec& view);
void save_geo_maps(const std::string& dir, const GeoMaps& g);

// depth PNGs store distance / kDepthScale
constexpr double kDepthScale = 8.0;

}  // namespace lumitex
