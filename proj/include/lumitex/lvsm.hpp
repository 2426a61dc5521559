// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "lumitex/nn.hpp"
#include "lumitex/raster.hpp"
#include "lumitex/tokens.hpp"

namespace lumitex {

// Decoder-only view-synthesis transformer. Condition views bring
// [plucker ; geometry ; image] patches, target views only [plucker ;
// geometry]; one full-attention stack updates all tokens and a linear head
// maps target tokens back to pixels.
struct LvsmConfig {
    int64_t d = 64;
    int depth = 4;
    int heads = 4;
    int patch = 4;
    int image_res = 32;
    int img_channels = 6;  // albedo (3) + packed metallic/roughness (3)

    int64_t grid() const { return image_res / patch; }
    int64_t tokens_per_view() const { return grid() * grid(); }
    // per-patch channel counts: plucker 6 + normal/canonical 6 (+ image)
    int64_t cond_dim() const { return int64_t(patch) * patch * (12 + img_channels); }
    int64_t targ_dim() const { return int64_t(patch) * patch * 12; }
    int64_t head_dim_out() const { return int64_t(patch) * patch * img_channels; }

    void validate() const;
    nlohmann::json to_json() const;
    static LvsmConfig from_json(const nlohmann::json& j);
};

struct LvsmCondView {
    Image image;    // [0,1], img_channels
    Image plucker;  // 6ch ray map
    GeoMaps geo;
    int view_index = 0;
};

struct LvsmTargetView {
    Image plucker;
    GeoMaps geo;
    int view_index = 0;
};

LvsmCondView make_cond_view(const Image& image, const GeoMaps& geo, int view_index);
LvsmTargetView make_target_view(const GeoMaps& geo, int view_index);

class LvsmModel {
public:
    LvsmModel(const LvsmConfig& cfg, uint64_t init_seed);

    // Condition tokens are tagged Image, target tokens Latent; groups are
    // per-view blocks in input order (conditions first).
    TokenSet tokenize(const std::vector<LvsmCondView>& conds,
                      const std::vector<LvsmTargetView>& targets) const;
    // Full self-attention over every token; depth 0 is the identity.
    TokenSet forward(const TokenSet& tokens) const;
    // Affine head on target tokens; [M*L, patch_dim] patches.
    Tensor detokenize_raw(const Tensor& target_tokens) const;
    // Reshaped images, clamped to [0,1].
    std::vector<Image> detokenize(const Tensor& target_tokens) const;

    // tokenize + forward + detokenize on the target block, masked by each
    // target's geometry mask.
    std::vector<Image> synthesize(const std::vector<LvsmCondView>& conds,
                                  const std::vector<LvsmTargetView>& targets) const;

    LvsmConfig cfg;
    ParamStore store;
    Linear cond_proj, targ_proj, head;
    Param posemb;  // [L, d], shared across views
    LayerNormLayer final_ln;
    std::vector<TransformerBlock> blocks;
};

// One rendered view of a training scene.
struct LvsmView {
    ViewSpec view;
    GeoMaps geo;
    Image image;
};

struct LvsmScene {
    std::vector<LvsmView> views;
};

struct LvsmTrainConfig {
    LvsmConfig net;
    int n_cond = 3;
    int n_target = 1;
    int steps = 2000;
    double lr = 1e-3;
    uint64_t seed = 0;
    // probability that one target duplicates a condition pose, which
    // supervises the identity path directly
    double duplicate_prob = 0.25;
    std::string ckpt;     // written at the end (and source of resume)
    std::string log_csv;  // step,stage,loss
    bool resume = false;  // continue from ckpt (exact: rng + adam restored)
    int holdout_scene = -1;  // this (scene, view) pair never enters a split
    int holdout_view = -1;
};

struct LvsmTrainResult {
    std::vector<double> train_losses;
    int start_step = 0;  // nonzero when resumed
};

// Random condition/target splits per step; scenes with fewer than
// n_cond + n_target views are skipped with a warning. MSE on target images.
LvsmTrainResult train_lvsm(LvsmModel& model, const std::vector<LvsmScene>& scenes,
                           const LvsmTrainConfig& cfg);

}  // namespace lumitex
