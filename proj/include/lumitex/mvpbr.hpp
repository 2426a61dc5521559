// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lumitex/nn.hpp"
#include "lumitex/tokens.hpp"
#include "lumitex/raster.hpp"

namespace lumitex {

// Width/depth layout of one generation branch. L tokens per view come from
// patchifying image_res^2 maps with `patch`.
struct NetConfig {
    int64_t d = 64;
    int views = 4;  // N
    int l1 = 2;     // per-view fusion depth
    int l2 = 2;     // cross-view depth
    int heads = 4;
    int patch = 4;
    int image_res = 32;
    int channels = 3;

    int64_t grid() const { return image_res / patch; }
    int64_t tokens_per_view() const { return grid() * grid(); }  // L
    int64_t patch_dim() const { return int64_t(patch) * patch * channels; }
    int64_t geo_patch_dim() const { return int64_t(patch) * patch * 6; }

    void validate() const;
    nlohmann::json to_json() const;
    static NetConfig from_json(const nlohmann::json& j);
};

// Keys/values projected from the frozen illumination branch's token states.
struct ShadedContext {
    Tensor k, v;              // [N*L, d]
    std::vector<int> groups;  // view of each key token
    int nviews = 0;
    std::string provenance;
};

// softmax(q K_shaded^T / sqrt(d)) V_shaded; q: [T, d].
Tensor material_cross_attention(const Tensor& q, const ShadedContext& ctx);

enum class BranchKind { Shaded, Albedo, Mr };

// Cross-view attention with spatial RoPE on q/k and a learned per-view-pair
// bias table conditioned on the query view (shape [N, N, N], laid out
// [t][view_i][view_j]). Logits are un-scaled q.k + bias.
class IllumAttention {
public:
    IllumAttention() = default;
    IllumAttention(ParamStore& store, const std::string& name, const NetConfig& cfg, Rng& rng);

    // Pre-output-projection attention values with one bias slice per query
    // view (t = the query token's own view).
    Tensor attend(const Tensor& x, const std::vector<TokenInfo>& info) const;
    // Same, with an explicit query-view index t applied to every query.
    Tensor attend_with_query_view(const Tensor& x, const std::vector<TokenInfo>& info,
                                  int t) const;
    // Full layer (attend + output projection), used inside blocks.
    Tensor forward(const Tensor& x, const std::vector<TokenInfo>& info) const;

    Linear wq, wk, wv, wo;
    Param bias_table;  // [N*N*N]
    int heads = 1;
    int views = 1;

private:
    Tensor attend_impl(const Tensor& x, const std::vector<TokenInfo>& info,
                       const std::vector<int64_t>& bias_idx, bool project) const;
};

// One generation branch: per-view fusion blocks, cross-view blocks
// (illumination attention for the shaded branch, self + shaded-guided
// cross-attention for material branches), and a velocity head.
class MvpbrBranch {
public:
    MvpbrBranch() = default;
    MvpbrBranch(ParamStore& store, const std::string& name, const NetConfig& cfg, BranchKind kind,
                Rng& rng);

    struct Cond {
        Image reference;
        std::vector<GeoMaps> geo;  // N views
    };

    TokenSet encode_geo_tokens(const std::vector<GeoMaps>& geo) const;
    TokenSet encode_img_tokens(const Image& reference) const;
    // in_proj(x) plus the timestep embedding broadcast to every token.
    TokenSet embed_latents(const Tensor& x_patches, double t) const;

    // Per-view fusion over [z_i ; t_img ; t_geo_i ; e]; returns the updated
    // latent positions only ([N*L, d]).
    TokenSet mm_forward(const TokenSet& z, const TokenSet& t_img, const TokenSet& t_geo,
                        const Tensor& e_token) const;
    // Cross-view blocks on the flattened [N*L, d] sequence.
    TokenSet mv_forward(const TokenSet& z, const ShadedContext* ctx) const;
    Tensor decode_velocity(const TokenSet& z) const;

    // Full passes.
    Tensor mv_tokens(const Tensor& x_patches, double t, const Cond& cond,
                     const ShadedContext* ctx) const;
    Tensor velocity(const Tensor& x_patches, double t, const Cond& cond,
                    const ShadedContext* ctx) const;

    // K_shaded = W_K S, V_shaded = W_V S (shaded branch only).
    ShadedContext shaded_kv(const Tensor& S) const;
    // Context from clean shaded latents: token states at t=1 fed to shaded_kv.
    ShadedContext make_context(const Tensor& x1_shaded_patches, const Cond& cond) const;

    BranchKind kind = BranchKind::Shaded;
    NetConfig cfg;

    Linear in_proj, t_proj, geo_proj, img_embed_a, img_embed_b, img_proj, out_head;
    Param e;  // material embedding (one token)
    std::vector<TransformerBlock> mm_blocks;
    // shaded branch cross-view stack
    struct IllumBlock {
        LayerNormLayer ln1, ln2;
        IllumAttention attn;
        Mlp mlp;
    };
    std::vector<IllumBlock> illum_blocks;
    // material branch cross-view stack
    struct MaterialBlock {
        LayerNormLayer ln1, lnx, ln2;
        SelfAttention self_attn;
        Linear cross_q;
        Mlp mlp;
    };
    std::vector<MaterialBlock> material_blocks;
    Param ctx_wk, ctx_wv;  // [d, d], shaded branch only
};

// Flow-matching objective at explicit (t, x0): x_t = (1-t) x0 + t x1,
// loss = mean |v(x_t, t) - (x1 - x0)|^2.
using VelocityFn = std::function<Tensor(const Tensor& x_t, double t)>;
Tensor flow_match_loss_fn(const VelocityFn& model, const Tensor& x1, double t, const Tensor& x0);
Tensor flow_match_loss_at(const MvpbrBranch& branch, const Tensor& x1,
                          const MvpbrBranch::Cond& cond, const ShadedContext* ctx, double t,
                          const Tensor& x0);
// Samples t ~ U(0,1), x0 ~ N(0, I).
Tensor flow_match_loss(const MvpbrBranch& branch, const Tensor& x1,
                       const MvpbrBranch::Cond& cond, const ShadedContext* ctx, Rng& rng);

// Euler integration of the learned velocity field from noise to data.
// Returns raw [N*L, pd] latents (no clamp); unpatchify for images.
Tensor sample_patches(const MvpbrBranch& branch, const MvpbrBranch::Cond& cond,
                      const ShadedContext* ctx, int steps, Rng& rng);
std::vector<Image> sample_views(const MvpbrBranch& branch, const MvpbrBranch::Cond& cond,
                                const ShadedContext* ctx, int steps, Rng& rng);

// The three branches plus per-branch param stores (names are prefixed
// shaded. / albedo. / mr.).
class MvpbrModel {
public:
    MvpbrModel(const NetConfig& cfg, uint64_t init_seed);

    NetConfig cfg;
    ParamStore store_shaded, store_albedo, store_mr;
    MvpbrBranch shaded, albedo, mr;

    ParamStore materials_store() const;  // albedo + mr param handles
    ParamStore full_store() const;
    void freeze_shaded();
};

// One training scene: reference image, per-view geometry, and per-view
// targets. mr_views may be empty (shaded-only supervision).
struct SceneSample {
    Image reference;
    std::vector<GeoMaps> geo;
    std::vector<Image> shaded_views;
    std::vector<Image> albedo_views;
    std::vector<Image> mr_views;

    bool has_mr() const { return !mr_views.empty(); }
    MvpbrBranch::Cond cond() const { return {reference, geo}; }
};

struct TwoStageConfig {
    NetConfig net;
    double lr = 1e-3;
    int stage1_steps = 2000;
    int stage2_steps = 400;
    uint64_t seed = 0;
    std::string stage1_ckpt;  // output paths
    std::string stage2_ckpt;
    std::string log_csv;  // step,stage,loss rows; empty = no log
    // for the first k steps, re-measure each step's own batch loss after
    // the update (paired with the pre-step training loss this gives a
    // per-step descent record)
    int record_eval_steps = 0;
};

struct TwoStageResult {
    double stage1_eval_step0 = 0;
    double stage1_eval_final = 0;
    std::vector<double> stage1_eval_per_step;  // fixed-batch eval after each step
    std::vector<double> stage1_train_losses;
    std::vector<double> stage2_train_losses;
};

// Stage 1 trains the shaded branch; the checkpoint is written to
// cfg.stage1_ckpt. eval losses use a fixed (t=0.5, frozen noise) batch.
TwoStageResult train_stage1(MvpbrModel& model, const std::vector<SceneSample>& scenes,
                            const TwoStageConfig& cfg);
// Stage 2 loads the stage-1 checkpoint (contract error if missing), freezes
// the shaded branch and trains albedo + mr. Scenes without mr targets are
// skipped (they contribute to stage 1 only).
TwoStageResult train_stage2(MvpbrModel& model, const std::vector<SceneSample>& scenes,
                            const TwoStageConfig& cfg);
TwoStageResult train_two_stage(MvpbrModel& model, const std::vector<SceneSample>& scenes,
                               const TwoStageConfig& cfg);

}  // namespace lumitex
