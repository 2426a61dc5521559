// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#include "lumitex/mvpbr.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "lumitex/checkpoint.hpp"

namespace lumitex {

void NetConfig::validate() const {
    require(d > 0 && views >= 1 && l1 >= 0 && l2 >= 0 && heads >= 1, "NetConfig: bad sizes");
    require(d % heads == 0, "NetConfig: d must be divisible by heads");
    require((d / heads) % 4 == 0, "NetConfig: head_dim must be divisible by 4 for 2D RoPE");
    if (image_res % patch != 0)
        throw ConfigError("NetConfig: image_res " + std::to_string(image_res) +
                          " not divisible by patch " + std::to_string(patch));
}

nlohmann::json NetConfig::to_json() const {
    nlohmann::json j;
    j["d"] = d;
    j["views"] = views;
    j["l1"] = l1;
    j["l2"] = l2;
    j["heads"] = heads;
    j["patch"] = patch;
    j["image_res"] = image_res;
    j["channels"] = channels;
    return j;
}

NetConfig NetConfig::from_json(const nlohmann::json& j) {
    NetConfig c;
    c.d = j.value("d", int64_t(64));
    c.views = j.value("views", 4);
    c.l1 = j.value("l1", 2);
    c.l2 = j.value("l2", 2);
    c.heads = j.value("heads", 4);
    c.patch = j.value("patch", 4);
    c.image_res = j.value("image_res", 32);
    c.channels = j.value("channels", 3);
    c.validate();
    return c;
}

Tensor material_cross_attention(const Tensor& q, const ShadedContext& ctx) {
    require(q.cols() == ctx.k.cols(), "material_cross_attention: width mismatch, q " +
                                          shape_str(q.shape()) + " vs ctx " +
                                          shape_str(ctx.k.shape()));
    double scale = 1.0 / std::sqrt(double(q.cols()));
    return attention_core(q, ctx.k, ctx.v, scale, Tensor(), ctx.groups, ctx.nviews);
}

// ---- illumination attention ---------------------------------------------------

IllumAttention::IllumAttention(ParamStore& store, const std::string& name, const NetConfig& cfg,
                               Rng& rng)
    : heads(cfg.heads), views(cfg.views) {
    wq = Linear(store, name + ".q", cfg.d, cfg.d, rng);
    wk = Linear(store, name + ".k", cfg.d, cfg.d, rng);
    wv = Linear(store, name + ".v", cfg.d, cfg.d, rng);
    wo = Linear(store, name + ".o", cfg.d, cfg.d, rng);
    // zero-initialized view-pair bias, laid out [t][view_i][view_j]
    bias_table = store.add(name + ".phi", Tensor::zeros({int64_t(views) * views * views}));
}

Tensor IllumAttention::attend_impl(const Tensor& x, const std::vector<TokenInfo>& info,
                                   const std::vector<int64_t>& bias_idx, bool project) const {
    int64_t T = x.rows(), d = x.cols();
    int64_t hd = d / heads;
    std::vector<int> rows(size_t(T), 0), cols(size_t(T), 0), groups(size_t(T), 0);
    for (int64_t i = 0; i < T; ++i) {
        rows[size_t(i)] = info[size_t(i)].row;
        cols[size_t(i)] = info[size_t(i)].col;
        groups[size_t(i)] = info[size_t(i)].view;
    }
    Tensor q = rope2d(wq.forward(x), rows, cols, heads);
    Tensor k = rope2d(wk.forward(x), rows, cols, heads);
    Tensor v = wv.forward(x);
    Tensor bias = gather(bias_table.value(), bias_idx, {T, T});
    std::vector<Tensor> head_outs;
    for (int h = 0; h < heads; ++h) {
        Tensor qh = slice_cols(q, h * hd, (h + 1) * hd);
        Tensor kh = slice_cols(k, h * hd, (h + 1) * hd);
        Tensor vh = slice_cols(v, h * hd, (h + 1) * hd);
        head_outs.push_back(attention_core(qh, kh, vh, 1.0, bias, groups, views));
    }
    Tensor cat = concat_cols(head_outs);
    return project ? wo.forward(cat) : cat;
}

namespace {

std::vector<int64_t> illum_bias_indices(const std::vector<TokenInfo>& info, int views,
                                        int fixed_t) {
    int64_t T = int64_t(info.size());
    std::vector<int64_t> idx(size_t(T * T));
    for (int64_t i = 0; i < T; ++i) {
        int64_t t = fixed_t >= 0 ? fixed_t : info[size_t(i)].view;
        for (int64_t j = 0; j < T; ++j)
            idx[size_t(i * T + j)] =
                t * views * views + int64_t(info[size_t(i)].view) * views + info[size_t(j)].view;
    }
    return idx;
}

}  // namespace

Tensor IllumAttention::attend(const Tensor& x, const std::vector<TokenInfo>& info) const {
    return attend_impl(x, info, illum_bias_indices(info, views, -1), false);
}

Tensor IllumAttention::attend_with_query_view(const Tensor& x, const std::vector<TokenInfo>& info,
                                              int t) const {
    require(t >= 0 && t < views, "illum_attention: query view index " + std::to_string(t) +
                                     " out of range (N=" + std::to_string(views) + ")");
    return attend_impl(x, info, illum_bias_indices(info, views, t), false);
}

Tensor IllumAttention::forward(const Tensor& x, const std::vector<TokenInfo>& info) const {
    return attend_impl(x, info, illum_bias_indices(info, views, -1), true);
}

// ---- branch -------------------------------------------------------------------

MvpbrBranch::MvpbrBranch(ParamStore& store, const std::string& name, const NetConfig& cfg_,
                         BranchKind kind_, Rng& rng)
    : kind(kind_), cfg(cfg_) {
    cfg.validate();
    in_proj = Linear(store, name + ".in", cfg.patch_dim(), cfg.d, rng);
    t_proj = Linear(store, name + ".temb", cfg.d, cfg.d, rng);
    geo_proj = Linear(store, name + ".geo", cfg.geo_patch_dim(), cfg.d, rng);
    img_embed_a = Linear(store, name + ".img_a", cfg.patch_dim(), cfg.d, rng);
    img_embed_b = Linear(store, name + ".img_b", cfg.patch_dim(), cfg.d, rng);
    img_proj = Linear(store, name + ".img", cfg.d, cfg.d, rng);
    e = store.add(name + ".e", Tensor::randn({1, cfg.d}, rng, 0.02));
    for (int b = 0; b < cfg.l1; ++b)
        mm_blocks.emplace_back(store, name + ".mm" + std::to_string(b), cfg.d, cfg.heads, 0.0,
                               true, rng);
    if (kind == BranchKind::Shaded) {
        for (int b = 0; b < cfg.l2; ++b) {
            IllumBlock blk;
            std::string bn = name + ".mv" + std::to_string(b);
            blk.ln1 = LayerNormLayer(store, bn + ".ln1", cfg.d);
            blk.ln2 = LayerNormLayer(store, bn + ".ln2", cfg.d);
            blk.attn = IllumAttention(store, bn + ".attn", cfg, rng);
            blk.mlp = Mlp(store, bn + ".mlp", cfg.d, 4 * cfg.d, rng);
            illum_blocks.push_back(std::move(blk));
        }
        ctx_wk = store.add(name + ".ctx_wk",
                           Tensor::randn({cfg.d, cfg.d}, rng, 1.0 / std::sqrt(double(cfg.d))));
        ctx_wv = store.add(name + ".ctx_wv",
                           Tensor::randn({cfg.d, cfg.d}, rng, 1.0 / std::sqrt(double(cfg.d))));
    } else {
        for (int b = 0; b < cfg.l2; ++b) {
            MaterialBlock blk;
            std::string bn = name + ".mv" + std::to_string(b);
            blk.ln1 = LayerNormLayer(store, bn + ".ln1", cfg.d);
            blk.lnx = LayerNormLayer(store, bn + ".lnx", cfg.d);
            blk.ln2 = LayerNormLayer(store, bn + ".ln2", cfg.d);
            blk.self_attn = SelfAttention(store, bn + ".attn", cfg.d, cfg.heads, 0.0, true, rng);
            blk.cross_q = Linear(store, bn + ".xq", cfg.d, cfg.d, rng);
            blk.mlp = Mlp(store, bn + ".mlp", cfg.d, 4 * cfg.d, rng);
            material_blocks.push_back(std::move(blk));
        }
    }
    out_head = Linear(store, name + ".out", cfg.d, cfg.patch_dim(), rng);
}

TokenSet MvpbrBranch::encode_geo_tokens(const std::vector<GeoMaps>& geo) const {
    require(int(geo.size()) == cfg.views, "encode_geo_tokens: expected " +
                                              std::to_string(cfg.views) + " views, got " +
                                              std::to_string(geo.size()));
    int grid = int(cfg.grid());
    std::vector<Tensor> per_view;
    TokenSet out;
    for (int v = 0; v < cfg.views; ++v) {
        const GeoMaps& g = geo[size_t(v)];
        require(g.normal.w == cfg.image_res && g.canonical.w == cfg.image_res,
                "encode_geo_tokens: geo maps resolution mismatch");
        Image six = Image::zeros(cfg.image_res, cfg.image_res, 6);
        for (int y = 0; y < cfg.image_res; ++y)
            for (int x = 0; x < cfg.image_res; ++x)
                for (int c = 0; c < 3; ++c) {
                    six.at(y, x, c) = g.normal.at(y, x, c);
                    six.at(y, x, 3 + c) = g.canonical.at(y, x, c);
                }
        per_view.push_back(geo_proj.forward(patchify(six, cfg.patch)));
        for (int pr = 0; pr < grid; ++pr)
            for (int pc = 0; pc < grid; ++pc) out.info.push_back({TokenTag::Geometry, v, pr, pc});
    }
    out.tokens = concat_rows(per_view);
    return out;
}

TokenSet MvpbrBranch::encode_img_tokens(const Image& reference) const {
    require(reference.w == cfg.image_res && reference.h == cfg.image_res,
            "encode_img_tokens: reference resolution mismatch");
    Tensor patches = patchify(reference, cfg.patch);
    Tensor a = img_embed_a.forward(patches);
    Tensor b = img_embed_b.forward(patches);
    TokenSet out;
    out.tokens = img_proj.forward(concat_rows({a, b}));
    int grid = int(cfg.grid());
    for (int rep = 0; rep < 2; ++rep)
        for (int pr = 0; pr < grid; ++pr)
            for (int pc = 0; pc < grid; ++pc) out.info.push_back({TokenTag::Image, 0, pr, pc});
    return out;
}

TokenSet MvpbrBranch::embed_latents(const Tensor& x_patches, double t) const {
    int64_t L = cfg.tokens_per_view();
    require(x_patches.rows() == cfg.views * L && x_patches.cols() == cfg.patch_dim(),
            "embed_latents: latents " + shape_str(x_patches.shape()) + " do not match config");
    Tensor temb = t_proj.forward(reshape(sinusoidal_embedding(t, cfg.d), {1, cfg.d}));
    TokenSet out;
    out.tokens = add_rowvec(in_proj.forward(x_patches), reshape(temb, {cfg.d}));
    int grid = int(cfg.grid());
    for (int v = 0; v < cfg.views; ++v)
        for (int pr = 0; pr < grid; ++pr)
            for (int pc = 0; pc < grid; ++pc) out.info.push_back({TokenTag::Latent, v, pr, pc});
    return out;
}

TokenSet MvpbrBranch::mm_forward(const TokenSet& z, const TokenSet& t_img, const TokenSet& t_geo,
                                 const Tensor& e_token) const {
    int64_t L = cfg.tokens_per_view();
    require(!z.info.empty() && z.info[0].tag == TokenTag::Latent,
            "mm_forward: z tokens must carry the latent tag");
    require(!t_img.info.empty() && t_img.info[0].tag == TokenTag::Image,
            "mm_forward: t_img tokens must carry the image tag");
    require(!t_geo.info.empty() && t_geo.info[0].tag == TokenTag::Geometry,
            "mm_forward: t_geo tokens must carry the geometry tag");
    require(z.tokens.rows() == cfg.views * L, "mm_forward: z token count mismatch");
    require(t_img.tokens.rows() == 2 * L, "mm_forward: t_img token count mismatch");
    require(t_geo.tokens.rows() == cfg.views * L, "mm_forward: t_geo token count mismatch");

    TokenSet out;
    std::vector<Tensor> updated;
    for (int v = 0; v < cfg.views; ++v) {
        Tensor zi = slice_rows(z.tokens, v * L, (v + 1) * L);
        Tensor gi = slice_rows(t_geo.tokens, v * L, (v + 1) * L);
        Tensor seq = concat_rows({zi, t_img.tokens, gi, e_token});
        // per-view sequence, single attention group; coordinates come from
        // the patch grid, the embedding token sits at (0,0)
        int64_t T = seq.rows();
        std::vector<int> rows(size_t(T), 0), cols(size_t(T), 0), groups(size_t(T), 0);
        for (int64_t i = 0; i < L; ++i) {
            rows[size_t(i)] = z.info[size_t(v * L + i)].row;
            cols[size_t(i)] = z.info[size_t(v * L + i)].col;
        }
        for (int64_t i = 0; i < 2 * L; ++i) {
            rows[size_t(L + i)] = t_img.info[size_t(i)].row;
            cols[size_t(L + i)] = t_img.info[size_t(i)].col;
        }
        for (int64_t i = 0; i < L; ++i) {
            rows[size_t(3 * L + i)] = t_geo.info[size_t(v * L + i)].row;
            cols[size_t(3 * L + i)] = t_geo.info[size_t(v * L + i)].col;
        }
        for (const auto& blk : mm_blocks) seq = blk.forward(seq, rows, cols, groups, 1, Tensor());
        updated.push_back(slice_rows(seq, 0, L));
        for (int64_t i = 0; i < L; ++i) out.info.push_back(z.info[size_t(v * L + i)]);
    }
    out.tokens = concat_rows(updated);
    return out;
}

TokenSet MvpbrBranch::mv_forward(const TokenSet& z, const ShadedContext* ctx) const {
    TokenSet out = z;
    if (kind == BranchKind::Shaded) {
        for (const auto& blk : illum_blocks) {
            Tensor x = out.tokens;
            x = add(x, blk.attn.forward(blk.ln1.forward(x), out.info));
            x = add(x, blk.mlp.forward(blk.ln2.forward(x)));
            out.tokens = x;
        }
        return out;
    }
    if (!material_blocks.empty())
        require(ctx != nullptr, "mv_forward: material branch requires a shaded context");
    int64_t T = z.tokens.rows();
    std::vector<int> rows(size_t(T), 0), cols(size_t(T), 0), groups(size_t(T), 0);
    for (int64_t i = 0; i < T; ++i) {
        rows[size_t(i)] = z.info[size_t(i)].row;
        cols[size_t(i)] = z.info[size_t(i)].col;
        groups[size_t(i)] = z.info[size_t(i)].view;
    }
    for (const auto& blk : material_blocks) {
        Tensor x = out.tokens;
        x = add(x,
                blk.self_attn.forward(blk.ln1.forward(x), rows, cols, groups, cfg.views, Tensor()));
        x = add(x, material_cross_attention(blk.cross_q.forward(blk.lnx.forward(x)), *ctx));
        x = add(x, blk.mlp.forward(blk.ln2.forward(x)));
        out.tokens = x;
    }
    return out;
}

Tensor MvpbrBranch::decode_velocity(const TokenSet& z) const { return out_head.forward(z.tokens); }

Tensor MvpbrBranch::mv_tokens(const Tensor& x_patches, double t, const Cond& cond,
                              const ShadedContext* ctx) const {
    TokenSet z = embed_latents(x_patches, t);
    TokenSet img = encode_img_tokens(cond.reference);
    TokenSet geo = encode_geo_tokens(cond.geo);
    TokenSet fused = mm_forward(z, img, geo, e.value());
    return mv_forward(fused, ctx).tokens;
}

Tensor MvpbrBranch::velocity(const Tensor& x_patches, double t, const Cond& cond,
                             const ShadedContext* ctx) const {
    TokenSet z;
    z.tokens = mv_tokens(x_patches, t, cond, ctx);
    return out_head.forward(z.tokens);
}

ShadedContext MvpbrBranch::shaded_kv(const Tensor& S) const {
    require(kind == BranchKind::Shaded, "shaded_kv: only the illumination branch projects context");
    ShadedContext ctx;
    ctx.k = matmul(S, ctx_wk.value());
    ctx.v = matmul(S, ctx_wv.value());
    ctx.nviews = cfg.views;
    int64_t L = cfg.tokens_per_view();
    for (int v = 0; v < cfg.views; ++v)
        for (int64_t i = 0; i < L; ++i) ctx.groups.push_back(v);
    return ctx;
}

ShadedContext MvpbrBranch::make_context(const Tensor& x1_shaded_patches, const Cond& cond) const {
    ShadedContext ctx = shaded_kv(mv_tokens(x1_shaded_patches, 1.0, cond, nullptr));
    ctx.provenance = "shaded@t=1";
    return ctx;
}

// ---- flow matching -------------------------------------------------------------

Tensor flow_match_loss_fn(const VelocityFn& model, const Tensor& x1, double t, const Tensor& x0) {
    Tensor xt = add(mul_scalar(x0, 1.0 - t), mul_scalar(x1, t));
    Tensor target = sub(x1, x0);
    return mse(model(xt, t), target);
}

Tensor flow_match_loss_at(const MvpbrBranch& branch, const Tensor& x1,
                          const MvpbrBranch::Cond& cond, const ShadedContext* ctx, double t,
                          const Tensor& x0) {
    return flow_match_loss_fn(
        [&](const Tensor& xt, double tt) { return branch.velocity(xt, tt, cond, ctx); }, x1, t,
        x0);
}

Tensor flow_match_loss(const MvpbrBranch& branch, const Tensor& x1, const MvpbrBranch::Cond& cond,
                       const ShadedContext* ctx, Rng& rng) {
    double t = rng.uniform();
    Tensor x0 = Tensor::randn(x1.shape(), rng);
    return flow_match_loss_at(branch, x1, cond, ctx, t, x0);
}

Tensor sample_patches(const MvpbrBranch& branch, const MvpbrBranch::Cond& cond,
                      const ShadedContext* ctx, int steps, Rng& rng) {
    require(steps >= 1, "sample: steps must be >= 1");
    NoGradGuard ng;
    int64_t L = branch.cfg.tokens_per_view();
    Tensor x = Tensor::randn({branch.cfg.views * L, branch.cfg.patch_dim()}, rng);
    double dt = 1.0 / steps;
    for (int k = 0; k < steps; ++k) {
        double t = double(k) / steps;
        Tensor v = branch.velocity(x, t, cond, ctx);
        x = add(x, mul_scalar(v, dt));
    }
    return x;
}

std::vector<Image> sample_views(const MvpbrBranch& branch, const MvpbrBranch::Cond& cond,
                                const ShadedContext* ctx, int steps, Rng& rng) {
    Tensor x = sample_patches(branch, cond, ctx, steps, rng);
    return unpatchify_views(x, branch.cfg.views, branch.cfg.image_res, branch.cfg.patch,
                            branch.cfg.channels, true);
}

// ---- model / training -----------------------------------------------------------

MvpbrModel::MvpbrModel(const NetConfig& cfg_, uint64_t init_seed) : cfg(cfg_) {
    cfg.validate();
    Rng rng(init_seed);
    shaded = MvpbrBranch(store_shaded, "shaded", cfg, BranchKind::Shaded, rng);
    albedo = MvpbrBranch(store_albedo, "albedo", cfg, BranchKind::Albedo, rng);
    mr = MvpbrBranch(store_mr, "mr", cfg, BranchKind::Mr, rng);
}

ParamStore MvpbrModel::materials_store() const {
    ParamStore s;
    s.params = store_albedo.params;
    s.params.insert(s.params.end(), store_mr.params.begin(), store_mr.params.end());
    return s;
}

ParamStore MvpbrModel::full_store() const {
    ParamStore s;
    s.params = store_shaded.params;
    s.params.insert(s.params.end(), store_albedo.params.begin(), store_albedo.params.end());
    s.params.insert(s.params.end(), store_mr.params.begin(), store_mr.params.end());
    return s;
}

void MvpbrModel::freeze_shaded() {
    for (auto& p : store_shaded.params) p.set_frozen(true);
}

namespace {

void append_log(const std::string& path, int step, int stage, double loss) {
    if (path.empty()) return;
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    bool fresh = !std::filesystem::exists(p);
    std::ofstream f(path, std::ios::app);
    if (fresh) f << "step,stage,loss\n";
    f << step << "," << stage << "," << loss << "\n";
}

void check_scenes(const std::vector<SceneSample>& scenes, const NetConfig& net) {
    require(!scenes.empty(), "train: no scenes");
    for (const auto& s : scenes) {
        require(int(s.geo.size()) == net.views && int(s.shaded_views.size()) == net.views &&
                    int(s.albedo_views.size()) == net.views,
                "train: scene does not provide the configured number of views");
        require(!s.has_mr() || int(s.mr_views.size()) == net.views,
                "train: mr view count mismatch");
    }
}

}  // namespace

TwoStageResult train_stage1(MvpbrModel& model, const std::vector<SceneSample>& scenes,
                            const TwoStageConfig& cfg) {
    check_scenes(scenes, cfg.net);
    TwoStageResult res;
    Rng train_rng(cfg.seed);
    Rng eval_rng(cfg.seed ^ 0x5eedbeef12345678ULL);

    std::vector<Tensor> x1(scenes.size());
    std::vector<Tensor> x0_eval(scenes.size());
    std::vector<MvpbrBranch::Cond> conds(scenes.size());
    for (size_t i = 0; i < scenes.size(); ++i) {
        x1[i] = patchify_views(scenes[i].shaded_views, int(cfg.net.patch));
        x0_eval[i] = Tensor::randn(x1[i].shape(), eval_rng);
        conds[i] = scenes[i].cond();
    }

    // fixed-batch eval: t = 0.5, frozen noise; deterministic across runs
    auto eval_loss = [&]() {
        NoGradGuard ng;
        double acc = 0;
        for (size_t i = 0; i < scenes.size(); ++i)
            acc +=
                flow_match_loss_at(model.shaded, x1[i], conds[i], nullptr, 0.5, x0_eval[i]).item();
        return acc / double(scenes.size());
    };

    Adam opt(cfg.lr);
    res.stage1_eval_step0 = eval_loss();
    const int dense_eval = std::min(cfg.stage1_steps, cfg.record_eval_steps);
    for (int step = 0; step < cfg.stage1_steps; ++step) {
        size_t scene = size_t(step) % scenes.size();
        double t = train_rng.uniform();
        Tensor x0 = Tensor::randn(x1[scene].shape(), train_rng);
        Tensor loss = flow_match_loss_at(model.shaded, x1[scene], conds[scene], nullptr, t, x0);
        model.store_shaded.zero_grad();
        backward(loss);
        opt.step(model.store_shaded);
        res.stage1_train_losses.push_back(loss.item());
        append_log(cfg.log_csv, step, 1, loss.item());
        if (step < dense_eval) {
            // post-step loss on the very batch the step just optimized;
            // paired with stage1_train_losses it measures per-step descent
            NoGradGuard ng;
            res.stage1_eval_per_step.push_back(
                flow_match_loss_at(model.shaded, x1[scene], conds[scene], nullptr, t, x0)
                    .item());
        }
    }
    res.stage1_eval_final = eval_loss();

    if (!cfg.stage1_ckpt.empty()) {
        nlohmann::json meta;
        meta["net"] = cfg.net.to_json();
        meta["stage"] = 1;
        meta["seed"] = cfg.seed;
        meta["rng_state"] = train_rng.state();
        meta["eval_step0"] = res.stage1_eval_step0;
        meta["eval_final"] = res.stage1_eval_final;
        save_checkpoint(cfg.stage1_ckpt, model.store_shaded, &opt, meta);
    }
    return res;
}

TwoStageResult train_stage2(MvpbrModel& model, const std::vector<SceneSample>& scenes,
                            const TwoStageConfig& cfg) {
    check_scenes(scenes, cfg.net);
    require(!cfg.stage1_ckpt.empty() && file_exists(cfg.stage1_ckpt),
            "train_stage2: stage-1 checkpoint not found at '" + cfg.stage1_ckpt +
                "' (run stage 1 first)");
    load_checkpoint(cfg.stage1_ckpt, model.store_shaded, nullptr);
    model.freeze_shaded();

    std::vector<size_t> usable;  // scenes lacking mr targets train stage 1 only
    for (size_t i = 0; i < scenes.size(); ++i)
        if (scenes[i].has_mr()) usable.push_back(i);
    require(!usable.empty() || cfg.stage2_steps == 0,
            "train_stage2: no scene provides mr targets");

    TwoStageResult res;
    Rng train_rng(cfg.seed ^ 0xa11ce5);
    ParamStore materials = model.materials_store();
    Adam opt(cfg.lr);

    std::vector<Tensor> x1_shaded(scenes.size()), x1_albedo(scenes.size()), x1_mr(scenes.size());
    std::vector<MvpbrBranch::Cond> conds(scenes.size());
    for (size_t i = 0; i < scenes.size(); ++i) {
        x1_shaded[i] = patchify_views(scenes[i].shaded_views, int(cfg.net.patch));
        x1_albedo[i] = patchify_views(scenes[i].albedo_views, int(cfg.net.patch));
        if (scenes[i].has_mr()) x1_mr[i] = patchify_views(scenes[i].mr_views, int(cfg.net.patch));
        conds[i] = scenes[i].cond();
    }

    for (int step = 0; step < cfg.stage2_steps; ++step) {
        size_t scene = usable[size_t(step) % usable.size()];
        ShadedContext ctx;
        {
            NoGradGuard ng;  // frozen branch: forward values only
            ctx = model.shaded.make_context(x1_shaded[scene], conds[scene]);
        }
        Tensor loss =
            add(flow_match_loss(model.albedo, x1_albedo[scene], conds[scene], &ctx, train_rng),
                flow_match_loss(model.mr, x1_mr[scene], conds[scene], &ctx, train_rng));
        materials.zero_grad();
        model.store_shaded.zero_grad();
        backward(loss);
        opt.step(materials);
        res.stage2_train_losses.push_back(loss.item());
        append_log(cfg.log_csv, step, 2, loss.item());
    }

    if (!cfg.stage2_ckpt.empty()) {
        nlohmann::json meta;
        meta["net"] = cfg.net.to_json();
        meta["stage"] = 2;
        meta["seed"] = cfg.seed;
        meta["rng_state"] = train_rng.state();
        ParamStore full = model.full_store();
        save_checkpoint(cfg.stage2_ckpt, full, nullptr, meta);
    }
    return res;
}

TwoStageResult train_two_stage(MvpbrModel& model, const std::vector<SceneSample>& scenes,
                               const TwoStageConfig& cfg) {
    TwoStageResult r1 = train_stage1(model, scenes, cfg);
    TwoStageResult r2 = train_stage2(model, scenes, cfg);
    r1.stage2_train_losses = std::move(r2.stage2_train_losses);
    return r1;
}

}  // namespace lumitex
