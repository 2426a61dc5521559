// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#include "lumitex/lvsm.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "lumitex/checkpoint.hpp"

namespace lumitex {

void LvsmConfig::validate() const {
    require(d > 0 && depth >= 0 && heads >= 1 && img_channels >= 1, "LvsmConfig: bad sizes");
    require(d % heads == 0, "LvsmConfig: d must be divisible by heads");
    if (image_res % patch != 0)
        throw ConfigError("LvsmConfig: image_res " + std::to_string(image_res) +
                          " not divisible by patch " + std::to_string(patch));
}

nlohmann::json LvsmConfig::to_json() const {
    nlohmann::json j;
    j["d"] = d;
    j["depth"] = depth;
    j["heads"] = heads;
    j["patch"] = patch;
    j["image_res"] = image_res;
    j["img_channels"] = img_channels;
    return j;
}

LvsmConfig LvsmConfig::from_json(const nlohmann::json& j) {
    LvsmConfig c;
    c.d = j.value("d", int64_t(64));
    c.depth = j.value("depth", 4);
    c.heads = j.value("heads", 4);
    c.patch = j.value("patch", 4);
    c.image_res = j.value("image_res", 32);
    c.img_channels = j.value("img_channels", 6);
    c.validate();
    return c;
}

LvsmCondView make_cond_view(const Image& image, const GeoMaps& geo, int view_index) {
    return {image, geo.plucker, geo, view_index};
}

LvsmTargetView make_target_view(const GeoMaps& geo, int view_index) {
    return {geo.plucker, geo, view_index};
}

LvsmModel::LvsmModel(const LvsmConfig& cfg_, uint64_t init_seed) : cfg(cfg_) {
    cfg.validate();
    Rng rng(init_seed);
    cond_proj = Linear(store, "lvsm.cond", cfg.cond_dim(), cfg.d, rng);
    targ_proj = Linear(store, "lvsm.targ", cfg.targ_dim(), cfg.d, rng);
    posemb = store.add("lvsm.pos", Tensor::randn({cfg.tokens_per_view(), cfg.d}, rng, 0.02));
    for (int b = 0; b < cfg.depth; ++b)
        blocks.emplace_back(store, "lvsm.blk" + std::to_string(b), cfg.d, cfg.heads, 0.0, false,
                            rng);
    final_ln = LayerNormLayer(store, "lvsm.ln", cfg.d);
    head = Linear(store, "lvsm.head", cfg.d, cfg.head_dim_out(), rng);
}

namespace {

Image stack_cond_channels(const LvsmCondView& v, int res, int img_channels) {
    require(v.image.w == res && v.plucker.w == res && v.geo.normal.w == res,
            "tokenize: condition view resolution mismatch");
    require(v.image.ch == img_channels, "tokenize: condition image channel count mismatch");
    Image im = Image::zeros(res, res, 12 + img_channels);
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            int c = 0;
            for (int k = 0; k < 6; ++k) im.at(y, x, c++) = v.plucker.at(y, x, k);
            for (int k = 0; k < 3; ++k) im.at(y, x, c++) = v.geo.normal.at(y, x, k);
            for (int k = 0; k < 3; ++k) im.at(y, x, c++) = v.geo.canonical.at(y, x, k);
            for (int k = 0; k < img_channels; ++k) im.at(y, x, c++) = v.image.at(y, x, k);
        }
    return im;
}

Image stack_target_channels(const LvsmTargetView& v, int res) {
    require(v.plucker.w == res && v.geo.normal.w == res,
            "tokenize: target view resolution mismatch");
    Image im = Image::zeros(res, res, 12);
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            int c = 0;
            for (int k = 0; k < 6; ++k) im.at(y, x, c++) = v.plucker.at(y, x, k);
            for (int k = 0; k < 3; ++k) im.at(y, x, c++) = v.geo.normal.at(y, x, k);
            for (int k = 0; k < 3; ++k) im.at(y, x, c++) = v.geo.canonical.at(y, x, k);
        }
    return im;
}

}  // namespace

TokenSet LvsmModel::tokenize(const std::vector<LvsmCondView>& conds,
                             const std::vector<LvsmTargetView>& targets) const {
    require(!conds.empty(), "tokenize: at least one condition view required");
    int grid = int(cfg.grid());
    std::vector<Tensor> parts;
    TokenSet out;
    int block = 0;
    for (const auto& cv : conds) {
        parts.push_back(cond_proj.forward(
            patchify(stack_cond_channels(cv, cfg.image_res, cfg.img_channels), cfg.patch)));
        for (int r = 0; r < grid; ++r)
            for (int c = 0; c < grid; ++c) out.info.push_back({TokenTag::Image, block, r, c});
        ++block;
    }
    for (const auto& tv : targets) {
        parts.push_back(
            targ_proj.forward(patchify(stack_target_channels(tv, cfg.image_res), cfg.patch)));
        for (int r = 0; r < grid; ++r)
            for (int c = 0; c < grid; ++c) out.info.push_back({TokenTag::Latent, block, r, c});
        ++block;
    }
    out.tokens = concat_rows(parts);
    return out;
}

TokenSet LvsmModel::forward(const TokenSet& tokens) const {
    if (blocks.empty()) return tokens;
    int64_t T = tokens.tokens.rows();
    int64_t L = cfg.tokens_per_view();
    require(T % L == 0, "forward: token count not divisible by tokens-per-view");
    int nviews = int(T / L);

    // learned per-patch-position embedding, shared across views
    std::vector<Tensor> pos_rep(size_t(nviews), posemb.value());
    Tensor x = add(tokens.tokens, concat_rows(pos_rep));

    std::vector<int> rows(size_t(T), 0), cols(size_t(T), 0), groups(size_t(T), 0);
    for (int64_t i = 0; i < T; ++i) {
        rows[size_t(i)] = tokens.info[size_t(i)].row;
        cols[size_t(i)] = tokens.info[size_t(i)].col;
        groups[size_t(i)] = tokens.info[size_t(i)].view;
    }
    for (const auto& blk : blocks) x = blk.forward(x, rows, cols, groups, nviews, Tensor());
    x = final_ln.forward(x);

    TokenSet out;
    out.tokens = x;
    out.info = tokens.info;
    return out;
}

Tensor LvsmModel::detokenize_raw(const Tensor& target_tokens) const {
    require(target_tokens.rows() % cfg.tokens_per_view() == 0,
            "detokenize: token count " + std::to_string(target_tokens.rows()) +
                " not divisible by tokens-per-view " + std::to_string(cfg.tokens_per_view()));
    return head.forward(target_tokens);
}

std::vector<Image> LvsmModel::detokenize(const Tensor& target_tokens) const {
    Tensor patches = detokenize_raw(target_tokens);
    int m = int(target_tokens.rows() / cfg.tokens_per_view());
    return unpatchify_views(patches, m, cfg.image_res, cfg.patch, cfg.img_channels, true);
}

std::vector<Image> LvsmModel::synthesize(const std::vector<LvsmCondView>& conds,
                                         const std::vector<LvsmTargetView>& targets) const {
    if (targets.empty()) return {};
    NoGradGuard ng;
    TokenSet tokens = tokenize(conds, targets);
    TokenSet y = forward(tokens);
    int64_t L = cfg.tokens_per_view();
    int64_t cond_tokens = int64_t(conds.size()) * L;
    // condition tokens are discarded; only target tokens reach the head
    Tensor y_t = slice_rows(y.tokens, cond_tokens, y.tokens.rows());
    std::vector<Image> imgs = detokenize(y_t);
    for (size_t i = 0; i < imgs.size(); ++i) {
        const Image& mask = targets[i].geo.mask;
        for (int yy = 0; yy < imgs[i].h; ++yy)
            for (int xx = 0; xx < imgs[i].w; ++xx)
                if (mask.at(yy, xx, 0) == 0.0)
                    for (int c = 0; c < imgs[i].ch; ++c) imgs[i].at(yy, xx, c) = 0.0;
    }
    return imgs;
}

LvsmTrainResult train_lvsm(LvsmModel& model, const std::vector<LvsmScene>& scenes,
                           const LvsmTrainConfig& cfg) {
    cfg.net.validate();
    require(cfg.n_cond >= 1 && cfg.n_target >= 1, "train_lvsm: need conds and targets");
    const int need = cfg.n_cond + cfg.n_target;

    std::vector<size_t> usable;
    for (size_t i = 0; i < scenes.size(); ++i) {
        if (int(scenes[i].views.size()) < need) {
            std::cerr << "train_lvsm: scene " << i << " has " << scenes[i].views.size()
                      << " views, needs " << need << "; skipped\n";
            continue;
        }
        usable.push_back(i);
    }
    require(!usable.empty(), "train_lvsm: no scene has enough views");

    LvsmTrainResult res;
    Rng rng(cfg.seed);
    Adam opt(cfg.lr);
    int start_step = 0;
    if (cfg.resume && !cfg.ckpt.empty() && file_exists(cfg.ckpt)) {
        auto meta = load_checkpoint(cfg.ckpt, model.store, &opt);
        rng.set_state(meta.at("rng_state").get<uint64_t>());
        start_step = meta.at("step").get<int>();
    }
    res.start_step = start_step;

    for (int step = start_step; step < cfg.steps; ++step) {
        size_t scene_id = usable[size_t(step) % usable.size()];
        const LvsmScene& scene = scenes[scene_id];
        // random split: draw a permutation, conditions first then targets
        std::vector<int> order(scene.views.size(), 0);
        for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[size_t(rng.below(i))]);
        // the held-out view never appears in a split
        if (int(scene_id) == cfg.holdout_scene) {
            for (size_t i = 0; i < order.size(); ++i)
                if (order[i] == cfg.holdout_view) {
                    std::swap(order[i], order.back());
                    order.pop_back();
                    break;
                }
        }
        require(int(order.size()) >= need, "train_lvsm: split underflow after holdout");

        std::vector<LvsmCondView> conds;
        std::vector<LvsmTargetView> targets;
        std::vector<const Image*> target_images;
        for (int i = 0; i < cfg.n_cond; ++i) {
            const LvsmView& v = scene.views[size_t(order[size_t(i)])];
            conds.push_back(make_cond_view(v.image, v.geo, v.view.index));
        }
        bool duplicate = rng.uniform() < cfg.duplicate_prob;
        for (int i = 0; i < cfg.n_target; ++i) {
            const LvsmView& v = (duplicate && i == 0)
                                    ? scene.views[size_t(order[0])]
                                    : scene.views[size_t(order[size_t(cfg.n_cond + i)])];
            targets.push_back(make_target_view(v.geo, v.view.index));
            target_images.push_back(&v.image);
        }

        TokenSet tokens = model.tokenize(conds, targets);
        TokenSet y = model.forward(tokens);
        int64_t L = model.cfg.tokens_per_view();
        Tensor y_t = slice_rows(y.tokens, int64_t(conds.size()) * L, y.tokens.rows());
        Tensor pred = model.detokenize_raw(y_t);
        std::vector<Image> target_imgs;
        for (const Image* im : target_images) target_imgs.push_back(*im);
        Tensor want = patchify_views(target_imgs, int(model.cfg.patch));
        Tensor loss = mse(pred, want);

        model.store.zero_grad();
        backward(loss);
        opt.step(model.store);
        res.train_losses.push_back(loss.item());
        if (!cfg.log_csv.empty()) {
            std::filesystem::path p(cfg.log_csv);
            if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
            bool fresh = !std::filesystem::exists(p);
            std::ofstream f(cfg.log_csv, std::ios::app);
            if (fresh) f << "step,stage,loss\n";
            f << step << ",lvsm," << loss.item() << "\n";
        }
    }

    if (!cfg.ckpt.empty()) {
        nlohmann::json meta;
        meta["net"] = cfg.net.to_json();
        meta["seed"] = cfg.seed;
        meta["rng_state"] = rng.state();
        meta["step"] = cfg.steps;
        save_checkpoint(cfg.ckpt, model.store, &opt, meta);
    }
    return res;
}

}  // namespace lumitex
