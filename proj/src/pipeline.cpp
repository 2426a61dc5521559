// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#include "lumitex/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "lumitex/checkpoint.hpp"

namespace lumitex {

namespace fs = std::filesystem;

namespace {

bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

std::string view_tag(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%03d", i);
    return buf;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(path);
    require(bool(f), "cannot write " + path);
    f << j.dump(2) << "\n";
}

nlohmann::json read_json(const std::string& path, const std::string& producer_stage) {
    std::ifstream f(path);
    if (!f)
        throw StageOrderError("missing artifact " + path + " (run " + producer_stage +
                              " first)");
    return nlohmann::json::parse(f);
}

Image require_png(const std::string& path, const std::string& producer_stage) {
    if (!fs::exists(path))
        throw StageOrderError("missing artifact " + path + " (run " + producer_stage +
                              " first)");
    return read_png(path);
}

const SceneRecord& find_scene(const std::vector<SceneRecord>& records, const std::string& id) {
    for (const auto& r : records)
        if (r.id == id) return r;
    throw ConfigError("scene '" + id + "' not found in the dataset index");
}

// 6-channel albedo + mr image used as the LVSM's condition/target payload
Image pack_material_image(const Image& albedo, const Image& mr) {
    Image out = Image::zeros(albedo.w, albedo.h, 6);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = albedo.at(y, x, c);
                out.at(y, x, 3 + c) = mr.at(y, x, c);
            }
    return out;
}

void split_material_image(const Image& six, Image* albedo, Image* mr) {
    *albedo = Image::zeros(six.w, six.h, 3);
    *mr = Image::zeros(six.w, six.h, 3);
    for (int y = 0; y < six.h; ++y)
        for (int x = 0; x < six.w; ++x)
            for (int c = 0; c < 3; ++c) {
                albedo->at(y, x, c) = six.at(y, x, c);
                mr->at(y, x, c) = six.at(y, x, 3 + c);
            }
}

}  // namespace

void PipelineConfig::validate() const {
    if (net.views < 1) throw ConfigError("pipeline: net.views (N) must be >= 1");
    if (m_targets < 0) throw ConfigError("pipeline: m_targets (M) must be >= 0");
    if (k_candidates < m_targets)
        throw ConfigError("pipeline: k_candidates (K) must be >= m_targets (M)");
    for (int r : {dataset.image_res, atlas_res}) {
        if (!power_of_two(r) || r > 256)
            throw ConfigError("pipeline: resolutions must be powers of two <= 256, got " +
                              std::to_string(r));
    }
    if (dataset.image_res != net.image_res || dataset.image_res != lvsm.image_res)
        throw ConfigError("pipeline: dataset.image_res must match net/lvsm image_res");
    if (dataset.views_per_scene < lvsm_n_cond + lvsm_n_target)
        throw ConfigError("pipeline: dataset.views_per_scene too small for the lvsm split");
    if (dataset.views_per_scene < net.views)
        throw ConfigError("pipeline: dataset.views_per_scene smaller than net.views");
    net.validate();
    lvsm.validate();
}

nlohmann::json PipelineConfig::to_json() const {
    nlohmann::json j;
    j["out_dir"] = out_dir;
    j["scene"] = scene;
    j["dataset"] = dataset.to_json();
    j["net"] = net.to_json();
    j["lvsm"] = lvsm.to_json();
    j["m_targets"] = m_targets;
    j["k_candidates"] = k_candidates;
    j["atlas_res"] = atlas_res;
    j["relight_views"] = relight_views;
    j["sample_steps"] = sample_steps;
    j["seam_radius"] = seam_radius;
    j["stage1_steps"] = stage1_steps;
    j["stage2_steps"] = stage2_steps;
    j["lvsm_steps"] = lvsm_steps;
    j["lvsm_n_cond"] = lvsm_n_cond;
    j["lvsm_n_target"] = lvsm_n_target;
    j["lr"] = lr;
    j["seed"] = seed;
    j["threads"] = threads;
    j["min_coverage_after"] = min_coverage_after;
    return j;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
    PipelineConfig c;
    c.out_dir = j.value("out_dir", c.out_dir);
    c.scene = j.value("scene", c.scene);
    if (j.contains("dataset")) c.dataset = DatasetConfig::from_json(j["dataset"]);
    if (j.contains("net")) c.net = NetConfig::from_json(j["net"]);
    if (j.contains("lvsm")) c.lvsm = LvsmConfig::from_json(j["lvsm"]);
    c.m_targets = j.value("m_targets", c.m_targets);
    c.k_candidates = j.value("k_candidates", c.k_candidates);
    c.atlas_res = j.value("atlas_res", c.atlas_res);
    c.relight_views = j.value("relight_views", c.relight_views);
    c.sample_steps = j.value("sample_steps", c.sample_steps);
    c.seam_radius = j.value("seam_radius", c.seam_radius);
    c.stage1_steps = j.value("stage1_steps", c.stage1_steps);
    c.stage2_steps = j.value("stage2_steps", c.stage2_steps);
    c.lvsm_steps = j.value("lvsm_steps", c.lvsm_steps);
    c.lvsm_n_cond = j.value("lvsm_n_cond", c.lvsm_n_cond);
    c.lvsm_n_target = j.value("lvsm_n_target", c.lvsm_n_target);
    c.lr = j.value("lr", c.lr);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.min_coverage_after = j.value("min_coverage_after", c.min_coverage_after);
    c.dataset.seed = j.value("seed", c.dataset.seed);
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config file not found: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config parse error in ") + path + ": " + e.what());
    }
    try {
        return from_json(j);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config schema error in ") + path + ": " + e.what());
    }
}

void save_geo_maps(const std::string& dir, const GeoMaps& g) {
    fs::create_directories(dir);
    write_png16(dir + "/normal.png", g.normal);
    write_png16(dir + "/canonical.png", g.canonical);
    write_png8(dir + "/mask.png", g.mask);
    Image depth = g.depth;
    for (auto& v : depth.px) v = std::clamp(v / kDepthScale, 0.0, 1.0);
    write_png16(dir + "/depth.png", depth);
    // plucker split into direction and moment groups, remapped to [0,1]
    Image pd = Image::zeros(g.plucker.w, g.plucker.h, 3);
    Image pm = Image::zeros(g.plucker.w, g.plucker.h, 3);
    for (int y = 0; y < g.plucker.h; ++y)
        for (int x = 0; x < g.plucker.w; ++x)
            for (int c = 0; c < 3; ++c) {
                pd.at(y, x, c) = (g.plucker.at(y, x, c) + 1.0) * 0.5;
                pm.at(y, x, c) = (g.plucker.at(y, x, 3 + c) / kDepthScale + 1.0) * 0.5;
            }
    write_png16(dir + "/plucker_d.png", pd);
    write_png16(dir + "/plucker_m.png", pm);
}

GeoMaps load_geo_maps(const std::string& dir, const ViewSpec& view) {
    GeoMaps g;
    g.normal = require_png(dir + "/normal.png", "render-geo");
    g.canonical = require_png(dir + "/canonical.png", "render-geo");
    g.mask = require_png(dir + "/mask.png", "render-geo");
    Image depth = require_png(dir + "/depth.png", "render-geo");
    for (auto& v : depth.px) v *= kDepthScale;
    g.depth = depth;
    g.plucker = plucker_map(view);  // exact, rebuilt from the camera
    return g;
}

void stage_gen_dataset(const PipelineConfig& cfg) {
    gen_dataset(cfg.dataset, cfg.dataset_dir());
}

void stage_render_geo(const PipelineConfig& cfg) {
    auto records = load_scene_index(cfg.dataset_dir());
    for (const auto& rec : records) {
        TriMesh mesh = scene_mesh(cfg.dataset_dir(), rec);
        auto cameras = scene_cameras(cfg.dataset_dir(), rec);
        for (size_t v = 0; v < cameras.size(); ++v) {
            GeoMaps g = rasterize(mesh, cameras[v]);
            save_geo_maps(cfg.dataset_dir() + "/" + rec.id + "/views/" + view_tag(int(v)), g);
        }
    }
}

namespace {

std::vector<GeoMaps> load_scene_geo(const PipelineConfig& cfg, const SceneRecord& rec,
                                    const std::vector<ViewSpec>& cameras, int count) {
    std::vector<GeoMaps> geo;
    for (int v = 0; v < count; ++v)
        geo.push_back(load_geo_maps(
            cfg.dataset_dir() + "/" + rec.id + "/views/" + view_tag(v), cameras[size_t(v)]));
    return geo;
}

}  // namespace

void stage_train_pbr(const PipelineConfig& cfg) {
    auto records = load_scene_index(cfg.dataset_dir());
    std::vector<SceneSample> scenes;
    for (const auto& rec : records) {
        auto cameras = scene_cameras(cfg.dataset_dir(), rec);
        SceneSample s;
        s.reference = require_png(cfg.dataset_dir() + "/" + rec.reference, "gen-dataset");
        s.geo = load_scene_geo(cfg, rec, cameras, cfg.net.views);
        for (int v = 0; v < cfg.net.views; ++v) {
            s.shaded_views.push_back(
                require_png(cfg.dataset_dir() + "/" + rec.shaded[size_t(v)], "gen-dataset"));
            s.albedo_views.push_back(
                require_png(cfg.dataset_dir() + "/" + rec.albedo[size_t(v)], "gen-dataset"));
            if (rec.has_mr)
                s.mr_views.push_back(
                    require_png(cfg.dataset_dir() + "/" + rec.mr[size_t(v)], "gen-dataset"));
        }
        scenes.push_back(std::move(s));
    }

    MvpbrModel model(cfg.net, cfg.seed);
    TwoStageConfig tcfg;
    tcfg.net = cfg.net;
    tcfg.lr = cfg.lr;
    tcfg.stage1_steps = cfg.stage1_steps;
    tcfg.stage2_steps = cfg.stage2_steps;
    tcfg.seed = cfg.seed;
    tcfg.stage1_ckpt = cfg.stage1_ckpt();
    tcfg.stage2_ckpt = cfg.stage2_ckpt();
    tcfg.log_csv = cfg.ckpt_dir() + "/train_pbr.csv";
    std::remove(tcfg.log_csv.c_str());
    train_two_stage(model, scenes, tcfg);
}

void stage_train_lvsm(const PipelineConfig& cfg) {
    auto records = load_scene_index(cfg.dataset_dir());
    std::vector<LvsmScene> scenes;
    for (const auto& rec : records) {
        if (!rec.has_mr) continue;  // material views are the lvsm payload
        auto cameras = scene_cameras(cfg.dataset_dir(), rec);
        LvsmScene scene;
        for (size_t v = 0; v < cameras.size(); ++v) {
            LvsmView lv;
            lv.view = cameras[v];
            lv.geo = load_geo_maps(cfg.dataset_dir() + "/" + rec.id + "/views/" + view_tag(int(v)),
                                   cameras[v]);
            Image albedo = require_png(cfg.dataset_dir() + "/" + rec.albedo[v], "gen-dataset");
            Image mr = require_png(cfg.dataset_dir() + "/" + rec.mr[v], "gen-dataset");
            lv.image = pack_material_image(albedo, mr);
            scene.views.push_back(std::move(lv));
        }
        scenes.push_back(std::move(scene));
    }

    LvsmModel model(cfg.lvsm, cfg.seed);
    LvsmTrainConfig tcfg;
    tcfg.net = cfg.lvsm;
    tcfg.n_cond = cfg.lvsm_n_cond;
    tcfg.n_target = cfg.lvsm_n_target;
    tcfg.steps = cfg.lvsm_steps;
    tcfg.lr = cfg.lr;
    tcfg.seed = cfg.seed;
    tcfg.ckpt = cfg.lvsm_ckpt();
    tcfg.log_csv = cfg.ckpt_dir() + "/train_lvsm.csv";
    std::remove(tcfg.log_csv.c_str());
    train_lvsm(model, scenes, tcfg);
}

void stage_infer(const PipelineConfig& cfg) {
    if (!file_exists(cfg.stage2_ckpt()))
        throw StageOrderError("missing checkpoint " + cfg.stage2_ckpt() +
                              " (run train-pbr first)");
    auto records = load_scene_index(cfg.dataset_dir());
    const SceneRecord& rec = find_scene(records, cfg.scene);
    auto cameras = scene_cameras(cfg.dataset_dir(), rec);

    MvpbrModel model(cfg.net, cfg.seed);
    ParamStore full = model.full_store();
    load_checkpoint(cfg.stage2_ckpt(), full, nullptr);

    MvpbrBranch::Cond cond;
    cond.reference = require_png(cfg.dataset_dir() + "/" + rec.reference, "gen-dataset");
    cond.geo = load_scene_geo(cfg, rec, cameras, cfg.net.views);

    Rng rng(cfg.seed ^ 0x1f2e3d4c);
    // the illumination branch samples first; its final-step states become
    // the context for the material branches
    Tensor shaded_patches = sample_patches(model.shaded, cond, nullptr, cfg.sample_steps, rng);
    for (auto& v : shaded_patches.data()) v = std::clamp(v, 0.0, 1.0);
    ShadedContext ctx;
    {
        NoGradGuard ng;
        ctx = model.shaded.make_context(shaded_patches, cond);
    }
    auto shaded_imgs = unpatchify_views(shaded_patches, cfg.net.views, cfg.net.image_res,
                                        int(cfg.net.patch), cfg.net.channels, true);
    auto albedo_imgs = sample_views(model.albedo, cond, &ctx, cfg.sample_steps, rng);
    auto mr_imgs = sample_views(model.mr, cond, &ctx, cfg.sample_steps, rng);

    std::string dir = cfg.out_dir + "/infer/" + rec.id;
    for (int v = 0; v < cfg.net.views; ++v) {
        write_png8(dir + "/view_" + view_tag(v) + "_shaded.png", shaded_imgs[size_t(v)]);
        write_png8(dir + "/view_" + view_tag(v) + "_albedo.png", albedo_imgs[size_t(v)]);
        write_png8(dir + "/view_" + view_tag(v) + "_mr.png", mr_imgs[size_t(v)]);
    }
}

void stage_select_views(const PipelineConfig& cfg) {
    auto records = load_scene_index(cfg.dataset_dir());
    const SceneRecord& rec = find_scene(records, cfg.scene);
    TriMesh mesh = scene_mesh(cfg.dataset_dir(), rec);
    auto cameras = scene_cameras(cfg.dataset_dir(), rec);

    MeshAtlas atlas = build_mesh_atlas(mesh, cfg.atlas_res);
    std::vector<ViewSpec> initial(cameras.begin(), cameras.begin() + cfg.net.views);
    auto candidates = candidate_set(cfg.k_candidates, cfg.dataset.cam_radius, cfg.dataset.cam_fov,
                                    cfg.dataset.image_res);
    GreedyReport report;
    auto picked = greedy_select(mesh, atlas, candidates, initial, cfg.m_targets, &report);

    std::string dir = cfg.out_dir + "/select/" + rec.id;
    nlohmann::json sel = nlohmann::json::array();
    for (size_t i = 0; i < picked.size(); ++i) {
        picked[i].index = cfg.net.views + int(i);
        sel.push_back(view_to_json(picked[i]));
    }
    write_json(dir + "/selected_views.json", sel);

    CoverageState before = CoverageState::from_atlas(atlas);
    for (const auto& v : initial) before.add(visible_texels(mesh, atlas, v));
    nlohmann::json rep = coverage_report(before, &report);
    write_json(dir + "/report.json", rep);
    fs::create_directories(dir);
    bitset_save(dir + "/coverage_before.bits", before.covered, cfg.atlas_res);
}

void stage_inpaint(const PipelineConfig& cfg) {
    if (!file_exists(cfg.lvsm_ckpt()))
        throw StageOrderError("missing checkpoint " + cfg.lvsm_ckpt() +
                              " (run train-lvsm first)");
    auto records = load_scene_index(cfg.dataset_dir());
    const SceneRecord& rec = find_scene(records, cfg.scene);
    TriMesh mesh = scene_mesh(cfg.dataset_dir(), rec);
    auto cameras = scene_cameras(cfg.dataset_dir(), rec);

    nlohmann::json sel = read_json(cfg.out_dir + "/select/" + rec.id + "/selected_views.json",
                                   "select-views");

    LvsmModel model(cfg.lvsm, cfg.seed);
    load_checkpoint(cfg.lvsm_ckpt(), model.store, nullptr);

    std::string infer_dir = cfg.out_dir + "/infer/" + rec.id;
    std::vector<LvsmCondView> conds;
    for (int v = 0; v < cfg.net.views; ++v) {
        Image albedo = require_png(infer_dir + "/view_" + view_tag(v) + "_albedo.png", "infer");
        Image mr = require_png(infer_dir + "/view_" + view_tag(v) + "_mr.png", "infer");
        GeoMaps geo = load_geo_maps(cfg.dataset_dir() + "/" + rec.id + "/views/" + view_tag(v),
                                    cameras[size_t(v)]);
        conds.push_back(make_cond_view(pack_material_image(albedo, mr), geo, v));
    }
    std::vector<LvsmTargetView> targets;
    std::vector<ViewSpec> target_views;
    for (const auto& j : sel) {
        ViewSpec v = view_from_json(j);
        target_views.push_back(v);
        targets.push_back(make_target_view(rasterize(mesh, v), v.index));
    }

    auto imgs = model.synthesize(conds, targets);
    std::string dir = cfg.out_dir + "/inpaint/" + rec.id;
    for (size_t i = 0; i < imgs.size(); ++i) {
        Image albedo, mr;
        split_material_image(imgs[i], &albedo, &mr);
        write_png8(dir + "/target_" + view_tag(int(i)) + "_albedo.png", albedo);
        write_png8(dir + "/target_" + view_tag(int(i)) + "_mr.png", mr);
    }
}

void stage_bake(const PipelineConfig& cfg) {
    auto records = load_scene_index(cfg.dataset_dir());
    const SceneRecord& rec = find_scene(records, cfg.scene);
    TriMesh mesh = scene_mesh(cfg.dataset_dir(), rec);
    auto cameras = scene_cameras(cfg.dataset_dir(), rec);
    MeshAtlas atlas = build_mesh_atlas(mesh, cfg.atlas_res);

    std::string infer_dir = cfg.out_dir + "/infer/" + rec.id;
    std::vector<BakeView> views;
    for (int v = 0; v < cfg.net.views; ++v) {
        BakeView bv;
        bv.view = cameras[size_t(v)];
        bv.albedo = require_png(infer_dir + "/view_" + view_tag(v) + "_albedo.png", "infer");
        bv.mr = require_png(infer_dir + "/view_" + view_tag(v) + "_mr.png", "infer");
        views.push_back(std::move(bv));
    }
    CoverageState before = CoverageState::from_atlas(atlas);
    for (const auto& bv : views) before.add(visible_texels(mesh, atlas, bv.view));

    nlohmann::json sel = read_json(cfg.out_dir + "/select/" + rec.id + "/selected_views.json",
                                   "select-views");
    std::string inpaint_dir = cfg.out_dir + "/inpaint/" + rec.id;
    int t = 0;
    for (const auto& j : sel) {
        BakeView bv;
        bv.view = view_from_json(j);
        bv.albedo =
            require_png(inpaint_dir + "/target_" + view_tag(t) + "_albedo.png", "inpaint");
        bv.mr = require_png(inpaint_dir + "/target_" + view_tag(t) + "_mr.png", "inpaint");
        views.push_back(std::move(bv));
        ++t;
    }

    BakeResult res = bake(mesh, atlas, views);
    TextureAtlas dilated = seam_dilate(res.atlas, cfg.seam_radius);

    std::string dir = cfg.out_dir + "/bake/" + rec.id;
    fs::create_directories(dir);
    write_png8(dir + "/atlas_albedo.png", dilated.albedo);
    write_png8(dir + "/atlas_metallic.png", dilated.metallic);
    write_png8(dir + "/atlas_roughness.png", dilated.roughness);
    bitset_save(dir + "/coverage.bits", res.coverage.covered, cfg.atlas_res);

    nlohmann::json cov;
    cov["atlas_res"] = cfg.atlas_res;
    cov["occupied"] = res.coverage.occupied_count();
    cov["covered_before"] = before.covered_count();
    cov["covered_after"] = res.coverage.covered_count();
    cov["coverage_before"] = before.ratio();
    cov["coverage_after"] = res.coverage.ratio();
    write_json(dir + "/coverage.json", cov);
}

namespace {

TextureAtlas load_baked_atlas(const PipelineConfig& cfg, const std::string& scene_id) {
    std::string dir = cfg.out_dir + "/bake/" + scene_id;
    TextureAtlas a = TextureAtlas::zeros(cfg.atlas_res);
    a.albedo = require_png(dir + "/atlas_albedo.png", "bake");
    a.metallic = require_png(dir + "/atlas_metallic.png", "bake");
    a.roughness = require_png(dir + "/atlas_roughness.png", "bake");
    a.covered = bitset_load(dir + "/coverage.bits");
    std::fill(a.occupied.begin(), a.occupied.end(), 1);
    return a;
}

}  // namespace

void stage_relight(const PipelineConfig& cfg) {
    auto records = load_scene_index(cfg.dataset_dir());
    const SceneRecord& rec = find_scene(records, cfg.scene);
    TriMesh mesh = scene_mesh(cfg.dataset_dir(), rec);
    LightRig rig = scene_rig(cfg.dataset_dir(), rec);
    TextureAtlas baked = load_baked_atlas(cfg, rec.id);
    TextureAtlas gt = load_gt_atlas(cfg.dataset_dir(), rec);

    auto views = fibonacci_views(cfg.relight_views, cfg.dataset.cam_radius, cfg.dataset.cam_fov,
                                 cfg.dataset.image_res);
    std::string dir = cfg.out_dir + "/relight/" + rec.id;
    fs::create_directories(dir);
    std::ofstream csv(dir + "/metrics.csv");
    csv << "view,psnr\n";
    for (size_t i = 0; i < views.size(); ++i) {
        Image got = render_relit(mesh, baked, views[i], rig);
        Image want = render_relit(mesh, gt, views[i], rig);
        write_png8(dir + "/view_" + view_tag(int(i)) + ".png", got);
        write_png8(dir + "/gt_view_" + view_tag(int(i)) + ".png", want);
        csv << i << "," << psnr(got, want) << "\n";
    }
}

nlohmann::json stage_eval(const PipelineConfig& cfg) {
    auto records = load_scene_index(cfg.dataset_dir());
    const SceneRecord& rec = find_scene(records, cfg.scene);

    nlohmann::json cov = read_json(cfg.out_dir + "/bake/" + rec.id + "/coverage.json", "bake");
    std::string metrics_path = cfg.out_dir + "/relight/" + rec.id + "/metrics.csv";
    std::ifstream csv(metrics_path);
    if (!csv) throw StageOrderError("missing artifact " + metrics_path + " (run relight first)");

    std::vector<double> psnrs;
    std::string line;
    std::getline(csv, line);  // header
    while (std::getline(csv, line)) {
        auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        psnrs.push_back(std::stod(line.substr(comma + 1)));
    }

    double mean_psnr = 0;
    for (double p : psnrs) mean_psnr += p;
    if (!psnrs.empty()) mean_psnr /= double(psnrs.size());

    nlohmann::json j;
    j["scene"] = rec.id;
    j["coverage_before"] = cov["coverage_before"];
    j["coverage_after"] = cov["coverage_after"];
    j["occupied"] = cov["occupied"];
    j["covered_before"] = cov["covered_before"];
    j["covered_after"] = cov["covered_after"];
    j["per_view_psnr"] = psnrs;
    j["mean_psnr"] = mean_psnr;
    j["thresholds"]["min_coverage_after"] = cfg.min_coverage_after;
    j["thresholds"]["coverage_monotone"] = true;
    bool pass = cov["coverage_after"].get<double>() >= cov["coverage_before"].get<double>() &&
                cov["coverage_after"].get<double>() >= cfg.min_coverage_after;
    j["pass"] = pass;
    write_json(cfg.out_dir + "/eval/" + rec.id + ".json", j);
    return j;
}

}  // namespace lumitex
