// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#include "lumitex/dataset.hpp"

#include <filesystem>
#include <fstream>

namespace lumitex {

namespace fs = std::filesystem;

nlohmann::json DatasetConfig::to_json() const {
    nlohmann::json j;
    j["scene_count"] = scene_count;
    j["views_per_scene"] = views_per_scene;
    j["image_res"] = image_res;
    j["gt_atlas_res"] = gt_atlas_res;
    j["cam_radius"] = cam_radius;
    j["cam_fov"] = cam_fov;
    j["seed"] = seed;
    return j;
}

DatasetConfig DatasetConfig::from_json(const nlohmann::json& j) {
    DatasetConfig c;
    c.scene_count = j.value("scene_count", 4);
    c.views_per_scene = j.value("views_per_scene", 8);
    c.image_res = j.value("image_res", 32);
    c.gt_atlas_res = j.value("gt_atlas_res", 64);
    c.cam_radius = j.value("cam_radius", 2.8);
    c.cam_fov = j.value("cam_fov", 1.0);
    c.seed = j.value("seed", uint64_t(0));
    return c;
}

nlohmann::json SceneRecord::to_json() const {
    nlohmann::json j;
    j["id"] = id;
    j["mesh"] = mesh;
    j["rig"] = rig;
    j["reference"] = reference;
    j["cameras"] = cameras;
    j["gt_albedo"] = gt_albedo;
    j["gt_metallic"] = gt_metallic;
    j["gt_roughness"] = gt_roughness;
    j["light_rig"] = light_rig;
    j["shaded"] = shaded;
    j["albedo"] = albedo;
    j["mr"] = mr;
    j["has_mr"] = has_mr;
    return j;
}

SceneRecord SceneRecord::from_json(const nlohmann::json& j) {
    SceneRecord r;
    r.id = j.at("id").get<std::string>();
    r.mesh = j.at("mesh").get<std::string>();
    r.rig = j.at("rig").get<std::string>();
    r.reference = j.at("reference").get<std::string>();
    r.cameras = j.at("cameras").get<std::string>();
    r.gt_albedo = j.at("gt_albedo").get<std::string>();
    r.gt_metallic = j.at("gt_metallic").get<std::string>();
    r.gt_roughness = j.at("gt_roughness").get<std::string>();
    r.light_rig = j.value("light_rig", 0);
    r.shaded = j.at("shaded").get<std::vector<std::string>>();
    r.albedo = j.at("albedo").get<std::vector<std::string>>();
    r.mr = j.at("mr").get<std::vector<std::string>>();
    r.has_mr = j.value("has_mr", true);
    return r;
}

LightRig preset_rig(int id) {
    LightRig rig;
    switch (id % 3) {
        case 0:
            rig.lights.push_back({normalized(Vec3{0.4, 0.8, 0.45}), {0.9, 0.85, 0.8}});
            rig.lights.push_back({normalized(Vec3{-0.6, 0.3, -0.5}), {0.25, 0.28, 0.35}});
            rig.ambient = {0.1, 0.1, 0.12};
            break;
        case 1:
            rig.lights.push_back({normalized(Vec3{-0.7, 0.5, 0.3}), {0.8, 0.75, 0.65}});
            rig.lights.push_back({normalized(Vec3{0.5, -0.2, 0.7}), {0.3, 0.32, 0.4}});
            rig.ambient = {0.14, 0.12, 0.1};
            break;
        default:
            rig.lights.push_back({normalized(Vec3{0.1, 0.95, -0.2}), {0.7, 0.72, 0.8}});
            rig.lights.push_back({normalized(Vec3{0.8, 0.1, 0.5}), {0.35, 0.3, 0.25}});
            rig.ambient = {0.08, 0.1, 0.14};
            break;
    }
    return rig;
}

namespace {

TriMesh preset_mesh(int id) {
    switch (id % 3) {
        case 0:
            return make_cube();
        case 1:
            return make_uv_sphere(10, 14);
        default: {
            TriMesh m = make_cylinder(14);
            normalize_mesh(m);
            return m;
        }
    }
}

// Procedural PBR atlases: checkerboard, gradient, two-tone.
TextureAtlas preset_atlas(int res, int id, Rng& rng) {
    TextureAtlas a = TextureAtlas::zeros(res);
    Vec3 c1{0.2 + 0.6 * rng.uniform(), 0.2 + 0.6 * rng.uniform(), 0.2 + 0.6 * rng.uniform()};
    Vec3 c2{0.2 + 0.6 * rng.uniform(), 0.2 + 0.6 * rng.uniform(), 0.2 + 0.6 * rng.uniform()};
    for (int ty = 0; ty < res; ++ty) {
        for (int tx = 0; tx < res; ++tx) {
            size_t t = size_t(ty) * res + tx;
            double u = (tx + 0.5) / res, v = (ty + 0.5) / res;
            Vec3 alb;
            double metal, rough;
            switch (id % 3) {
                case 0: {  // checkerboard
                    bool check = ((tx * 8 / res) + (ty * 8 / res)) % 2 == 0;
                    alb = check ? c1 : c2;
                    metal = check ? 0.85 : 0.05;
                    rough = check ? 0.25 : 0.7;
                    break;
                }
                case 1: {  // gradient
                    alb = c1 * (1.0 - u) + c2 * u;
                    alb.y = 0.2 + 0.6 * v;
                    metal = 0.1 + 0.7 * v;
                    rough = 0.2 + 0.6 * u;
                    break;
                }
                default: {  // two-tone
                    alb = v < 0.5 ? c1 : c2;
                    metal = v < 0.5 ? 0.75 : 0.1;
                    rough = v < 0.5 ? 0.3 : 0.65;
                    break;
                }
            }
            // snapped to the 8-bit grid so renders from the written PNGs
            // reproduce the dataset targets exactly
            a.albedo.px[t * 3 + 0] = quantize8(alb.x);
            a.albedo.px[t * 3 + 1] = quantize8(alb.y);
            a.albedo.px[t * 3 + 2] = quantize8(alb.z);
            a.metallic.px[t] = quantize8(metal);
            a.roughness.px[t] = quantize8(rough);
            a.occupied[t] = 1;
            a.covered[t] = 1;
        }
    }
    return a;
}

}  // namespace

std::vector<SceneRecord> gen_dataset(const DatasetConfig& cfg, const std::string& root) {
    fs::create_directories(root);
    {
        std::ofstream probe(fs::path(root) / ".write_probe");
        require(bool(probe), "gen_dataset: output directory not writable: " + root);
    }
    fs::remove(fs::path(root) / ".write_probe");

    Rng rng(cfg.seed);
    std::vector<SceneRecord> records;
    for (int s = 0; s < cfg.scene_count; ++s) {
        SceneRecord rec;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "scene_%03d", s);
        rec.id = buf;
        fs::path dir = fs::path(root) / rec.id;
        fs::create_directories(dir / "views");

        TriMesh mesh = preset_mesh(s);
        TextureAtlas atlas = preset_atlas(cfg.gt_atlas_res, s, rng);
        rec.light_rig = s % 3;
        LightRig rig = preset_rig(rec.light_rig);
        // every third scene ships without mr maps (shaded-only supervision)
        rec.has_mr = (s % 3) != 2;

        rec.mesh = rec.id + "/mesh.obj";
        save_obj((fs::path(root) / rec.mesh).string(), mesh);
        rec.rig = rec.id + "/rig.json";
        {
            std::ofstream f(fs::path(root) / rec.rig);
            f << rig_to_json(rig).dump(2) << "\n";
        }
        rec.gt_albedo = rec.id + "/gt_albedo.png";
        rec.gt_metallic = rec.id + "/gt_metallic.png";
        rec.gt_roughness = rec.id + "/gt_roughness.png";
        write_png8((fs::path(root) / rec.gt_albedo).string(), atlas.albedo);
        write_png8((fs::path(root) / rec.gt_metallic).string(), atlas.metallic);
        write_png8((fs::path(root) / rec.gt_roughness).string(), atlas.roughness);

        auto views = fibonacci_views(cfg.views_per_scene, cfg.cam_radius, cfg.cam_fov,
                                     cfg.image_res);
        nlohmann::json cams = nlohmann::json::array();
        for (int v = 0; v < cfg.views_per_scene; ++v) {
            cams.push_back(view_to_json(views[size_t(v)]));
            char vb[32];
            std::snprintf(vb, sizeof(vb), "views/%03d", v);
            fs::create_directories(dir / vb);

            Image shaded = render_view(mesh, atlas, views[size_t(v)], rig, {});
            RenderOpts ao;
            ao.pass = RenderPass::Albedo;
            Image albedo = render_view(mesh, atlas, views[size_t(v)], rig, ao);
            RenderOpts mo;
            mo.pass = RenderPass::Mr;
            Image mr = render_view(mesh, atlas, views[size_t(v)], rig, mo);

            std::string base = rec.id + "/" + vb + "/";
            rec.shaded.push_back(base + "shaded.png");
            rec.albedo.push_back(base + "albedo.png");
            write_png8((fs::path(root) / rec.shaded.back()).string(), shaded);
            write_png8((fs::path(root) / rec.albedo.back()).string(), albedo);
            if (rec.has_mr) {
                rec.mr.push_back(base + "mr.png");
                write_png8((fs::path(root) / rec.mr.back()).string(), mr);
            }
        }
        {
            rec.cameras = rec.id + "/cameras.json";
            std::ofstream f(fs::path(root) / rec.cameras);
            f << cams.dump(2) << "\n";
        }
        // the reference image is the first condition view's shaded render
        rec.reference = rec.shaded[0];
        records.push_back(std::move(rec));
    }

    nlohmann::json index = nlohmann::json::array();
    for (const auto& r : records) index.push_back(r.to_json());
    std::ofstream f(fs::path(root) / "scenes.json");
    f << index.dump(2) << "\n";
    return records;
}

std::vector<SceneRecord> load_scene_index(const std::string& root) {
    std::ifstream f(fs::path(root) / "scenes.json");
    if (!f) throw StageOrderError("dataset index not found at " + root +
                                  "/scenes.json (run gen-dataset first)");
    nlohmann::json index = nlohmann::json::parse(f);
    std::vector<SceneRecord> records;
    for (const auto& j : index) records.push_back(SceneRecord::from_json(j));
    return records;
}

TextureAtlas load_gt_atlas(const std::string& root, const SceneRecord& rec) {
    Image albedo = read_png((fs::path(root) / rec.gt_albedo).string());
    Image metallic = read_png((fs::path(root) / rec.gt_metallic).string());
    Image roughness = read_png((fs::path(root) / rec.gt_roughness).string());
    TextureAtlas a = TextureAtlas::zeros(albedo.w);
    a.albedo = albedo;
    a.metallic = metallic;
    a.roughness = roughness;
    std::fill(a.occupied.begin(), a.occupied.end(), 1);
    std::fill(a.covered.begin(), a.covered.end(), 1);
    return a;
}

TriMesh scene_mesh(const std::string& root, const SceneRecord& rec) {
    return load_obj((fs::path(root) / rec.mesh).string());
}

LightRig scene_rig(const std::string& root, const SceneRecord& rec) {
    std::ifstream f(fs::path(root) / rec.rig);
    require(bool(f), "scene_rig: missing " + rec.rig);
    return rig_from_json(nlohmann::json::parse(f));
}

std::vector<ViewSpec> scene_cameras(const std::string& root, const SceneRecord& rec) {
    std::ifstream f(fs::path(root) / rec.cameras);
    require(bool(f), "scene_cameras: missing " + rec.cameras);
    nlohmann::json cams = nlohmann::json::parse(f);
    std::vector<ViewSpec> out;
    for (const auto& j : cams) out.push_back(view_from_json(j));
    return out;
}

}  // namespace lumitex
