// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#include "lumitex/relight.hpp"

#include <cmath>
#include <limits>

namespace lumitex {

void LightRig::validate() const {
    for (const auto& l : lights) {
        require(std::abs(norm(l.dir) - 1.0) < 1e-9, "LightRig: light direction not unit length");
        require(l.radiance.x >= 0 && l.radiance.y >= 0 && l.radiance.z >= 0,
                "LightRig: negative radiance");
    }
    require(ambient.x >= 0 && ambient.y >= 0 && ambient.z >= 0, "LightRig: negative ambient");
}

nlohmann::json rig_to_json(const LightRig& rig) {
    nlohmann::json j;
    j["lights"] = nlohmann::json::array();
    for (const auto& l : rig.lights) {
        nlohmann::json e;
        e["dir"] = {l.dir.x, l.dir.y, l.dir.z};
        e["radiance"] = {l.radiance.x, l.radiance.y, l.radiance.z};
        j["lights"].push_back(e);
    }
    j["ambient"] = {rig.ambient.x, rig.ambient.y, rig.ambient.z};
    return j;
}

LightRig rig_from_json(const nlohmann::json& j) {
    LightRig rig;
    for (const auto& e : j.at("lights")) {
        DirLight l;
        auto d = e.at("dir").get<std::array<double, 3>>();
        auto r = e.at("radiance").get<std::array<double, 3>>();
        l.dir = normalized(Vec3{d[0], d[1], d[2]});
        l.radiance = {r[0], r[1], r[2]};
        rig.lights.push_back(l);
    }
    auto a = j.at("ambient").get<std::array<double, 3>>();
    rig.ambient = {a[0], a[1], a[2]};
    rig.validate();
    return rig;
}

Vec3 ggx_brdf(const Vec3& n, const Vec3& l, const Vec3& v, const PBRSample& mat) {
    double nl = dot(n, l);
    double nv = dot(n, v);
    if (nl <= 0.0 || nv <= 0.0) return {0, 0, 0};

    double rough = std::max(0.04, mat.roughness);
    double alpha = rough * rough;
    double a2 = alpha * alpha;

    Vec3 h = normalized(l + v);
    double nh = std::max(0.0, dot(n, h));
    double vh = std::max(0.0, dot(v, h));

    double denom_d = nh * nh * (a2 - 1.0) + 1.0;
    double D = a2 / (M_PI * denom_d * denom_d);

    // exact Smith GGX, separable
    auto g1 = [&](double nx) { return 2.0 * nx / (nx + std::sqrt(a2 + (1.0 - a2) * nx * nx)); };
    double G = g1(nl) * g1(nv);

    Vec3 f0 = Vec3{0.04, 0.04, 0.04} * (1.0 - mat.metallic) + mat.albedo * mat.metallic;
    double fw = std::pow(1.0 - vh, 5.0);
    Vec3 F = f0 + (Vec3{1, 1, 1} - f0) * fw;

    Vec3 spec = F * (D * G / (4.0 * nl * nv));
    Vec3 diff = mat.albedo * ((1.0 - mat.metallic) / M_PI);
    return diff + spec;
}

Image render_view(const TriMesh& mesh, const TextureAtlas& atlas, const ViewSpec& view,
                  const LightRig& rig, const RenderOpts& opts) {
    rig.validate();
    auto frags = rasterize_fragments(mesh, view);
    Image out = Image::zeros(view.width, view.height, 3);

    for (int y = 0; y < view.height; ++y) {
        for (int x = 0; x < view.width; ++x) {
            const Fragment& fr = frags[size_t(y) * view.width + x];
            if (fr.tri < 0) continue;
            const auto& tr = mesh.tris[size_t(fr.tri)];
            double u = fr.beta[0] * tr.uv[0].u + fr.beta[1] * tr.uv[1].u + fr.beta[2] * tr.uv[2].u;
            double v = fr.beta[0] * tr.uv[0].v + fr.beta[1] * tr.uv[1].v + fr.beta[2] * tr.uv[2].v;
            if (opts.oob_samples) {
                int tx = std::clamp(int(u * atlas.res), 0, atlas.res - 1);
                int ty = std::clamp(int(v * atlas.res), 0, atlas.res - 1);
                size_t id = size_t(ty) * atlas.res + tx;
                if (!atlas.covered[id] && !atlas.dilated[id]) ++(*opts.oob_samples);
            }
            PBRSample mat;
            mat.albedo = {atlas.sample(u, v, 0), atlas.sample(u, v, 1), atlas.sample(u, v, 2)};
            mat.metallic = std::clamp(atlas.sample(u, v, 3), 0.0, 1.0);
            mat.roughness = std::clamp(atlas.sample(u, v, 4), 0.04, 1.0);

            Vec3 color{0, 0, 0};
            if (opts.pass == RenderPass::Albedo) {
                color = mat.albedo;
            } else if (opts.pass == RenderPass::Mr) {
                color = {mat.metallic, mat.roughness, 0.0};
            } else {
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
                Vec3 vdir = normalized(view.pos - p);
                for (const auto& light : rig.lights) {
                    double nl = dot(n, light.dir);
                    if (nl <= 0.0) continue;
                    Vec3 f = ggx_brdf(n, light.dir, vdir, mat);
                    color = color + f * light.radiance * nl;
                }
                color = color + rig.ambient * mat.albedo;
            }
            for (int c = 0; c < 3; ++c)
                out.at(y, x, c) = opts.clamp ? std::clamp(color[c], 0.0, 1.0) : color[c];
        }
    }
    return out;
}

double psnr(const Image& a, const Image& b) {
    require(a.same_shape(b), "psnr: image shapes differ");
    double se = 0.0;
    for (size_t i = 0; i < a.px.size(); ++i) {
        double d = a.px[i] - b.px[i];
        se += d * d;
    }
    double mse = se / double(a.px.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

}  // namespace lumitex
