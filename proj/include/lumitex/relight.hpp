// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include "lumitex/bake.hpp"

namespace lumitex {

// Material sample; roughness is floored at 0.04 to keep GGX well-behaved.
struct PBRSample {
    Vec3 albedo{0.5, 0.5, 0.5};
    double metallic = 0.0;
    double roughness = 0.5;
};

struct DirLight {
    Vec3 dir;  // unit vector from the surface toward the light
    Vec3 radiance;
};

// Small discrete light set plus constant ambient; stands in for an
// environment map at this scale.
struct LightRig {
    std::vector<DirLight> lights;
    Vec3 ambient{0, 0, 0};

    void validate() const;
};

nlohmann::json rig_to_json(const LightRig& rig);
LightRig rig_from_json(const nlohmann::json& j);

// Cook-Torrance with GGX distribution, Smith G, Schlick Fresnel:
//   f = (1-metallic) * albedo/pi + D*F*G / (4 (n.l)(n.v))
// n, l, v unit; zero when either cosine is non-positive.
Vec3 ggx_brdf(const Vec3& n, const Vec3& l, const Vec3& v, const PBRSample& mat);

enum class RenderPass { Shaded, Albedo, Mr };

struct RenderOpts {
    RenderPass pass = RenderPass::Shaded;
    bool clamp = true;          // tone-map by clamping to [0,1]
    int* oob_samples = nullptr;  // counts atlas samples outside covered+dilated
};

// Rasterizes the view and shades per pixel: sum over lights of
// brdf * radiance * (n.l), plus ambient * albedo. Albedo/Mr passes write
// the sampled material channels directly.
Image render_view(const TriMesh& mesh, const TextureAtlas& atlas, const ViewSpec& view,
                  const LightRig& rig, const RenderOpts& opts = {});

// Spec alias for the shaded pass.
inline Image render_relit(const TriMesh& mesh, const TextureAtlas& atlas, const ViewSpec& view,
                          const LightRig& rig, const RenderOpts& opts = {}) {
    return render_view(mesh, atlas, view, rig, opts);
}

// 10*log10(1/mse) on [0,1] images; +inf for identical inputs.
double psnr(const Image& a, const Image& b);

}  // namespace lumitex
