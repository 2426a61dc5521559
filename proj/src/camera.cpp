// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#include "lumitex/camera.hpp"

#include <cmath>

#include "lumitex/common.hpp"

namespace lumitex {

void ViewSpec::validate() const {
    require(width >= 8 && height >= 8, "ViewSpec: resolution must be >= 8x8");
    require(fov > 0 && fov < M_PI, "ViewSpec: fov out of (0, pi)");
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            double d = dot(rot.col(a), rot.col(b)) - (a == b ? 1.0 : 0.0);
            require(std::abs(d) < 1e-9, "ViewSpec: rotation not orthonormal");
        }
    require(std::abs(rot.det() - 1.0) < 1e-9, "ViewSpec: rotation determinant != +1");
}

Vec3 ViewSpec::pixel_ray_dir(double px, double py) const {
    double tan_half = std::tan(fov * 0.5);
    double aspect = double(width) / double(height);
    double ndc_x = ((px + 0.5) / double(width)) * 2.0 - 1.0;
    double ndc_y = 1.0 - ((py + 0.5) / double(height)) * 2.0;
    Vec3 dir_cam{ndc_x * tan_half * aspect, ndc_y * tan_half, -1.0};
    return normalized(rot * dir_cam);
}

ViewSpec::Projection ViewSpec::project(const Vec3& p) const {
    Vec3 pc = rot.transposed() * (p - pos);  // world -> camera
    Projection pr;
    pr.dist = norm(p - pos);
    pr.in_front = pc.z < -1e-9;
    if (!pr.in_front) return pr;
    double tan_half = std::tan(fov * 0.5);
    double aspect = double(width) / double(height);
    double ndc_x = pc.x / (-pc.z) / (tan_half * aspect);
    double ndc_y = pc.y / (-pc.z) / tan_half;
    pr.px = (ndc_x + 1.0) * 0.5 * width - 0.5;
    pr.py = (1.0 - ndc_y) * 0.5 * height - 0.5;
    return pr;
}

ViewSpec look_at(const Vec3& pos, const Vec3& target, const Vec3& up, double fov, int width,
                 int height, int index) {
    Vec3 fwd = normalized(target - pos);
    Vec3 right = cross(fwd, up);
    if (norm(right) < 1e-9) right = cross(fwd, Vec3{1, 0, 0});
    if (norm(right) < 1e-9) right = cross(fwd, Vec3{0, 0, 1});
    right = normalized(right);
    Vec3 cam_up = normalized(cross(right, fwd));
    ViewSpec v;
    v.rot = Mat3::from_cols(right, cam_up, fwd * -1.0);
    v.pos = pos;
    v.fov = fov;
    v.width = width;
    v.height = height;
    v.index = index;
    return v;
}

Vec3 fibonacci_dir(int i, int n) {
    // golden-angle spiral over z in (-1,1)
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    double z = 1.0 - (2.0 * i + 1.0) / double(n);
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = golden * double(i);
    return {r * std::cos(phi), z, r * std::sin(phi)};
}

std::vector<ViewSpec> fibonacci_views(int n, double radius, double fov, int res) {
    require(n >= 1, "fibonacci_views: n must be >= 1");
    std::vector<ViewSpec> out;
    out.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        Vec3 d = fibonacci_dir(i, n);
        out.push_back(look_at(d * radius, Vec3{0, 0, 0}, Vec3{0, 1, 0}, fov, res, res, i));
    }
    return out;
}

Image plucker_map(const ViewSpec& view) {
    view.validate();
    Image im = Image::zeros(view.width, view.height, 6);
    for (int y = 0; y < view.height; ++y) {
        for (int x = 0; x < view.width; ++x) {
            Vec3 d = view.pixel_ray_dir(x, y);
            Vec3 m = cross(view.pos, d);
            im.at(y, x, 0) = d.x;
            im.at(y, x, 1) = d.y;
            im.at(y, x, 2) = d.z;
            im.at(y, x, 3) = m.x;
            im.at(y, x, 4) = m.y;
            im.at(y, x, 5) = m.z;
        }
    }
    return im;
}

nlohmann::json view_to_json(const ViewSpec& v) {
    nlohmann::json j;
    j["fov"] = v.fov;
    j["rotation"] = v.rot.m;
    j["translation"] = {v.pos.x, v.pos.y, v.pos.z};
    j["resolution"] = {v.width, v.height};
    j["index"] = v.index;
    return j;
}

ViewSpec view_from_json(const nlohmann::json& j) {
    ViewSpec v;
    v.fov = j.at("fov").get<double>();
    auto r = j.at("rotation").get<std::array<double, 9>>();
    v.rot.m = r;
    auto t = j.at("translation").get<std::array<double, 3>>();
    v.pos = {t[0], t[1], t[2]};
    v.width = j.at("resolution")[0].get<int>();
    v.height = j.at("resolution")[1].get<int>();
    v.index = j.value("index", 0);
    return v;
}

}  // namespace lumitex
