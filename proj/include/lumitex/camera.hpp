// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "lumitex/image.hpp"
#include "lumitex/vec.hpp"

namespace lumitex {

// Pinhole camera. Right-handed, y-up world; the camera looks along -z of
// its own frame. rot is camera-to-world, columns = (right, up, -forward).
struct ViewSpec {
    Mat3 rot;
    Vec3 pos;
    double fov = 0.8;  // vertical, radians
    int width = 32, height = 32;
    int index = 0;

    // Checked invariants: orthonormal rotation with det +1, resolution >= 8x8.
    void validate() const;

    Vec3 forward() const { return rot.col(2) * -1.0; }

    // World ray through the center of pixel (px, py).
    Vec3 pixel_ray_dir(double px, double py) const;

    // Projects a world point; returns continuous pixel coords (centers at
    // integers), camera distance, and whether the point is in front.
    struct Projection {
        double px = 0, py = 0, dist = 0;
        bool in_front = false;
    };
    Projection project(const Vec3& p) const;

    bool inside_image(double px, double py) const {
        return px >= -0.5 && px <= width - 0.5 && py >= -0.5 && py <= height - 0.5;
    }
};

// Camera at `pos` aimed at `target` with an up hint.
ViewSpec look_at(const Vec3& pos, const Vec3& target, const Vec3& up, double fov, int width,
                 int height, int index = 0);

// i-th of n quasi-uniform directions on the unit sphere.
Vec3 fibonacci_dir(int i, int n);

// n cameras on a Fibonacci sphere of `radius`, all looking at the origin.
std::vector<ViewSpec> fibonacci_views(int n, double radius, double fov, int res);

// 6-channel Plücker ray map: d (unit direction) then m = o x d per pixel.
Image plucker_map(const ViewSpec& view);

// JSON schema: {"fov","rotation"(9, row-major),"translation"(3),
// "resolution"([w,h]),"index"}.
nlohmann::json view_to_json(const ViewSpec& v);
ViewSpec view_from_json(const nlohmann::json& j);

}  // namespace lumitex
