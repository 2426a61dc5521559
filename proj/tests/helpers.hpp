// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
//
// Test-only oracles and harnesses. These stay independent of the library
// code paths they check.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "lumitex/camera.hpp"
#include "lumitex/mesh.hpp"
#include "lumitex/tensor.hpp"

namespace lumitex::testing {

// ---- numeric oracles -------------------------------------------------------

// Reference matmul: plain triple loop, accumulation order fixed.
inline std::vector<double> matmul_oracle(const std::vector<double>& a,
                                         const std::vector<double>& b, int m, int k, int n) {
    std::vector<double> c(size_t(m) * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a[size_t(i) * k + p] * b[size_t(p) * n + j];
            c[size_t(i) * n + j] = acc;
        }
    return c;
}

// Extended-precision softmax of one row.
inline std::vector<double> softmax_oracle(const std::vector<double>& row) {
    long double mx = row[0];
    for (double v : row) mx = std::max<long double>(mx, v);
    long double denom = 0.0L;
    std::vector<long double> e(row.size());
    for (size_t i = 0; i < row.size(); ++i) {
        e[i] = expl((long double)row[i] - mx);
        denom += e[i];
    }
    std::vector<double> out(row.size());
    for (size_t i = 0; i < row.size(); ++i) out[i] = double(e[i] / denom);
    return out;
}

// ---- finite differences -----------------------------------------------------

// Max relative error between analytic and central-difference gradients of
// scalar-valued f over every element of every input.
inline double fd_max_rel_err(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                             std::vector<Tensor> inputs, double h = 1e-5) {
    for (auto& t : inputs) t.set_requires_grad(true);
    Tensor loss = f(inputs);
    backward(loss);
    std::vector<std::vector<double>> analytic;
    for (auto& t : inputs) analytic.push_back(t.grad());

    double worst = 0.0;
    for (size_t ti = 0; ti < inputs.size(); ++ti) {
        auto& data = inputs[ti].data();
        for (size_t i = 0; i < data.size(); ++i) {
            double keep = data[i];
            data[i] = keep + h;
            double fp = f(inputs).item();
            data[i] = keep - h;
            double fm = f(inputs).item();
            data[i] = keep;
            double num = (fp - fm) / (2.0 * h);
            double rel = std::abs(analytic[ti][i] - num) / (std::abs(analytic[ti][i]) + 1e-8);
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

// ---- geometry oracles --------------------------------------------------------

// Independent pixel unprojection: builds the ray through pixel (px,py) from
// first principles (NDC mapping + camera basis), no ViewSpec helpers.
inline void unproject_oracle(const ViewSpec& v, double px, double py, Vec3* dir_out,
                             Vec3* moment_out) {
    double tan_half = std::tan(v.fov / 2.0);
    double aspect = double(v.width) / double(v.height);
    double ndc_x = 2.0 * (px + 0.5) / double(v.width) - 1.0;
    double ndc_y = 1.0 - 2.0 * (py + 0.5) / double(v.height);
    Vec3 right = v.rot.col(0), up = v.rot.col(1), back = v.rot.col(2);
    Vec3 d = right * (ndc_x * tan_half * aspect) + up * (ndc_y * tan_half) + back * -1.0;
    d = normalized(d);
    *dir_out = d;
    *moment_out = cross(v.pos, d);
}

// Independent segment/triangle intersection for the visibility oracle:
// plane intersection followed by a projected barycentric inside test
// (deliberately not Moller-Trumbore).
inline bool oracle_segment_blocked(const TriMesh& mesh, const Vec3& o, const Vec3& p,
                                   int skip_tri) {
    Vec3 d = p - o;
    for (int t = 0; t < int(mesh.tris.size()); ++t) {
        if (t == skip_tri) continue;
        const auto& tr = mesh.tris[size_t(t)];
        Vec3 a = mesh.positions[size_t(tr.v[0])];
        Vec3 b = mesh.positions[size_t(tr.v[1])];
        Vec3 c = mesh.positions[size_t(tr.v[2])];
        Vec3 n = cross(b - a, c - a);
        double dn = dot(d, n);
        if (std::abs(dn) < 1e-15) continue;
        double s = dot(a - o, n) / dn;
        if (s <= 1e-6 || s >= 1.0 - 1e-6) continue;
        Vec3 x = o + d * s;
        // project onto the dominant axis plane and test barycentrics there
        int ax = 0;
        double mx = std::abs(n.x);
        if (std::abs(n.y) > mx) {
            ax = 1;
            mx = std::abs(n.y);
        }
        if (std::abs(n.z) > mx) ax = 2;
        int u = (ax + 1) % 3, w = (ax + 2) % 3;
        double xu = x[u] - a[u], xw = x[w] - a[w];
        double bu = b[u] - a[u], bw = b[w] - a[w];
        double cu = c[u] - a[u], cw = c[w] - a[w];
        double det = bu * cw - bw * cu;
        if (std::abs(det) < 1e-30) continue;
        double l1 = (xu * cw - xw * cu) / det;
        double l2 = (bu * xw - bw * xu) / det;
        double l0 = 1.0 - l1 - l2;
        double eps = 1e-9;
        if (l0 >= -eps && l1 >= -eps && l2 >= -eps) return true;
    }
    return false;
}

// Independent projection used by the visibility oracle (not ViewSpec::project).
inline bool oracle_project(const ViewSpec& v, const Vec3& p, double* px, double* py) {
    Vec3 rel = p - v.pos;
    double cx = dot(v.rot.col(0), rel);
    double cy = dot(v.rot.col(1), rel);
    double cz = dot(v.rot.col(2), rel);  // along +back; in front when negative
    if (cz >= -1e-9) return false;
    double tan_half = std::tan(v.fov / 2.0);
    double aspect = double(v.width) / double(v.height);
    *px = (cx / (-cz) / (tan_half * aspect) + 1.0) / 2.0 * v.width - 0.5;
    *py = (1.0 - cy / (-cz) / tan_half) / 2.0 * v.height - 0.5;
    return true;
}

}  // namespace lumitex::testing
