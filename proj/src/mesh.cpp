// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#include "lumitex/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "lumitex/common.hpp"

namespace lumitex {

void normalize_mesh(TriMesh& mesh) {
    if (mesh.positions.empty()) return;
    Vec3 lo = mesh.positions[0], hi = mesh.positions[0];
    for (const auto& p : mesh.positions) {
        for (int i = 0; i < 3; ++i) {
            lo[i] = std::min(lo[i], p[i]);
            hi[i] = std::max(hi[i], p[i]);
        }
    }
    Vec3 center = (lo + hi) * 0.5;
    double half = 0.0;
    for (int i = 0; i < 3; ++i) half = std::max(half, (hi[i] - lo[i]) * 0.5);
    double scale = half > 0 ? 1.0 / half : 1.0;
    for (auto& p : mesh.positions) p = (p - center) * scale;
}

TriMesh load_obj(const std::string& path) {
    std::ifstream f(path);
    require(bool(f), "load_obj: cannot open " + path);

    std::vector<Vec3> vs;
    std::vector<Vec2> vts;
    std::vector<Vec3> vns;
    struct Corner {
        int v = 0, vt = 0, vn = 0;  // 1-based; 0 = absent
    };
    TriMesh mesh;
    std::vector<std::pair<int, Vec3>> vn_accum;  // vertex -> normal, resolved at end
    bool any_vn = false;

    auto resolve = [](int idx, size_t count, const char* what) {
        int i = idx > 0 ? idx - 1 : int(count) + idx;
        require(i >= 0 && i < int(count), std::string("load_obj: ") + what + " index out of range");
        return i;
    };

    std::string line;
    while (std::getline(f, line)) {
        if (line.size() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            Vec3 p;
            ss >> p.x >> p.y >> p.z;
            vs.push_back(p);
        } else if (tag == "vt") {
            Vec2 t;
            ss >> t.u >> t.v;
            vts.push_back(t);
        } else if (tag == "vn") {
            Vec3 n;
            ss >> n.x >> n.y >> n.z;
            vns.push_back(n);
            any_vn = true;
        } else if (tag == "f") {
            std::vector<Corner> poly;
            std::string tok;
            while (ss >> tok) {
                Corner c;
                size_t s1 = tok.find('/');
                if (s1 == std::string::npos) {
                    c.v = std::stoi(tok);
                } else {
                    c.v = std::stoi(tok.substr(0, s1));
                    size_t s2 = tok.find('/', s1 + 1);
                    std::string mid = s2 == std::string::npos ? tok.substr(s1 + 1)
                                                              : tok.substr(s1 + 1, s2 - s1 - 1);
                    if (!mid.empty()) c.vt = std::stoi(mid);
                    if (s2 != std::string::npos && s2 + 1 < tok.size())
                        c.vn = std::stoi(tok.substr(s2 + 1));
                }
                poly.push_back(c);
            }
            require(poly.size() >= 3, "load_obj: face with fewer than 3 corners");
            for (const auto& c : poly)
                require(c.vt != 0, "load_obj: mesh has no UV atlas (face corner without vt)");
            // fan triangulation
            for (size_t k = 1; k + 1 < poly.size(); ++k) {
                Corner cs[3] = {poly[0], poly[k], poly[k + 1]};
                TriMesh::Tri tri;
                for (int i = 0; i < 3; ++i) {
                    int vi = resolve(cs[i].v, vs.size(), "vertex");
                    tri.v[i] = vi;
                    Vec2 uv = vts[size_t(resolve(cs[i].vt, vts.size(), "uv"))];
                    tri.uv[i] = uv;
                    if (cs[i].vn != 0)
                        vn_accum.push_back({vi, vns[size_t(resolve(cs[i].vn, vns.size(), "normal"))]});
                }
                mesh.tris.push_back(tri);
            }
        }
    }
    require(!mesh.tris.empty(), "load_obj: no faces in " + path);
    mesh.positions = vs;
    if (any_vn && !vn_accum.empty()) {
        mesh.vnormals.assign(vs.size(), Vec3{0, 0, 0});
        for (auto& [vi, n] : vn_accum) mesh.vnormals[size_t(vi)] = mesh.vnormals[size_t(vi)] + n;
        for (auto& n : mesh.vnormals) n = normalized(n);
    }
    normalize_mesh(mesh);
    for (const auto& t : mesh.tris)
        for (int i = 0; i < 3; ++i)
            require(t.uv[i].u >= -1e-9 && t.uv[i].u <= 1 + 1e-9 && t.uv[i].v >= -1e-9 &&
                        t.uv[i].v <= 1 + 1e-9,
                    "load_obj: UV outside [0,1]^2 in " + path);
    return mesh;
}

void save_obj(const std::string& path, const TriMesh& mesh) {
    std::ofstream f(path);
    require(bool(f), "save_obj: cannot open " + path);
    f.precision(12);
    for (const auto& p : mesh.positions) f << "v " << p.x << " " << p.y << " " << p.z << "\n";
    for (const auto& t : mesh.tris)
        for (int i = 0; i < 3; ++i) f << "vt " << t.uv[i].u << " " << t.uv[i].v << "\n";
    if (mesh.has_vertex_normals())
        for (const auto& n : mesh.vnormals) f << "vn " << n.x << " " << n.y << " " << n.z << "\n";
    int vt = 1;
    for (const auto& t : mesh.tris) {
        f << "f";
        for (int i = 0; i < 3; ++i) {
            f << " " << (t.v[i] + 1) << "/" << vt++;
            if (mesh.has_vertex_normals()) f << "/" << (t.v[i] + 1);
        }
        f << "\n";
    }
}

TriMesh make_cube() {
    TriMesh m;
    for (int i = 0; i < 8; ++i)
        m.positions.push_back({i & 1 ? 1.0 : -1.0, i & 2 ? 1.0 : -1.0, i & 4 ? 1.0 : -1.0});
    // faces as (+x,-x,+y,-y,+z,-z), each with outward CCW winding
    const int faces[6][4] = {
        {1, 3, 7, 5},  // +x
        {0, 4, 6, 2},  // -x
        {2, 6, 7, 3},  // +y
        {0, 1, 5, 4},  // -y
        {4, 5, 7, 6},  // +z
        {0, 2, 3, 1},  // -z
    };
    // 3x2 chart grid, each face inset inside its cell to leave a gutter
    const double inset = 0.04;
    for (int fidx = 0; fidx < 6; ++fidx) {
        int cx = fidx % 3, cy = fidx / 3;
        double u0 = (cx + inset) / 3.0, u1 = (cx + 1 - inset) / 3.0;
        double v0 = (cy + inset) / 2.0, v1 = (cy + 1 - inset) / 2.0;
        Vec2 uv[4] = {{u0, v0}, {u1, v0}, {u1, v1}, {u0, v1}};
        const int* q = faces[fidx];
        m.tris.push_back({{q[0], q[1], q[2]}, {uv[0], uv[1], uv[2]}});
        m.tris.push_back({{q[0], q[2], q[3]}, {uv[0], uv[2], uv[3]}});
    }
    return m;
}

TriMesh make_icosphere(int subdiv) {
    // icosahedron
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> vs = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                            {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                            {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    for (auto& v : vs) v = normalized(v);
    std::vector<std::array<int, 3>> fs = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
        {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
        auto key = std::minmax(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        vs.push_back(normalized((vs[size_t(a)] + vs[size_t(b)]) * 0.5));
        int idx = int(vs.size()) - 1;
        midpoint[key] = idx;
        return idx;
    };
    for (int s = 0; s < subdiv; ++s) {
        std::vector<std::array<int, 3>> next;
        next.reserve(fs.size() * 4);
        for (auto& f : fs) {
            int a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
            next.push_back({f[0], a, c});
            next.push_back({f[1], b, a});
            next.push_back({f[2], c, b});
            next.push_back({a, b, c});
        }
        fs = std::move(next);
    }
    TriMesh m;
    m.positions = vs;
    m.vnormals = vs;  // unit sphere: normal == position
    // one UV chart cell per face
    int grid = int(std::ceil(std::sqrt(double(fs.size()))));
    for (size_t i = 0; i < fs.size(); ++i) {
        int cx = int(i) % grid, cy = int(i) / grid;
        double s = 1.0 / grid;
        Vec2 uv[3] = {{(cx + 0.12) * s, (cy + 0.12) * s},
                      {(cx + 0.88) * s, (cy + 0.12) * s},
                      {(cx + 0.5) * s, (cy + 0.88) * s}};
        m.tris.push_back({{fs[i][0], fs[i][1], fs[i][2]}, {uv[0], uv[1], uv[2]}});
    }
    return m;
}

TriMesh make_uv_sphere(int stacks, int slices) {
    TriMesh m;
    // grid of (stacks+1) x (slices+1) vertices; the seam column u=0 / u=1
    // is duplicated so every UV stays inside [0,1]
    for (int st = 0; st <= stacks; ++st) {
        double theta = M_PI * double(st) / stacks;
        double y = std::cos(theta), r = std::sin(theta);
        for (int sl = 0; sl <= slices; ++sl) {
            double phi = 2.0 * M_PI * double(sl) / slices;
            m.positions.push_back({r * std::cos(phi), y, -r * std::sin(phi)});
        }
    }
    m.vnormals = m.positions;
    auto vid = [&](int st, int sl) { return st * (slices + 1) + sl; };
    auto uv = [&](int st, int sl) -> Vec2 {
        return {double(sl) / slices, 1.0 - double(st) / stacks};
    };
    for (int st = 0; st < stacks; ++st) {
        for (int sl = 0; sl < slices; ++sl) {
            int a = vid(st, sl), b = vid(st, sl + 1), c = vid(st + 1, sl + 1), d = vid(st + 1, sl);
            Vec2 ua = uv(st, sl), ub = uv(st, sl + 1), uc = uv(st + 1, sl + 1), ud = uv(st + 1, sl);
            if (st != 0) m.tris.push_back({{a, c, b}, {ua, uc, ub}});
            if (st != stacks - 1) m.tris.push_back({{a, d, c}, {ua, ud, uc}});
        }
    }
    return m;
}

TriMesh make_cylinder(int segments) {
    TriMesh m;
    // side rings at y = +-1, radius 1 (normalized later by the loader if needed)
    for (int ring = 0; ring <= 1; ++ring) {
        double y = ring == 0 ? -1.0 : 1.0;
        for (int s = 0; s <= segments; ++s) {
            double phi = 2.0 * M_PI * double(s) / segments;
            m.positions.push_back({std::cos(phi), y, -std::sin(phi)});
        }
    }
    int top_center = int(m.positions.size());
    m.positions.push_back({0, 1, 0});
    int bot_center = int(m.positions.size());
    m.positions.push_back({0, -1, 0});

    auto side_uv = [&](int s, int ring) -> Vec2 {
        return {double(s) / segments, 0.55 + 0.43 * ring};
    };
    for (int s = 0; s < segments; ++s) {
        int a = s, b = s + 1;                                  // bottom ring
        int c = (segments + 1) + s + 1, d = (segments + 1) + s;  // top ring
        m.tris.push_back({{a, b, c}, {side_uv(s, 0), side_uv(s + 1, 0), side_uv(s + 1, 1)}});
        m.tris.push_back({{a, c, d}, {side_uv(s, 0), side_uv(s + 1, 1), side_uv(s, 1)}});
    }
    // caps: polar charts at (0.25,0.25) and (0.75,0.25), radius 0.2
    auto cap_uv = [&](double cx, double phi, double rr) -> Vec2 {
        return {cx + rr * std::cos(phi), 0.25 + rr * std::sin(phi)};
    };
    for (int s = 0; s < segments; ++s) {
        double p0 = 2.0 * M_PI * double(s) / segments;
        double p1 = 2.0 * M_PI * double(s + 1) / segments;
        // top cap (+y), CCW seen from above
        int a = (segments + 1) + s, b = (segments + 1) + s + 1;
        m.tris.push_back({{top_center, a, b},
                          {cap_uv(0.25, 0, 0), cap_uv(0.25, p0, 0.2), cap_uv(0.25, p1, 0.2)}});
        // bottom cap (-y)
        m.tris.push_back({{bot_center, s + 1, s},
                          {cap_uv(0.75, 0, 0), cap_uv(0.75, p1, 0.2), cap_uv(0.75, p0, 0.2)}});
    }
    return m;
}

}  // namespace lumitex
