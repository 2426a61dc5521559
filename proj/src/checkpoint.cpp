// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#include "lumitex/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace lumitex {

using nlohmann::json;

namespace {

constexpr char kMagic[6] = {'L', 'X', 'C', 'K', '1', '\n'};

void write_u64_le(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64_le(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
    return v;
}

void write_f64_le(std::ostream& os, const std::vector<double>& v) {
    // x86-64 is little-endian; write raw. The layout contract is LE.
    os.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * 8));
}

void read_f64_le(std::istream& is, std::vector<double>& v) {
    is.read(reinterpret_cast<char*>(v.data()), std::streamsize(v.size() * 8));
}

json open_header(std::ifstream& f, const std::string& path) {
    char magic[6];
    f.read(magic, 6);
    if (!f || std::memcmp(magic, kMagic, 6) != 0)
        throw ContractError("checkpoint: bad magic in " + path);
    uint64_t hlen = read_u64_le(f);
    std::string hdr(hlen, '\0');
    f.read(hdr.data(), std::streamsize(hlen));
    if (!f) throw ContractError("checkpoint: truncated header in " + path);
    return json::parse(hdr);
}

}  // namespace

bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

void save_checkpoint(const std::string& path, const ParamStore& store, const Adam* opt,
                     const json& meta) {
    json header;
    header["tensors"] = json::array();
    auto push_entry = [&](const std::string& name, const Shape& shape, bool frozen,
                          const char* role) {
        json e;
        e["name"] = name;
        e["shape"] = shape;
        e["frozen"] = frozen;
        e["role"] = role;
        header["tensors"].push_back(e);
    };
    for (const auto& p : store.params)
        push_entry(p.name(), p.value().shape(), p.frozen(), "param");
    if (opt) {
        auto* m = const_cast<Adam*>(opt);
        if (m->moment1().size() == store.params.size()) {
            for (size_t i = 0; i < store.params.size(); ++i) {
                const auto& shape = store.params[i].value().shape();
                push_entry(store.params[i].name() + ".adam_m", shape, false, "opt");
                push_entry(store.params[i].name() + ".adam_v", shape, false, "opt");
            }
        }
    }
    json m = meta;
    if (opt) m["adam_step"] = const_cast<Adam*>(opt)->step_count();
    header["meta"] = m;

    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(bool(f), "checkpoint: cannot open " + path + " for writing");
    std::string hs = header.dump();
    f.write(kMagic, 6);
    write_u64_le(f, hs.size());
    f.write(hs.data(), std::streamsize(hs.size()));
    for (const auto& p : store.params) write_f64_le(f, p.value().data());
    if (opt) {
        auto* mo = const_cast<Adam*>(opt);
        if (mo->moment1().size() == store.params.size()) {
            for (size_t i = 0; i < store.params.size(); ++i) {
                write_f64_le(f, mo->moment1()[i]);
                write_f64_le(f, mo->moment2()[i]);
            }
        }
    }
    require(bool(f), "checkpoint: write failed for " + path);
}

json load_checkpoint(const std::string& path, ParamStore& store, Adam* opt) {
    std::ifstream f(path, std::ios::binary);
    require(bool(f), "checkpoint: cannot open " + path);
    json header = open_header(f, path);

    if (opt) {
        opt->moment1().assign(store.params.size(), {});
        opt->moment2().assign(store.params.size(), {});
        for (size_t i = 0; i < store.params.size(); ++i) {
            size_t n = store.params[i].value().data().size();
            opt->moment1()[i].assign(n, 0.0);
            opt->moment2()[i].assign(n, 0.0);
        }
        if (header["meta"].contains("adam_step"))
            opt->set_step_count(header["meta"]["adam_step"].get<int64_t>());
    }

    for (const auto& e : header["tensors"]) {
        std::string name = e["name"].get<std::string>();
        Shape shape = e["shape"].get<Shape>();
        std::string role = e["role"].get<std::string>();
        int64_t n = numel(shape);
        if (role == "param") {
            Param* p = store.find(name);
            require(p != nullptr, "checkpoint: store has no param named " + name);
            require(p->value().shape() == shape,
                    "checkpoint: shape mismatch for " + name + ": file " + shape_str(shape) +
                        " vs model " + shape_str(p->value().shape()));
            read_f64_le(f, p->value().data());
            p->set_frozen(e["frozen"].get<bool>());
        } else {
            std::vector<double> buf(size_t(n), 0.0);
            read_f64_le(f, buf);
            if (opt) {
                bool is_m = name.size() > 7 && name.substr(name.size() - 7) == ".adam_m";
                std::string base = name.substr(0, name.size() - 7);
                for (size_t i = 0; i < store.params.size(); ++i) {
                    if (store.params[i].name() == base) {
                        (is_m ? opt->moment1() : opt->moment2())[i] = std::move(buf);
                        break;
                    }
                }
            }
        }
    }
    require(bool(f), "checkpoint: truncated data in " + path);
    return header["meta"];
}

json peek_checkpoint_meta(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(bool(f), "checkpoint: cannot open " + path);
    return open_header(f, path)["meta"];
}

}  // namespace lumitex
