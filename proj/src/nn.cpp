// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#include "lumitex/nn.hpp"

#include <cmath>

namespace lumitex {

Param::Param(std::string name, Tensor value) : value_(std::move(value)) {
    value_.node()->name = std::move(name);
    value_.set_requires_grad(true);
}

void Param::set_frozen(bool f) {
    value_.node()->frozen = f;
    // frozen params stop the tape from growing through them
    value_.node()->requires_grad = !f;
    if (f) std::fill(value_.node()->grad.begin(), value_.node()->grad.end(), 0.0);
    value_.node()->ensure_grad();
}

Param ParamStore::add(const std::string& name, Tensor value) {
    require(find(name) == nullptr, "ParamStore: duplicate param name " + name);
    params.emplace_back(name, std::move(value));
    return params.back();
}

Param* ParamStore::find(const std::string& name) {
    for (auto& p : params)
        if (p.name() == name) return &p;
    return nullptr;
}

void ParamStore::zero_grad() {
    for (auto& p : params) {
        auto& g = p.value().node()->grad;
        std::fill(g.begin(), g.end(), 0.0);
    }
}

void ParamStore::set_all_frozen(bool f) {
    for (auto& p : params) p.set_frozen(f);
}

void Adam::step(ParamStore& store) {
    if (m_.size() != store.params.size()) {
        m_.assign(store.params.size(), {});
        v_.assign(store.params.size(), {});
        for (size_t i = 0; i < store.params.size(); ++i) {
            size_t n = store.params[i].value().data().size();
            m_[i].assign(n, 0.0);
            v_[i].assign(n, 0.0);
        }
    }
    ++t_;
    double bc1 = 1.0 - std::pow(b1_, double(t_));
    double bc2 = 1.0 - std::pow(b2_, double(t_));
    for (size_t i = 0; i < store.params.size(); ++i) {
        Param& p = store.params[i];
        if (p.frozen()) continue;
        auto& w = p.value().data();
        auto& g = p.value().node()->grad;
        for (size_t j = 0; j < w.size(); ++j) {
            m_[i][j] = b1_ * m_[i][j] + (1.0 - b1_) * g[j];
            v_[i][j] = b2_ * v_[i][j] + (1.0 - b2_) * g[j] * g[j];
            double mh = m_[i][j] / bc1;
            double vh = v_[i][j] / bc2;
            w[j] -= lr_ * mh / (std::sqrt(vh) + eps_);
        }
    }
}

namespace {

// Kaiming-uniform bound 1/sqrt(fan_in) for weights and bias.
Tensor kaiming_uniform(const Shape& shape, int64_t fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(double(fan_in));
    Tensor t = Tensor::zeros(shape);
    for (auto& v : t.data()) v = rng.uniform(-bound, bound);
    return t;
}

}  // namespace

Linear::Linear(ParamStore& store, const std::string& name, int64_t in, int64_t out, Rng& rng) {
    weight = store.add(name + ".w", kaiming_uniform({in, out}, in, rng));
    bias = store.add(name + ".b", kaiming_uniform({out}, in, rng));
}

Tensor Linear::forward(const Tensor& x) const {
    return add_rowvec(matmul(x, weight.value()), bias.value());
}

LayerNormLayer::LayerNormLayer(ParamStore& store, const std::string& name, int64_t dim) {
    gamma = store.add(name + ".g", Tensor::full({dim}, 1.0));
    beta = store.add(name + ".be", Tensor::zeros({dim}));
}

Tensor LayerNormLayer::forward(const Tensor& x) const {
    return add_rowvec(mul_rowvec(layernorm_rows(x), gamma.value()), beta.value());
}

Tensor sinusoidal_embedding(double t, int64_t dim) {
    Tensor e = Tensor::zeros({dim});
    int64_t half = dim / 2;
    for (int64_t k = 0; k < half; ++k) {
        double freq = std::exp(-std::log(10000.0) * double(k) / double(half));
        e.data()[size_t(k)] = std::sin(t * freq * 1000.0);
        e.data()[size_t(half + k)] = std::cos(t * freq * 1000.0);
    }
    return e;
}

SelfAttention::SelfAttention(ParamStore& store, const std::string& name, int64_t dim, int heads_,
                             double scale_, bool use_rope_, Rng& rng)
    : heads(heads_), scale(scale_), use_rope(use_rope_) {
    require(dim % heads_ == 0, "SelfAttention: dim not divisible by heads");
    wq = Linear(store, name + ".q", dim, dim, rng);
    wk = Linear(store, name + ".k", dim, dim, rng);
    wv = Linear(store, name + ".v", dim, dim, rng);
    wo = Linear(store, name + ".o", dim, dim, rng);
}

Tensor SelfAttention::forward(const Tensor& x, const std::vector<int>& rows,
                              const std::vector<int>& cols, const std::vector<int>& group_of,
                              int ngroups, const Tensor& bias) const {
    int64_t d = x.cols();
    int64_t hd = d / heads;
    Tensor q = wq.forward(x);
    Tensor k = wk.forward(x);
    Tensor v = wv.forward(x);
    if (use_rope) {
        q = rope2d(q, rows, cols, heads);
        k = rope2d(k, rows, cols, heads);
    }
    double sc = scale > 0.0 ? scale : 1.0 / std::sqrt(double(hd));
    std::vector<Tensor> head_outs;
    head_outs.reserve(size_t(heads));
    for (int h = 0; h < heads; ++h) {
        Tensor qh = slice_cols(q, h * hd, (h + 1) * hd);
        Tensor kh = slice_cols(k, h * hd, (h + 1) * hd);
        Tensor vh = slice_cols(v, h * hd, (h + 1) * hd);
        head_outs.push_back(attention_core(qh, kh, vh, sc, bias, group_of, ngroups));
    }
    return wo.forward(concat_cols(head_outs));
}

Mlp::Mlp(ParamStore& store, const std::string& name, int64_t dim, int64_t hidden, Rng& rng) {
    fc1 = Linear(store, name + ".fc1", dim, hidden, rng);
    fc2 = Linear(store, name + ".fc2", hidden, dim, rng);
}

Tensor Mlp::forward(const Tensor& x) const { return fc2.forward(gelu(fc1.forward(x))); }

TransformerBlock::TransformerBlock(ParamStore& store, const std::string& name, int64_t dim,
                                   int heads, double attn_scale, bool use_rope, Rng& rng) {
    ln1 = LayerNormLayer(store, name + ".ln1", dim);
    ln2 = LayerNormLayer(store, name + ".ln2", dim);
    attn = SelfAttention(store, name + ".attn", dim, heads, attn_scale, use_rope, rng);
    mlp = Mlp(store, name + ".mlp", dim, 4 * dim, rng);
}

Tensor TransformerBlock::forward(const Tensor& x, const std::vector<int>& rows,
                                 const std::vector<int>& cols, const std::vector<int>& group_of,
                                 int ngroups, const Tensor& bias) const {
    Tensor h = add(x, attn.forward(ln1.forward(x), rows, cols, group_of, ngroups, bias));
    return add(h, mlp.forward(ln2.forward(h)));
}

}  // namespace lumitex
