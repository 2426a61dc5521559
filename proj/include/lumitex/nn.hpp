// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "lumitex/tensor.hpp"

namespace lumitex {

// Named trainable tensor. frozen params keep zero-filled grads and are
// skipped by the optimizer.
class Param {
public:
    Param() = default;
    Param(std::string name, Tensor value);

    Tensor& value() { return value_; }
    const Tensor& value() const { return value_; }
    const std::string& name() const { return value_.node()->name; }
    bool frozen() const { return value_.node()->frozen; }
    void set_frozen(bool f);

private:
    Tensor value_;
};

// Flat registry of all params of a model, in creation order. Creation
// order is deterministic, so checkpoints and optimizer state line up.
struct ParamStore {
    std::vector<Param> params;

    Param add(const std::string& name, Tensor value);
    Param* find(const std::string& name);
    void zero_grad();
    void set_all_frozen(bool f);
};

// Adam with the fixed defaults used across the project.
class Adam {
public:
    explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

    void step(ParamStore& store);

    int64_t step_count() const { return t_; }
    // Serialization hooks for exact training resume.
    std::vector<std::vector<double>>& moment1() { return m_; }
    std::vector<std::vector<double>>& moment2() { return v_; }
    void set_step_count(int64_t t) { t_ = t; }
    double lr() const { return lr_; }

private:
    double lr_, b1_, b2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// y = x W + b, applied along the last axis of a [rows, in] tensor.
class Linear {
public:
    Linear() = default;
    Linear(ParamStore& store, const std::string& name, int64_t in, int64_t out, Rng& rng);

    Tensor forward(const Tensor& x) const;
    Param weight, bias;
};

class LayerNormLayer {
public:
    LayerNormLayer() = default;
    LayerNormLayer(ParamStore& store, const std::string& name, int64_t dim);

    Tensor forward(const Tensor& x) const;
    Param gamma, beta;
};

// Sinusoidal embedding of a scalar in [0,1]; returned as a [dim] constant.
Tensor sinusoidal_embedding(double t, int64_t dim);

// Multi-head self-attention over a [T, d] sequence.
//   scale <= 0 selects the standard 1/sqrt(head_dim);
//   use_rope applies 2D rotary embedding to q and k from (rows, cols);
//   bias, when defined, is a [T, T] additive pre-softmax term;
//   group_of makes reductions view-permutation stable.
class SelfAttention {
public:
    SelfAttention() = default;
    SelfAttention(ParamStore& store, const std::string& name, int64_t dim, int heads,
                  double scale, bool use_rope, Rng& rng);

    Tensor forward(const Tensor& x, const std::vector<int>& rows, const std::vector<int>& cols,
                   const std::vector<int>& group_of, int ngroups, const Tensor& bias) const;

    Linear wq, wk, wv, wo;
    int heads = 1;
    double scale = 0.0;
    bool use_rope = false;
};

// Two-layer GELU MLP with the usual 4x hidden width.
class Mlp {
public:
    Mlp() = default;
    Mlp(ParamStore& store, const std::string& name, int64_t dim, int64_t hidden, Rng& rng);

    Tensor forward(const Tensor& x) const;
    Linear fc1, fc2;
};

// Pre-LN transformer block: x += attn(ln1(x)); x += mlp(ln2(x)).
class TransformerBlock {
public:
    TransformerBlock() = default;
    TransformerBlock(ParamStore& store, const std::string& name, int64_t dim, int heads,
                     double attn_scale, bool use_rope, Rng& rng);

    Tensor forward(const Tensor& x, const std::vector<int>& rows, const std::vector<int>& cols,
                   const std::vector<int>& group_of, int ngroups, const Tensor& bias) const;

    LayerNormLayer ln1, ln2;
    SelfAttention attn;
    Mlp mlp;
};

}  // namespace lumitex
