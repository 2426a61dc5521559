// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lumitex/common.hpp"

namespace lumitex {

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

// One node of the reverse-mode tape. The tape is rebuilt on every forward
// pass; nodes own their data and are freed when the last Tensor handle
// goes away.
struct TapeNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // allocated when requires_grad (zero-filled)
    bool requires_grad = false;
    bool frozen = false;  // frozen leaves never accumulate gradient
    std::string name;     // set for named parameters
    std::vector<std::shared_ptr<TapeNode>> parents;
    // Propagates this->grad into parents' grads.
    std::function<void(TapeNode&)> backprop;

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

// Value-semantics handle on a tape node. Cheap to copy.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TapeNode> n) : node_(std::move(n)) {}

    static Tensor zeros(const Shape& shape);
    static Tensor full(const Shape& shape, double v);
    static Tensor from_data(const Shape& shape, std::vector<double> data);
    static Tensor randn(const Shape& shape, Rng& rng, double stddev = 1.0);
    static Tensor scalar(double v) { return full({1}, v); }
    static Tensor identity(int64_t n);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int64_t size() const { return int64_t(node_->data.size()); }
    int64_t rows() const { return node_->shape.at(0); }
    int64_t cols() const { return node_->shape.at(1); }

    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }
    double item() const;

    double at(int64_t i) const { return node_->data[size_t(i)]; }
    double at(int64_t r, int64_t c) const { return node_->data[size_t(r * cols() + c)]; }

    // Gradient of this tensor after backward(); zeros if none flowed.
    std::vector<double> grad() const;
    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool v);

    std::shared_ptr<TapeNode> node() const { return node_; }

    // Detached copy: same values, no tape history.
    Tensor detach() const;

private:
    std::shared_ptr<TapeNode> node_;
};

// Runs reverse-mode accumulation from a scalar loss. Every reachable
// node with requires_grad receives its gradient; frozen leaves keep
// zero-filled grads.
void backward(const Tensor& loss);

// While alive, ops do not record tape history (forward values only).
// Used for sampling, eval losses, and the frozen-context pass.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();

private:
    bool prev_;
};

bool grad_enabled();

// ---- differentiable ops ------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

// x: [r,c], bias: [c]; broadcast add along rows.
Tensor add_rowvec(const Tensor& x, const Tensor& bias);
// x: [r,c], g: [c]; broadcast multiply along rows.
Tensor mul_rowvec(const Tensor& x, const Tensor& g);

// a: [m,k], b: [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose2d(const Tensor& x);

// Row-wise stabilized softmax on [r,c].
Tensor softmax_rows(const Tensor& x);

// Row-wise normalization to mean 0 / var 1 (epsilon-guarded); the learned
// affine lives in nn::LayerNorm.
Tensor layernorm_rows(const Tensor& x);

Tensor gelu(const Tensor& x);  // exact erf form

Tensor sum_all(const Tensor& x);   // -> [1]
Tensor mean_all(const Tensor& x);  // -> [1]

Tensor slice_rows(const Tensor& x, int64_t r0, int64_t r1);
Tensor concat_rows(const std::vector<Tensor>& xs);
Tensor slice_cols(const Tensor& x, int64_t c0, int64_t c1);
Tensor concat_cols(const std::vector<Tensor>& xs);
Tensor reshape(const Tensor& x, const Shape& shape);

// bias[i] = table.data[idx[i]]; backward scatter-adds. idx entries must
// be in range of table.
Tensor gather(const Tensor& table, const std::vector<int64_t>& idx, const Shape& out_shape);

// 2D rotary embedding on [T, d] with per-token (row, col) coordinates.
// Each head's first half of dim pairs rotates by row angles, second half
// by column angles. head_dim must be divisible by 4.
Tensor rope2d(const Tensor& x, const std::vector<int>& row_of,
              const std::vector<int>& col_of, int heads);

// Fused masked-softmax attention: out_i = sum_j softmax_j(scale*q_i.k_j + bias_ij) v_j.
// group_of (one id per key) makes the reduction invariant to group
// permutation: per-group partials are combined in sorted order.
// bias may be undefined (no additive bias).
Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v,
                      double scale, const Tensor& bias,
                      const std::vector<int>& group_of, int ngroups);

// mean((a-b)^2) composed from primitives.
Tensor mse(const Tensor& a, const Tensor& b);

}  // namespace lumitex
