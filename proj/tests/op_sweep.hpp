// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference sweep over every differentiable tensor op;
// shared by the unit suite and the acceptance gate.
#pragma once

#include "helpers.hpp"
#include "lumitex/tensor.hpp"

namespace lumitex::testing {

inline Tensor sweep_rand(const Shape& s, Rng& rng) {
    Tensor t = Tensor::zeros(s);
    for (auto& v : t.data()) v = rng.uniform(-1.0, 1.0);
    return t;
}

// The full per-op finite-difference sweep. The acceptance suite runs it on
// 20 seeds; here a couple of spot seeds keep unit runs fast.
inline double op_sweep_worst(uint64_t seed) {
    Rng rng(seed);
    double worst = 0.0;
    auto probe = [&](const std::function<Tensor(const std::vector<Tensor>&)>& f,
                     std::vector<Tensor> ins) {
        worst = std::max(worst, fd_max_rel_err(f, std::move(ins)));
    };
    Tensor proj = sweep_rand({3, 2}, rng);

    probe([](const std::vector<Tensor>& t) { return sum_all(add(t[0], t[1])); },
          {sweep_rand({2, 3}, rng), sweep_rand({2, 3}, rng)});
    probe([](const std::vector<Tensor>& t) { return sum_all(sub(mul(t[0], t[0]), t[1])); },
          {sweep_rand({2, 3}, rng), sweep_rand({2, 3}, rng)});
    probe([](const std::vector<Tensor>& t) { return mean_all(mul(t[0], t[1])); },
          {sweep_rand({3, 4}, rng), sweep_rand({3, 4}, rng)});
    probe([](const std::vector<Tensor>& t) { return sum_all(mul_scalar(add_scalar(t[0], 0.7), -1.3)); },
          {sweep_rand({2, 5}, rng)});
    probe([](const std::vector<Tensor>& t) { return sum_all(mul(add_rowvec(t[0], t[1]), t[0])); },
          {sweep_rand({4, 3}, rng), sweep_rand({3}, rng)});
    probe([](const std::vector<Tensor>& t) { return sum_all(mul(mul_rowvec(t[0], t[1]), t[0])); },
          {sweep_rand({4, 3}, rng), sweep_rand({3}, rng)});
    probe([](const std::vector<Tensor>& t) { return sum_all(mul(matmul(t[0], t[1]), matmul(t[0], t[1]))); },
          {sweep_rand({3, 4}, rng), sweep_rand({4, 2}, rng)});
    probe([](const std::vector<Tensor>& t) { return sum_all(mul(transpose2d(t[0]), t[1])); },
          {sweep_rand({3, 4}, rng), sweep_rand({4, 3}, rng)});
    probe([](const std::vector<Tensor>& t) { return sum_all(mul(softmax_rows(t[0]), t[1])); },
          {sweep_rand({3, 5}, rng), sweep_rand({3, 5}, rng)});
    probe([](const std::vector<Tensor>& t) { return sum_all(mul(layernorm_rows(t[0]), t[1])); },
          {sweep_rand({3, 6}, rng), sweep_rand({3, 6}, rng)});
    probe([](const std::vector<Tensor>& t) { return sum_all(mul(gelu(t[0]), t[1])); },
          {sweep_rand({3, 4}, rng), sweep_rand({3, 4}, rng)});
    probe([](const std::vector<Tensor>& t) { return mse(t[0], t[1]); },
          {sweep_rand({4, 4}, rng), sweep_rand({4, 4}, rng)});
    probe([](const std::vector<Tensor>& t) {
        return sum_all(mul(slice_rows(t[0], 1, 3), slice_rows(t[0], 0, 2)));
    },
          {sweep_rand({4, 3}, rng)});
    probe([](const std::vector<Tensor>& t) {
        return sum_all(mul(concat_rows({t[0], t[1]}), concat_rows({t[1], t[0]})));
    },
          {sweep_rand({2, 3}, rng), sweep_rand({2, 3}, rng)});
    probe([](const std::vector<Tensor>& t) {
        return sum_all(mul(slice_cols(t[0], 1, 3), slice_cols(t[0], 0, 2)));
    },
          {sweep_rand({3, 4}, rng)});
    probe([](const std::vector<Tensor>& t) {
        return sum_all(mul(concat_cols({t[0], t[1]}), concat_cols({t[1], t[0]})));
    },
          {sweep_rand({3, 2}, rng), sweep_rand({3, 2}, rng)});
    probe([](const std::vector<Tensor>& t) {
        return sum_all(mul(reshape(t[0], {2, 6}), reshape(t[1], {2, 6})));
    },
          {sweep_rand({3, 4}, rng), sweep_rand({3, 4}, rng)});
    {
        std::vector<int64_t> idx = {0, 2, 1, 2, 0, 3};
        probe([idx](const std::vector<Tensor>& t) {
            return sum_all(mul(gather(t[0], idx, {2, 3}), gather(t[0], idx, {2, 3})));
        },
              {sweep_rand({4}, rng)});
    }
    {
        std::vector<int> rows = {0, 1, 2, 0}, cols = {1, 0, 2, 2};
        probe([rows, cols](const std::vector<Tensor>& t) {
            return sum_all(mul(rope2d(t[0], rows, cols, 2), t[1]));
        },
              {sweep_rand({4, 8}, rng), sweep_rand({4, 8}, rng)});
    }
    {
        std::vector<int> groups = {0, 0, 1, 1};
        probe([groups](const std::vector<Tensor>& t) {
            return sum_all(
                mul(attention_core(t[0], t[1], t[2], 0.5, t[3], groups, 2), t[4]));
        },
              {sweep_rand({4, 4}, rng), sweep_rand({4, 4}, rng), sweep_rand({4, 4}, rng),
               sweep_rand({4, 4}, rng), sweep_rand({4, 4}, rng)});
    }
    return worst;
}


}  // namespace lumitex::testing
