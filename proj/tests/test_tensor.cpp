// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "op_sweep.hpp"
#include "lumitex/checkpoint.hpp"
#include "lumitex/nn.hpp"
#include "lumitex/tensor.hpp"

using namespace lumitex;
using namespace lumitex::testing;

namespace {

Tensor rand_tensor(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(s);
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("matmul identity, annihilator, oracle") {
    Rng rng(7);
    Tensor a = rand_tensor({3, 3}, rng);
    Tensor out = matmul(Tensor::identity(3), a);
    for (int i = 0; i < 9; ++i) CHECK(out.data()[size_t(i)] == a.data()[size_t(i)]);

    Tensor z = matmul(Tensor::zeros({2, 3}), rand_tensor({3, 4}, rng));
    CHECK(z.shape() == Shape{2, 4});
    for (double v : z.data()) CHECK(v == 0.0);

    Tensor x = rand_tensor({3, 3}, rng);
    Tensor y = rand_tensor({3, 3}, rng);
    Tensor got = matmul(x, y);
    auto want = matmul_oracle(x.data(), y.data(), 3, 3, 3);
    for (int i = 0; i < 9; ++i) CHECK(std::abs(got.data()[size_t(i)] - want[size_t(i)]) < 1e-12);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 2});
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2,3]"), ContractError);
}

TEST_CASE("matmul associativity at fp64 tolerance") {
    Rng rng(11);
    for (int rep = 0; rep < 10; ++rep) {
        Tensor a = rand_tensor({4, 4}, rng), b = rand_tensor({4, 4}, rng),
               c = rand_tensor({4, 4}, rng);
        Tensor l = matmul(matmul(a, b), c);
        Tensor r = matmul(a, matmul(b, c));
        for (int i = 0; i < 16; ++i)
            CHECK(std::abs(l.data()[size_t(i)] - r.data()[size_t(i)]) < 1e-9);
    }
}

TEST_CASE("softmax uniform, closed form, high-precision oracle") {
    Tensor c = softmax_rows(Tensor::full({1, 4}, 3.25));
    for (double v : c.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

    Tensor t = softmax_rows(Tensor::from_data({1, 2}, {0.0, std::log(3.0)}));
    CHECK(t.data()[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(t.data()[1] == doctest::Approx(0.75).epsilon(1e-12));

    Rng rng(3);
    Tensor x = rand_tensor({5, 7}, rng, -20.0, 20.0);
    Tensor y = softmax_rows(x);
    for (int i = 0; i < 5; ++i) {
        std::vector<double> row(x.data().begin() + i * 7, x.data().begin() + (i + 1) * 7);
        auto want = softmax_oracle(row);
        for (int j = 0; j < 7; ++j) CHECK(std::abs(y.at(i, j) - want[size_t(j)]) < 1e-12);
    }
}

TEST_CASE("softmax rows sum to one and shift invariance") {
    Rng rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        Tensor x = rand_tensor({4, 9}, rng, -50.0, 50.0);
        Tensor y = softmax_rows(x);
        for (int i = 0; i < 4; ++i) {
            double s = 0;
            for (int j = 0; j < 9; ++j) s += y.at(i, j);
            CHECK(std::abs(s - 1.0) < 1e-9);
        }
        Tensor shifted = add_scalar(x, rng.uniform(-5, 5));
        Tensor y2 = softmax_rows(shifted);
        for (size_t i = 0; i < y.data().size(); ++i)
            CHECK(std::abs(y.data()[i] - y2.data()[i]) < 1e-9);
    }
}

TEST_CASE("linear identity, zero input, oracle") {
    Rng rng(17);
    ParamStore store;
    Linear lin(store, "lin", 4, 4, rng);
    // identity weights, zero bias
    lin.weight.value().data() = Tensor::identity(4).data();
    std::fill(lin.bias.value().data().begin(), lin.bias.value().data().end(), 0.0);
    Tensor x = rand_tensor({3, 4}, rng);
    Tensor y = lin.forward(x);
    for (size_t i = 0; i < x.data().size(); ++i) CHECK(y.data()[i] == x.data()[i]);

    // x = 0 -> broadcast bias
    for (auto& b : lin.bias.value().data()) b = rng.uniform(-1, 1);
    Tensor y0 = lin.forward(Tensor::zeros({5, 4}));
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j) CHECK(y0.at(i, j) == lin.bias.value().data()[size_t(j)]);

    // random case against the matmul oracle
    for (auto& w : lin.weight.value().data()) w = rng.uniform(-1, 1);
    Tensor xr = rand_tensor({6, 4}, rng);
    Tensor yr = lin.forward(xr);
    auto mm = matmul_oracle(xr.data(), lin.weight.value().data(), 6, 4, 4);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(std::abs(yr.at(i, j) - (mm[size_t(i * 4 + j)] + lin.bias.value().data()[size_t(j)])) <
                  1e-12);
}

TEST_CASE("layernorm degenerate, already normalized, random statistics") {
    Tensor c = layernorm_rows(Tensor::full({1, 8}, 4.2));
    for (double v : c.data()) CHECK(v == 0.0);

    Tensor pm = layernorm_rows(Tensor::from_data({1, 2}, {-1.0, 1.0}));
    CHECK(pm.data()[0] == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(pm.data()[1] == doctest::Approx(1.0).epsilon(1e-6));

    Rng rng(23);
    Tensor x = rand_tensor({3, 33}, rng, -4, 4);
    Tensor y = layernorm_rows(x);
    for (int i = 0; i < 3; ++i) {
        double mean = 0, var = 0;
        for (int j = 0; j < 33; ++j) mean += y.at(i, j);
        mean /= 33;
        for (int j = 0; j < 33; ++j) var += (y.at(i, j) - mean) * (y.at(i, j) - mean);
        var /= 33;
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(var - 1.0) < 1e-6);
    }
}

TEST_CASE("backward sum gives ones; unrelated tensor gets zero") {
    Rng rng(29);
    Tensor x = rand_tensor({3, 3}, rng);
    x.set_requires_grad(true);
    backward(sum_all(x));
    for (double g : x.grad()) CHECK(g == 1.0);

    Tensor a = rand_tensor({2, 2}, rng);
    Tensor b = rand_tensor({2, 2}, rng);
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    backward(sum_all(mul(a, a)));
    for (double g : b.grad()) CHECK(g == 0.0);
}

TEST_CASE("backward rejects non-scalar loss") {
    Tensor x = Tensor::zeros({2, 2});
    x.set_requires_grad(true);
    CHECK_THROWS_AS(backward(x), ContractError);
}

TEST_CASE("two-layer MLP gradients match finite differences") {
    Rng rng(31);
    ParamStore store;
    Linear l1(store, "l1", 5, 7, rng);
    Linear l2(store, "l2", 7, 3, rng);
    Tensor x = rand_tensor({4, 5}, rng);
    Tensor target = rand_tensor({4, 3}, rng);

    auto f = [&](const std::vector<Tensor>& ins) {
        Tensor h = gelu(add_rowvec(matmul(ins[2], ins[0]), store.params[1].value()));
        Tensor out = add_rowvec(matmul(h, ins[1]), store.params[3].value());
        return mse(out, target);
    };
    double err = fd_max_rel_err(f, {l1.weight.value(), l2.weight.value(), x});
    CHECK(err < 1e-4);
}

TEST_CASE("finite-difference sweep over all differentiable ops") {
    CHECK(lumitex::testing::op_sweep_worst(101) < 1e-4);
    CHECK(lumitex::testing::op_sweep_worst(202) < 1e-4);
}

TEST_CASE("frozen params: zero grads, bit-identical after an optimizer step") {
    Rng rng(37);
    ParamStore store;
    Linear frozen_lin(store, "a", 4, 4, rng);
    Linear live_lin(store, "b", 4, 4, rng);
    frozen_lin.weight.set_frozen(true);
    frozen_lin.bias.set_frozen(true);

    auto before_w = frozen_lin.weight.value().data();
    auto before_b = frozen_lin.bias.value().data();

    Tensor x = rand_tensor({3, 4}, rng);
    Tensor loss = mse(live_lin.forward(frozen_lin.forward(x)), rand_tensor({3, 4}, rng));
    store.zero_grad();
    backward(loss);

    for (double g : frozen_lin.weight.value().grad()) CHECK(g == 0.0);
    for (double g : frozen_lin.bias.value().grad()) CHECK(g == 0.0);
    // live path did receive gradient
    double live_mag = 0;
    for (double g : live_lin.weight.value().grad()) live_mag += std::abs(g);
    CHECK(live_mag > 0.0);

    Adam opt;
    opt.step(store);
    CHECK(frozen_lin.weight.value().data() == before_w);
    CHECK(frozen_lin.bias.value().data() == before_b);
    CHECK(live_lin.weight.value().data() != live_lin.weight.value().grad());
}

TEST_CASE("checkpoint round-trip restores values, frozen flags, optimizer state") {
    Rng rng(41);
    ParamStore store;
    Linear l(store, "layer", 3, 3, rng);
    l.bias.set_frozen(true);
    Adam opt;
    Tensor loss = mse(l.forward(rand_tensor({2, 3}, rng)), rand_tensor({2, 3}, rng));
    store.zero_grad();
    backward(loss);
    opt.step(store);

    nlohmann::json meta;
    meta["rng_state"] = rng.state();
    std::string path = "/tmp/lumitex_test_ckpt.bin";
    save_checkpoint(path, store, &opt, meta);

    Rng rng2(41);
    ParamStore store2;
    Linear l2(store2, "layer", 3, 3, rng2);
    Adam opt2;
    auto meta2 = load_checkpoint(path, store2, &opt2);

    CHECK(store2.params[0].value().data() == store.params[0].value().data());
    CHECK(store2.params[1].value().data() == store.params[1].value().data());
    CHECK(store2.params[1].frozen());
    CHECK(opt2.step_count() == 1);
    CHECK(opt2.moment1() == opt.moment1());
    CHECK(opt2.moment2() == opt.moment2());
    CHECK(meta2["rng_state"].get<uint64_t>() == rng.state());
}

TEST_CASE("rope relative-position identity") {
    Rng rng(43);
    const int heads = 2;
    for (int rep = 0; rep < 8; ++rep) {
        Tensor q = rand_tensor({1, 16}, rng);
        Tensor k = rand_tensor({1, 16}, rng);
        int pr = int(rng.below(16)), pc = int(rng.below(16));
        int qr = int(rng.below(16)), qc = int(rng.below(16));

        auto rot = [&](const Tensor& x, int r, int c) {
            return rope2d(x, {r}, {c}, heads);
        };
        auto ip = [](const Tensor& a, const Tensor& b) {
            double s = 0;
            for (size_t i = 0; i < a.data().size(); ++i) s += a.data()[i] * b.data()[i];
            return s;
        };
        double lhs = ip(rot(q, qr, qc), rot(k, pr, pc));
        double rhs = ip(rot(q, qr - pr, qc - pc), rot(k, 0, 0));
        CHECK(std::abs(lhs - rhs) < 1e-9);
    }
}

TEST_CASE("attention groups keep reductions permutation-stable") {
    Rng rng(47);
    // two groups of two tokens; swapping group blocks permutes outputs bit-exactly
    Tensor q = rand_tensor({4, 4}, rng), k = rand_tensor({4, 4}, rng), v = rand_tensor({4, 4}, rng);
    std::vector<int> groups = {0, 0, 1, 1};
    Tensor out = attention_core(q, k, v, 1.0, Tensor(), groups, 2);

    auto swap_blocks = [](const Tensor& t) {
        Tensor s = Tensor::zeros(t.shape());
        for (int j = 0; j < 4; ++j) {
            s.data()[size_t(0 * 4 + j)] = t.at(2, j);
            s.data()[size_t(1 * 4 + j)] = t.at(3, j);
            s.data()[size_t(2 * 4 + j)] = t.at(0, j);
            s.data()[size_t(3 * 4 + j)] = t.at(1, j);
        }
        return s;
    };
    Tensor out2 = attention_core(swap_blocks(q), swap_blocks(k), swap_blocks(v), 1.0, Tensor(),
                                 groups, 2);
    Tensor expect = swap_blocks(out);
    CHECK(out2.data() == expect.data());
}
