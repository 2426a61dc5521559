// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace lumitex {

// Thrown on shape/contract violations. Messages name the offending shapes
// or values so failures are diagnosable from logs.
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct StageOrderError : std::runtime_error {
    explicit StageOrderError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

// Deterministic splitmix64 PRNG. One instance per training run; the full
// state is the single u64 counter, which makes checkpoint resume exact.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller without a cached spare so state_ alone captures the stream.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return next_u64() % n; }

    uint64_t state() const { return state_; }
    void set_state(uint64_t s) { state_ = s; }

private:
    uint64_t state_;
};

// Sums a small set of partial sums in canonical (sorted) order, so the
// result is a pure function of the multiset of inputs. Used by attention
// to make cross-view reductions invariant to view permutation.
inline double sorted_sum(double* vals, int n) {
    // insertion sort; n is the view count (small)
    for (int i = 1; i < n; ++i) {
        double x = vals[i];
        int j = i - 1;
        while (j >= 0 && vals[j] > x) {
            vals[j + 1] = vals[j];
            --j;
        }
        vals[j + 1] = x;
    }
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += vals[i];
    return s;
}

// Global worker cap for kernels that parallelize. 1 -> fully sequential.
// Parallel kernels must assign each output element to exactly one worker,
// keeping results bit-identical for any thread count.
int thread_count();
void set_thread_count(int n);

// Runs fn(begin,end) over disjoint row ranges. Deterministic: the range
// split depends only on n and the worker cap.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace lumitex
