// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#include "lumitex/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>
#include <unordered_set>

namespace lumitex {

namespace {

int g_threads = 1;
bool g_grad_enabled = true;

}  // namespace

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

int thread_count() { return g_threads; }

void set_thread_count(int n) { g_threads = std::max(1, n); }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    int workers = std::min<int64_t>(g_threads, n);
    if (workers <= 1 || n < 128) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    int64_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        int64_t b = w * chunk;
        int64_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& t : pool) t.join();
}

int64_t numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

namespace {

std::shared_ptr<TapeNode> make_node(Shape shape) {
    auto n = std::make_shared<TapeNode>();
    n->shape = std::move(shape);
    n->data.assign(size_t(numel(n->shape)), 0.0);
    return n;
}

// Wires parents/backprop only when some input carries gradient.
Tensor finish(std::shared_ptr<TapeNode> out,
              std::vector<std::shared_ptr<TapeNode>> parents,
              std::function<void(TapeNode&)> bp) {
    bool needs = false;
    if (g_grad_enabled)
        for (auto& p : parents)
            if (p->requires_grad) needs = true;
    if (needs) {
        out->requires_grad = true;
        out->ensure_grad();
        out->parents = std::move(parents);
        out->backprop = std::move(bp);
    }
    return Tensor(out);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                        shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// C[m,n] += A[m,k] * B[k,n]; inner k unrolled 4-wide (fixed reduction order)
void gemm_nn(const double* A, const double* B, double* C, int64_t m, int64_t k, int64_t n) {
    parallel_for(m, [&](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) {
            double* __restrict Crow = C + i * n;
            const double* Arow = A + i * k;
            int64_t p = 0;
            for (; p + 3 < k; p += 4) {
                double a0 = Arow[p], a1 = Arow[p + 1], a2 = Arow[p + 2], a3 = Arow[p + 3];
                const double* B0 = B + p * n;
                const double* B1 = B0 + n;
                const double* B2 = B1 + n;
                const double* B3 = B2 + n;
                for (int64_t j = 0; j < n; ++j)
                    Crow[j] += a0 * B0[j] + a1 * B1[j] + a2 * B2[j] + a3 * B3[j];
            }
            for (; p < k; ++p) {
                double a = Arow[p];
                const double* Brow = B + p * n;
                for (int64_t j = 0; j < n; ++j) Crow[j] += a * Brow[j];
            }
        }
    });
}

// C[m,k] += A[m,n] * B^T where B is [k,n]
void gemm_nt(const double* A, const double* B, double* C, int64_t m, int64_t n, int64_t k) {
    parallel_for(m, [&](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) {
            const double* Arow = A + i * n;
            double* Crow = C + i * k;
            int64_t p = 0;
            for (; p + 1 < k; p += 2) {
                const double* B0 = B + p * n;
                const double* B1 = B0 + n;
                double acc0 = 0.0, acc1 = 0.0;
                for (int64_t j = 0; j < n; ++j) {
                    acc0 += Arow[j] * B0[j];
                    acc1 += Arow[j] * B1[j];
                }
                Crow[p] += acc0;
                Crow[p + 1] += acc1;
            }
            for (; p < k; ++p) {
                const double* Brow = B + p * n;
                double acc = 0.0;
                for (int64_t j = 0; j < n; ++j) acc += Arow[j] * Brow[j];
                Crow[p] += acc;
            }
        }
    });
}

// C[k,n] += A^T * B where A is [m,k], B is [m,n]; m unrolled 4-wide
void gemm_tn(const double* A, const double* B, double* C, int64_t m, int64_t k, int64_t n) {
    int64_t i = 0;
    for (; i + 3 < m; i += 4) {
        const double* A0 = A + i * k;
        const double* A1 = A0 + k;
        const double* A2 = A1 + k;
        const double* A3 = A2 + k;
        const double* B0 = B + i * n;
        const double* B1 = B0 + n;
        const double* B2 = B1 + n;
        const double* B3 = B2 + n;
        for (int64_t p = 0; p < k; ++p) {
            double a0 = A0[p], a1 = A1[p], a2 = A2[p], a3 = A3[p];
            double* __restrict Crow = C + p * n;
            for (int64_t j = 0; j < n; ++j)
                Crow[j] += a0 * B0[j] + a1 * B1[j] + a2 * B2[j] + a3 * B3[j];
        }
    }
    for (; i < m; ++i) {
        const double* Arow = A + i * k;
        const double* Brow = B + i * n;
        for (int64_t p = 0; p < k; ++p) {
            double a = Arow[p];
            double* Crow = C + p * n;
            for (int64_t j = 0; j < n; ++j) Crow[j] += a * Brow[j];
        }
    }
}

}  // namespace

Tensor Tensor::zeros(const Shape& shape) { return Tensor(make_node(shape)); }

Tensor Tensor::full(const Shape& shape, double v) {
    auto n = make_node(shape);
    std::fill(n->data.begin(), n->data.end(), v);
    return Tensor(n);
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data) {
    require(int64_t(data.size()) == numel(shape),
            "from_data: " + shape_str(shape) + " needs " + std::to_string(numel(shape)) +
                " values, got " + std::to_string(data.size()));
    auto n = make_node(shape);
    n->data = std::move(data);
    return Tensor(n);
}

Tensor Tensor::randn(const Shape& shape, Rng& rng, double stddev) {
    auto n = make_node(shape);
    for (auto& v : n->data) v = rng.normal() * stddev;
    return Tensor(n);
}

Tensor Tensor::identity(int64_t n) {
    Tensor t = zeros({n, n});
    for (int64_t i = 0; i < n; ++i) t.data()[size_t(i * n + i)] = 1.0;
    return t;
}

double Tensor::item() const {
    require(size() == 1, "item: tensor is not scalar, shape " + shape_str(shape()));
    return node_->data[0];
}

std::vector<double> Tensor::grad() const {
    if (node_->grad.size() == node_->data.size()) return node_->grad;
    return std::vector<double>(node_->data.size(), 0.0);
}

Tensor& Tensor::set_requires_grad(bool v) {
    node_->requires_grad = v;
    if (v) node_->ensure_grad();
    return *this;
}

Tensor Tensor::detach() const {
    auto n = make_node(node_->shape);
    n->data = node_->data;
    return Tensor(n);
}

void backward(const Tensor& loss) {
    require(loss.size() == 1, "backward: loss must be scalar, got " + shape_str(loss.shape()));
    // Iterative post-order DFS to build the topological order.
    std::vector<TapeNode*> topo;
    std::unordered_set<TapeNode*> visited;
    std::vector<std::pair<TapeNode*, size_t>> stack;
    stack.push_back({loss.node().get(), 0});
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TapeNode* p = node->parents[idx++].get();
            if (!visited.count(p) && p->requires_grad) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }
    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        if ((*it)->backprop) (*it)->backprop(**it);
    }
}

// ---- elementwise --------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    auto out = make_node(a.shape());
    const auto& da = a.data();
    const auto& db = b.data();
    for (size_t i = 0; i < da.size(); ++i) out->data[i] = da[i] + db[i];
    auto an = a.node(), bn = b.node();
    return finish(out, {an, bn}, [an, bn](TapeNode& o) {
        if (an->requires_grad && !an->frozen) {
            an->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
        }
        if (bn->requires_grad && !bn->frozen) {
            bn->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] += o.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    auto out = make_node(a.shape());
    for (size_t i = 0; i < a.data().size(); ++i) out->data[i] = a.data()[i] - b.data()[i];
    auto an = a.node(), bn = b.node();
    return finish(out, {an, bn}, [an, bn](TapeNode& o) {
        if (an->requires_grad && !an->frozen) {
            an->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
        }
        if (bn->requires_grad && !bn->frozen) {
            bn->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] -= o.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    auto out = make_node(a.shape());
    for (size_t i = 0; i < a.data().size(); ++i) out->data[i] = a.data()[i] * b.data()[i];
    auto an = a.node(), bn = b.node();
    return finish(out, {an, bn}, [an, bn](TapeNode& o) {
        if (an->requires_grad && !an->frozen) {
            an->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i] * bn->data[i];
        }
        if (bn->requires_grad && !bn->frozen) {
            bn->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] += o.grad[i] * an->data[i];
        }
    });
}

Tensor add_scalar(const Tensor& a, double s) {
    auto out = make_node(a.shape());
    for (size_t i = 0; i < a.data().size(); ++i) out->data[i] = a.data()[i] + s;
    auto an = a.node();
    return finish(out, {an}, [an](TapeNode& o) {
        if (!an->frozen) {
            an->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
        }
    });
}

Tensor mul_scalar(const Tensor& a, double s) {
    auto out = make_node(a.shape());
    for (size_t i = 0; i < a.data().size(); ++i) out->data[i] = a.data()[i] * s;
    auto an = a.node();
    return finish(out, {an}, [an, s](TapeNode& o) {
        if (!an->frozen) {
            an->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i] * s;
        }
    });
}

Tensor add_rowvec(const Tensor& x, const Tensor& bias) {
    require(x.shape().size() == 2, "add_rowvec: x must be 2-d, got " + shape_str(x.shape()));
    require(bias.shape().size() == 1 && bias.shape()[0] == x.cols(),
            "add_rowvec: bias " + shape_str(bias.shape()) + " vs x " + shape_str(x.shape()));
    int64_t r = x.rows(), c = x.cols();
    auto out = make_node(x.shape());
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j)
            out->data[size_t(i * c + j)] = x.data()[size_t(i * c + j)] + bias.data()[size_t(j)];
    auto xn = x.node(), bn = bias.node();
    return finish(out, {xn, bn}, [xn, bn, r, c](TapeNode& o) {
        if (xn->requires_grad && !xn->frozen) {
            xn->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) xn->grad[i] += o.grad[i];
        }
        if (bn->requires_grad && !bn->frozen) {
            bn->ensure_grad();
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < c; ++j) bn->grad[size_t(j)] += o.grad[size_t(i * c + j)];
        }
    });
}

Tensor mul_rowvec(const Tensor& x, const Tensor& g) {
    require(x.shape().size() == 2, "mul_rowvec: x must be 2-d");
    require(g.shape().size() == 1 && g.shape()[0] == x.cols(),
            "mul_rowvec: g " + shape_str(g.shape()) + " vs x " + shape_str(x.shape()));
    int64_t r = x.rows(), c = x.cols();
    auto out = make_node(x.shape());
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j)
            out->data[size_t(i * c + j)] = x.data()[size_t(i * c + j)] * g.data()[size_t(j)];
    auto xn = x.node(), gn = g.node();
    return finish(out, {xn, gn}, [xn, gn, r, c](TapeNode& o) {
        if (xn->requires_grad && !xn->frozen) {
            xn->ensure_grad();
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < c; ++j)
                    xn->grad[size_t(i * c + j)] += o.grad[size_t(i * c + j)] * gn->data[size_t(j)];
        }
        if (gn->requires_grad && !gn->frozen) {
            gn->ensure_grad();
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < c; ++j)
                    gn->grad[size_t(j)] += o.grad[size_t(i * c + j)] * xn->data[size_t(i * c + j)];
        }
    });
}

// ---- matmul --------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.shape().size() == 2 && b.shape().size() == 2,
            "matmul: expects 2-d operands, got " + shape_str(a.shape()) + " x " +
                shape_str(b.shape()));
    require(a.cols() == b.rows(), "matmul: inner extents differ, " + shape_str(a.shape()) +
                                      " x " + shape_str(b.shape()));
    int64_t m = a.rows(), k = a.cols(), n = b.cols();
    auto out = make_node({m, n});
    gemm_nn(a.data().data(), b.data().data(), out->data.data(), m, k, n);
    auto an = a.node(), bn = b.node();
    return finish(out, {an, bn}, [an, bn, m, k, n](TapeNode& o) {
        if (an->requires_grad && !an->frozen) {
            an->ensure_grad();
            gemm_nt(o.grad.data(), bn->data.data(), an->grad.data(), m, n, k);
        }
        if (bn->requires_grad && !bn->frozen) {
            bn->ensure_grad();
            gemm_tn(an->data.data(), o.grad.data(), bn->grad.data(), m, k, n);
        }
    });
}

Tensor transpose2d(const Tensor& x) {
    require(x.shape().size() == 2, "transpose2d: needs 2-d input");
    int64_t r = x.rows(), c = x.cols();
    auto out = make_node({c, r});
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j) out->data[size_t(j * r + i)] = x.data()[size_t(i * c + j)];
    auto xn = x.node();
    return finish(out, {xn}, [xn, r, c](TapeNode& o) {
        if (!xn->frozen) {
            xn->ensure_grad();
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < c; ++j)
                    xn->grad[size_t(i * c + j)] += o.grad[size_t(j * r + i)];
        }
    });
}

// ---- softmax / layernorm / gelu -------------------------------------------

Tensor softmax_rows(const Tensor& x) {
    require(x.shape().size() == 2, "softmax_rows: needs 2-d input");
    int64_t r = x.rows(), c = x.cols();
    auto out = make_node(x.shape());
    for (int64_t i = 0; i < r; ++i) {
        const double* xi = x.data().data() + i * c;
        double* yi = out->data.data() + i * c;
        double mx = xi[0];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, xi[j]);
        double denom = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            yi[j] = std::exp(xi[j] - mx);
            denom += yi[j];
        }
        for (int64_t j = 0; j < c; ++j) yi[j] /= denom;
    }
    auto xn = x.node();
    // backward reads the softmax values back out of the node itself; holding
    // a self-reference here would leak the tape
    return finish(out, {xn}, [xn, r, c](TapeNode& o) {
        if (xn->frozen) return;
        xn->ensure_grad();
        for (int64_t i = 0; i < r; ++i) {
            const double* y = o.data.data() + i * c;
            const double* dy = o.grad.data() + i * c;
            double dot = 0.0;
            for (int64_t j = 0; j < c; ++j) dot += y[j] * dy[j];
            double* dx = xn->grad.data() + i * c;
            for (int64_t j = 0; j < c; ++j) dx[j] += y[j] * (dy[j] - dot);
        }
    });
}

Tensor layernorm_rows(const Tensor& x) {
    require(x.shape().size() == 2, "layernorm_rows: needs 2-d input");
    int64_t r = x.rows(), c = x.cols();
    require(c >= 2, "layernorm_rows: row width must be >= 2");
    const double eps = 1e-12;
    auto out = make_node(x.shape());
    std::vector<double> inv_std(size_t(r), 0.0);
    for (int64_t i = 0; i < r; ++i) {
        const double* xi = x.data().data() + i * c;
        double mean = 0.0;
        for (int64_t j = 0; j < c; ++j) mean += xi[j];
        mean /= double(c);
        double var = 0.0;
        for (int64_t j = 0; j < c; ++j) var += (xi[j] - mean) * (xi[j] - mean);
        var /= double(c);
        double is = 1.0 / std::sqrt(var + eps);
        inv_std[size_t(i)] = is;
        double* yi = out->data.data() + i * c;
        for (int64_t j = 0; j < c; ++j) yi[j] = (xi[j] - mean) * is;
    }
    auto xn = x.node();
    return finish(out, {xn}, [xn, inv_std, r, c](TapeNode& o) {
        if (xn->frozen) return;
        xn->ensure_grad();
        for (int64_t i = 0; i < r; ++i) {
            const double* y = o.data.data() + i * c;
            const double* dy = o.grad.data() + i * c;
            double sum_dy = 0.0, sum_dyy = 0.0;
            for (int64_t j = 0; j < c; ++j) {
                sum_dy += dy[j];
                sum_dyy += dy[j] * y[j];
            }
            double* dx = xn->grad.data() + i * c;
            double is = inv_std[size_t(i)];
            for (int64_t j = 0; j < c; ++j)
                dx[j] += is * (dy[j] - sum_dy / double(c) - y[j] * sum_dyy / double(c));
        }
    });
}

Tensor gelu(const Tensor& x) {
    auto out = make_node(x.shape());
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (size_t i = 0; i < x.data().size(); ++i) {
        double v = x.data()[i];
        out->data[i] = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
    }
    auto xn = x.node();
    return finish(out, {xn}, [xn, inv_sqrt2](TapeNode& o) {
        if (xn->frozen) return;
        xn->ensure_grad();
        const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * M_PI);
        for (size_t i = 0; i < o.grad.size(); ++i) {
            double v = xn->data[i];
            double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
            double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
            xn->grad[i] += o.grad[i] * (cdf + v * pdf);
        }
    });
}

// ---- reductions -----------------------------------------------------------

Tensor sum_all(const Tensor& x) {
    auto out = make_node({1});
    double s = 0.0;
    for (double v : x.data()) s += v;
    out->data[0] = s;
    auto xn = x.node();
    return finish(out, {xn}, [xn](TapeNode& o) {
        if (xn->frozen) return;
        xn->ensure_grad();
        for (auto& g : xn->grad) g += o.grad[0];
    });
}

Tensor mean_all(const Tensor& x) { return mul_scalar(sum_all(x), 1.0 / double(x.size())); }

// ---- slicing / concat ------------------------------------------------------

Tensor slice_rows(const Tensor& x, int64_t r0, int64_t r1) {
    require(x.shape().size() == 2 && 0 <= r0 && r0 <= r1 && r1 <= x.rows(),
            "slice_rows: bad range [" + std::to_string(r0) + "," + std::to_string(r1) +
                ") for " + shape_str(x.shape()));
    int64_t c = x.cols();
    auto out = make_node({r1 - r0, c});
    std::copy(x.data().begin() + r0 * c, x.data().begin() + r1 * c, out->data.begin());
    auto xn = x.node();
    return finish(out, {xn}, [xn, r0, c](TapeNode& o) {
        if (xn->frozen) return;
        xn->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) xn->grad[size_t(r0 * c) + i] += o.grad[i];
    });
}

Tensor concat_rows(const std::vector<Tensor>& xs) {
    require(!xs.empty(), "concat_rows: empty input");
    int64_t c = xs[0].cols(), r = 0;
    for (const auto& x : xs) {
        require(x.shape().size() == 2 && x.cols() == c, "concat_rows: column mismatch");
        r += x.rows();
    }
    auto out = make_node({r, c});
    std::vector<std::shared_ptr<TapeNode>> parents;
    std::vector<int64_t> offsets;
    int64_t off = 0;
    for (const auto& x : xs) {
        std::copy(x.data().begin(), x.data().end(), out->data.begin() + off);
        parents.push_back(x.node());
        offsets.push_back(off);
        off += x.size();
    }
    return finish(out, parents, [offsets](TapeNode& o) {
        for (size_t p = 0; p < o.parents.size(); ++p) {
            auto& par = o.parents[p];
            if (!par->requires_grad || par->frozen) continue;
            par->ensure_grad();
            int64_t base = offsets[p];
            for (size_t i = 0; i < par->data.size(); ++i) par->grad[i] += o.grad[size_t(base) + i];
        }
    });
}

Tensor slice_cols(const Tensor& x, int64_t c0, int64_t c1) {
    require(x.shape().size() == 2 && 0 <= c0 && c0 <= c1 && c1 <= x.cols(),
            "slice_cols: bad range for " + shape_str(x.shape()));
    int64_t r = x.rows(), c = x.cols(), w = c1 - c0;
    auto out = make_node({r, w});
    for (int64_t i = 0; i < r; ++i)
        std::copy(x.data().begin() + i * c + c0, x.data().begin() + i * c + c1,
                  out->data.begin() + i * w);
    auto xn = x.node();
    return finish(out, {xn}, [xn, r, c, c0, w](TapeNode& o) {
        if (xn->frozen) return;
        xn->ensure_grad();
        for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < w; ++j)
                xn->grad[size_t(i * c + c0 + j)] += o.grad[size_t(i * w + j)];
    });
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
    require(!xs.empty(), "concat_cols: empty input");
    int64_t r = xs[0].rows(), c = 0;
    for (const auto& x : xs) {
        require(x.shape().size() == 2 && x.rows() == r, "concat_cols: row mismatch");
        c += x.cols();
    }
    auto out = make_node({r, c});
    std::vector<std::shared_ptr<TapeNode>> parents;
    std::vector<int64_t> offsets;
    int64_t off = 0;
    for (const auto& x : xs) {
        int64_t w = x.cols();
        for (int64_t i = 0; i < r; ++i)
            std::copy(x.data().begin() + i * w, x.data().begin() + (i + 1) * w,
                      out->data.begin() + i * c + off);
        parents.push_back(x.node());
        offsets.push_back(off);
        off += w;
    }
    return finish(out, parents, [offsets, r, c](TapeNode& o) {
        for (size_t p = 0; p < o.parents.size(); ++p) {
            auto& par = o.parents[p];
            if (!par->requires_grad || par->frozen) continue;
            par->ensure_grad();
            int64_t w = par->shape[1];
            int64_t base = offsets[p];
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < w; ++j)
                    par->grad[size_t(i * w + j)] += o.grad[size_t(i * c + base + j)];
        }
    });
}

Tensor reshape(const Tensor& x, const Shape& shape) {
    require(numel(shape) == x.size(), "reshape: " + shape_str(x.shape()) + " -> " +
                                          shape_str(shape) + " changes element count");
    auto out = make_node(shape);
    out->data = x.data();
    auto xn = x.node();
    return finish(out, {xn}, [xn](TapeNode& o) {
        if (xn->frozen) return;
        xn->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) xn->grad[i] += o.grad[i];
    });
}

Tensor gather(const Tensor& table, const std::vector<int64_t>& idx, const Shape& out_shape) {
    require(numel(out_shape) == int64_t(idx.size()), "gather: index count mismatch");
    auto out = make_node(out_shape);
    for (size_t i = 0; i < idx.size(); ++i) {
        require(idx[i] >= 0 && idx[i] < table.size(), "gather: index out of range");
        out->data[i] = table.data()[size_t(idx[i])];
    }
    auto tn = table.node();
    return finish(out, {tn}, [tn, idx](TapeNode& o) {
        if (tn->frozen) return;
        tn->ensure_grad();
        for (size_t i = 0; i < idx.size(); ++i) tn->grad[size_t(idx[i])] += o.grad[i];
    });
}

// ---- rope ------------------------------------------------------------------

namespace {

// Per-head layout: pairs (2k,2k+1); the first head_dim/4 pairs carry the
// row axis, the rest the column axis. Frequencies follow the usual
// base^-(k/pairs_per_axis) schedule.
struct RopeAngles {
    std::vector<double> cosv, sinv;  // [T, d/2]
};

std::shared_ptr<const RopeAngles> rope_angles(int64_t T, int64_t d, int heads,
                                              const std::vector<int>& row_of,
                                              const std::vector<int>& col_of) {
    // angle tables recur with identical coordinates every forward pass;
    // cache them (graph construction is single-threaded)
    struct Key {
        int64_t T, d;
        int heads;
        std::vector<int> rows, cols;
        bool operator<(const Key& o) const {
            return std::tie(T, d, heads, rows, cols) < std::tie(o.T, o.d, o.heads, o.rows, o.cols);
        }
    };
    static std::map<Key, std::shared_ptr<const RopeAngles>> cache;
    Key key{T, d, heads, row_of, col_of};
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    int64_t hd = d / heads;
    int64_t pairs = hd / 2;
    int64_t axis_pairs = pairs / 2;
    auto ra = std::make_shared<RopeAngles>();
    ra->cosv.resize(size_t(T * (d / 2)));
    ra->sinv.resize(size_t(T * (d / 2)));
    const double base = 10000.0;
    for (int64_t t = 0; t < T; ++t) {
        for (int h = 0; h < heads; ++h) {
            for (int64_t p = 0; p < pairs; ++p) {
                bool row_axis = p < axis_pairs;
                int64_t k = row_axis ? p : p - axis_pairs;
                double freq = std::pow(base, -double(k) / double(axis_pairs));
                double coord = row_axis ? double(row_of[size_t(t)]) : double(col_of[size_t(t)]);
                double ang = coord * freq;
                size_t at = size_t(t * (d / 2) + h * pairs + p);
                ra->cosv[at] = std::cos(ang);
                ra->sinv[at] = std::sin(ang);
            }
        }
    }
    cache[key] = ra;
    return ra;
}

}  // namespace

Tensor rope2d(const Tensor& x, const std::vector<int>& row_of, const std::vector<int>& col_of,
              int heads) {
    require(x.shape().size() == 2, "rope2d: needs 2-d input");
    int64_t T = x.rows(), d = x.cols();
    require(int64_t(row_of.size()) == T && int64_t(col_of.size()) == T,
            "rope2d: coordinate count mismatch");
    require(d % heads == 0 && (d / heads) % 4 == 0,
            "rope2d: head_dim must be divisible by 4, d=" + std::to_string(d) +
                " heads=" + std::to_string(heads));
    std::shared_ptr<const RopeAngles> ra = rope_angles(T, d, heads, row_of, col_of);
    auto out = make_node(x.shape());
    int64_t half = d / 2;
    for (int64_t t = 0; t < T; ++t) {
        const double* xi = x.data().data() + t * d;
        double* yi = out->data.data() + t * d;
        for (int64_t p = 0; p < half; ++p) {
            double c = ra->cosv[size_t(t * half + p)];
            double s = ra->sinv[size_t(t * half + p)];
            double a = xi[2 * p], b = xi[2 * p + 1];
            yi[2 * p] = a * c - b * s;
            yi[2 * p + 1] = a * s + b * c;
        }
    }
    auto xn = x.node();
    return finish(out, {xn}, [xn, ra, T, d, half](TapeNode& o) {
        if (xn->frozen) return;
        xn->ensure_grad();
        for (int64_t t = 0; t < T; ++t) {
            const double* dy = o.grad.data() + t * d;
            double* dx = xn->grad.data() + t * d;
            for (int64_t p = 0; p < half; ++p) {
                double c = ra->cosv[size_t(t * half + p)];
                double s = ra->sinv[size_t(t * half + p)];
                double ga = dy[2 * p], gb = dy[2 * p + 1];
                // transpose of the rotation
                dx[2 * p] += ga * c + gb * s;
                dx[2 * p + 1] += -ga * s + gb * c;
            }
        }
    });
}

// ---- fused attention ---------------------------------------------------------

Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v, double scale,
                      const Tensor& bias, const std::vector<int>& group_of, int ngroups) {
    require(q.shape().size() == 2 && k.shape().size() == 2 && v.shape().size() == 2,
            "attention_core: q,k,v must be 2-d");
    require(q.cols() == k.cols(), "attention_core: q/k width mismatch, " +
                                      shape_str(q.shape()) + " vs " + shape_str(k.shape()));
    require(k.rows() == v.rows(), "attention_core: k/v token count mismatch");
    int64_t Tq = q.rows(), Tk = k.rows(), dh = q.cols(), dv = v.cols();
    require(int64_t(group_of.size()) == Tk, "attention_core: group map size mismatch");
    if (bias.defined())
        require(bias.rows() == Tq && bias.cols() == Tk,
                "attention_core: bias shape " + shape_str(bias.shape()));

    // Keys of each group must be contiguous so per-group partial sums are
    // order-stable; record the group spans.
    std::vector<std::pair<int64_t, int64_t>> spans;
    for (int64_t j = 0; j < Tk;) {
        int g = group_of[size_t(j)];
        int64_t b = j;
        while (j < Tk && group_of[size_t(j)] == g) ++j;
        spans.push_back({b, j});
    }
    require(int(spans.size()) <= ngroups || ngroups == 0,
            "attention_core: groups must be contiguous");
    require(spans.size() <= 64, "attention_core: too many key groups");

    auto attn = make_node({Tq, Tk});  // softmax matrix, kept for backward
    auto out = make_node({Tq, dv});
    const double* kd = k.data().data();
    const double* vd = v.data().data();
    const double* bd = bias.defined() ? bias.data().data() : nullptr;
    const size_t ngrp = spans.size();

    // logits = scale * q k^T + bias
    gemm_nt(q.data().data(), kd, attn->data.data(), Tq, dh, Tk);
    parallel_for(Tq, [&](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) {
            double* ai = attn->data.data() + i * Tk;
            if (bd) {
                for (int64_t j = 0; j < Tk; ++j) ai[j] = scale * ai[j] + bd[i * Tk + j];
            } else if (scale != 1.0) {
                for (int64_t j = 0; j < Tk; ++j) ai[j] *= scale;
            }
            double mx = ai[0];
            for (int64_t j = 1; j < Tk; ++j) mx = std::max(mx, ai[j]);
            double denom;
            {
                // per-group partials combined in sorted order keep the
                // result invariant to group permutation
                double part[64];
                for (size_t s = 0; s < ngrp; ++s) {
                    double acc = 0.0;
                    for (int64_t j = spans[s].first; j < spans[s].second; ++j) {
                        ai[j] = std::exp(ai[j] - mx);
                        acc += ai[j];
                    }
                    part[s] = acc;
                }
                denom = sorted_sum(part, int(ngrp));
            }
            double inv = 1.0 / denom;
            for (int64_t j = 0; j < Tk; ++j) ai[j] *= inv;
        }
    });
    // out = A V, one gemm per group, partial results combined in sorted order
    if (ngrp == 1) {
        gemm_nn(attn->data.data(), vd, out->data.data(), Tq, Tk, dv);
    } else {
        std::vector<std::vector<double>> partials(ngrp);
        for (size_t s = 0; s < ngrp; ++s) {
            partials[s].assign(size_t(Tq * dv), 0.0);
            int64_t b = spans[s].first, e = spans[s].second;
            // rows b..e of V against columns b..e of A
            parallel_for(Tq, [&](int64_t i0, int64_t i1) {
                for (int64_t i = i0; i < i1; ++i) {
                    const double* ai = attn->data.data() + i * Tk;
                    double* pi = partials[s].data() + i * dv;
                    for (int64_t j = b; j < e; ++j) {
                        double a = ai[j];
                        const double* vj = vd + j * dv;
                        for (int64_t c = 0; c < dv; ++c) pi[c] += a * vj[c];
                    }
                }
            });
        }
        parallel_for(Tq, [&](int64_t i0, int64_t i1) {
            double buf[64];
            for (int64_t i = i0; i < i1; ++i) {
                double* oi = out->data.data() + i * dv;
                for (int64_t c = 0; c < dv; ++c) {
                    for (size_t s = 0; s < ngrp; ++s) buf[s] = partials[s][size_t(i * dv + c)];
                    oi[c] = sorted_sum(buf, int(ngrp));
                }
            }
        });
    }

    auto qn = q.node(), kn = k.node(), vn = v.node(), bn = bias.defined() ? bias.node() : nullptr;
    std::vector<std::shared_ptr<TapeNode>> parents = {qn, kn, vn};
    if (bn) parents.push_back(bn);
    return finish(out, parents, [qn, kn, vn, bn, attn, scale, Tq, Tk, dh, dv](TapeNode& o) {
        // dA = dOut V^T ; dL = A * (dA - rowdot(A,dA)) ; dQ = scale dL K ;
        // dK = scale dL^T Q ; dV = A^T dOut ; dBias = dL
        std::vector<double> dl(size_t(Tq * Tk), 0.0);
        const double* ad = attn->data.data();
        gemm_nt(o.grad.data(), vn->data.data(), dl.data(), Tq, dv, Tk);
        for (int64_t i = 0; i < Tq; ++i) {
            double* dli = dl.data() + i * Tk;
            const double* ai = ad + i * Tk;
            double rowdot = 0.0;
            for (int64_t j = 0; j < Tk; ++j) rowdot += ai[j] * dli[j];
            for (int64_t j = 0; j < Tk; ++j) dli[j] = ai[j] * (dli[j] - rowdot);
        }
        if (vn->requires_grad && !vn->frozen) {
            vn->ensure_grad();
            gemm_tn(ad, o.grad.data(), vn->grad.data(), Tq, Tk, dv);
        }
        if (qn->requires_grad && !qn->frozen) {
            qn->ensure_grad();
            std::vector<double> tmp(size_t(Tq * dh), 0.0);
            gemm_nn(dl.data(), kn->data.data(), tmp.data(), Tq, Tk, dh);
            for (size_t i = 0; i < tmp.size(); ++i) qn->grad[i] += scale * tmp[i];
        }
        if (kn->requires_grad && !kn->frozen) {
            kn->ensure_grad();
            std::vector<double> tmp(size_t(Tk * dh), 0.0);
            gemm_tn(dl.data(), qn->data.data(), tmp.data(), Tq, Tk, dh);
            for (size_t i = 0; i < tmp.size(); ++i) kn->grad[i] += scale * tmp[i];
        }
        if (bn && bn->requires_grad && !bn->frozen) {
            bn->ensure_grad();
            for (size_t i = 0; i < dl.size(); ++i) bn->grad[i] += dl[i];
        }
    });
}

Tensor mse(const Tensor& a, const Tensor& b) {
    Tensor d = sub(a, b);
    return mean_all(mul(d, d));
}

}  // namespace lumitex
