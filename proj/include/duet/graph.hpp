#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "duet/tensor.hpp"

namespace duet::nn {

// A named trainable weight with a persistent gradient accumulator.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string n, Tensor v) : name(std::move(n)), value(v), grad(Tensor(v.shape())) {}

    void zero_grad() {
        for (std::size_t i = 0; i < grad.numel(); ++i) grad[i] = 0.0;
    }
};

// Reverse-mode tape. Ops evaluate eagerly and record a backward closure; node
// creation order is a topological order, so backward() just walks it in
// reverse. A graph is built, run backward at most once, then discarded.
class Graph {
public:
    struct Node {
        Tensor value;
        Tensor grad;
        bool needs_grad = false;
        std::function<void()> backward;
    };

    explicit Graph(bool no_grad = false) : no_grad_(no_grad) {}

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool no_grad() const { return no_grad_; }
    std::size_t size() const { return nodes_.size(); }

    Node* constant(Tensor v) { return make(std::move(v), false); }

    // Leaf bound to a trainable param; backward adds into p.grad.
    Node* param(Param& p) {
        if (no_grad_) return constant(p.value);
        Node* n = make(p.value, true);
        Param* pp = &p;
        n->backward = [n, pp]() {
            for (std::size_t i = 0; i < n->grad.numel(); ++i) pp->grad[i] += n->grad[i];
        };
        return n;
    }

    Node* frozen(const Param& p) { return constant(p.value); }

    Node* add(Node* a, Node* b) {
        require_same_shape(a->value, b->value, "add");
        Tensor out(a->value.shape());
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
        Node* n = make(std::move(out), a->needs_grad || b->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, a, b]() {
                accumulate(a, [n](std::size_t i) { return n->grad[i]; });
                accumulate(b, [n](std::size_t i) { return n->grad[i]; });
            };
        }
        return n;
    }

    Node* sub(Node* a, Node* b) {
        require_same_shape(a->value, b->value, "sub");
        Tensor out(a->value.shape());
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] - b->value[i];
        Node* n = make(std::move(out), a->needs_grad || b->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, a, b]() {
                accumulate(a, [n](std::size_t i) { return n->grad[i]; });
                accumulate(b, [n](std::size_t i) { return -n->grad[i]; });
            };
        }
        return n;
    }

    Node* mul(Node* a, Node* b) {
        require_same_shape(a->value, b->value, "mul");
        Tensor out(a->value.shape());
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
        Node* n = make(std::move(out), a->needs_grad || b->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, a, b]() {
                accumulate(a, [n, b](std::size_t i) { return n->grad[i] * b->value[i]; });
                accumulate(b, [n, a](std::size_t i) { return n->grad[i] * a->value[i]; });
            };
        }
        return n;
    }

    Node* scale(Node* a, double c) {
        Tensor out(a->value.shape());
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = c * a->value[i];
        Node* n = make(std::move(out), a->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, a, c]() {
                accumulate(a, [n, c](std::size_t i) { return c * n->grad[i]; });
            };
        }
        return n;
    }

    Node* add_scalar(Node* a, double c) {
        Tensor out(a->value.shape());
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + c;
        Node* n = make(std::move(out), a->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, a]() {
                accumulate(a, [n](std::size_t i) { return n->grad[i]; });
            };
        }
        return n;
    }

    // (m x k) . (k x p)
    Node* matmul(Node* a, Node* b) {
        const Tensor& av = a->value;
        const Tensor& bv = b->value;
        if (av.ndim() != 2 || bv.ndim() != 2 || av.dim(1) != bv.dim(0)) {
            throw DimensionError("matmul: incompatible shapes " + shape_string(av) + " . " +
                                 shape_string(bv));
        }
        std::size_t m = av.dim(0), k = av.dim(1), p = bv.dim(1);
        Tensor out({m, p});
        for (std::size_t i = 0; i < m; ++i) {
            const double* arow = av.data() + i * k;
            double* orow = out.data() + i * p;
            for (std::size_t kk = 0; kk < k; ++kk) {
                double aval = arow[kk];
                const double* brow = bv.data() + kk * p;
                for (std::size_t j = 0; j < p; ++j) orow[j] += aval * brow[j];
            }
        }
        Node* n = make(std::move(out), a->needs_grad || b->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, a, b, m, k, p]() {
                if (a->needs_grad) {
                    // dA = dOut . B^T
                    for (std::size_t i = 0; i < m; ++i) {
                        const double* grow = n->grad.data() + i * p;
                        double* garow = a->grad.data() + i * k;
                        for (std::size_t kk = 0; kk < k; ++kk) {
                            const double* brow = b->value.data() + kk * p;
                            double s = 0.0;
                            for (std::size_t j = 0; j < p; ++j) s += grow[j] * brow[j];
                            garow[kk] += s;
                        }
                    }
                }
                if (b->needs_grad) {
                    // dB = A^T . dOut
                    for (std::size_t i = 0; i < m; ++i) {
                        const double* arow = a->value.data() + i * k;
                        const double* grow = n->grad.data() + i * p;
                        for (std::size_t kk = 0; kk < k; ++kk) {
                            double aval = arow[kk];
                            if (aval == 0.0) continue;
                            double* gbrow = b->grad.data() + kk * p;
                            for (std::size_t j = 0; j < p; ++j) gbrow[j] += aval * grow[j];
                        }
                    }
                }
            };
        }
        return n;
    }

    Node* transpose(Node* a) {
        const Tensor& av = a->value;
        if (av.ndim() != 2) throw DimensionError("transpose: expects a 2-d tensor");
        std::size_t r = av.dim(0), c = av.dim(1);
        Tensor out({c, r});
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) out.at2(j, i) = av.at2(i, j);
        Node* n = make(std::move(out), a->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, a, r, c]() {
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) a->grad.at2(i, j) += n->grad.at2(j, i);
            };
        }
        return n;
    }

    // (R x C) + row vector (C), broadcast over rows.
    Node* add_rowvec(Node* x, Node* b) {
        const Tensor& xv = x->value;
        const Tensor& bv = b->value;
        if (xv.ndim() != 2 || bv.ndim() != 1 || xv.dim(1) != bv.dim(0)) {
            throw DimensionError("add_rowvec: shapes " + shape_string(xv) + " + " +
                                 shape_string(bv));
        }
        std::size_t r = xv.dim(0), c = xv.dim(1);
        Tensor out({r, c});
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) out.at2(i, j) = xv.at2(i, j) + bv[j];
        Node* n = make(std::move(out), x->needs_grad || b->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, x, b, r, c]() {
                if (x->needs_grad) {
                    for (std::size_t i = 0; i < r * c; ++i) x->grad[i] += n->grad[i];
                }
                if (b->needs_grad) {
                    for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < c; ++j) b->grad[j] += n->grad.at2(i, j);
                }
            };
        }
        return n;
    }

    Node* sigmoid(Node* a) {
        Tensor out(a->value.shape());
        for (std::size_t i = 0; i < out.numel(); ++i)
            out[i] = 1.0 / (1.0 + std::exp(-a->value[i]));
        Node* n = make(std::move(out), a->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, a]() {
                accumulate(a, [n](std::size_t i) {
                    double y = n->value[i];
                    return n->grad[i] * y * (1.0 - y);
                });
            };
        }
        return n;
    }

    Node* tanh_fn(Node* a) {
        Tensor out(a->value.shape());
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(a->value[i]);
        Node* n = make(std::move(out), a->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, a]() {
                accumulate(a, [n](std::size_t i) {
                    double y = n->value[i];
                    return n->grad[i] * (1.0 - y * y);
                });
            };
        }
        return n;
    }

    Node* relu(Node* a) {
        Tensor out(a->value.shape());
        for (std::size_t i = 0; i < out.numel(); ++i)
            out[i] = a->value[i] > 0.0 ? a->value[i] : 0.0;
        Node* n = make(std::move(out), a->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, a]() {
                accumulate(a, [n, a](std::size_t i) {
                    return a->value[i] > 0.0 ? n->grad[i] : 0.0;
                });
            };
        }
        return n;
    }

    Node* exp_fn(Node* a) {
        Tensor out(a->value.shape());
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::exp(a->value[i]);
        Node* n = make(std::move(out), a->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, a]() {
                accumulate(a, [n](std::size_t i) { return n->grad[i] * n->value[i]; });
            };
        }
        return n;
    }

    // Elementwise sqrt; zero subgradient at (near-)zero inputs.
    Node* sqrt_fn(Node* a) {
        Tensor out(a->value.shape());
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::sqrt(a->value[i]);
        Node* n = make(std::move(out), a->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, a]() {
                accumulate(a, [n](std::size_t i) {
                    double y = n->value[i];
                    return y > 1e-12 ? n->grad[i] / (2.0 * y) : 0.0;
                });
            };
        }
        return n;
    }

    Node* sum_all(Node* a) {
        double s = 0.0;
        for (std::size_t i = 0; i < a->value.numel(); ++i) s += a->value[i];
        Node* n = make(Tensor::scalar(s), a->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, a]() {
                accumulate(a, [n](std::size_t) { return n->grad[0]; });
            };
        }
        return n;
    }

    Node* mean_all(Node* a) {
        if (a->value.numel() == 0) throw DimensionError("mean_all: empty tensor");
        return scale(sum_all(a), 1.0 / static_cast<double>(a->value.numel()));
    }

    // (R x C) -> (R), sum over columns.
    Node* sum_rows(Node* a) {
        const Tensor& av = a->value;
        if (av.ndim() != 2) throw DimensionError("sum_rows: expects a 2-d tensor");
        std::size_t r = av.dim(0), c = av.dim(1);
        Tensor out({r});
        for (std::size_t i = 0; i < r; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < c; ++j) s += av.at2(i, j);
            out[i] = s;
        }
        Node* n = make(std::move(out), a->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, a, r, c]() {
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) a->grad.at2(i, j) += n->grad[i];
            };
        }
        return n;
    }

    Node* reshape(Node* a, std::vector<std::size_t> shape) {
        Tensor out = a->value.reshaped(std::move(shape));
        Node* n = make(std::move(out), a->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, a]() {
                for (std::size_t i = 0; i < a->grad.numel(); ++i) a->grad[i] += n->grad[i];
            };
        }
        return n;
    }

    // Columns [c0, c1) of a (R x C) tensor.
    Node* slice_cols(Node* a, std::size_t c0, std::size_t c1) {
        const Tensor& av = a->value;
        if (av.ndim() != 2 || c1 > av.dim(1) || c0 >= c1) {
            throw DimensionError("slice_cols: bad range");
        }
        std::size_t r = av.dim(0), c = av.dim(1), w = c1 - c0;
        Tensor out({r, w});
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j) out.at2(i, j) = av.at2(i, c0 + j);
        Node* n = make(std::move(out), a->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, a, r, c0, w]() {
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < w; ++j) a->grad.at2(i, c0 + j) += n->grad.at2(i, j);
            };
        }
        return n;
    }

    // Concatenate 2-d tensors with equal row counts along columns.
    Node* concat_cols(const std::vector<Node*>& parts) {
        if (parts.empty()) throw DimensionError("concat_cols: no parts");
        std::size_t r = parts[0]->value.dim(0);
        std::size_t total = 0;
        bool needs = false;
        for (Node* p : parts) {
            if (p->value.ndim() != 2 || p->value.dim(0) != r) {
                throw DimensionError("concat_cols: row mismatch");
            }
            total += p->value.dim(1);
            needs = needs || p->needs_grad;
        }
        Tensor out({r, total});
        std::size_t off = 0;
        for (Node* p : parts) {
            std::size_t w = p->value.dim(1);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < w; ++j) out.at2(i, off + j) = p->value.at2(i, j);
            off += w;
        }
        Node* n = make(std::move(out), needs);
        if (n->needs_grad) {
            std::vector<Node*> parents = parts;
            n->backward = [n, parents, r]() {
                std::size_t off = 0;
                for (Node* p : parents) {
                    std::size_t w = p->value.dim(1);
                    if (p->needs_grad) {
                        for (std::size_t i = 0; i < r; ++i)
                            for (std::size_t j = 0; j < w; ++j)
                                p->grad.at2(i, j) += n->grad.at2(i, off + j);
                    }
                    off += w;
                }
            };
        }
        return n;
    }

    // Rows [r0, r1) of a (R x C) tensor.
    Node* slice_rows(Node* a, std::size_t r0, std::size_t r1) {
        const Tensor& av = a->value;
        if (av.ndim() != 2 || r1 > av.dim(0) || r0 >= r1) {
            throw DimensionError("slice_rows: bad range");
        }
        std::size_t c = av.dim(1), h = r1 - r0;
        Tensor out({h, c});
        for (std::size_t i = 0; i < h * c; ++i) out[i] = av.values()[r0 * c + i];
        Node* n = make(std::move(out), a->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, a, r0, c, h]() {
                for (std::size_t i = 0; i < h * c; ++i) a->grad[r0 * c + i] += n->grad[i];
            };
        }
        return n;
    }

    // Stack 2-d tensors with equal column counts along rows.
    Node* concat_rows(const std::vector<Node*>& parts) {
        if (parts.empty()) throw DimensionError("concat_rows: no parts");
        std::size_t c = parts[0]->value.dim(1);
        std::size_t total = 0;
        bool needs = false;
        for (Node* p : parts) {
            if (p->value.ndim() != 2 || p->value.dim(1) != c) {
                throw DimensionError("concat_rows: column mismatch");
            }
            total += p->value.dim(0);
            needs = needs || p->needs_grad;
        }
        Tensor out({total, c});
        std::size_t off = 0;
        for (Node* p : parts) {
            for (std::size_t i = 0; i < p->value.numel(); ++i) out[off + i] = p->value[i];
            off += p->value.numel();
        }
        Node* n = make(std::move(out), needs);
        if (n->needs_grad) {
            std::vector<Node*> parents = parts;
            n->backward = [n, parents]() {
                std::size_t off = 0;
                for (Node* p : parents) {
                    if (p->needs_grad) {
                        for (std::size_t i = 0; i < p->grad.numel(); ++i)
                            p->grad[i] += n->grad[off + i];
                    }
                    off += p->value.numel();
                }
            };
        }
        return n;
    }

    // (1 x C) -> (n x C), the same row at every position.
    Node* repeat_rows(Node* z, std::size_t n_rows) {
        const Tensor& zv = z->value;
        if (zv.ndim() != 2 || zv.dim(0) != 1) {
            throw DimensionError("repeat_rows: expects a (1 x C) tensor");
        }
        std::size_t c = zv.dim(1);
        Tensor out({n_rows, c});
        for (std::size_t t = 0; t < n_rows; ++t)
            for (std::size_t j = 0; j < c; ++j) out.at2(t, j) = zv[j];
        Node* n = make(std::move(out), z->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, z, n_rows, c]() {
                for (std::size_t t = 0; t < n_rows; ++t)
                    for (std::size_t j = 0; j < c; ++j) z->grad[j] += n->grad.at2(t, j);
            };
        }
        return n;
    }

    // Row-wise softmax of (Q x K) scores. With causal=true (requires Q == K),
    // row i is normalized over columns j <= i only; masked entries are exact
    // zeros and are never read, so outputs at row i cannot depend on scores
    // beyond column i.
    Node* masked_softmax_rows(Node* scores, bool causal) {
        const Tensor& sv = scores->value;
        if (sv.ndim() != 2) throw DimensionError("masked_softmax_rows: expects 2-d scores");
        std::size_t q = sv.dim(0), k = sv.dim(1);
        if (causal && q != k) {
            throw DimensionError("masked_softmax_rows: causal mask requires square scores");
        }
        Tensor out({q, k});
        for (std::size_t i = 0; i < q; ++i) {
            std::size_t limit = causal ? i + 1 : k;
            double mx = sv.at2(i, 0);
            for (std::size_t j = 1; j < limit; ++j) mx = std::max(mx, sv.at2(i, j));
            double denom = 0.0;
            for (std::size_t j = 0; j < limit; ++j) {
                double e = std::exp(sv.at2(i, j) - mx);
                out.at2(i, j) = e;
                denom += e;
            }
            for (std::size_t j = 0; j < limit; ++j) out.at2(i, j) /= denom;
        }
        Node* n = make(std::move(out), scores->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, scores, q, k, causal]() {
                for (std::size_t i = 0; i < q; ++i) {
                    std::size_t limit = causal ? i + 1 : k;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < limit; ++j)
                        dot += n->grad.at2(i, j) * n->value.at2(i, j);
                    for (std::size_t j = 0; j < limit; ++j) {
                        scores->grad.at2(i, j) +=
                            n->value.at2(i, j) * (n->grad.at2(i, j) - dot);
                    }
                }
            };
        }
        return n;
    }

    // Per-channel 1-d convolution along time (dim 0) with edge-replication
    // padding. kernel: (k) with k odd, shared across channels.
    Node* conv1d_same(Node* x, Node* kernel) {
        const Tensor& xv = x->value;
        const Tensor& kv = kernel->value;
        if (xv.ndim() < 2) throw DimensionError("conv1d_same: input must be time-major");
        if (kv.ndim() != 1 || kv.dim(0) % 2 == 0) {
            throw ArgumentError("conv1d_same: kernel width must be odd");
        }
        std::size_t t_len = xv.dim(0);
        std::size_t kw = kv.dim(0);
        std::ptrdiff_t half = static_cast<std::ptrdiff_t>(kw / 2);
        std::size_t stride = xv.numel() / t_len;
        auto clamp_t = [t_len](std::ptrdiff_t t) {
            if (t < 0) return std::size_t{0};
            if (t >= static_cast<std::ptrdiff_t>(t_len)) return t_len - 1;
            return static_cast<std::size_t>(t);
        };
        Tensor out(xv.shape());
        for (std::size_t t = 0; t < t_len; ++t) {
            for (std::size_t i = 0; i < kw; ++i) {
                std::size_t src = clamp_t(static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(i) - half);
                double w = kv[i];
                const double* xrow = xv.data() + src * stride;
                double* orow = out.data() + t * stride;
                for (std::size_t s = 0; s < stride; ++s) orow[s] += w * xrow[s];
            }
        }
        Node* n = make(std::move(out), x->needs_grad || kernel->needs_grad);
        if (n->needs_grad) {
            n->backward = [n, x, kernel, t_len, kw, half, stride, clamp_t]() {
                for (std::size_t t = 0; t < t_len; ++t) {
                    const double* grow = n->grad.data() + t * stride;
                    for (std::size_t i = 0; i < kw; ++i) {
                        std::size_t src = clamp_t(static_cast<std::ptrdiff_t>(t) +
                                                  static_cast<std::ptrdiff_t>(i) - half);
                        if (kernel->needs_grad) {
                            const double* xrow = x->value.data() + src * stride;
                            double s = 0.0;
                            for (std::size_t q = 0; q < stride; ++q) s += grow[q] * xrow[q];
                            kernel->grad[i] += s;
                        }
                        if (x->needs_grad) {
                            double w = kernel->value[i];
                            double* gxrow = x->grad.data() + src * stride;
                            for (std::size_t q = 0; q < stride; ++q) gxrow[q] += w * grow[q];
                        }
                    }
                }
            };
        }
        return n;
    }

    // Layer norm over the last dimension with learnable gain/bias.
    Node* layer_norm(Node* x, Node* gain, Node* bias, double eps = 1e-5) {
        const Tensor& xv = x->value;
        if (xv.ndim() < 2) throw DimensionError("layer_norm: rank must be >= 2");
        std::size_t f = xv.dim(xv.ndim() - 1);
        if (gain->value.numel() != f || bias->value.numel() != f) {
            throw DimensionError("layer_norm: gain/bias width mismatch");
        }
        std::size_t rows = xv.numel() / f;
        Tensor out(xv.shape());
        Tensor inv_sd({rows});
        Tensor xhat(xv.shape());
        for (std::size_t r = 0; r < rows; ++r) {
            const double* xr = xv.data() + r * f;
            double mean = 0.0;
            for (std::size_t j = 0; j < f; ++j) mean += xr[j];
            mean /= static_cast<double>(f);
            double var = 0.0;
            for (std::size_t j = 0; j < f; ++j) {
                double d = xr[j] - mean;
                var += d * d;
            }
            var /= static_cast<double>(f);
            double isd = 1.0 / std::sqrt(var + eps);
            inv_sd[r] = isd;
            for (std::size_t j = 0; j < f; ++j) {
                double h = (xr[j] - mean) * isd;
                xhat[r * f + j] = h;
                out[r * f + j] = gain->value[j] * h + bias->value[j];
            }
        }
        Node* n = make(std::move(out), x->needs_grad || gain->needs_grad || bias->needs_grad);
        if (n->needs_grad) {
            auto inv_sd_c = std::make_shared<Tensor>(std::move(inv_sd));
            auto xhat_c = std::make_shared<Tensor>(std::move(xhat));
            n->backward = [n, x, gain, bias, rows, f, inv_sd_c, xhat_c]() {
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* g = n->grad.data() + r * f;
                    const double* h = xhat_c->data() + r * f;
                    double sum_gy = 0.0, sum_gyh = 0.0;
                    for (std::size_t j = 0; j < f; ++j) {
                        double gy = g[j] * gain->value[j];
                        sum_gy += gy;
                        sum_gyh += gy * h[j];
                    }
                    double inv_f = 1.0 / static_cast<double>(f);
                    for (std::size_t j = 0; j < f; ++j) {
                        if (gain->needs_grad) gain->grad[j] += g[j] * h[j];
                        if (bias->needs_grad) bias->grad[j] += g[j];
                        if (x->needs_grad) {
                            double gy = g[j] * gain->value[j];
                            x->grad[r * f + j] +=
                                (*inv_sd_c)[r] * (gy - inv_f * sum_gy - h[j] * inv_f * sum_gyh);
                        }
                    }
                }
            };
        }
        return n;
    }

    // Backpropagate from a scalar node. Call at most once per graph.
    void backward(Node* root) {
        if (root->value.numel() != 1) {
            throw DimensionError("backward: root must be a scalar node");
        }
        for (Node& n : nodes_) {
            if (n.needs_grad && n.grad.numel() == 0) n.grad = Tensor(n.value.shape());
        }
        if (!root->needs_grad) return;
        root->grad[0] = 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            if (it->needs_grad && it->backward) it->backward();
        }
    }

private:
    Node* make(Tensor value, bool needs_grad) {
        nodes_.emplace_back();
        Node& n = nodes_.back();
        n.value = std::move(value);
        n.needs_grad = needs_grad && !no_grad_;
        return &n;
    }

    template <typename Fn>
    static void accumulate(Node* target, Fn&& per_index) {
        if (!target->needs_grad) return;
        for (std::size_t i = 0; i < target->grad.numel(); ++i) target->grad[i] += per_index(i);
    }

    std::deque<Node> nodes_;
    bool no_grad_ = false;
};

using Node = Graph::Node;

}  // namespace duet::nn
