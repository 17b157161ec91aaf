#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "duet/graph.hpp"
#include "duet/random.hpp"
#include "duet/tensor.hpp"

namespace duet::nn {

// Uniform init in +/- 1/sqrt(fan_in).
inline Tensor init_weight(RandomSource& rng, std::vector<std::size_t> shape,
                          std::size_t fan_in) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return rng.uniform_tensor(std::move(shape), -bound, bound);
}

// Sinusoidal table, (T x d): even columns sin(pos / 10000^(2i/d)), odd cos.
inline Tensor positional_encoding(std::size_t t_len, std::size_t d) {
    Tensor pe({t_len, d});
    for (std::size_t pos = 0; pos < t_len; ++pos) {
        for (std::size_t i = 0; 2 * i < d; ++i) {
            double angle = static_cast<double>(pos) /
                           std::pow(10000.0, (2.0 * static_cast<double>(i)) /
                                                 static_cast<double>(d));
            pe.at2(pos, 2 * i) = std::sin(angle);
            if (2 * i + 1 < d) pe.at2(pos, 2 * i + 1) = std::cos(angle);
        }
    }
    return pe;
}

struct LinearParams {
    Param w;  // (in x out)
    Param b;  // (out)

    LinearParams() = default;
    LinearParams(const std::string& name, std::size_t in, std::size_t out, RandomSource& rng)
        : w(name + ".w", init_weight(rng, {in, out}, in)),
          b(name + ".b", init_weight(rng, {out}, in)) {}

    template <typename Fn>
    void for_each(Fn&& fn) {
        fn(w);
        fn(b);
    }
};

inline Node* linear(Graph& g, Node* x, LinearParams& p) {
    return g.add_rowvec(g.matmul(x, g.param(p.w)), g.param(p.b));
}

// One LSTM layer; gate layout along the 4H axis is [input, forget, cell, output].
struct LstmLayerParams {
    Param w_ih;  // (in x 4H)
    Param w_hh;  // (H x 4H)
    Param b_ih;  // (4H)
    Param b_hh;  // (4H)

    LstmLayerParams() = default;
    LstmLayerParams(const std::string& name, std::size_t in, std::size_t hidden,
                    RandomSource& rng)
        : w_ih(name + ".w_ih", init_weight(rng, {in, 4 * hidden}, in)),
          w_hh(name + ".w_hh", init_weight(rng, {hidden, 4 * hidden}, hidden)),
          b_ih(name + ".b_ih", init_weight(rng, {4 * hidden}, hidden)),
          b_hh(name + ".b_hh", init_weight(rng, {4 * hidden}, hidden)) {}

    template <typename Fn>
    void for_each(Fn&& fn) {
        fn(w_ih);
        fn(w_hh);
        fn(b_ih);
        fn(b_hh);
    }
};

struct LstmParams {
    std::vector<LstmLayerParams> layers;
    std::size_t hidden = 0;

    LstmParams() = default;
    LstmParams(const std::string& name, std::size_t in, std::size_t h, std::size_t n_layers,
               RandomSource& rng)
        : hidden(h) {
        std::size_t width = in;
        for (std::size_t l = 0; l < n_layers; ++l) {
            layers.emplace_back(name + ".l" + std::to_string(l), width, h, rng);
            width = h;
        }
    }

    template <typename Fn>
    void for_each(Fn&& fn) {
        for (auto& l : layers) l.for_each(fn);
    }
};

struct LstmResult {
    Node* outputs = nullptr;      // (T x H), top layer
    Node* last_hidden = nullptr;  // (1 x H), top layer at the final step
};

// Stacked LSTM over a (T x F) sequence; zero initial state.
inline LstmResult lstm_forward(Graph& g, Node* x, LstmParams& p) {
    if (x->value.ndim() != 2) throw DimensionError("lstm_forward: input must be (T x F)");
    std::size_t t_len = x->value.dim(0);
    std::size_t h = p.hidden;
    Node* layer_in = x;
    Node* last_hidden = nullptr;
    for (auto& lp : p.layers) {
        Node* w_ih = g.param(lp.w_ih);
        Node* w_hh = g.param(lp.w_hh);
        Node* b_ih = g.param(lp.b_ih);
        Node* b_hh = g.param(lp.b_hh);
        // Input projections for all steps at once.
        Node* xw = g.add_rowvec(g.add_rowvec(g.matmul(layer_in, w_ih), b_ih), b_hh);
        Node* h_t = g.constant(Tensor({1, h}));
        Node* c_t = g.constant(Tensor({1, h}));
        std::vector<Node*> outs;
        outs.reserve(t_len);
        for (std::size_t t = 0; t < t_len; ++t) {
            Node* gates = g.add(g.slice_rows(xw, t, t + 1), g.matmul(h_t, w_hh));
            Node* i_g = g.sigmoid(g.slice_cols(gates, 0, h));
            Node* f_g = g.sigmoid(g.slice_cols(gates, h, 2 * h));
            Node* g_g = g.tanh_fn(g.slice_cols(gates, 2 * h, 3 * h));
            Node* o_g = g.sigmoid(g.slice_cols(gates, 3 * h, 4 * h));
            c_t = g.add(g.mul(f_g, c_t), g.mul(i_g, g_g));
            h_t = g.mul(o_g, g.tanh_fn(c_t));
            outs.push_back(h_t);
        }
        layer_in = g.concat_rows(outs);
        last_hidden = h_t;
    }
    return {layer_in, last_hidden};
}

struct MhaParams {
    LinearParams q, k, v, out;
    std::size_t n_heads = 1;

    MhaParams() = default;
    MhaParams(const std::string& name, std::size_t d, std::size_t heads, RandomSource& rng)
        : q(name + ".q", d, d, rng),
          k(name + ".k", d, d, rng),
          v(name + ".v", d, d, rng),
          out(name + ".out", d, d, rng),
          n_heads(heads) {
        if (heads == 0 || d % heads != 0) {
            throw ArgumentError("attention width must divide evenly across heads");
        }
    }

    template <typename Fn>
    void for_each(Fn&& fn) {
        q.for_each(fn);
        k.for_each(fn);
        v.for_each(fn);
        out.for_each(fn);
    }
};

// Scaled dot-product attention over (Tq x d) queries and (Tk x d) keys/values.
// With causal=true, query row i attends to key rows <= i only.
inline Node* multi_head_attention(Graph& g, Node* query, Node* key_value, MhaParams& p,
                                  bool causal) {
    std::size_t d = query->value.dim(1);
    std::size_t dh = d / p.n_heads;
    Node* qp = linear(g, query, p.q);
    Node* kp = linear(g, key_value, p.k);
    Node* vp = linear(g, key_value, p.v);
    double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Node*> heads;
    heads.reserve(p.n_heads);
    for (std::size_t hd = 0; hd < p.n_heads; ++hd) {
        Node* qh = g.slice_cols(qp, hd * dh, (hd + 1) * dh);
        Node* kh = g.slice_cols(kp, hd * dh, (hd + 1) * dh);
        Node* vh = g.slice_cols(vp, hd * dh, (hd + 1) * dh);
        Node* scores = g.scale(g.matmul(qh, g.transpose(kh)), scale);
        Node* attn = g.masked_softmax_rows(scores, causal);
        heads.push_back(g.matmul(attn, vh));
    }
    return linear(g, g.concat_cols(heads), p.out);
}

struct LayerNormParams {
    Param gain;
    Param bias;

    LayerNormParams() = default;
    LayerNormParams(const std::string& name, std::size_t f)
        : gain(name + ".gain", Tensor::full({f}, 1.0)), bias(name + ".bias", Tensor({f})) {}

    template <typename Fn>
    void for_each(Fn&& fn) {
        fn(gain);
        fn(bias);
    }
};

inline Node* layer_norm(Graph& g, Node* x, LayerNormParams& p) {
    return g.layer_norm(x, g.param(p.gain), g.param(p.bias));
}

struct VaeLatent {
    Node* mu = nullptr;       // (1 x L)
    Node* log_var = nullptr;  // (1 x L)
    Node* z = nullptr;        // (1 x L)
};

// z = mu + exp(0.5 * log_var) * eps
inline Node* reparameterize(Graph& g, Node* mu, Node* log_var, const Tensor& eps) {
    Node* sigma = g.exp_fn(g.scale(log_var, 0.5));
    return g.add(mu, g.mul(sigma, g.constant(eps)));
}

}  // namespace duet::nn
