#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "duet/common.hpp"
#include "duet/layers.hpp"
#include "duet/preprocess.hpp"

namespace duet::model {

using nn::Graph;
using nn::Node;
using nn::Param;
using nn::Tensor;

struct ModelConfig {
    std::size_t frames = 64;     // window length T
    std::size_t joints = 29;     // M
    std::size_t dims = 3;        // D
    std::size_t d_model = 64;
    std::size_t n_heads = 8;
    std::size_t latent_dim = 64;
    std::size_t lstm_layers = 2;
    std::size_t conv_kernel = 5;
    std::size_t decoder_layers = 1;

    std::size_t features() const { return joints * dims; }
};

// Encoder: embed -> +positional encoding -> self-attention -> LSTM -> mu/log_var.
// Decoder: latent repeated over time -> LSTM -> smoothing conv -> linear out.
struct DancerVae {
    nn::LinearParams embed;
    nn::MhaParams enc_attn;
    nn::LstmParams enc_lstm;
    nn::LinearParams mu_head;
    nn::LinearParams logvar_head;
    nn::LstmParams dec_lstm;
    Param dec_conv;
    nn::LinearParams dec_out;

    DancerVae() = default;
    DancerVae(const std::string& name, const ModelConfig& cfg, nn::RandomSource& rng)
        : embed(name + ".embed", cfg.features(), cfg.d_model, rng),
          enc_attn(name + ".enc_attn", cfg.d_model, cfg.n_heads, rng),
          enc_lstm(name + ".enc_lstm", cfg.d_model, cfg.d_model, cfg.lstm_layers, rng),
          mu_head(name + ".mu", cfg.d_model, cfg.latent_dim, rng),
          logvar_head(name + ".logvar", cfg.d_model, cfg.latent_dim, rng),
          dec_lstm(name + ".dec_lstm", cfg.latent_dim, cfg.d_model, cfg.lstm_layers, rng),
          dec_conv(name + ".dec_conv",
                   nn::init_weight(rng, {cfg.conv_kernel}, cfg.conv_kernel)),
          dec_out(name + ".dec_out", cfg.d_model, cfg.features(), rng) {}

    template <typename Fn>
    void for_each(Fn&& fn) {
        embed.for_each(fn);
        enc_attn.for_each(fn);
        enc_lstm.for_each(fn);
        mu_head.for_each(fn);
        logvar_head.for_each(fn);
        dec_lstm.for_each(fn);
        fn(dec_conv);
        dec_out.for_each(fn);
    }
};

struct DecoderLayerParams {
    nn::MhaParams self_attn;
    nn::LayerNormParams ln_self;
    nn::MhaParams cross_attn;
    nn::LayerNormParams ln_cross;
    nn::LinearParams ff_in;
    nn::LinearParams ff_out;
    nn::LayerNormParams ln_ff;

    DecoderLayerParams() = default;
    DecoderLayerParams(const std::string& name, const ModelConfig& cfg, nn::RandomSource& rng)
        : self_attn(name + ".self_attn", cfg.d_model, cfg.n_heads, rng),
          ln_self(name + ".ln_self", cfg.d_model),
          cross_attn(name + ".cross_attn", cfg.d_model, cfg.n_heads, rng),
          ln_cross(name + ".ln_cross", cfg.d_model),
          ff_in(name + ".ff_in", cfg.d_model, 4 * cfg.d_model, rng),
          ff_out(name + ".ff_out", 4 * cfg.d_model, cfg.d_model, rng),
          ln_ff(name + ".ln_ff", cfg.d_model) {}

    template <typename Fn>
    void for_each(Fn&& fn) {
        self_attn.for_each(fn);
        ln_self.for_each(fn);
        cross_attn.for_each(fn);
        ln_cross.for_each(fn);
        ff_in.for_each(fn);
        ff_out.for_each(fn);
        ln_ff.for_each(fn);
    }
};

struct DecoderStack {
    nn::LinearParams embed_target;
    nn::LinearParams embed_memory;
    std::vector<DecoderLayerParams> layers;
    nn::LinearParams out_proj;

    DecoderStack() = default;
    DecoderStack(const std::string& name, const ModelConfig& cfg, nn::RandomSource& rng)
        : embed_target(name + ".embed_target", cfg.features(), cfg.d_model, rng),
          embed_memory(name + ".embed_memory", cfg.features(), cfg.d_model, rng),
          out_proj(name + ".out_proj", cfg.d_model, cfg.features(), rng) {
        for (std::size_t l = 0; l < cfg.decoder_layers; ++l) {
            layers.emplace_back(name + ".layer" + std::to_string(l), cfg, rng);
        }
    }

    template <typename Fn>
    void for_each(Fn&& fn) {
        embed_target.for_each(fn);
        embed_memory.for_each(fn);
        for (auto& l : layers) l.for_each(fn);
        out_proj.for_each(fn);
    }
};

struct DuetModel {
    ModelConfig config;
    DancerVae vae1, vae2, vae3;
    DecoderStack decoder1, decoder2;
    pose::NormStats norm_stats;
    bool has_norm_stats = false;
    double fps = pose::kDefaultFps;

    DuetModel() = default;
    DuetModel(const ModelConfig& cfg, unsigned long long seed) : config(cfg) {
        nn::RandomSource rng(seed);
        vae1 = DancerVae("vae1", cfg, rng);
        vae2 = DancerVae("vae2", cfg, rng);
        vae3 = DancerVae("vae3", cfg, rng);
        decoder1 = DecoderStack("decoder1", cfg, rng);
        decoder2 = DecoderStack("decoder2", cfg, rng);
        norm_stats.mean = Tensor({cfg.joints, cfg.dims});
        norm_stats.std = Tensor::full({cfg.joints, cfg.dims}, 1.0);
    }

    // Fixed traversal order; checkpoints and optimizer slots rely on it.
    template <typename Fn>
    void for_each_param(Fn&& fn) {
        vae1.for_each(fn);
        vae2.for_each(fn);
        vae3.for_each(fn);
        decoder1.for_each(fn);
        decoder2.for_each(fn);
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for_each_param([&](Param& p) { n += p.value.numel(); });
        return n;
    }
};

// Closed-form parameter total for a config; tests pin the constructed model
// against this to catch accidental architecture drift.
inline std::size_t expected_parameter_count(const ModelConfig& cfg) {
    auto lin = [](std::size_t in, std::size_t out) { return in * out + out; };
    std::size_t f = cfg.features(), d = cfg.d_model, l = cfg.latent_dim;
    auto lstm = [&](std::size_t in) {
        std::size_t first = in * 4 * d + d * 4 * d + 8 * d;
        std::size_t rest = (cfg.lstm_layers - 1) * (d * 4 * d + d * 4 * d + 8 * d);
        return first + rest;
    };
    std::size_t mha = 4 * lin(d, d);
    std::size_t vae = lin(f, d) + mha + lstm(d) + 2 * lin(d, l) + lstm(l) +
                      cfg.conv_kernel + lin(d, f);
    std::size_t dec_layer = 2 * mha + 3 * (2 * d) + lin(d, 4 * d) + lin(4 * d, d);
    std::size_t dec = 2 * lin(f, d) + cfg.decoder_layers * dec_layer + lin(d, f);
    return 3 * vae + 2 * dec;
}

namespace detail {

inline Node* as_frames(Graph& g, const Tensor& x, const ModelConfig& cfg,
                       const char* what) {
    if (x.ndim() == 0 || x.numel() == 0) throw DimensionError(std::string(what) + ": empty input");
    std::size_t t_len = x.dim(0);
    std::size_t per_frame = x.numel() / t_len;
    if (per_frame != cfg.features() || t_len * per_frame != x.numel()) {
        throw DimensionError(std::string(what) + ": expected T x " +
                             std::to_string(cfg.features()) + " values, got " +
                             nn::shape_string(x));
    }
    return g.constant(x.reshaped({t_len, per_frame}));
}

}  // namespace detail

struct VaeNodes {
    Node* recon = nullptr;  // (T x F)
    Node* mu = nullptr;     // (1 x latent)
    Node* log_var = nullptr;
    Node* z = nullptr;
};

// Decode a latent row back to a T-frame sequence (also the sampling path).
inline Node* vae_decode_nodes(Graph& g, DancerVae& v, Node* z, std::size_t t_len) {
    Node* dec_in = g.repeat_rows(z, t_len);
    auto dec = nn::lstm_forward(g, dec_in, v.dec_lstm);
    Node* smooth = g.conv1d_same(dec.outputs, g.param(v.dec_conv));
    return nn::linear(g, smooth, v.dec_out);
}

inline VaeNodes vae_forward_nodes(Graph& g, DancerVae& v, const ModelConfig& cfg, Node* x,
                                  const Tensor& eps) {
    std::size_t t_len = x->value.dim(0);
    Node* h = nn::linear(g, x, v.embed);
    h = g.add(h, g.constant(nn::positional_encoding(t_len, cfg.d_model)));
    h = nn::multi_head_attention(g, h, h, v.enc_attn, false);
    auto enc = nn::lstm_forward(g, h, v.enc_lstm);
    VaeNodes out;
    out.mu = nn::linear(g, enc.last_hidden, v.mu_head);
    out.log_var = nn::linear(g, enc.last_hidden, v.logvar_head);
    out.z = nn::reparameterize(g, out.mu, out.log_var, eps);
    out.recon = vae_decode_nodes(g, v, out.z, t_len);
    return out;
}

inline Node* decoder_forward_nodes(Graph& g, DecoderStack& dec, const ModelConfig& cfg,
                                   Node* target, Node* memory) {
    std::size_t t_len = target->value.dim(0);
    Node* h = nn::linear(g, target, dec.embed_target);
    h = g.add(h, g.constant(nn::positional_encoding(t_len, cfg.d_model)));
    Node* mem = nn::linear(g, memory, dec.embed_memory);
    for (auto& layer : dec.layers) {
        Node* sa = nn::multi_head_attention(g, h, h, layer.self_attn, true);
        h = nn::layer_norm(g, g.add(h, sa), layer.ln_self);
        Node* ca = nn::multi_head_attention(g, h, mem, layer.cross_attn, false);
        h = nn::layer_norm(g, g.add(h, ca), layer.ln_cross);
        Node* ff = nn::linear(g, g.relu(nn::linear(g, h, layer.ff_in)), layer.ff_out);
        h = nn::layer_norm(g, g.add(h, ff), layer.ln_ff);
    }
    return nn::linear(g, h, dec.out_proj);
}

struct DuetNodes {
    VaeNodes v1, v2, v3;
    Node* o1 = nullptr;
    Node* o2 = nullptr;
    Node* o3 = nullptr;
    Node* d1 = nullptr;  // o1 + o3, memory for predicting dancer 2
    Node* d2 = nullptr;  // o2 + o3, memory for predicting dancer 1
    Node* prediction = nullptr;
};

// Teacher-forced full forward pass: three VAE reconstructions, the summed
// memories, and the decoder prediction for the requested dancer.
inline DuetNodes duet_forward_nodes(Graph& g, DuetModel& m, Node* x1, Node* x2,
                                    int target_dancer, const Tensor& eps1,
                                    const Tensor& eps2, const Tensor& eps3) {
    if (target_dancer != 1 && target_dancer != 2) {
        throw ArgumentError("target_dancer must be 1 or 2");
    }
    nn::require_same_shape(x1->value, x2->value, "duet_forward");
    Node* prox = g.constant([&] {
        Tensor p(x1->value.shape());
        for (std::size_t i = 0; i < p.numel(); ++i) {
            p[i] = std::fabs(x1->value[i] - x2->value[i]);
        }
        return p;
    }());

    DuetNodes out;
    out.v1 = vae_forward_nodes(g, m.vae1, m.config, x1, eps1);
    out.v2 = vae_forward_nodes(g, m.vae2, m.config, x2, eps2);
    out.v3 = vae_forward_nodes(g, m.vae3, m.config, prox, eps3);
    out.o1 = out.v1.recon;
    out.o2 = out.v2.recon;
    out.o3 = out.v3.recon;
    out.d1 = g.add(out.o1, out.o3);
    out.d2 = g.add(out.o2, out.o3);
    if (target_dancer == 2) {
        out.prediction = decoder_forward_nodes(g, m.decoder2, m.config, x2, out.d1);
    } else {
        out.prediction = decoder_forward_nodes(g, m.decoder1, m.config, x1, out.d2);
    }
    return out;
}

// Value-level wrappers for callers that only need numbers.

struct VaeForwardResult {
    Tensor recon;
    Tensor mu, log_var, z;
};

inline VaeForwardResult vae_forward(DancerVae& v, const ModelConfig& cfg, const Tensor& x,
                                    nn::RandomSource& rng) {
    Graph g(true);
    Tensor eps = rng.normal_tensor({1, cfg.latent_dim}, 1.0);
    VaeNodes n = vae_forward_nodes(g, v, cfg, detail::as_frames(g, x, cfg, "vae_forward"), eps);
    return {n.recon->value, n.mu->value, n.log_var->value, n.z->value};
}

inline Tensor decoder_forward(DecoderStack& dec, const ModelConfig& cfg, const Tensor& target,
                              const Tensor& memory) {
    Graph g(true);
    Node* t = detail::as_frames(g, target, cfg, "decoder_forward target");
    Node* mem = detail::as_frames(g, memory, cfg, "decoder_forward memory");
    return decoder_forward_nodes(g, dec, cfg, t, mem)->value;
}

struct DuetForwardOutput {
    Tensor o1, o2, o3;
    Tensor d1, d2;
    Tensor prediction;
    VaeForwardResult l1, l2, l3;
};

inline DuetForwardOutput duet_forward_with_eps(DuetModel& m, const Tensor& x1,
                                               const Tensor& x2, int target_dancer,
                                               const Tensor& eps1, const Tensor& eps2,
                                               const Tensor& eps3) {
    Graph g(true);
    Node* n1 = detail::as_frames(g, x1, m.config, "duet_forward x1");
    Node* n2 = detail::as_frames(g, x2, m.config, "duet_forward x2");
    DuetNodes n = duet_forward_nodes(g, m, n1, n2, target_dancer, eps1, eps2, eps3);
    DuetForwardOutput out;
    out.o1 = n.o1->value;
    out.o2 = n.o2->value;
    out.o3 = n.o3->value;
    out.d1 = n.d1->value;
    out.d2 = n.d2->value;
    out.prediction = n.prediction->value;
    out.l1 = {n.v1.recon->value, n.v1.mu->value, n.v1.log_var->value, n.v1.z->value};
    out.l2 = {n.v2.recon->value, n.v2.mu->value, n.v2.log_var->value, n.v2.z->value};
    out.l3 = {n.v3.recon->value, n.v3.mu->value, n.v3.log_var->value, n.v3.z->value};
    return out;
}

inline DuetForwardOutput duet_forward(DuetModel& m, const Tensor& x1, const Tensor& x2,
                                      int target_dancer, nn::RandomSource& rng) {
    Tensor eps1 = rng.normal_tensor({1, m.config.latent_dim}, 1.0);
    Tensor eps2 = rng.normal_tensor({1, m.config.latent_dim}, 1.0);
    Tensor eps3 = rng.normal_tensor({1, m.config.latent_dim}, 1.0);
    return duet_forward_with_eps(m, x1, x2, target_dancer, eps1, eps2, eps3);
}

}  // namespace duet::model
