#pragma once

#include <cmath>
#include <cstddef>
#include <utility>

#include "duet/common.hpp"
#include "duet/model.hpp"

namespace duet::infer {

using model::DuetModel;
using nn::Graph;
using nn::Node;
using nn::Tensor;

namespace detail {

// (T x F) or (T x M x D) -> (T x F), validated against the model config.
inline Tensor flat_frames(const Tensor& x, const model::ModelConfig& cfg, const char* what) {
    if (x.ndim() == 0 || x.numel() == 0) {
        throw DimensionError(std::string(what) + ": empty input");
    }
    std::size_t t_len = x.dim(0);
    std::size_t per_frame = x.numel() / t_len;
    if (per_frame != cfg.features() || t_len * per_frame != x.numel()) {
        throw DimensionError(std::string(what) + ": expected " +
                             std::to_string(cfg.features()) +
                             " values per frame, got " + nn::shape_string(x));
    }
    return x.reshaped({t_len, per_frame});
}

inline Tensor normalize_rows(const Tensor& x, const pose::NormStats& stats) {
    std::size_t f = stats.mean.numel();
    Tensor out(x.shape());
    for (std::size_t t = 0; t < x.dim(0); ++t) {
        for (std::size_t i = 0; i < f; ++i) {
            out[t * f + i] = (x[t * f + i] - stats.mean[i]) / stats.std[i];
        }
    }
    return out;
}

inline Tensor denormalize_rows(const Tensor& x, const pose::NormStats& stats) {
    std::size_t f = stats.mean.numel();
    Tensor out(x.shape());
    for (std::size_t t = 0; t < x.dim(0); ++t) {
        for (std::size_t i = 0; i < f; ++i) {
            out[t * f + i] = x[t * f + i] * stats.std[i] + stats.mean[i];
        }
    }
    return out;
}

inline void require_ready(const DuetModel& m, const char* what) {
    if (!m.has_norm_stats) {
        throw StateError(std::string(what) +
                         ": model carries no normalization stats; train it or load a "
                         "trained checkpoint first");
    }
}

// Conditioning memory for a rollout: leader reconstruction plus the
// interaction reconstruction, computed once over the full T frames. The
// partner is unknown past the context, so the proximity input extends the
// context by holding its last frame.
inline Tensor rollout_memory(DuetModel& m, const Tensor& leader_n, const Tensor& context_n,
                             int target_dancer, nn::RandomSource& rng) {
    std::size_t t_len = leader_n.dim(0);
    std::size_t f = leader_n.dim(1);
    std::size_t t0 = context_n.dim(0);

    Tensor proxy({t_len, f});
    for (std::size_t t = 0; t < t_len; ++t) {
        std::size_t src = t < t0 ? t : t0 - 1;
        for (std::size_t i = 0; i < f; ++i) proxy.at2(t, i) = context_n.at2(src, i);
    }
    Tensor prox({t_len, f});
    for (std::size_t i = 0; i < prox.numel(); ++i) {
        prox[i] = std::fabs(leader_n[i] - proxy[i]);
    }

    Tensor eps_leader = rng.normal_tensor({1, m.config.latent_dim}, 1.0);
    Tensor eps_prox = rng.normal_tensor({1, m.config.latent_dim}, 1.0);

    Graph g(true);
    model::DancerVae& leader_vae = target_dancer == 2 ? m.vae1 : m.vae2;
    model::VaeNodes lead =
        model::vae_forward_nodes(g, leader_vae, m.config, g.constant(leader_n), eps_leader);
    model::VaeNodes inter =
        model::vae_forward_nodes(g, m.vae3, m.config, g.constant(prox), eps_prox);
    return g.add(lead.recon, inter.recon)->value;
}

inline Tensor predict_next_row(DuetModel& m, const Tensor& prefix_n, const Tensor& memory_n,
                               int target_dancer) {
    Graph g(true);
    model::DecoderStack& dec = target_dancer == 2 ? m.decoder2 : m.decoder1;
    Node* out = model::decoder_forward_nodes(g, dec, m.config, g.constant(prefix_n),
                                             g.constant(memory_n));
    std::size_t last = prefix_n.dim(0) - 1;
    std::size_t f = prefix_n.dim(1);
    Tensor row({1, f});
    for (std::size_t i = 0; i < f; ++i) row[i] = out->value.at2(last, i);
    return row;
}

inline Tensor append_row(const Tensor& x, const Tensor& row) {
    std::size_t t_len = x.dim(0), f = x.dim(1);
    Tensor out({t_len + 1, f});
    for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i];
    for (std::size_t i = 0; i < f; ++i) out[t_len * f + i] = row[i];
    return out;
}

}  // namespace detail

struct GenerateResult {
    Tensor sequence;  // (T x M x D), original coordinate space
    std::size_t decoder_calls = 0;
};

// Roll the partner forward one frame at a time: frames [0, t0) are the given
// context verbatim, every later frame is the decoder's next-step prediction
// appended to the growing prefix. target_dancer names the dancer being
// generated; the leader is the other one.
inline GenerateResult generate_partner(DuetModel& m, const Tensor& leader,
                                       const Tensor& context, int target_dancer,
                                       nn::RandomSource& rng) {
    if (target_dancer != 1 && target_dancer != 2) {
        throw ArgumentError("target_dancer must be 1 or 2");
    }
    detail::require_ready(m, "generate_partner");
    Tensor leader_f = detail::flat_frames(leader, m.config, "generate_partner leader");
    Tensor context_f = detail::flat_frames(context, m.config, "generate_partner context");
    std::size_t t_len = leader_f.dim(0);
    std::size_t t0 = context_f.dim(0);
    if (t0 >= t_len) {
        throw ArgumentError("context length " + std::to_string(t0) +
                            " must be shorter than the sequence length " +
                            std::to_string(t_len));
    }

    Tensor leader_n = detail::normalize_rows(leader_f, m.norm_stats);
    Tensor prefix = detail::normalize_rows(context_f, m.norm_stats);
    Tensor memory = detail::rollout_memory(m, leader_n, prefix, target_dancer, rng);

    GenerateResult result;
    while (prefix.dim(0) < t_len) {
        Tensor next = detail::predict_next_row(m, prefix, memory, target_dancer);
        ++result.decoder_calls;
        prefix = detail::append_row(prefix, next);
    }

    Tensor denorm = detail::denormalize_rows(prefix, m.norm_stats);
    std::size_t f = m.config.features();
    result.sequence = Tensor({t_len, m.config.joints, m.config.dims});
    for (std::size_t i = 0; i < t0 * f; ++i) result.sequence[i] = context_f[i];
    for (std::size_t i = t0 * f; i < t_len * f; ++i) result.sequence[i] = denorm[i];
    return result;
}

struct DuetGenerateResult {
    Tensor dancer1;  // (T x M x D)
    Tensor dancer2;
};

// Unconditional duet: sample the interaction latent, decode it into a shared
// memory, and roll both dancers out from a one-frame mean-pose context.
inline DuetGenerateResult generate_duet(DuetModel& m, std::size_t length,
                                        nn::RandomSource& rng) {
    if (length < 2) throw ArgumentError("duet length must be at least 2 frames");
    detail::require_ready(m, "generate_duet");
    std::size_t f = m.config.features();

    Tensor z = rng.normal_tensor({1, m.config.latent_dim}, 1.0);
    Graph g(true);
    Tensor memory = model::vae_decode_nodes(g, m.vae3, g.constant(z), length)->value;

    Tensor bootstrap({1, f});  // the mean pose in normalized space
    DuetGenerateResult out;
    for (int dancer : {1, 2}) {
        Tensor prefix = bootstrap;
        while (prefix.dim(0) < length) {
            prefix = detail::append_row(
                prefix, detail::predict_next_row(m, prefix, memory, dancer));
        }
        Tensor raw = detail::denormalize_rows(prefix, m.norm_stats);
        Tensor shaped = raw.reshaped({length, m.config.joints, m.config.dims});
        (dancer == 1 ? out.dancer1 : out.dancer2) = shaped;
    }
    return out;
}

}  // namespace duet::infer
