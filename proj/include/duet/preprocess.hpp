#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

#include "duet/common.hpp"
#include "duet/pose_ingest.hpp"
#include "duet/random.hpp"
#include "duet/tensor.hpp"

namespace duet::pose {

struct JointSequence {
    nn::Tensor data;  // (T x M x D)
    double fps = kDefaultFps;

    std::size_t frames() const { return data.dim(0); }
    std::size_t joints() const { return data.dim(1); }
    std::size_t dims() const { return data.dim(2); }
    std::size_t channels() const { return data.dim(1) * data.dim(2); }
};

struct NormStats {
    nn::Tensor mean;  // (M x D)
    nn::Tensor std;   // (M x D), strictly positive
};

inline std::pair<JointSequence, JointSequence> split_sequence(const RawDuetSequence& raw) {
    if (raw.frames.empty()) throw NoDataError("empty duet sequence");
    std::size_t t_len = raw.frames.size();
    std::size_t m = raw.frames[0].a.dim(0), d = raw.frames[0].a.dim(1);
    JointSequence a{nn::Tensor({t_len, m, d}), raw.fps};
    JointSequence b{nn::Tensor({t_len, m, d}), raw.fps};
    std::size_t stride = m * d;
    for (std::size_t t = 0; t < t_len; ++t) {
        for (std::size_t i = 0; i < stride; ++i) {
            a.data[t * stride + i] = raw.frames[t].a[i];
            b.data[t * stride + i] = raw.frames[t].b[i];
        }
    }
    return {std::move(a), std::move(b)};
}

namespace detail {

// Orthonormal DCT-II basis: row k, column t = s_k cos(pi (2t+1) k / 2T).
inline std::vector<double> dct_basis(std::size_t t_len) {
    std::vector<double> basis(t_len * t_len);
    double s0 = std::sqrt(1.0 / static_cast<double>(t_len));
    double sk = std::sqrt(2.0 / static_cast<double>(t_len));
    for (std::size_t k = 0; k < t_len; ++k) {
        double scale = (k == 0) ? s0 : sk;
        for (std::size_t t = 0; t < t_len; ++t) {
            basis[k * t_len + t] =
                scale * std::cos(std::numbers::pi * (2.0 * t + 1.0) * k /
                                 (2.0 * static_cast<double>(t_len)));
        }
    }
    return basis;
}

}  // namespace detail

// Low-pass along time, per scalar channel: orthonormal DCT-II, zero every
// coefficient with index >= ceil(keep_fraction * T), inverse transform back.
inline JointSequence dct_lowpass(const JointSequence& seq, double keep_fraction) {
    if (!(keep_fraction > 0.0) || keep_fraction > 1.0) {
        throw ArgumentError("keep_fraction must be in (0, 1]");
    }
    std::size_t t_len = seq.frames();
    if (t_len < 2) throw ArgumentError("dct_lowpass needs at least two frames");
    auto cutoff = static_cast<std::size_t>(
        std::ceil(keep_fraction * static_cast<double>(t_len)));
    if (cutoff > t_len) cutoff = t_len;

    std::vector<double> basis = detail::dct_basis(t_len);
    std::size_t stride = seq.channels();
    JointSequence out{nn::Tensor(seq.data.shape()), seq.fps};
    std::vector<double> coeffs(cutoff);
    for (std::size_t c = 0; c < stride; ++c) {
        for (std::size_t k = 0; k < cutoff; ++k) {
            double acc = 0.0;
            for (std::size_t t = 0; t < t_len; ++t) {
                acc += basis[k * t_len + t] * seq.data[t * stride + c];
            }
            coeffs[k] = acc;
        }
        for (std::size_t t = 0; t < t_len; ++t) {
            double acc = 0.0;
            for (std::size_t k = 0; k < cutoff; ++k) {
                acc += basis[k * t_len + t] * coeffs[k];
            }
            out.data[t * stride + c] = acc;
        }
    }
    return out;
}

// Pooled per-channel statistics over all frames of all sequences. Population
// std; channels flatter than 1e-6 get std 1 so they pass through unscaled.
inline NormStats compute_norm_stats(const std::vector<JointSequence>& seqs) {
    if (seqs.empty()) throw NoDataError("no sequences to compute statistics from");
    std::size_t m = seqs[0].joints(), d = seqs[0].dims();
    std::size_t stride = m * d;
    NormStats stats{nn::Tensor({m, d}), nn::Tensor({m, d})};
    std::vector<double> sum(stride, 0.0), sumsq(stride, 0.0);
    std::size_t n = 0;
    for (const auto& s : seqs) {
        if (s.joints() != m || s.dims() != d) {
            throw DimensionError("sequences disagree on joint layout");
        }
        for (std::size_t t = 0; t < s.frames(); ++t) {
            for (std::size_t c = 0; c < stride; ++c) {
                double v = s.data[t * stride + c];
                sum[c] += v;
                sumsq[c] += v * v;
            }
        }
        n += s.frames();
    }
    for (std::size_t c = 0; c < stride; ++c) {
        double mean = sum[c] / static_cast<double>(n);
        double var = sumsq[c] / static_cast<double>(n) - mean * mean;
        double sd = std::sqrt(std::max(var, 0.0));
        stats.mean[c] = mean;
        stats.std[c] = (sd < 1e-6) ? 1.0 : sd;
    }
    return stats;
}

inline JointSequence normalize(const JointSequence& seq, const NormStats& stats,
                               bool inverse = false) {
    std::size_t stride = seq.channels();
    if (stats.mean.numel() != stride || stats.std.numel() != stride) {
        throw DimensionError("normalization stats do not match sequence layout");
    }
    JointSequence out{nn::Tensor(seq.data.shape()), seq.fps};
    for (std::size_t t = 0; t < seq.frames(); ++t) {
        for (std::size_t c = 0; c < stride; ++c) {
            double v = seq.data[t * stride + c];
            out.data[t * stride + c] = inverse ? v * stats.std[c] + stats.mean[c]
                                               : (v - stats.mean[c]) / stats.std[c];
        }
    }
    return out;
}

// Elementwise |a - b|; the closeness signal fed to the third encoder.
inline JointSequence proximity_signal(const JointSequence& a, const JointSequence& b) {
    nn::require_same_shape(a.data, b.data, "proximity_signal");
    JointSequence out{nn::Tensor(a.data.shape()), a.fps};
    for (std::size_t i = 0; i < a.data.numel(); ++i) {
        out.data[i] = std::fabs(a.data[i] - b.data[i]);
    }
    return out;
}

inline JointSequence gaussian_augment(const JointSequence& seq, double sigma,
                                      nn::RandomSource& rng) {
    if (sigma < 0.0) throw ArgumentError("noise sigma must be non-negative");
    JointSequence out{seq.data, seq.fps};
    if (sigma == 0.0) return out;
    for (std::size_t i = 0; i < out.data.numel(); ++i) {
        out.data[i] += sigma * rng.normal();
    }
    return out;
}

}  // namespace duet::pose
