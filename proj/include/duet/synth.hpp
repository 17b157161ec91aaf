#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "duet/common.hpp"
#include "duet/pose_ingest.hpp"
#include "duet/preprocess.hpp"
#include "duet/random.hpp"

namespace duet::synth {

enum class Style { mirror, orbit, lead_follow };

inline Style style_from_string(const std::string& s) {
    if (s == "mirror") return Style::mirror;
    if (s == "orbit") return Style::orbit;
    if (s == "lead_follow" || s == "lead-follow") return Style::lead_follow;
    throw ArgumentError("unknown duet style '" + s + "'");
}

namespace detail {

// A per-channel bank of slow sinusoids. Frequencies are capped at 10% of
// Nyquist so a 25% DCT low-pass barely touches the signal.
struct Channel {
    double offset = 0.0;
    double amp[2] = {0.0, 0.0};
    double freq[2] = {0.0, 0.0};
    double phase[2] = {0.0, 0.0};

    double eval(double t) const {
        double v = offset;
        for (int h = 0; h < 2; ++h) {
            v += amp[h] * std::sin(2.0 * std::numbers::pi * freq[h] * t + phase[h]);
        }
        return v;
    }
};

inline std::vector<Channel> sample_channels(nn::RandomSource& rng, std::size_t m,
                                            std::size_t d) {
    std::vector<Channel> chans(m * d);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t k = 0; k < d; ++k) {
            Channel& c = chans[j * d + k];
            // A body-sized static skeleton plus gentle motion on top.
            if (k == 0) c.offset = 0.2 + 0.08 * static_cast<double>(j);
            if (k == 1) c.offset = 0.9 + 0.15 * static_cast<double>(j % 5);
            if (k == 2) c.offset = 0.1 + 0.05 * static_cast<double>(j % 3);
            for (int h = 0; h < 2; ++h) {
                c.amp[h] = 0.05 + 0.15 * rng.uniform();
                c.freq[h] = 0.002 + 0.018 * rng.uniform();  // cycles/frame, <= 0.02
                c.phase[h] = 2.0 * std::numbers::pi * rng.uniform();
            }
        }
    }
    return chans;
}

}  // namespace detail

inline constexpr double kMirrorPlaneX = 1.0;
inline constexpr std::size_t kLeadFollowDelay = 4;
inline constexpr double kLeadFollowNoise = 0.002;
inline constexpr std::size_t kMirrorLag = 2;

// Procedural two-dancer sequences: smooth, coupled, deterministic per seed.
inline std::pair<pose::JointSequence, pose::JointSequence> synth_duet(
    std::size_t t_len, std::size_t m, unsigned long long seed, Style style,
    double fps = pose::kDefaultFps) {
    if (t_len < 2 || m < 1) throw ArgumentError("need T >= 2 and M >= 1");
    const std::size_t d = pose::kDims;
    nn::RandomSource rng(seed);
    auto chans = detail::sample_channels(rng, m, d);

    pose::JointSequence a{nn::Tensor({t_len, m, d}), fps};
    pose::JointSequence b{nn::Tensor({t_len, m, d}), fps};
    std::size_t stride = m * d;

    auto eval_pose = [&](double t, double* out) {
        for (std::size_t c = 0; c < stride; ++c) out[c] = chans[c].eval(t);
    };

    switch (style) {
        case Style::mirror: {
            for (std::size_t t = 0; t < t_len; ++t) {
                eval_pose(static_cast<double>(t), a.data.data() + t * stride);
                double* brow = b.data.data() + t * stride;
                eval_pose(static_cast<double>(t) - static_cast<double>(kMirrorLag), brow);
                for (std::size_t j = 0; j < m; ++j) {
                    brow[j * d] = 2.0 * kMirrorPlaneX - brow[j * d];
                }
            }
            break;
        }
        case Style::orbit: {
            double orbit_freq = 0.0025 + 0.01 * rng.uniform();
            double radius = 0.8 + 0.4 * rng.uniform();
            for (std::size_t t = 0; t < t_len; ++t) {
                double theta = 2.0 * std::numbers::pi * orbit_freq * static_cast<double>(t);
                double ax = radius * std::cos(theta), az = radius * std::sin(theta);
                double bx = radius * std::cos(theta + std::numbers::pi);
                double bz = radius * std::sin(theta + std::numbers::pi);
                double* arow = a.data.data() + t * stride;
                double* brow = b.data.data() + t * stride;
                eval_pose(static_cast<double>(t), arow);
                eval_pose(static_cast<double>(t) + 0.5, brow);
                for (std::size_t j = 0; j < m; ++j) {
                    arow[j * d] += ax;
                    arow[j * d + 2] += az;
                    brow[j * d] += bx;
                    brow[j * d + 2] += bz;
                }
            }
            break;
        }
        case Style::lead_follow: {
            for (std::size_t t = 0; t < t_len; ++t) {
                eval_pose(static_cast<double>(t), a.data.data() + t * stride);
                double* brow = b.data.data() + t * stride;
                eval_pose(static_cast<double>(t) - static_cast<double>(kLeadFollowDelay),
                          brow);
                for (std::size_t c = 0; c < stride; ++c) {
                    brow[c] += kLeadFollowNoise * rng.normal();
                }
            }
            break;
        }
    }
    return {std::move(a), std::move(b)};
}

struct CorruptionSpec {
    std::vector<std::size_t> swap_frames;
    std::vector<std::size_t> drop_frames;
    std::vector<std::size_t> ghost_frames;
    double jitter_sigma = 0.0;
};

struct CorruptResult {
    std::vector<pose::FrameDetections> frames;
    // What a correct repair must reproduce: the clean pair with dropped frames
    // forward-filled (leading drops borrow the first surviving frame).
    pose::JointSequence expected_a;
    pose::JointSequence expected_b;
};

// Render a clean pair into detection records and damage them on request:
// swapped confidence scores flip dancer order, dropped frames lose all
// detections, ghost frames gain a low-confidence third person.
inline CorruptResult corrupt(const pose::JointSequence& a, const pose::JointSequence& b,
                             const CorruptionSpec& spec, unsigned long long seed) {
    nn::require_same_shape(a.data, b.data, "corrupt");
    std::size_t t_len = a.frames(), m = a.joints(), d = a.dims();
    std::size_t stride = m * d;
    auto in_range = [&](const std::vector<std::size_t>& v) {
        return std::all_of(v.begin(), v.end(), [&](std::size_t f) { return f < t_len; });
    };
    if (!in_range(spec.swap_frames) || !in_range(spec.drop_frames) ||
        !in_range(spec.ghost_frames)) {
        throw ArgumentError("corruption frame index out of range");
    }
    auto contains = [](const std::vector<std::size_t>& v, std::size_t f) {
        return std::find(v.begin(), v.end(), f) != v.end();
    };

    // Jitter is baked into working copies first so the expected output is
    // exactly what a perfect repair can recover from the damaged detections.
    nn::RandomSource rng(seed);
    nn::Tensor ja = a.data, jb = b.data;
    if (spec.jitter_sigma > 0.0) {
        for (std::size_t t = 0; t < t_len; ++t) {
            if (contains(spec.drop_frames, t)) continue;
            for (std::size_t c = 0; c < stride; ++c) {
                ja[t * stride + c] += spec.jitter_sigma * rng.normal();
                jb[t * stride + c] += spec.jitter_sigma * rng.normal();
            }
        }
    }

    CorruptResult out;
    out.frames.reserve(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
        pose::FrameDetections fd;
        fd.frame_index = t;
        if (!contains(spec.drop_frames, t)) {
            bool swapped = contains(spec.swap_frames, t);
            pose::DetectionRecord ra{0, swapped ? 0.8 : 0.9, nn::Tensor({m, d})};
            pose::DetectionRecord rb{1, swapped ? 0.9 : 0.8, nn::Tensor({m, d})};
            for (std::size_t c = 0; c < stride; ++c) {
                ra.joints[c] = ja[t * stride + c];
                rb.joints[c] = jb[t * stride + c];
            }
            if (swapped) {
                fd.detections.push_back(std::move(rb));
                fd.detections.push_back(std::move(ra));
            } else {
                fd.detections.push_back(std::move(ra));
                fd.detections.push_back(std::move(rb));
            }
            if (contains(spec.ghost_frames, t)) {
                pose::DetectionRecord ghost{2, 0.05, nn::Tensor({m, d})};
                for (std::size_t c = 0; c < stride; ++c) {
                    ghost.joints[c] = 0.5 * (ja[t * stride + c] + jb[t * stride + c]) + 0.7;
                }
                fd.detections.push_back(std::move(ghost));
            }
        }
        out.frames.push_back(std::move(fd));
    }

    out.expected_a = pose::JointSequence{nn::Tensor({t_len, m, d}), a.fps};
    out.expected_b = pose::JointSequence{nn::Tensor({t_len, m, d}), b.fps};
    std::size_t first_kept = t_len;
    for (std::size_t t = 0; t < t_len; ++t) {
        if (!contains(spec.drop_frames, t)) {
            first_kept = t;
            break;
        }
    }
    if (first_kept == t_len) throw ArgumentError("cannot drop every frame");
    std::size_t src = first_kept;
    for (std::size_t t = 0; t < t_len; ++t) {
        if (t >= first_kept && !contains(spec.drop_frames, t)) src = t;
        for (std::size_t c = 0; c < stride; ++c) {
            out.expected_a.data[t * stride + c] = ja[src * stride + c];
            out.expected_b.data[t * stride + c] = jb[src * stride + c];
        }
    }
    return out;
}

}  // namespace duet::synth
