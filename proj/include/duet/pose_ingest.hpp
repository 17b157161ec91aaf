#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "duet/common.hpp"
#include "duet/tensor.hpp"

namespace duet::pose {

inline constexpr std::size_t kJoints = 29;
inline constexpr std::size_t kDims = 3;
inline constexpr double kDefaultFps = 30.0;

struct DetectionRecord {
    int person_id = 0;
    double score = 0.0;
    nn::Tensor joints;  // (29 x 3)
};

struct FrameDetections {
    std::size_t frame_index = 0;
    std::vector<DetectionRecord> detections;  // sorted by descending score
};

struct DuetFrame {
    nn::Tensor a;  // (29 x 3)
    nn::Tensor b;
};

struct RawDuetSequence {
    std::vector<DuetFrame> frames;
    double fps = kDefaultFps;
};

// Root-joint (row 0) Euclidean distance between two poses.
inline double root_distance(const nn::Tensor& p, const nn::Tensor& q) {
    double s = 0.0;
    for (std::size_t d = 0; d < kDims; ++d) {
        double diff = p.at2(0, d) - q.at2(0, d);
        s += diff * diff;
    }
    return std::sqrt(s);
}

// Line-delimited records: {"frame": int, "people": [{"score": s, "joints": [87 numbers]}]}.
// People are re-sorted by descending score; ids tag the incoming order.
inline std::vector<FrameDetections> parse_detections(std::istream& in) {
    std::vector<FrameDetections> out;
    std::string line;
    std::size_t line_no = 0;
    long long prev_frame = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw ParseError("detections line " + std::to_string(line_no) +
                             ": not a valid record");
        }
        if (!j.contains("frame") || !j["frame"].is_number_integer()) {
            throw ParseError("detections line " + std::to_string(line_no) +
                             ": missing integer field 'frame'");
        }
        long long frame = j["frame"].get<long long>();
        if (frame < 0 || frame <= prev_frame) {
            throw ParseError("frame " + std::to_string(frame) +
                             ": frame indices must be non-negative and strictly increasing");
        }
        prev_frame = frame;
        if (!j.contains("people") || !j["people"].is_array()) {
            throw ParseError("frame " + std::to_string(frame) +
                             ": missing array field 'people'");
        }
        FrameDetections fd;
        fd.frame_index = static_cast<std::size_t>(frame);
        int id = 0;
        for (const auto& person : j["people"]) {
            if (!person.is_object() || !person.contains("score") ||
                !person["score"].is_number() || !person.contains("joints") ||
                !person["joints"].is_array()) {
                throw ParseError("frame " + std::to_string(frame) +
                                 ": person entry needs numeric 'score' and array 'joints'");
            }
            double score = person["score"].get<double>();
            if (!std::isfinite(score)) {
                throw ParseError("frame " + std::to_string(frame) +
                                 ": field 'score' is not finite");
            }
            const auto& joints = person["joints"];
            if (joints.size() != kJoints * kDims) {
                throw DimensionError("frame " + std::to_string(frame) + ": 'joints' has " +
                                     std::to_string(joints.size()) + " values, expected " +
                                     std::to_string(kJoints * kDims) + " (M=29 joints x 3)");
            }
            DetectionRecord rec;
            rec.person_id = id++;
            rec.score = score;
            std::vector<double> coords;
            coords.reserve(kJoints * kDims);
            for (const auto& v : joints) {
                if (!v.is_number()) {
                    throw ParseError("frame " + std::to_string(frame) +
                                     ": field 'joints' holds a non-numeric value");
                }
                double c = v.get<double>();
                if (!std::isfinite(c)) {
                    throw ParseError("frame " + std::to_string(frame) +
                                     ": field 'joints' holds a non-finite value");
                }
                coords.push_back(c);
            }
            rec.joints = nn::Tensor({kJoints, kDims}, std::move(coords));
            fd.detections.push_back(std::move(rec));
        }
        std::stable_sort(fd.detections.begin(), fd.detections.end(),
                         [](const DetectionRecord& x, const DetectionRecord& y) {
                             return x.score > y.score;
                         });
        out.push_back(std::move(fd));
    }
    return out;
}

// Reduce a frame to exactly two poses. With one detection, the missing slot is
// filled by whichever previous person is farther from the detection; with
// none, the previous pair is copied verbatim.
inline DuetFrame select_top_two(const FrameDetections& frame,
                                const std::optional<DuetFrame>& previous) {
    const auto& dets = frame.detections;
    if (dets.size() >= 2) {
        return {dets[0].joints, dets[1].joints};
    }
    if (!previous.has_value()) {
        throw UnrecoverableStartError("frame " + std::to_string(frame.frame_index) +
                                      ": fewer than two detections and no previous frame");
    }
    if (dets.size() == 1) {
        double da = root_distance(dets[0].joints, previous->a);
        double db = root_distance(dets[0].joints, previous->b);
        const nn::Tensor& farther = (da >= db) ? previous->a : previous->b;
        return {dets[0].joints, farther};
    }
    return *previous;
}

// Forward-fill empty frames; leading empties borrow the first non-empty frame.
inline std::vector<FrameDetections> impute_missing(std::vector<FrameDetections> frames) {
    std::size_t first_filled = frames.size();
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (!frames[i].detections.empty()) {
            first_filled = i;
            break;
        }
    }
    if (first_filled == frames.size()) {
        throw NoDataError("every frame is empty; nothing to impute from");
    }
    for (std::size_t i = 0; i < first_filled; ++i) {
        frames[i].detections = frames[first_filled].detections;
    }
    for (std::size_t i = first_filled + 1; i < frames.size(); ++i) {
        if (frames[i].detections.empty()) {
            frames[i].detections = frames[i - 1].detections;
        }
    }
    return frames;
}

// Keep each dancer on a consistent side by matching every frame against the
// already-resolved previous frame; a swap happens only when it strictly
// shortens the total root-joint travel.
inline RawDuetSequence resolve_identities(RawDuetSequence seq, std::size_t* swap_count = nullptr) {
    if (swap_count) *swap_count = 0;
    for (std::size_t t = 1; t < seq.frames.size(); ++t) {
        const DuetFrame& prev = seq.frames[t - 1];
        DuetFrame& cur = seq.frames[t];
        double straight = root_distance(cur.a, prev.a) + root_distance(cur.b, prev.b);
        double crossed = root_distance(cur.a, prev.b) + root_distance(cur.b, prev.a);
        if (crossed < straight) {
            std::swap(cur.a, cur.b);
            if (swap_count) ++(*swap_count);
        }
    }
    return seq;
}

struct RepairStats {
    std::size_t frames_imputed = 0;
    std::size_t swaps_fixed = 0;
    std::size_t ghosts_culled = 0;
};

// Full repair pipeline: impute gaps, cull to two detections per frame, then
// fix identity swaps.
inline RawDuetSequence repair(const std::vector<FrameDetections>& frames, double fps,
                              RepairStats* stats = nullptr) {
    if (frames.empty()) throw NoDataError("no frames to repair");
    RepairStats local;
    for (const auto& f : frames) {
        if (f.detections.empty()) ++local.frames_imputed;
        if (f.detections.size() > 2) local.ghosts_culled += f.detections.size() - 2;
    }
    std::vector<FrameDetections> filled = impute_missing(frames);
    RawDuetSequence seq;
    seq.fps = fps;
    seq.frames.reserve(filled.size());
    std::optional<DuetFrame> prev;
    for (const auto& f : filled) {
        DuetFrame pair = select_top_two(f, prev);
        prev = pair;
        seq.frames.push_back(std::move(pair));
    }
    seq = resolve_identities(std::move(seq), &local.swaps_fixed);
    if (stats) *stats = local;
    return seq;
}

}  // namespace duet::pose
