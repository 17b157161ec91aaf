#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "duet/common.hpp"
#include "duet/pose_ingest.hpp"
#include "duet/preprocess.hpp"
#include "duet/training.hpp"

namespace duet::io {

using nn::Tensor;

// Cleaned Sequence Format: {"fps": f, "shape": [T, M, D],
//  "dancer1": [T*M*D numbers], "dancer2": [...]}, row-major.

inline void write_cleaned(const pose::JointSequence& d1, const pose::JointSequence& d2,
                          const std::string& path) {
    nn::require_same_shape(d1.data, d2.data, "write_cleaned");
    if (d1.data.ndim() != 3) throw DimensionError("write_cleaned: expected (T x M x D) data");
    nlohmann::json j;
    j["fps"] = d1.fps;
    j["shape"] = {d1.frames(), d1.joints(), d1.dims()};
    j["dancer1"] = d1.data.values();
    j["dancer2"] = d2.data.values();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump();
    out.flush();
    if (!out) throw IoError("failed writing '" + path + "'");
}

inline std::pair<pose::JointSequence, pose::JointSequence> read_cleaned(
    const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ParseError("'" + path + "' is not a cleaned sequence file");
    }
    for (const char* field : {"fps", "shape", "dancer1", "dancer2"}) {
        if (!j.contains(field)) {
            throw ParseError("'" + path + "' lacks field '" + std::string(field) + "'");
        }
    }
    std::vector<std::size_t> shape = j["shape"].get<std::vector<std::size_t>>();
    if (shape.size() != 3) {
        throw ParseError("'" + path + "': shape must be [T, M, D]");
    }
    double fps = j["fps"].get<double>();
    std::vector<double> v1 = j["dancer1"].get<std::vector<double>>();
    std::vector<double> v2 = j["dancer2"].get<std::vector<double>>();
    std::size_t expect = Tensor::count(shape);
    if (v1.size() != expect || v2.size() != expect) {
        throw DimensionError("'" + path + "': dancer data does not match shape (expected " +
                             std::to_string(expect) + " values)");
    }
    pose::JointSequence a{Tensor(shape, std::move(v1)), fps};
    pose::JointSequence b{Tensor(std::move(shape), std::move(v2)), fps};
    return {std::move(a), std::move(b)};
}

// Detection Input Format writer (one JSON object per line). Joint arrays are
// written flat, x,y,z interleaved; the reader requires the 29-joint layout.
inline void write_detections(const std::vector<pose::FrameDetections>& frames,
                             const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (const auto& frame : frames) {
        nlohmann::json people = nlohmann::json::array();
        for (const auto& det : frame.detections) {
            if (det.joints.ndim() != 2 || det.joints.dim(0) != pose::kJoints ||
                det.joints.dim(1) != pose::kDims) {
                throw DimensionError("write_detections: detections must carry " +
                                     std::to_string(pose::kJoints) + "x" +
                                     std::to_string(pose::kDims) + " joints");
            }
            people.push_back({{"score", det.score}, {"joints", det.joints.values()}});
        }
        nlohmann::json j;
        j["frame"] = frame.frame_index;
        j["people"] = std::move(people);
        out << j.dump() << "\n";
    }
    out.flush();
    if (!out) throw IoError("failed writing '" + path + "'");
}

// Training report CSV: epoch,l_mse,l_velocity,l_kl,total,mode_fraction.

inline constexpr const char* kReportHeader = "epoch,l_mse,l_velocity,l_kl,total,mode_fraction";

inline void write_training_report(const std::vector<train::EpochReport>& reports,
                                  const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << kReportHeader << "\n";
    for (const auto& r : reports) {
        out << r.epoch << "," << format_double(r.mean.l_mse) << ","
            << format_double(r.mean.l_velocity) << "," << format_double(r.mean.l_kl) << ","
            << format_double(r.mean.total) << "," << format_double(r.mode_fraction) << "\n";
    }
    out.flush();
    if (!out) throw IoError("failed writing '" + path + "'");
}

inline std::vector<train::EpochReport> parse_training_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open report '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != kReportHeader) {
        throw ParseError("'" + path + "' is not a training report");
    }
    std::vector<train::EpochReport> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 6) {
            throw ParseError("report line " + std::to_string(line_no) +
                             ": expected 6 fields, got " + std::to_string(fields.size()));
        }
        train::EpochReport r;
        r.epoch = static_cast<std::size_t>(parse_double(fields[0]));
        r.mean.l_mse = parse_double(fields[1]);
        r.mean.l_velocity = parse_double(fields[2]);
        r.mean.l_kl = parse_double(fields[3]);
        r.mean.total = parse_double(fields[4]);
        r.mode_fraction = parse_double(fields[5]);
        out.push_back(r);
    }
    return out;
}

// Animation CSV for external visualization: frame,dancer,joint,x,y,z.
inline void write_animation(const Tensor& dancer1, const Tensor& dancer2,
                            const std::string& path) {
    nn::require_same_shape(dancer1, dancer2, "write_animation");
    if (dancer1.ndim() != 3) throw DimensionError("write_animation: expected (T x M x D)");
    if (dancer1.dim(2) != 3) throw DimensionError("write_animation: expected 3 coordinates");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "frame,dancer,joint,x,y,z\n";
    std::size_t t_len = dancer1.dim(0), m = dancer1.dim(1);
    for (std::size_t t = 0; t < t_len; ++t) {
        for (int dancer = 1; dancer <= 2; ++dancer) {
            const Tensor& src = dancer == 1 ? dancer1 : dancer2;
            for (std::size_t j = 0; j < m; ++j) {
                out << t << "," << dancer << "," << j << "," << format_double(src.at3(t, j, 0))
                    << "," << format_double(src.at3(t, j, 1)) << ","
                    << format_double(src.at3(t, j, 2)) << "\n";
            }
        }
    }
    out.flush();
    if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace duet::io
