#pragma once

#include <algorithm>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "duet/common.hpp"
#include "duet/inference.hpp"
#include "duet/training.hpp"

namespace duet::eval {

using nn::Tensor;

// Published horizon-MSE results used as the comparison column in reports.
inline constexpr struct {
    std::size_t horizon;
    double mse;
} kReferenceMse[] = {{16, 0.0126}, {32, 0.0197}, {48, 0.0219}, {64, 0.0263}};

inline bool reference_for(std::size_t horizon, double* out) {
    for (const auto& r : kReferenceMse) {
        if (r.horizon == horizon) {
            *out = r.mse;
            return true;
        }
    }
    return false;
}

struct EvalConfig {
    std::vector<std::size_t> horizons = {16, 32, 48, 64};
    std::size_t n_sequences = 10;
    std::size_t window = 64;   // T
    std::size_t context = 16;  // t0
    int target_dancer = 2;
};

struct HorizonRow {
    std::size_t horizon = 0;
    double mse = 0.0;
};

// Pluggable rollout: (leader window, context, target dancer) -> generated
// window, all in original coordinates. Lets tests swap in oracle stubs.
using PartnerGenerator =
    std::function<Tensor(const Tensor& leader, const Tensor& context, int target_dancer)>;

inline PartnerGenerator model_generator(model::DuetModel& m, unsigned long long seed) {
    auto rng = std::make_shared<nn::RandomSource>(seed);
    return [&m, rng](const Tensor& leader, const Tensor& context, int target_dancer) {
        return infer::generate_partner(m, leader, context, target_dancer, *rng).sequence;
    };
}

namespace detail {

struct RawWindow {
    Tensor leader;  // (T x F)
    Tensor truth;   // (T x F) ground truth for the generated dancer
};

inline std::vector<RawWindow> raw_windows(const std::vector<train::DuetSequence>& test_set,
                                          std::size_t window, int target_dancer) {
    std::size_t stride = std::max<std::size_t>(1, window / 2);
    std::vector<RawWindow> out;
    for (const auto& duet : test_set) {
        nn::require_same_shape(duet.dancer1.data, duet.dancer2.data, "horizon_mse");
        const Tensor& lead_src = target_dancer == 2 ? duet.dancer1.data : duet.dancer2.data;
        const Tensor& true_src = target_dancer == 2 ? duet.dancer2.data : duet.dancer1.data;
        std::size_t t_total = duet.dancer1.frames();
        std::size_t f = duet.dancer1.channels();
        if (t_total < window) continue;
        for (std::size_t start = 0; start + window <= t_total; start += stride) {
            RawWindow w;
            w.leader = Tensor({window, f});
            w.truth = Tensor({window, f});
            for (std::size_t i = 0; i < window * f; ++i) {
                w.leader[i] = lead_src[start * f + i];
                w.truth[i] = true_src[start * f + i];
            }
            out.push_back(std::move(w));
        }
    }
    return out;
}

}  // namespace detail

// Table 1 protocol: sample windows, roll the partner out from the default
// context, and report the MSE of the generated frames [t0, h) per horizon in
// original coordinates. Horizons at or below t0 have no generated frames and
// score 0.
inline std::vector<HorizonRow> horizon_mse(const std::vector<train::DuetSequence>& test_set,
                                           const EvalConfig& cfg,
                                           const PartnerGenerator& generate,
                                           nn::RandomSource& rng) {
    if (test_set.empty()) throw NoDataError("horizon_mse: empty test set");
    if (cfg.horizons.empty()) throw ArgumentError("horizon_mse: no horizons given");
    if (cfg.context < 1 || cfg.context >= cfg.window) {
        throw ArgumentError("horizon_mse: context must satisfy 1 <= t0 < window");
    }
    for (std::size_t h : cfg.horizons) {
        if (h > cfg.window) {
            throw ArgumentError("horizon " + std::to_string(h) + " exceeds the window " +
                                std::to_string(cfg.window));
        }
    }
    std::vector<detail::RawWindow> windows =
        detail::raw_windows(test_set, cfg.window, cfg.target_dancer);
    if (windows.empty()) {
        throw NoDataError("horizon_mse: no windows of " + std::to_string(cfg.window) +
                          " frames in the test set");
    }
    if (cfg.n_sequences > windows.size()) {
        throw ArgumentError("horizon_mse: requested " + std::to_string(cfg.n_sequences) +
                            " sequences but only " + std::to_string(windows.size()) +
                            " windows exist");
    }

    std::vector<std::size_t> order(windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    order.resize(cfg.n_sequences);

    std::vector<double> sums(cfg.horizons.size(), 0.0);
    std::size_t f = windows.front().leader.dim(1);
    for (std::size_t idx : order) {
        const detail::RawWindow& w = windows[idx];
        Tensor context({cfg.context, f});
        for (std::size_t i = 0; i < context.numel(); ++i) context[i] = w.truth[i];
        Tensor gen = generate(w.leader, context, cfg.target_dancer);
        if (gen.numel() != w.truth.numel()) {
            throw DimensionError("horizon_mse: generator returned " +
                                 std::to_string(gen.numel()) + " values, expected " +
                                 std::to_string(w.truth.numel()));
        }
        for (std::size_t hi = 0; hi < cfg.horizons.size(); ++hi) {
            std::size_t h = cfg.horizons[hi];
            if (h <= cfg.context) continue;
            double acc = 0.0;
            for (std::size_t i = cfg.context * f; i < h * f; ++i) {
                double d = gen[i] - w.truth[i];
                acc += d * d;
            }
            sums[hi] += acc / static_cast<double>((h - cfg.context) * f);
        }
    }

    std::vector<HorizonRow> rows;
    rows.reserve(cfg.horizons.size());
    for (std::size_t hi = 0; hi < cfg.horizons.size(); ++hi) {
        rows.push_back({cfg.horizons[hi], sums[hi] / static_cast<double>(cfg.n_sequences)});
    }
    return rows;
}

inline void emit_report(std::vector<HorizonRow> rows, const std::string& path) {
    if (rows.empty()) throw ArgumentError("emit_report: empty table");
    std::sort(rows.begin(), rows.end(),
              [](const HorizonRow& a, const HorizonRow& b) { return a.horizon < b.horizon; });
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "horizon,mse,paper_reference\n";
    for (const auto& r : rows) {
        out << r.horizon << "," << format_double(r.mse) << ",";
        double ref = 0.0;
        if (reference_for(r.horizon, &ref)) out << format_double(ref);
        out << "\n";
    }
    out.flush();
    if (!out) throw IoError("failed writing report to '" + path + "'");
}

struct ReportRow {
    std::size_t horizon = 0;
    double mse = 0.0;
    bool has_reference = false;
    double reference = 0.0;
};

inline std::vector<ReportRow> parse_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open report '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "horizon,mse,paper_reference") {
        throw ParseError("'" + path + "' is not a horizon report");
    }
    std::vector<ReportRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string horizon_s, mse_s, ref_s;
        if (!std::getline(ss, horizon_s, ',') || !std::getline(ss, mse_s, ',')) {
            throw ParseError("report line " + std::to_string(line_no) + " is malformed");
        }
        std::getline(ss, ref_s, ',');
        ReportRow r;
        r.horizon = static_cast<std::size_t>(parse_double(horizon_s));
        r.mse = parse_double(mse_s);
        if (!ref_s.empty()) {
            r.has_reference = true;
            r.reference = parse_double(ref_s);
        }
        rows.push_back(r);
    }
    return rows;
}

}  // namespace duet::eval
