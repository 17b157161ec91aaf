#pragma once

#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "duet/common.hpp"
#include "duet/model.hpp"

namespace duet::model {

inline constexpr const char* kCheckpointFormat = "duet-checkpoint";
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline nlohmann::json tensor_to_json(const Tensor& t) {
    nlohmann::json j;
    j["shape"] = t.shape();
    j["values"] = t.values();
    return j;
}

inline Tensor tensor_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.contains("shape") || !j.contains("values")) {
        throw ParseError("checkpoint entry '" + what + "' lacks shape/values");
    }
    std::vector<std::size_t> shape = j["shape"].get<std::vector<std::size_t>>();
    std::vector<double> values = j["values"].get<std::vector<double>>();
    if (Tensor::count(shape) != values.size()) {
        throw DimensionError("checkpoint entry '" + what + "' shape disagrees with values");
    }
    return Tensor(std::move(shape), std::move(values));
}

}  // namespace detail

inline void save_checkpoint(DuetModel& m, const std::string& path) {
    nlohmann::json j;
    j["format"] = kCheckpointFormat;
    j["version"] = kCheckpointVersion;
    j["fps"] = m.fps;
    j["has_norm_stats"] = m.has_norm_stats;
    j["config"] = {{"frames", m.config.frames},
                   {"joints", m.config.joints},
                   {"dims", m.config.dims},
                   {"d_model", m.config.d_model},
                   {"n_heads", m.config.n_heads},
                   {"latent_dim", m.config.latent_dim},
                   {"lstm_layers", m.config.lstm_layers},
                   {"conv_kernel", m.config.conv_kernel},
                   {"decoder_layers", m.config.decoder_layers}};
    j["norm_stats"] = {{"mean", detail::tensor_to_json(m.norm_stats.mean)},
                       {"std", detail::tensor_to_json(m.norm_stats.std)}};
    nlohmann::json params = nlohmann::json::object();
    m.for_each_param([&](Param& p) {
        if (!p.value.all_finite()) {
            throw NumericError("refusing to save non-finite parameter '" + p.name + "'");
        }
        params[p.name] = detail::tensor_to_json(p.value);
    });
    j["params"] = std::move(params);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump();
    out.flush();
    if (!out) throw IoError("failed writing checkpoint to '" + path + "'");
}

inline DuetModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ParseError("checkpoint '" + path + "' is not valid");
    }
    if (j.value("format", std::string{}) != kCheckpointFormat) {
        throw ParseError("'" + path + "' is not a checkpoint file");
    }
    if (j.value("version", -1) != kCheckpointVersion) {
        throw ParseError("checkpoint version " + std::to_string(j.value("version", -1)) +
                         " unsupported (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    const auto& jc = j.at("config");
    ModelConfig cfg;
    cfg.frames = jc.at("frames").get<std::size_t>();
    cfg.joints = jc.at("joints").get<std::size_t>();
    cfg.dims = jc.at("dims").get<std::size_t>();
    cfg.d_model = jc.at("d_model").get<std::size_t>();
    cfg.n_heads = jc.at("n_heads").get<std::size_t>();
    cfg.latent_dim = jc.at("latent_dim").get<std::size_t>();
    cfg.lstm_layers = jc.at("lstm_layers").get<std::size_t>();
    cfg.conv_kernel = jc.at("conv_kernel").get<std::size_t>();
    cfg.decoder_layers = jc.at("decoder_layers").get<std::size_t>();

    DuetModel m(cfg, 0);
    m.fps = j.value("fps", pose::kDefaultFps);
    m.has_norm_stats = j.value("has_norm_stats", false);
    m.norm_stats.mean = detail::tensor_from_json(j.at("norm_stats").at("mean"), "norm_stats.mean");
    m.norm_stats.std = detail::tensor_from_json(j.at("norm_stats").at("std"), "norm_stats.std");

    const auto& jp = j.at("params");
    std::size_t seen = 0;
    m.for_each_param([&](Param& p) {
        if (!jp.contains(p.name)) {
            throw ParseError("checkpoint missing parameter '" + p.name + "'");
        }
        Tensor loaded = detail::tensor_from_json(jp[p.name], p.name);
        if (!loaded.same_shape(p.value)) {
            throw DimensionError("checkpoint parameter '" + p.name + "' has shape " +
                                 nn::shape_string(loaded) + ", expected " +
                                 nn::shape_string(p.value));
        }
        p.value = std::move(loaded);
        p.grad = Tensor(p.value.shape());
        ++seen;
    });
    if (jp.size() != seen) {
        throw ParseError("checkpoint has " + std::to_string(jp.size()) +
                         " parameters, model expects " + std::to_string(seen));
    }
    return m;
}

}  // namespace duet::model
