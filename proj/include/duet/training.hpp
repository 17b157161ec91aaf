#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "duet/checkpoint.hpp"
#include "duet/losses.hpp"
#include "duet/model.hpp"
#include "duet/preprocess.hpp"

namespace duet::train {

struct DuetSequence {
    pose::JointSequence dancer1;
    pose::JointSequence dancer2;
};

enum class TrainMode { Focused, Full };

inline TrainMode draw_mode(nn::RandomSource& rng, double p) {
    return rng.uniform() < p ? TrainMode::Focused : TrainMode::Full;
}

struct AdamState {
    Tensor m, v;
    std::size_t t = 0;
};

inline void adam_update(nn::Param& p, AdamState& state, double lr, double beta1,
                        double beta2, double eps = 1e-8) {
    if (!p.grad.all_finite()) {
        throw NumericError("non-finite gradient for parameter '" + p.name + "'");
    }
    if (state.m.numel() != p.value.numel()) {
        state.m = Tensor(p.value.shape());
        state.v = Tensor(p.value.shape());
        state.t = 0;
    }
    ++state.t;
    double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
        double g = p.grad[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        double m_hat = state.m[i] / c1;
        double v_hat = state.v[i] / c2;
        p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

// One training sample: window + 1 frames per dancer so X = rows [0, T) and the
// teacher-forcing target Y = rows [1, T+1).
struct Window {
    Tensor a;  // ((T+1) x F), normalized
    Tensor b;
};

inline std::vector<Window> build_windows(const std::vector<DuetSequence>& dataset,
                                         const pose::NormStats& stats,
                                         std::size_t window) {
    if (window < 2) throw ArgumentError("window must be at least 2 frames");
    std::size_t stride = std::max<std::size_t>(1, window / 2);
    std::vector<Window> out;
    for (const auto& duet : dataset) {
        nn::require_same_shape(duet.dancer1.data, duet.dancer2.data, "build_windows");
        pose::JointSequence na = pose::normalize(duet.dancer1, stats);
        pose::JointSequence nb = pose::normalize(duet.dancer2, stats);
        std::size_t t_total = na.frames();
        std::size_t f = na.channels();
        if (t_total < window + 1) continue;
        for (std::size_t start = 0; start + window + 1 <= t_total; start += stride) {
            Window w;
            w.a = Tensor({window + 1, f});
            w.b = Tensor({window + 1, f});
            for (std::size_t i = 0; i < (window + 1) * f; ++i) {
                w.a[i] = na.data[start * f + i];
                w.b[i] = nb.data[start * f + i];
            }
            out.push_back(std::move(w));
        }
    }
    return out;
}

struct StepResult {
    LossBreakdown losses;
    TrainMode mode = TrainMode::Full;
    int target_dancer = 0;  // 0 in focused mode
};

struct EpochReport {
    std::size_t epoch = 0;
    LossBreakdown mean;
    double mode_fraction = 0.0;  // fraction of focused steps
};

class Trainer {
public:
    Trainer(model::DuetModel& m, TrainConfig cfg)
        : model_(m), cfg_(std::move(cfg)), rng_(cfg_.seed) {
        cfg_.validate();
        lr_ = cosine_lr(0, cfg_);
        auto collect = [](auto& part, std::vector<nn::Param*>& into) {
            part.for_each([&](nn::Param& p) { into.push_back(&p); });
        };
        collect(model_.vae1, focused_params_);
        collect(model_.vae2, focused_params_);
        full_shared_params_ = focused_params_;
        collect(model_.vae3, full_shared_params_);
        collect(model_.decoder1, decoder1_params_);
        collect(model_.decoder2, decoder2_params_);
    }

    const TrainConfig& config() const { return cfg_; }
    nn::RandomSource& rng() { return rng_; }

    StepResult train_step(const Window& w) {
        TrainMode mode = draw_mode(rng_, cfg_.p);
        return mode == TrainMode::Focused ? focused_step(w) : full_step(w);
    }

    std::vector<EpochReport> train(const std::vector<DuetSequence>& dataset,
                                   const std::string& checkpoint_path = "") {
        if (dataset.empty()) throw NoDataError("training dataset is empty");
        check_dims(dataset);
        std::vector<pose::JointSequence> all;
        all.reserve(dataset.size() * 2);
        for (const auto& d : dataset) {
            all.push_back(d.dancer1);
            all.push_back(d.dancer2);
        }
        model_.norm_stats = pose::compute_norm_stats(all);
        model_.has_norm_stats = true;
        model_.fps = dataset.front().dancer1.fps;

        std::vector<Window> windows = build_windows(dataset, model_.norm_stats, cfg_.window);
        if (windows.empty()) {
            throw NoDataError("no training windows: every sequence is shorter than " +
                              std::to_string(cfg_.window + 1) + " frames");
        }

        std::vector<EpochReport> reports;
        reports.reserve(cfg_.epochs);
        std::vector<std::size_t> order(windows.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

        for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
            lr_ = cosine_lr(epoch, cfg_);
            rng_.shuffle(order);
            LossBreakdown sum;
            std::size_t focused = 0;
            for (std::size_t idx : order) {
                StepResult r = train_step(augmented(windows[idx]));
                sum.l_mse += r.losses.l_mse;
                sum.l_velocity += r.losses.l_velocity;
                sum.l_kl += r.losses.l_kl;
                sum.total += r.losses.total;
                if (r.mode == TrainMode::Focused) ++focused;
            }
            double n = static_cast<double>(order.size());
            EpochReport rep;
            rep.epoch = epoch;
            rep.mean = {sum.l_mse / n, sum.l_velocity / n, sum.l_kl / n, sum.total / n};
            rep.mode_fraction = static_cast<double>(focused) / n;
            reports.push_back(rep);
        }
        if (!checkpoint_path.empty()) model::save_checkpoint(model_, checkpoint_path);
        return reports;
    }

private:
    void check_dims(const std::vector<DuetSequence>& dataset) const {
        for (const auto& d : dataset) {
            if (d.dancer1.joints() != model_.config.joints ||
                d.dancer1.dims() != model_.config.dims) {
                throw DimensionError("dataset sequences are " +
                                     std::to_string(d.dancer1.joints()) + "x" +
                                     std::to_string(d.dancer1.dims()) +
                                     " per frame, model expects " +
                                     std::to_string(model_.config.joints) + "x" +
                                     std::to_string(model_.config.dims));
            }
        }
    }

    Window augmented(const Window& w) {
        if (cfg_.noise_sigma == 0.0) return w;
        Window out = w;
        for (std::size_t i = 0; i < out.a.numel(); ++i) {
            out.a[i] += cfg_.noise_sigma * rng_.normal();
        }
        for (std::size_t i = 0; i < out.b.numel(); ++i) {
            out.b[i] += cfg_.noise_sigma * rng_.normal();
        }
        return out;
    }

    static Tensor rows(const Tensor& t, std::size_t lo, std::size_t hi) {
        std::size_t f = t.dim(1);
        Tensor out({hi - lo, f});
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = t[lo * f + i];
        return out;
    }

    Tensor draw_eps() { return rng_.normal_tensor({1, model_.config.latent_dim}, 1.0); }

    StepResult focused_step(const Window& w) {
        std::size_t t_len = w.a.dim(0) - 1;
        Tensor eps1 = draw_eps();
        Tensor eps2 = draw_eps();
        nn::Graph g;
        nn::Node* x1 = g.constant(rows(w.a, 0, t_len));
        nn::Node* x2 = g.constant(rows(w.b, 0, t_len));
        model::VaeNodes v1 = model::vae_forward_nodes(g, model_.vae1, model_.config, x1, eps1);
        model::VaeNodes v2 = model::vae_forward_nodes(g, model_.vae2, model_.config, x2, eps2);
        nn::Node* mse = g.scale(
            g.add(mse_loss_nodes(g, v1.recon, x1), mse_loss_nodes(g, v2.recon, x2)), 0.5);
        nn::Node* kl = g.add(kl_loss_nodes(g, v1.mu, v1.log_var),
                             kl_loss_nodes(g, v2.mu, v2.log_var));
        nn::Node* loss = g.add(g.scale(mse, cfg_.alpha), g.scale(kl, cfg_.eta));

        model_.for_each_param([](nn::Param& p) { p.zero_grad(); });
        g.backward(loss);
        for (nn::Param* p : focused_params_) {
            adam_update(*p, slot(p), lr_, cfg_.beta1, cfg_.beta2, cfg_.adam_eps);
        }

        StepResult r;
        r.mode = TrainMode::Focused;
        r.losses = total_loss(mse->value[0], 0.0, kl->value[0], cfg_);
        return r;
    }

    StepResult full_step(const Window& w) {
        std::size_t t_len = w.a.dim(0) - 1;
        int target = (full_steps_ % 2 == 0) ? 2 : 1;
        ++full_steps_;
        Tensor eps1 = draw_eps();
        Tensor eps2 = draw_eps();
        Tensor eps3 = draw_eps();

        nn::Graph g;
        nn::Node* x1 = g.constant(rows(w.a, 0, t_len));
        nn::Node* x2 = g.constant(rows(w.b, 0, t_len));
        model::DuetNodes duet =
            model::duet_forward_nodes(g, model_, x1, x2, target, eps1, eps2, eps3);
        nn::Node* y = g.constant(rows(target == 2 ? w.b : w.a, 1, t_len + 1));
        nn::Node* mse = mse_loss_nodes(g, duet.prediction, y);
        nn::Node* vel = velocity_loss_nodes(g, duet.prediction, cfg_.frames);
        nn::Node* kl = g.add(g.add(kl_loss_nodes(g, duet.v1.mu, duet.v1.log_var),
                                   kl_loss_nodes(g, duet.v2.mu, duet.v2.log_var)),
                             kl_loss_nodes(g, duet.v3.mu, duet.v3.log_var));
        nn::Node* loss = g.add(g.add(g.scale(mse, cfg_.alpha), g.scale(vel, cfg_.beta)),
                               g.scale(kl, cfg_.eta));

        model_.for_each_param([](nn::Param& p) { p.zero_grad(); });
        g.backward(loss);
        for (nn::Param* p : full_shared_params_) {
            adam_update(*p, slot(p), lr_, cfg_.beta1, cfg_.beta2, cfg_.adam_eps);
        }
        for (nn::Param* p : target == 2 ? decoder2_params_ : decoder1_params_) {
            adam_update(*p, slot(p), lr_, cfg_.beta1, cfg_.beta2, cfg_.adam_eps);
        }

        StepResult r;
        r.mode = TrainMode::Full;
        r.target_dancer = target;
        r.losses = total_loss(mse->value[0], vel->value[0], kl->value[0], cfg_);
        return r;
    }

    AdamState& slot(nn::Param* p) { return slots_[p]; }

    model::DuetModel& model_;
    TrainConfig cfg_;
    nn::RandomSource rng_;
    std::unordered_map<nn::Param*, AdamState> slots_;
    std::vector<nn::Param*> focused_params_;      // VAE 1 + VAE 2
    std::vector<nn::Param*> full_shared_params_;  // all three VAEs
    std::vector<nn::Param*> decoder1_params_, decoder2_params_;
    std::size_t full_steps_ = 0;
    double lr_ = 0.0;
};

}  // namespace duet::train
