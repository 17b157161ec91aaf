#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>

#include "duet/common.hpp"
#include "duet/graph.hpp"
#include "duet/tensor.hpp"

namespace duet::train {

using nn::Graph;
using nn::Node;
using nn::Tensor;

struct TrainConfig {
    std::size_t window = 64;      // T
    double p = 0.1;               // focused-mode probability
    double alpha = 0.5;           // reconstruction weight
    double beta = 0.05;           // velocity weight
    double eta = 0.00005;         // KL weight
    std::size_t frames = 1;       // velocity-difference gap
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t t_max = 100;      // cosine annealing period, epochs
    std::size_t epochs = 100;
    double noise_sigma = 0.01;
    unsigned long long seed = 0;

    void validate() const {
        if (p < 0.0 || p > 1.0) throw ArgumentError("p must lie in [0, 1]");
        if (alpha < 0.0 || beta < 0.0 || eta < 0.0) {
            throw ArgumentError("loss weights must be non-negative");
        }
        if (frames < 1) throw ArgumentError("frames must be >= 1");
        if (noise_sigma < 0.0) throw ArgumentError("noise sigma must be non-negative");
    }
};

struct LossBreakdown {
    double l_mse = 0.0;
    double l_velocity = 0.0;
    double l_kl = 0.0;
    double total = 0.0;
};

inline LossBreakdown total_loss(double l_mse, double l_velocity, double l_kl,
                                const TrainConfig& cfg) {
    LossBreakdown b;
    b.l_mse = l_mse;
    b.l_velocity = l_velocity;
    b.l_kl = l_kl;
    b.total = cfg.alpha * l_mse + cfg.beta * l_velocity + cfg.eta * l_kl;
    return b;
}

// Graph-level losses (training route) -------------------------------------

inline Node* mse_loss_nodes(Graph& g, Node* pred, Node* target) {
    nn::require_same_shape(pred->value, target->value, "mse_loss");
    Node* d = g.sub(pred, target);
    return g.mean_all(g.mul(d, d));
}

// 1/2 sum(mu^2 + sigma^2 - log sigma^2 - 1), averaged over batch rows.
inline Node* kl_loss_nodes(Graph& g, Node* mu, Node* log_var) {
    nn::require_same_shape(mu->value, log_var->value, "kl_loss");
    Node* var = g.exp_fn(log_var);
    Node* term = g.add_scalar(g.sub(g.add(g.mul(mu, mu), var), log_var), -1.0);
    Node* per_row = g.sum_rows(term);  // (B)
    return g.scale(g.mean_all(per_row), 0.5);
}

// v_t = x_{t+1} - x_t; loss = mean_t ||v_{t+frames} - v_t||_2, the norm taken
// over the feature vector at each step.
inline Node* velocity_loss_nodes(Graph& g, Node* pred, std::size_t frames) {
    const Tensor& pv = pred->value;
    if (pv.ndim() != 2) throw DimensionError("velocity_loss: expects (T x F)");
    std::size_t t_len = pv.dim(0);
    if (t_len < frames + 2) {
        throw ArgumentError("velocity_loss: need at least frames + 2 time steps");
    }
    Node* v = g.sub(g.slice_rows(pred, 1, t_len), g.slice_rows(pred, 0, t_len - 1));
    std::size_t n_v = t_len - 1;
    Node* dv = g.sub(g.slice_rows(v, frames, n_v), g.slice_rows(v, 0, n_v - frames));
    Node* norms = g.sqrt_fn(g.sum_rows(g.mul(dv, dv)));
    return g.mean_all(norms);
}

// Value-level wrappers ------------------------------------------------------

inline double mse_loss(const Tensor& pred, const Tensor& target) {
    Graph g(true);
    return mse_loss_nodes(g, g.constant(pred), g.constant(target))->value[0];
}

inline double kl_loss(const Tensor& mu, const Tensor& log_var) {
    Graph g(true);
    Tensor m = mu.ndim() == 1 ? mu.reshaped({1, mu.numel()}) : mu;
    Tensor lv = log_var.ndim() == 1 ? log_var.reshaped({1, log_var.numel()}) : log_var;
    return kl_loss_nodes(g, g.constant(m), g.constant(lv))->value[0];
}

inline double velocity_loss(const Tensor& pred, std::size_t frames) {
    Graph g(true);
    Tensor p = pred;
    if (p.ndim() != 2) {
        std::size_t t_len = p.dim(0);
        p = p.reshaped({t_len, p.numel() / t_len});
    }
    return velocity_loss_nodes(g, g.constant(p), frames)->value[0];
}

// Cosine annealing from lr down to exactly zero at t_max; clamped after.
inline double cosine_lr(std::size_t epoch, const TrainConfig& cfg) {
    if (cfg.t_max == 0 || epoch >= cfg.t_max) return 0.0;
    double phase = std::numbers::pi * static_cast<double>(epoch) /
                   static_cast<double>(cfg.t_max);
    return 0.5 * cfg.lr * (1.0 + std::cos(phase));
}

}  // namespace duet::train
