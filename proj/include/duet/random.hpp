#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "duet/tensor.hpp"

namespace duet::nn {

// Seeded random source. Uniform and normal draws are generated from raw
// mt19937_64 output (not std:: distributions), so a given seed produces the
// same stream on every platform.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return std::ldexp(static_cast<double>(engine_() >> 11), -53); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the paired draw is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Uniform index in [0, n) by rejection, bias-free.
    std::size_t index(std::size_t n) {
        if (n == 0) throw ArgumentError("RandomSource::index: n must be positive");
        std::uint64_t span = n;
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t draw;
        do {
            draw = engine_();
        } while (draw >= limit);
        return static_cast<std::size_t>(draw % span);
    }

    std::uint64_t fork_seed() { return engine_(); }

    Tensor normal_tensor(std::vector<std::size_t> shape, double sigma = 1.0) {
        Tensor t(std::move(shape));
        for (std::size_t i = 0; i < t.numel(); ++i) t[i] = sigma * normal();
        return t;
    }

    Tensor uniform_tensor(std::vector<std::size_t> shape, double lo, double hi) {
        Tensor t(std::move(shape));
        for (std::size_t i = 0; i < t.numel(); ++i) t[i] = uniform(lo, hi);
        return t;
    }

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace duet::nn

namespace duet {
using nn::RandomSource;
}
