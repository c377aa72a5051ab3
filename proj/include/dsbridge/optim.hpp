#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "dsbridge/linalg.hpp"

namespace dsb {

struct AdamState {
    Vec m;  // first moment
    Vec v;  // second moment
    std::size_t step = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam step, in place. Rejects non-finite gradients so a
// diverging simulation cannot silently poison the parameters.
inline void adam_update(Vec& params, const Vec& grad, AdamState& state, const AdamConfig& cfg) {
    if (grad.size() != params.size() || state.m.size() != params.size())
        throw std::invalid_argument("adam_update: size mismatch");
    for (double g : grad)
        if (!std::isfinite(g)) throw std::runtime_error("adam_update: non-finite gradient");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

// Shadow parameters: shadow <- rate * shadow + (1 - rate) * params.
struct EmaParams {
    Vec shadow;
    double rate = 0.999;

    EmaParams() = default;
    EmaParams(const Vec& params, double r) : shadow(params), rate(r) {
        if (!(r >= 0.0 && r < 1.0)) throw std::invalid_argument("ema: rate must be in [0, 1)");
    }
};

inline void ema_update(EmaParams& ema, const Vec& params) {
    if (ema.shadow.size() != params.size()) throw std::invalid_argument("ema_update: size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i)
        ema.shadow[i] = ema.rate * ema.shadow[i] + (1.0 - ema.rate) * params[i];
}

}  // namespace dsb
