#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace dsb {

// Discretization shared by every diffusion: step sizes gamma_1..gamma_N and
// the cumulative times t_0 = 0, t_k = sum_{l<=k} gamma_l, horizon T = t_N.
struct StepSchedule {
    std::vector<double> gammas;  // gamma_1..gamma_N, 0-indexed as gammas[k] = gamma_{k+1}
    std::vector<double> times;   // t_0..t_N

    std::size_t n_steps() const { return gammas.size(); }
    double horizon() const { return times.back(); }

    // gamma_{k+1}, the step from t_k to t_{k+1}; k in [0, N).
    double gamma_after(std::size_t k) const { return gammas.at(k); }
    // gamma_k, the step from t_{k-1} to t_k; k in [1, N].
    double gamma_before(std::size_t k) const { return gammas.at(k - 1); }
};

inline StepSchedule schedule_from_gammas(std::vector<double> gammas) {
    if (gammas.empty()) throw std::invalid_argument("schedule: need at least one step");
    StepSchedule s;
    s.times.resize(gammas.size() + 1);
    s.times[0] = 0.0;
    for (std::size_t k = 0; k < gammas.size(); ++k) {
        if (!(gammas[k] > 0.0)) throw std::invalid_argument("schedule: gamma must be positive");
        s.times[k + 1] = s.times[k] + gammas[k];
    }
    s.gammas = std::move(gammas);
    return s;
}

inline StepSchedule make_uniform_schedule(std::size_t n_steps, double gamma) {
    if (n_steps < 1) throw std::invalid_argument("uniform schedule: n_steps must be >= 1");
    if (!(gamma > 0.0)) throw std::invalid_argument("uniform schedule: gamma must be > 0");
    return schedule_from_gammas(std::vector<double>(n_steps, gamma));
}

// Time-reversal-invariant schedule: gamma_k = gamma_{N+1-k}. The first half
// ramps linearly from gamma_min at k = 1 to gamma_max at k = N/2 and the
// second half mirrors it. With N/2 == 1 the single ramp point is gamma_min.
inline StepSchedule make_symmetric_schedule(std::size_t n_steps, double gamma_min,
                                            double gamma_max) {
    if (n_steps < 2 || n_steps % 2 != 0)
        throw std::invalid_argument("symmetric schedule: n_steps must be even and >= 2");
    if (!(gamma_min > 0.0) || gamma_min > gamma_max)
        throw std::invalid_argument("symmetric schedule: need 0 < gamma_min <= gamma_max");
    const std::size_t half = n_steps / 2;
    std::vector<double> g(n_steps);
    for (std::size_t k = 1; k <= half; ++k) {
        const double frac = (half >= 2) ? double(k - 1) / double(half - 1) : 0.0;
        g[k - 1] = gamma_min + frac * (gamma_max - gamma_min);
        g[n_steps - k] = g[k - 1];
    }
    return schedule_from_gammas(std::move(g));
}

// Sine transform of a step index (or physical time): interleaved sin/cos at
// geometrically spaced frequencies with base 10000.
inline std::vector<double> positional_encoding(double step, std::size_t enc_dim) {
    if (enc_dim % 2 != 0) throw std::invalid_argument("positional encoding: enc_dim must be even");
    std::vector<double> enc(enc_dim);
    for (std::size_t i = 0; 2 * i < enc_dim; ++i) {
        const double freq = std::pow(10000.0, -2.0 * double(i) / double(enc_dim));
        enc[2 * i] = std::sin(step * freq);
        enc[2 * i + 1] = std::cos(step * freq);
    }
    return enc;
}

}  // namespace dsb
