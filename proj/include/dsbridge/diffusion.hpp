#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsbridge/gauss.hpp"
#include "dsbridge/linalg.hpp"
#include "dsbridge/rng.hpp"
#include "dsbridge/schedule.hpp"

namespace dsb {

// Reference drift f(x) = -alpha x; alpha = 0 is the Brownian case.
struct ReferenceDrift {
    double alpha = 0.0;

    // One-step Euler-Maruyama transition mean x + gamma f(x).
    Vec transition_mean(double gamma, const Vec& x) const {
        Vec y(x.size());
        const double c = 1.0 - gamma * alpha;
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = c * x[i];
        return y;
    }
};

// Transition mean map of a chain: (k, x) -> E[next state | x]. For forward
// chains k is the index of the current state; for backward chains k is the
// index of the state being left (Algorithm 1 argument placement).
using DriftMap = std::function<Vec(std::size_t, const Vec&)>;

inline DriftMap reference_forward_map(ReferenceDrift drift, StepSchedule sched) {
    return [drift, sched = std::move(sched)](std::size_t k, const Vec& x) {
        return drift.transition_mean(sched.gamma_after(k), x);
    };
}

struct SimOptions {
    double noise_scale = 1.0;  // 0 disables noise injection (testing hook)
    double max_norm = 1e6;     // abort threshold on the state norm
};

struct Trajectory {
    std::vector<Vec> states;  // X_0..X_N

    std::size_t n_steps() const { return states.empty() ? 0 : states.size() - 1; }
};

namespace detail {
inline void check_state(const Vec& x, std::size_t k, double max_norm, const char* dir) {
    double n2 = 0.0;
    for (double v : x) n2 += v * v;
    if (!std::isfinite(n2) || n2 > max_norm * max_norm)
        throw std::runtime_error(std::string("diffusion: ") + dir + " chain diverged at step " +
                                 std::to_string(k) + " (|x| = " + std::to_string(std::sqrt(n2)) +
                                 ")");
}
}  // namespace detail

// X_{k+1} = F(k, X_k) + sqrt(2 gamma_{k+1}) Z. Each trajectory draws from its
// own substream of rng, so the batch is independent of evaluation order.
inline std::vector<Trajectory> em_forward(const std::vector<Vec>& x0_batch, const DriftMap& fwd,
                                          const StepSchedule& sched, Rng& rng,
                                          SimOptions opt = {}) {
    const std::size_t n = sched.n_steps();
    std::vector<Trajectory> out(x0_batch.size());
    for (std::size_t j = 0; j < x0_batch.size(); ++j) {
        Rng stream = rng.substream(j);
        Trajectory& tr = out[j];
        tr.states.resize(n + 1);
        tr.states[0] = x0_batch[j];
        detail::check_state(tr.states[0], 0, opt.max_norm, "forward");
        for (std::size_t k = 0; k < n; ++k) {
            Vec x = fwd(k, tr.states[k]);
            const double s = opt.noise_scale * std::sqrt(2.0 * sched.gamma_after(k));
            if (s != 0.0)
                for (auto& xi : x) xi += s * stream.normal();
            detail::check_state(x, k + 1, opt.max_norm, "forward");
            tr.states[k + 1] = std::move(x);
        }
    }
    return out;
}

// X_{k-1} = B(k, X_k) + sqrt(2 gamma_k) Z, k descending from N.
inline std::vector<Trajectory> em_backward(const std::vector<Vec>& xN_batch, const DriftMap& bwd,
                                           const StepSchedule& sched, Rng& rng,
                                           SimOptions opt = {}) {
    const std::size_t n = sched.n_steps();
    std::vector<Trajectory> out(xN_batch.size());
    for (std::size_t j = 0; j < xN_batch.size(); ++j) {
        Rng stream = rng.substream(j);
        Trajectory& tr = out[j];
        tr.states.resize(n + 1);
        tr.states[n] = xN_batch[j];
        detail::check_state(tr.states[n], n, opt.max_norm, "backward");
        for (std::size_t k = n; k >= 1; --k) {
            Vec x = bwd(k, tr.states[k]);
            const double s = opt.noise_scale * std::sqrt(2.0 * sched.gamma_before(k));
            if (s != 0.0)
                for (auto& xi : x) xi += s * stream.normal();
            detail::check_state(x, k - 1, opt.max_norm, "backward");
            tr.states[k - 1] = std::move(x);
        }
    }
    return out;
}

// Sample X_t | X_0 = x0 for the OU reference in closed form.
inline Vec ou_closed_form_sample(const Vec& x0, double t, double alpha, Rng& rng) {
    const OuMoments m = ou_moments(t, alpha);  // throws on negative t
    const double sd = std::sqrt(m.sigma2);
    Vec x(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) x[i] = m.c * x0[i] + sd * rng.normal();
    return x;
}

// Stored simulated paths, resampled as minibatches (amortizes simulation).
struct TrajectoryCache {
    std::size_t n_traj = 0;
    std::size_t n_steps = 0;
    std::size_t dim = 0;
    std::vector<double> states;  // [j][k][i]
    std::size_t refresh_period = 1000;
    std::size_t age = 0;  // gradient steps since the last build

    const double* state(std::size_t j, std::size_t k) const {
        return &states[(j * (n_steps + 1) + k) * dim];
    }
    bool stale() const { return age >= refresh_period; }
};

// sampler is called once per trajectory with that trajectory's substream.
inline TrajectoryCache cache_build(const std::function<Trajectory(Rng&)>& sampler, std::size_t m,
                                   const StepSchedule& sched, Rng& rng,
                                   std::size_t refresh_period = 1000) {
    if (m < 1) throw std::invalid_argument("cache_build: need at least one trajectory");
    TrajectoryCache cache;
    cache.n_traj = m;
    cache.n_steps = sched.n_steps();
    cache.refresh_period = refresh_period;
    for (std::size_t j = 0; j < m; ++j) {
        Rng stream = rng.substream(j);
        Trajectory tr = sampler(stream);
        if (tr.states.size() != cache.n_steps + 1)
            throw std::invalid_argument("cache_build: trajectory length mismatch");
        if (j == 0) {
            cache.dim = tr.states[0].size();
            cache.states.resize(m * (cache.n_steps + 1) * cache.dim);
        }
        for (std::size_t k = 0; k <= cache.n_steps; ++k) {
            if (tr.states[k].size() != cache.dim)
                throw std::invalid_argument("cache_build: state dim mismatch");
            std::copy(tr.states[k].begin(), tr.states[k].end(),
                      cache.states.begin() + (j * (cache.n_steps + 1) + k) * cache.dim);
        }
    }
    return cache;
}

// Adjacent-state pair (X_k, X_{k+1}) of trajectory j.
struct CachePair {
    std::size_t k = 0;
    std::size_t j = 0;
    Vec x_k;
    Vec x_k1;
};

// Indices drawn uniformly over {0..N-1} x {0..M-1}.
inline std::vector<CachePair> cache_minibatch(const TrajectoryCache& cache,
                                              std::size_t batch_size, Rng& rng) {
    if (cache.n_traj == 0) throw std::invalid_argument("cache_minibatch: empty cache");
    std::vector<CachePair> batch(batch_size);
    for (auto& p : batch) {
        p.k = rng.uniform_index(cache.n_steps);
        p.j = rng.uniform_index(cache.n_traj);
        const double* a = cache.state(p.j, p.k);
        const double* b = cache.state(p.j, p.k + 1);
        p.x_k.assign(a, a + cache.dim);
        p.x_k1.assign(b, b + cache.dim);
    }
    return batch;
}

}  // namespace dsb
