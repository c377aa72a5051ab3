#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dsbridge/diffusion.hpp"
#include "dsbridge/gauss.hpp"
#include "dsbridge/linalg.hpp"
#include "dsbridge/metrics.hpp"
#include "dsbridge/net.hpp"
#include "dsbridge/optim.hpp"
#include "dsbridge/rng.hpp"
#include "dsbridge/schedule.hpp"

namespace dsb {

// What the half-bridge regressions learn. Mean matching learns the backward
// transition mean B itself; score matching learns the marginal score and
// composes B = x + gamma (-f + 2 score) at sampling time; drift matching
// learns the drift b and composes B = x + gamma b.
enum class LossVariant { MeanMatching, ScoreMatching, DriftMatching };

struct RegressionBatch {
    std::vector<std::pair<double, Vec>> inputs;
    std::vector<Vec> targets;
};

// Regression data for the backward net from pairs (X_k, X_{k+1}) of a chain
// simulated forward under the transition-mean map fwd. The net is
// conditioned on index k+1.
inline RegressionBatch backward_targets(LossVariant variant, const std::vector<CachePair>& pairs,
                                        const DriftMap& fwd, const StepSchedule& sched) {
    RegressionBatch batch;
    batch.inputs.reserve(pairs.size());
    batch.targets.reserve(pairs.size());
    for (const auto& p : pairs) {
        const double gamma = sched.gamma_after(p.k);
        const Vec f_at_k = fwd(p.k, p.x_k);
        const Vec f_at_k1 = fwd(p.k, p.x_k1);
        Vec tgt(p.x_k.size());
        switch (variant) {
            case LossVariant::MeanMatching:
                for (std::size_t i = 0; i < tgt.size(); ++i)
                    tgt[i] = p.x_k1[i] + f_at_k[i] - f_at_k1[i];
                break;
            case LossVariant::ScoreMatching:
                // conditional mean of -Z_{k+1}/sqrt(2 gamma) given X_{k+1}
                for (std::size_t i = 0; i < tgt.size(); ++i)
                    tgt[i] = (f_at_k[i] - p.x_k1[i]) / (2.0 * gamma);
                break;
            case LossVariant::DriftMatching:
                for (std::size_t i = 0; i < tgt.size(); ++i)
                    tgt[i] = (f_at_k[i] - f_at_k1[i]) / gamma;
                break;
        }
        batch.inputs.push_back({double(p.k + 1), p.x_k1});
        batch.targets.push_back(std::move(tgt));
    }
    return batch;
}

// Mirror image: regression data for the forward net from pairs of a chain
// simulated backward under bwd (bwd takes the index being left, k+1). The
// net is conditioned on index k.
inline RegressionBatch forward_targets(LossVariant variant, const std::vector<CachePair>& pairs,
                                       const DriftMap& bwd, const StepSchedule& sched) {
    RegressionBatch batch;
    batch.inputs.reserve(pairs.size());
    batch.targets.reserve(pairs.size());
    for (const auto& p : pairs) {
        const double gamma = sched.gamma_after(p.k);
        const Vec b_at_k1 = bwd(p.k + 1, p.x_k1);
        const Vec b_at_k = bwd(p.k + 1, p.x_k);
        Vec tgt(p.x_k.size());
        switch (variant) {
            case LossVariant::MeanMatching:
                for (std::size_t i = 0; i < tgt.size(); ++i)
                    tgt[i] = p.x_k[i] + b_at_k1[i] - b_at_k[i];
                break;
            case LossVariant::ScoreMatching:
                for (std::size_t i = 0; i < tgt.size(); ++i)
                    tgt[i] = (b_at_k1[i] - p.x_k[i]) / (2.0 * gamma);
                break;
            case LossVariant::DriftMatching:
                for (std::size_t i = 0; i < tgt.size(); ++i)
                    tgt[i] = (b_at_k1[i] - b_at_k[i]) / gamma;
                break;
        }
        batch.inputs.push_back({double(p.k), p.x_k});
        batch.targets.push_back(std::move(tgt));
    }
    return batch;
}

struct DsbConfig {
    StepSchedule schedule;
    double ref_alpha = 0.0;  // reference drift f(x) = -alpha x
    LossVariant variant = LossVariant::DriftMatching;
    std::size_t n_ipf_iters = 8;
    std::size_t half_bridge_steps = 5000;
    std::size_t batch_size = 128;
    std::size_t cache_size = 2000;
    std::size_t refresh_every = 1000;
    AdamConfig adam;
    double ema_rate = 0.999;
    bool warm_start = true;
    bool first_iter_closed_form = true;
    bool skip_last_forward = false;
    bool use_ema_for_eval = true;
    std::size_t eval_samples = 2000;
    std::size_t eval_projections = 50;
    NetSpec net;
    SimOptions sim;

    void validate() const {
        if (schedule.n_steps() < 1) throw std::invalid_argument("dsb config: empty schedule");
        if (n_ipf_iters < 1) throw std::invalid_argument("dsb config: need >= 1 ipf iteration");
        if (batch_size < 1 || cache_size < 1 || refresh_every < 1)
            throw std::invalid_argument("dsb config: counts must be >= 1");
        if (!(adam.lr > 0.0)) throw std::invalid_argument("dsb config: learning rate must be > 0");
        if (!(ema_rate >= 0.0 && ema_rate < 1.0))
            throw std::invalid_argument("dsb config: ema rate must be in [0, 1)");
    }
};

using Sampler = std::function<Vec(Rng&)>;

struct DirectionState {
    Vec params;
    EmaParams ema;
    AdamState adam;
    bool trained = false;
    // score matching keeps every completed iteration's (EMA) parameters,
    // since the sampling drifts are sums over iterations
    std::vector<Vec> stack;
};

struct HalfBridgeDiag {
    std::size_t ipf_iter = 0;
    char direction = 'b';
    std::size_t grad_steps = 0;
    double first_loss = 0.0;
    double final_loss = 0.0;
    double wall_seconds = 0.0;
};

// Metrics of one evaluation pass. The headline numbers use the EMA
// parameters; the same statistics under the raw (non-averaged) parameters
// are recorded alongside.
struct IterEval {
    std::size_t ipf_iter = 0;
    double mean_err = 0.0;
    double var_err = 0.0;
    double cov_err = 0.0;  // deviation from oracle when known, estimate otherwise
    double sliced_w = 0.0;
    double raw_mean_err = 0.0;
    double raw_var_err = 0.0;
    double raw_cov_err = 0.0;
    double raw_sliced_w = 0.0;
};

// Ground truth for the Gaussian experiments; when present, evaluation
// reports deviations instead of raw estimates.
struct EvalOracle {
    Vec mean;
    Vec variance;
    double cross_cov01 = 0.0;
};

struct IpfRun {
    std::size_t iters_completed = 0;
    DirectionState backward;
    DirectionState forward;
    std::vector<HalfBridgeDiag> diags;
    std::vector<IterEval> evals;
};

class DsbTrainer {
public:
    DsbTrainer(DsbConfig cfg, Sampler data, Sampler prior, std::uint64_t seed)
        : cfg_(std::move(cfg)), data_(std::move(data)), prior_(std::move(prior)), root_(seed) {
        cfg_.validate();
        run_.backward.params.assign(cfg_.net.param_count(), 0.0);
        run_.forward.params.assign(cfg_.net.param_count(), 0.0);
        Rng init_b = root_.substream(0xb0);
        Rng init_f = root_.substream(0xf0);
        run_.backward.params = init_params(cfg_.net, init_b);
        run_.forward.params = init_params(cfg_.net, init_f);
        run_.backward.ema = EmaParams(run_.backward.params, cfg_.ema_rate);
        run_.forward.ema = EmaParams(run_.forward.params, cfg_.ema_rate);
        run_.backward.adam = AdamState(cfg_.net.param_count());
        run_.forward.adam = AdamState(cfg_.net.param_count());
    }

    const IpfRun& run() const { return run_; }
    IpfRun& run() { return run_; }
    const DsbConfig& config() const { return cfg_; }

    // Transition-mean map of the current forward model. Iteration 0 is the
    // bare reference dynamics: no learned parameters enter.
    DriftMap forward_map(bool use_ema) const {
        const ReferenceDrift ref{cfg_.ref_alpha};
        const StepSchedule sched = cfg_.schedule;
        if (cfg_.variant == LossVariant::ScoreMatching) {
            // f^n(k, x) = -alpha x + 2 sum_j [v^j(k, x) - u^j(k+1, x)]
            const std::vector<Vec> v_stack = run_.forward.stack;
            const std::vector<Vec> u_stack = run_.backward.stack;
            const NetSpec spec = cfg_.net;
            const std::size_t n = v_stack.size();
            return [ref, sched, v_stack, u_stack, spec, n](std::size_t k, const Vec& x) {
                Vec mean = ref.transition_mean(sched.gamma_after(k), x);
                const double g = sched.gamma_after(k);
                for (std::size_t j = 0; j < n; ++j) {
                    const Vec v = net_forward(v_stack[j], spec, double(k), x);
                    const Vec u = net_forward(u_stack[j], spec, double(k + 1), x);
                    for (std::size_t i = 0; i < x.size(); ++i)
                        mean[i] += 2.0 * g * (v[i] - u[i]);
                }
                return mean;
            };
        }
        if (!run_.forward.trained) {
            return [ref, sched](std::size_t k, const Vec& x) {
                return ref.transition_mean(sched.gamma_after(k), x);
            };
        }
        const Vec params = use_ema ? run_.forward.ema.shadow : run_.forward.params;
        const NetSpec spec = cfg_.net;
        if (cfg_.variant == LossVariant::MeanMatching)
            return [params, spec](std::size_t k, const Vec& x) {
                return net_forward(params, spec, double(k), x);
            };
        return [params, spec, sched](std::size_t k, const Vec& x) {  // drift matching
            Vec f = net_forward(params, spec, double(k), x);
            const double g = sched.gamma_after(k);
            Vec mean = x;
            axpy(g, f, mean);
            return mean;
        };
    }

    // Transition-mean map of the current backward model; the map argument is
    // the index k being left (valid k in [1, N]).
    DriftMap backward_map(bool use_ema) const {
        const StepSchedule sched = cfg_.schedule;
        const NetSpec spec = cfg_.net;
        if (cfg_.variant == LossVariant::ScoreMatching) {
            // b^n(k, x) = alpha x + 2 sum_{j<=n} u^j(k, x) - 2 sum_{j<n} v^j(k-1, x)
            const std::vector<Vec> u_stack = run_.backward.stack;
            std::vector<Vec> v_stack = run_.forward.stack;
            if (u_stack.empty()) throw std::logic_error("backward_map: no trained backward net");
            if (v_stack.size() >= u_stack.size()) v_stack.resize(u_stack.size() - 1);
            const double alpha = cfg_.ref_alpha;
            return [alpha, sched, u_stack, v_stack, spec](std::size_t k, const Vec& x) {
                const double g = sched.gamma_before(k);
                Vec mean = x;
                for (std::size_t i = 0; i < x.size(); ++i) mean[i] += g * alpha * x[i];
                for (const auto& u : u_stack) {
                    const Vec s = net_forward(u, spec, double(k), x);
                    axpy(2.0 * g, s, mean);
                }
                for (const auto& v : v_stack) {
                    const Vec s = net_forward(v, spec, double(k - 1), x);
                    axpy(-2.0 * g, s, mean);
                }
                return mean;
            };
        }
        if (!run_.backward.trained) throw std::logic_error("backward_map: no trained backward net");
        const Vec params = use_ema ? run_.backward.ema.shadow : run_.backward.params;
        if (cfg_.variant == LossVariant::MeanMatching)
            return [params, spec](std::size_t k, const Vec& x) {
                return net_forward(params, spec, double(k), x);
            };
        return [params, spec, sched](std::size_t k, const Vec& x) {  // drift matching
            Vec b = net_forward(params, spec, double(k), x);
            const double g = sched.gamma_before(k);
            Vec mean = x;
            axpy(g, b, mean);
            return mean;
        };
    }

    HalfBridgeDiag train_backward(std::size_t iter) {
        return train_half_bridge('b', iter);
    }
    HalfBridgeDiag train_forward(std::size_t iter) {
        return train_half_bridge('f', iter);
    }

    // One half-bridge: cfg.half_bridge_steps Adam steps on cached-minibatch
    // losses, cache refreshed every cfg.refresh_every steps.
    HalfBridgeDiag train_half_bridge(char direction, std::size_t iter) {
        const auto t0 = std::chrono::steady_clock::now();
        DirectionState& self = direction == 'b' ? run_.backward : run_.forward;
        Rng iter_rng = root_.substream(1 + iter).substream(direction == 'b' ? 1 : 2);

        if (!cfg_.warm_start && self.trained) {
            Rng re = iter_rng.substream(0xc01d);
            self.params = init_params(cfg_.net, re);
        }
        self.ema = EmaParams(self.params, cfg_.ema_rate);
        self.adam = AdamState(self.params.size());

        const DriftMap other = direction == 'b' ? forward_map(true) : backward_map(true);
        const bool closed_form = direction == 'b' && iter == 0 && cfg_.first_iter_closed_form;

        HalfBridgeDiag diag;
        diag.ipf_iter = iter;
        diag.direction = direction;
        TrajectoryCache cache;
        Vec grad;
        const std::size_t window = std::min<std::size_t>(50, std::max<std::size_t>(cfg_.half_bridge_steps, 1));
        double first_acc = 0.0, last_acc = 0.0;
        std::size_t first_n = 0, last_n = 0;

        for (std::size_t step = 0; step < cfg_.half_bridge_steps; ++step) {
            std::vector<CachePair> pairs;
            if (closed_form) {
                pairs = closed_form_pairs(iter_rng.substream(3).substream(step));
            } else {
                if (cache.n_traj == 0 || cache.stale()) {
                    const std::size_t epoch = step / cfg_.refresh_every;
                    cache = build_cache(direction, other, iter_rng.substream(4).substream(epoch));
                }
                Rng mb = iter_rng.substream(5).substream(step);
                pairs = cache_minibatch(cache, cfg_.batch_size, mb);
                cache.age++;
            }
            RegressionBatch batch = direction == 'b'
                                        ? backward_targets(cfg_.variant, pairs, other, cfg_.schedule)
                                        : forward_targets(cfg_.variant, pairs, other, cfg_.schedule);
            const double loss =
                batch_loss_grad(self.params, cfg_.net, batch.inputs, batch.targets, grad);
            if (!std::isfinite(loss))
                throw std::runtime_error("train_half_bridge: non-finite loss at step " +
                                         std::to_string(step));
            adam_update(self.params, grad, self.adam, cfg_.adam);
            ema_update(self.ema, self.params);
            if (step < window) {
                first_acc += loss;
                first_n++;
            }
            if (step + window >= cfg_.half_bridge_steps) {
                last_acc += loss;
                last_n++;
            }
        }
        self.trained = true;
        if (cfg_.variant == LossVariant::ScoreMatching && cfg_.half_bridge_steps > 0) {
            if (self.stack.size() <= iter) self.stack.resize(iter + 1);
            self.stack[iter] = cfg_.use_ema_for_eval ? self.ema.shadow : self.params;
        }
        diag.grad_steps = cfg_.half_bridge_steps;
        diag.first_loss = first_n ? first_acc / double(first_n) : 0.0;
        diag.final_loss = last_n ? last_acc / double(last_n) : 0.0;
        diag.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        run_.diags.push_back(diag);
        return diag;
    }

    // Evaluation after a backward half-bridge: generate from the prior and
    // compare against a fresh data sample (or the oracle when given). The
    // pass runs twice, once with the EMA parameters and once with the raw
    // ones, on identical draws.
    IterEval evaluate(std::size_t iter, const EvalOracle* oracle = nullptr) {
        Rng eval_rng = root_.substream(1 + iter).substream(7);
        Rng data_rng = eval_rng.substream(1);
        std::vector<Vec> data(cfg_.eval_samples);
        for (auto& x : data) x = data_(data_rng);

        IterEval ev;
        ev.ipf_iter = iter;
        for (bool use_ema : {true, false}) {
            Rng gen_rng = eval_rng;  // same prior draws and path noise
            std::vector<Vec> terminal;
            std::vector<Vec> gen =
                generate_with(backward_map(use_ema), cfg_.eval_samples, gen_rng, &terminal);
            GaussStats gs = empirical_gauss_stats(gen, &terminal);
            double mean_err = 0.0, var_err = 0.0, cov_err = 0.0;
            if (oracle) {
                for (std::size_t i = 0; i < gs.mean.size(); ++i) {
                    mean_err = std::max(mean_err, std::abs(gs.mean[i] - oracle->mean[i]));
                    var_err = std::max(var_err, std::abs(gs.variance[i] - oracle->variance[i]));
                }
                cov_err = std::abs(gs.cross_cov01 - oracle->cross_cov01);
            } else {
                GaussStats ds = empirical_gauss_stats(data);
                for (std::size_t i = 0; i < gs.mean.size(); ++i) {
                    mean_err = std::max(mean_err, std::abs(gs.mean[i] - ds.mean[i]));
                    var_err = std::max(var_err, std::abs(gs.variance[i] - ds.variance[i]));
                }
                cov_err = gs.cross_cov01;
            }
            Rng sw_rng = eval_rng.substream(2);
            const double sw = sliced_wasserstein(gen, data, cfg_.eval_projections, sw_rng);
            if (use_ema) {
                ev.mean_err = mean_err;
                ev.var_err = var_err;
                ev.cov_err = cov_err;
                ev.sliced_w = sw;
            } else {
                ev.raw_mean_err = mean_err;
                ev.raw_var_err = var_err;
                ev.raw_cov_err = cov_err;
                ev.raw_sliced_w = sw;
            }
        }
        run_.evals.push_back(ev);
        return ev;
    }

    // Draws from the current backward model, with the terminal points that
    // produced them (for coupling statistics).
    std::vector<Vec> generate_samples(std::size_t n, Rng& rng,
                                      std::vector<Vec>* terminal = nullptr) {
        return generate_with(backward_map(cfg_.use_ema_for_eval), n, rng, terminal);
    }

    std::vector<Vec> generate_with(const DriftMap& bwd, std::size_t n, Rng& rng,
                                   std::vector<Vec>* terminal = nullptr) {
        std::vector<Vec> x_n(n);
        Rng prior_rng = rng.substream(0);
        for (auto& x : x_n) x = prior_(prior_rng);
        if (terminal) *terminal = x_n;
        Rng path_rng = rng.substream(1);
        auto trajs = em_backward(x_n, bwd, cfg_.schedule, path_rng, cfg_.sim);
        std::vector<Vec> out(n);
        for (std::size_t j = 0; j < n; ++j) out[j] = std::move(trajs[j].states[0]);
        return out;
    }

private:
    // Closed-form adjacent pairs under the reference chain (iteration 0):
    // the discrete chain X_{k+1} = (1 - gamma alpha) X_k + sqrt(2 gamma) Z
    // has Gaussian prefix law X_k = A_k X_0 + sqrt(V_k) xi, so a random step
    // k can be sampled without simulating the whole path.
    std::vector<CachePair> closed_form_pairs(Rng rng) {
        const std::size_t n = cfg_.schedule.n_steps();
        if (prefix_a_.empty()) {
            prefix_a_.assign(n + 1, 1.0);
            prefix_v_.assign(n + 1, 0.0);
            for (std::size_t k = 0; k < n; ++k) {
                const double g = cfg_.schedule.gamma_after(k);
                const double c = 1.0 - g * cfg_.ref_alpha;
                prefix_a_[k + 1] = c * prefix_a_[k];
                prefix_v_[k + 1] = c * c * prefix_v_[k] + 2.0 * g;
            }
        }
        std::vector<CachePair> pairs(cfg_.batch_size);
        for (auto& p : pairs) {
            p.k = rng.uniform_index(n);
            p.j = 0;
            const Vec x0 = data_(rng);
            const double sd = std::sqrt(prefix_v_[p.k]);
            p.x_k.resize(x0.size());
            for (std::size_t i = 0; i < x0.size(); ++i)
                p.x_k[i] = prefix_a_[p.k] * x0[i] + sd * rng.normal();
            const double g = cfg_.schedule.gamma_after(p.k);
            const double c = 1.0 - g * cfg_.ref_alpha;
            const double step_sd = std::sqrt(2.0 * g);
            p.x_k1.resize(x0.size());
            for (std::size_t i = 0; i < x0.size(); ++i)
                p.x_k1[i] = c * p.x_k[i] + step_sd * rng.normal();
        }
        return pairs;
    }

    TrajectoryCache build_cache(char direction, const DriftMap& other, Rng rng) {
        const auto& sched = cfg_.schedule;
        const auto& sim = cfg_.sim;
        if (direction == 'b') {
            auto sampler = [&](Rng& stream) {
                Vec x0 = data_(stream);
                Rng path = stream.substream(1);
                return em_forward({std::move(x0)}, other, sched, path, sim)[0];
            };
            return cache_build(sampler, cfg_.cache_size, sched, rng, cfg_.refresh_every);
        }
        auto sampler = [&](Rng& stream) {
            Vec xn = prior_(stream);
            Rng path = stream.substream(1);
            return em_backward({std::move(xn)}, other, sched, path, sim)[0];
        };
        return cache_build(sampler, cfg_.cache_size, sched, rng, cfg_.refresh_every);
    }

    DsbConfig cfg_;
    Sampler data_;
    Sampler prior_;
    Rng root_;
    IpfRun run_;
    Vec prefix_a_, prefix_v_;
};

// Alternating half bridges, Algorithm 1 shape: iteration n trains the
// backward net against the current forward model, then the forward net
// against the new backward model. The final forward half-bridge can be
// skipped when only generation is needed.
inline IpfRun run_dsb(const DsbConfig& cfg, Sampler data, Sampler prior, std::uint64_t seed,
                      const EvalOracle* oracle = nullptr,
                      const std::function<void(DsbTrainer&, std::size_t, char)>& on_half_bridge = {}) {
    DsbTrainer trainer(cfg, std::move(data), std::move(prior), seed);
    for (std::size_t iter = 0; iter < cfg.n_ipf_iters; ++iter) {
        trainer.train_backward(iter);
        trainer.evaluate(iter, oracle);
        trainer.run().iters_completed = iter + 1;
        if (on_half_bridge) on_half_bridge(trainer, iter, 'b');
        if (iter + 1 == cfg.n_ipf_iters && cfg.skip_last_forward) break;
        trainer.train_forward(iter);
        if (on_half_bridge) on_half_bridge(trainer, iter, 'f');
    }
    return trainer.run();
}

// Approximate draws from p_data: X_N ~ prior, then the backward transitions.
inline std::vector<Vec> generate(const DriftMap& bwd_map, std::size_t n_samples, Sampler prior,
                                 const StepSchedule& sched, Rng& rng, SimOptions opt = {},
                                 std::vector<Vec>* terminal = nullptr) {
    std::vector<Vec> x_n(n_samples);
    Rng prior_rng = rng.substream(0);
    for (auto& x : x_n) x = prior(prior_rng);
    if (terminal) *terminal = x_n;
    Rng path_rng = rng.substream(1);
    auto trajs = em_backward(x_n, bwd_map, sched, path_rng, opt);
    std::vector<Vec> out(n_samples);
    for (std::size_t j = 0; j < n_samples; ++j) out[j] = std::move(trajs[j].states[0]);
    return out;
}

// States of the backward chain recorded at the requested times, which must
// lie on the schedule grid.
inline std::vector<std::vector<Vec>> marginal_snapshots(const DriftMap& bwd_map,
                                                        const StepSchedule& sched,
                                                        const std::vector<double>& times,
                                                        std::size_t n_samples, Sampler prior,
                                                        Rng& rng, SimOptions opt = {}) {
    std::vector<std::size_t> ks;
    for (double t : times) {
        bool found = false;
        for (std::size_t k = 0; k < sched.times.size(); ++k)
            if (std::abs(sched.times[k] - t) <= 1e-9 * std::max(1.0, std::abs(t))) {
                ks.push_back(k);
                found = true;
                break;
            }
        if (!found)
            throw std::invalid_argument("marginal_snapshots: time " + std::to_string(t) +
                                        " is not on the schedule grid");
    }
    std::vector<Vec> x_n(n_samples);
    Rng prior_rng = rng.substream(0);
    for (auto& x : x_n) x = prior(prior_rng);
    Rng path_rng = rng.substream(1);
    auto trajs = em_backward(x_n, bwd_map, sched, path_rng, opt);
    std::vector<std::vector<Vec>> out(times.size());
    for (std::size_t s = 0; s < ks.size(); ++s) {
        out[s].resize(n_samples);
        for (std::size_t j = 0; j < n_samples; ++j) out[s][j] = trajs[j].states[ks[s]];
    }
    return out;
}

// Deterministic latent interpolation: X_N = (1 - lambda) a + lambda b, one
// shared noise realization across every lambda. Lambdas outside [0, 1] are
// permitted (extrapolation) and flagged through the optional out-parameter.
inline std::vector<Vec> latent_interpolate(const DriftMap& bwd_map, const Vec& xn_a,
                                           const Vec& xn_b, const std::vector<double>& lambdas,
                                           std::uint64_t noise_seed, const StepSchedule& sched,
                                           SimOptions opt = {}, bool* extrapolated = nullptr) {
    if (extrapolated) {
        *extrapolated = false;
        for (double l : lambdas)
            if (l < 0.0 || l > 1.0) *extrapolated = true;
    }
    const std::size_t n = sched.n_steps(), d = xn_a.size();
    std::vector<Vec> noise(n, Vec(d));
    Rng noise_rng(noise_seed);
    for (auto& z : noise) z = gaussian_vector(noise_rng, d);

    std::vector<Vec> out;
    out.reserve(lambdas.size());
    for (double lambda : lambdas) {
        Vec x(d);
        for (std::size_t i = 0; i < d; ++i) x[i] = (1.0 - lambda) * xn_a[i] + lambda * xn_b[i];
        for (std::size_t k = n; k >= 1; --k) {
            Vec next = bwd_map(k, x);
            const double s = opt.noise_scale * std::sqrt(2.0 * sched.gamma_before(k));
            for (std::size_t i = 0; i < d; ++i) next[i] += s * noise[k - 1][i];
            detail::check_state(next, k - 1, opt.max_norm, "backward");
            x = std::move(next);
        }
        out.push_back(std::move(x));
    }
    return out;
}

}  // namespace dsb
