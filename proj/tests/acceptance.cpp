// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Slow criteria print progress to stderr.

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "dsbridge/bridge.hpp"
#include "dsbridge/config.hpp"
#include "dsbridge/datasets.hpp"
#include "dsbridge/flow.hpp"
#include "dsbridge/gauss.hpp"
#include "dsbridge/metrics.hpp"
#include "dsbridge/sinkhorn.hpp"

using namespace dsb;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s  (%s)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

// ---------------------------------------------------------------- 1
void criterion_gauss_ipf_rate() {
    const double alpha = 0.5, beta = 1.0;
    const double gstar = gauss_ipf_fixed_point(alpha, beta);
    const double kappa = gauss_ipf_rate(alpha, beta);
    double g = 0.0;
    double err_at_100 = 1.0, max_tail_ratio = 0.0;
    double prev_err = std::abs(g - gstar);
    for (int n = 1; n <= 100; ++n) {
        g = gauss_ipf_step(g, alpha, beta);
        const double err = std::abs(g - gstar);
        if (n >= 5 && prev_err >= 1e-13 && err >= 1e-13)
            max_tail_ratio = std::max(max_tail_ratio, err / prev_err);
        prev_err = err;
        if (n == 100) err_at_100 = err;
    }
    const bool pass = err_at_100 <= 1e-12 && max_tail_ratio <= kappa * kappa + 1e-3;
    report(1, "gaussian IPF geometric rate", pass,
           "err@100 = " + fmt(err_at_100) + ", tail ratio " + fmt(max_tail_ratio) +
               " <= " + fmt(kappa * kappa + 1e-3));
}

// ---------------------------------------------------------------- 2
void criterion_stationarity() {
    Rng rng(2024);
    int checked = 0;
    bool pass = true;
    double worst = 0.0;
    while (checked < 10) {
        const std::uint64_t k = 1 + rng.uniform_index(63);
        const double alpha = double(k) / 64.0;  // alpha^2 and 1 - alpha^2 are exact dyadics
        const double a2 = alpha * alpha;
        const double target = 1.0 - a2;
        double beta = std::sqrt(target);
        bool found = beta * beta == target;
        for (int d = 1; d <= 4 && !found; ++d) {
            double up = beta, dn = beta;
            for (int i = 0; i < d; ++i) {
                up = std::nextafter(up, 2.0);
                dn = std::nextafter(dn, 0.0);
            }
            if (up * up == target) {
                beta = up;
                found = true;
            } else if (dn * dn == target) {
                beta = dn;
                found = true;
            }
        }
        if (!found) continue;  // no double squares to 1 - alpha^2; try another alpha
        ++checked;
        double g = 0.0;
        for (int n = 0; n < 50; ++n) {
            g = gauss_ipf_step(g, alpha, beta);
            worst = std::max(worst, std::abs(g));
            if (g != 0.0) pass = false;
        }
    }
    report(2, "IPF stationary when beta^2 = 1 - alpha^2", pass,
           "10 instances, max |gamma_n| = " + fmt(worst));
}

// ---------------------------------------------------------------- 3
void criterion_discrete_monotonicity() {
    Rng root(7);
    bool pass = true;
    std::string detail;
    double worst_tv = 0.0;
    for (int seed = 0; seed < 50; ++seed) {
        Rng rng = root.substream(seed);
        const std::size_t n = 30;
        auto random_simplex = [&](std::size_t m) {
            Vec p(m);
            double z = 0.0;
            for (auto& x : p) {
                x = rng.uniform(0.05, 1.0);
                z += x;
            }
            for (auto& x : p) x /= z;
            return p;
        };
        Vec mu0 = random_simplex(n), nu1 = random_simplex(n);
        Mat kernel(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            double z = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                kernel(i, j) = rng.uniform(0.05, 1.0);
                z += kernel(i, j);
            }
            for (std::size_t j = 0; j < n; ++j) kernel(i, j) /= z;
        }
        Vec mu1(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) mu1[j] += mu0[i] * kernel(i, j);
        Mat h(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) h(i, j) = kernel(i, j) / mu1[j];

        auto res = run_discrete_ipf(h, mu0, mu1, mu0, nu1, 2000, 1e-10);
        if (!res.converged) {
            pass = false;
            detail = "seed " + std::to_string(seed) + " did not converge";
            break;
        }
        worst_tv = std::max(worst_tv,
                            std::max(res.trace.back().tv_marg0, res.trace.back().tv_marg1));
        auto rep = check_monotonicity(res.trace, 1e-12);
        if (!rep.ok()) {
            pass = false;
            detail = "seed " + std::to_string(seed) + " violated monotonicity";
            break;
        }
    }
    if (pass) detail = "50 kernels, worst converged marginal TV = " + fmt(worst_tv);
    report(3, "discrete IPF monotonicity (Prop 4 family)", pass, detail);
}

// ---------------------------------------------------------------- 4
void criterion_static_sb() {
    auto grid = make_uniform_grid(-5.1, 5.1, 60);
    auto c = discretize_gaussian_case(0.1, grid, 1.0);
    auto res = run_discrete_ipf(c.h, c.mu0, c.mu1, c.nu0, c.nu1, 4000, 1e-12);
    auto sb = brownian_sb({0.1});

    Mat analytic(60, 60);
    double mass = 0.0;
    for (std::size_t i = 0; i < 60; ++i)
        for (std::size_t j = 0; j < 60; ++j) {
            analytic(i, j) = sb.density({grid.points[i]}, {grid.points[j]}) * grid.weights[i] *
                             grid.weights[j];
            mass += analytic(i, j);
        }
    for (auto& v : analytic.data) v /= mass;
    double l1 = 0.0;
    for (std::size_t i = 0; i < res.coupling.data.size(); ++i)
        l1 += std::abs(res.coupling.data[i] - analytic.data[i]);

    double mx = 0.0, my = 0.0, vx = 0.0, vy = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < 60; ++i)
        for (std::size_t j = 0; j < 60; ++j) {
            mx += res.coupling(i, j) * grid.points[i];
            my += res.coupling(i, j) * grid.points[j];
        }
    for (std::size_t i = 0; i < 60; ++i)
        for (std::size_t j = 0; j < 60; ++j) {
            const double dx = grid.points[i] - mx, dy = grid.points[j] - my;
            vx += res.coupling(i, j) * dx * dx;
            vy += res.coupling(i, j) * dy * dy;
            cov += res.coupling(i, j) * dx * dy;
        }
    const double corr = cov / std::sqrt(vx * vy);
    const bool pass =
        res.converged && l1 <= 0.02 && std::abs(corr - sb.beta_sb) <= 0.01;
    report(4, "static SB ground truth on the grid (Prop 46)", pass,
           "L1 = " + fmt(l1) + ", corr = " + fmt(corr) + " vs " + fmt(sb.beta_sb));
}

// ---------------------------------------------------------------- 5
DsbConfig gauss_bridge_config(std::size_t d) {
    DsbConfig cfg;
    cfg.schedule = make_uniform_schedule(20, 1.0 / 40.0);  // 2T = 1
    cfg.ref_alpha = 0.0;
    cfg.variant = LossVariant::DriftMatching;
    cfg.n_ipf_iters = 8;
    cfg.half_bridge_steps = 5000;
    cfg.batch_size = 128;
    cfg.cache_size = 2000;
    cfg.refresh_every = 1000;
    cfg.adam.lr = 3e-4;
    cfg.eval_samples = 20000;
    cfg.eval_projections = 20;
    cfg.net.input_dim = d;
    return cfg;
}

void criterion_dsb_gaussian_bridge() {
    bool pass = true;
    std::string detail;
    for (std::size_t d : {std::size_t(2), std::size_t(5)}) {
        std::fprintf(stderr, "  [criterion 5] training d = %zu...\n", d);
        DsbConfig cfg = gauss_bridge_config(d);
        const double a = 0.1;
        Sampler data = [d, a](Rng& rng) {
            Vec x = gaussian_vector(rng, d);
            for (auto& v : x) v += a;
            return x;
        };
        Sampler prior = [d, a](Rng& rng) {
            Vec x = gaussian_vector(rng, d);
            for (auto& v : x) v -= a;
            return x;
        };
        EvalOracle oracle;
        oracle.mean.assign(d, a);
        oracle.variance.assign(d, 1.0);
        oracle.cross_cov01 = (std::sqrt(5.0) - 1.0) / 2.0;
        auto run = run_dsb(cfg, data, prior, 17, &oracle);
        const IterEval& first = run.evals.front();
        const IterEval& last = run.evals.back();
        const bool ok = last.mean_err <= 0.05 && last.var_err <= 0.05 && last.cov_err <= 0.05 &&
                        last.var_err < first.var_err && last.cov_err < first.cov_err;
        detail += "d=" + std::to_string(d) + ": mean_err " + fmt(last.mean_err) + ", var_err " +
                  fmt(last.var_err) + " (iter0 " + fmt(first.var_err) + "), cov_err " +
                  fmt(last.cov_err) + " (iter0 " + fmt(first.cov_err) + "); ";
        pass = pass && ok;
    }
    report(5, "DSB recovers the gaussian bridge (d = 2, 5)", pass, detail);
}

// ---------------------------------------------------------------- 6
void criterion_sgm_oracle() {
    std::fprintf(stderr, "  [criterion 6] training iteration-0 backward map...\n");
    const std::size_t d = 2;
    const double alpha = 1.0, a = 0.1;
    DsbConfig cfg;
    cfg.schedule = make_uniform_schedule(20, 1.0 / 40.0);
    cfg.ref_alpha = alpha;
    cfg.variant = LossVariant::DriftMatching;
    cfg.half_bridge_steps = 8000;
    cfg.batch_size = 128;
    cfg.adam.lr = 1e-3;
    cfg.net.input_dim = d;
    Sampler data = [a](Rng& rng) {
        Vec x = gaussian_vector(rng, 2);
        for (auto& v : x) v += a;
        return x;
    };
    Sampler prior = [](Rng& rng) { return gaussian_vector(rng, 2); };
    DsbTrainer trainer(cfg, data, prior, 23);
    trainer.train_backward(0);
    DriftMap bwd = trainer.backward_map(true);

    // exact per-step joint of the reference EM chain from N(a, I)
    const double gamma = 1.0 / 40.0;
    const double step_c = 1.0 - gamma * alpha;
    double mean_k = a, var_k = 1.0;
    double sup_err = 0.0;
    for (std::size_t k = 0; k < 20; ++k) {
        const double mean_k1 = step_c * mean_k;
        const double var_k1 = step_c * step_c * var_k + 2.0 * gamma;
        GaussianDist joint;  // (X_k, X_{k+1}) per coordinate, coordinates iid
        joint.mean = {mean_k, mean_k, mean_k1, mean_k1};
        joint.cov = Mat(4, 4);
        for (int i = 0; i < 2; ++i) {
            joint.cov(i, i) = var_k;
            joint.cov(2 + i, 2 + i) = var_k1;
            joint.cov(i, 2 + i) = joint.cov(2 + i, i) = step_c * var_k;
        }
        auto oracle = gauss_conditional_map(joint, 2);
        for (double x1 = -3.0; x1 <= 3.0 + 1e-9; x1 += 0.5)
            for (double x2 = -3.0; x2 <= 3.0 + 1e-9; x2 += 0.5) {
                const Vec x = {x1, x2};
                const Vec want = oracle(x);
                const Vec got = bwd(k + 1, x);
                for (int i = 0; i < 2; ++i)
                    sup_err = std::max(sup_err, std::abs(got[i] - want[i]));
            }
        mean_k = mean_k1;
        var_k = var_k1;
    }
    report(6, "iteration-0 backward map matches the affine conditional mean", sup_err <= 0.05,
           "sup error on [-3,3]^2 over all steps = " + fmt(sup_err));
}

// ---------------------------------------------------------------- 7
void criterion_toy_improvement() {
    bool pass = true;
    std::string detail;
    for (const char* name : {"two_moons", "circles"}) {
        for (std::uint64_t seed : {101, 202, 303}) {
            std::fprintf(stderr, "  [criterion 7] %s seed %llu...\n", name,
                         (unsigned long long)seed);
            DatasetSpec spec;
            spec.name = name;
            spec.noise = 0.05;
            Rng fit_rng(seed);
            auto fit_sample = sample_dataset(spec, 4096, fit_rng);
            PriorSpec prior_spec = prior_from_data(fit_sample, 1.0);

            DsbConfig cfg;
            cfg.schedule = make_uniform_schedule(20, 0.01);  // T = 0.2
            cfg.ref_alpha = prior_spec.matched_alpha();
            cfg.variant = LossVariant::DriftMatching;
            cfg.n_ipf_iters = 5;
            cfg.half_bridge_steps = 2000;
            cfg.batch_size = 128;
            cfg.cache_size = 2000;
            cfg.refresh_every = 500;
            cfg.adam.lr = 1e-3;
            cfg.eval_samples = 2000;
            cfg.net.input_dim = 2;
            cfg.skip_last_forward = true;

            Sampler data = [spec](Rng& rng) { return sample_point(spec, rng); };
            Sampler prior = [prior_spec](Rng& rng) { return prior_spec.sample(rng); };

            // paired comparison: same prior draws, paths and projections for
            // the iteration-1 and iteration-5 models
            std::vector<Vec> at_iter1, at_iter5;
            auto callback = [&](DsbTrainer& t, std::size_t iter, char dir) {
                if (dir != 'b') return;
                if (iter == 0 || iter == 4) {
                    Rng gen_rng(977);
                    auto samples = t.generate_samples(2000, gen_rng);
                    (iter == 0 ? at_iter1 : at_iter5) = samples;
                }
            };
            run_dsb(cfg, data, prior, seed, nullptr, callback);

            Rng data_rng(555);
            auto target = sample_dataset(spec, 2000, data_rng);
            Rng sw1(777), sw5(777);
            const double d1 = sliced_wasserstein(at_iter1, target, 50, sw1);
            const double d5 = sliced_wasserstein(at_iter5, target, 50, sw5);
            detail += std::string(name) + "/" + std::to_string(seed) + ": " + fmt(d1) + " -> " +
                      fmt(d5) + "; ";
            if (!(d5 < d1)) pass = false;
        }
    }
    report(7, "sliced Wasserstein improves from iteration 1 to 5", pass, detail);
}

// ---------------------------------------------------------------- 8
void criterion_gradient_exactness() {
    Rng rng(31);
    double max_rel = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        Rng sub = rng.substream(rep);
        NetSpec spec;
        spec.input_dim = 1 + sub.uniform_index(3);
        spec.enc_dim = 2 * (1 + sub.uniform_index(4));
        spec.state_widths = {3 + sub.uniform_index(8), 3 + sub.uniform_index(8)};
        spec.time_widths = {3 + sub.uniform_index(8)};
        spec.head_widths = {4 + sub.uniform_index(12)};
        spec.zero_init_head = false;
        spec.act = rep % 3 == 0   ? Activation::Tanh
                   : rep % 3 == 1 ? Activation::LeakyRelu
                                  : Activation::Relu;
        Vec params = init_params(spec, sub);
        std::vector<std::pair<double, Vec>> in;
        std::vector<Vec> tgt;
        for (int b = 0; b < 3; ++b) {
            in.push_back({double(sub.uniform_index(10)), gaussian_vector(sub, spec.input_dim)});
            tgt.push_back(gaussian_vector(sub, spec.input_dim));
        }
        Vec grad;
        batch_loss_grad(params, spec, in, tgt, grad);
        for (std::size_t i = 0; i < params.size(); i += 3) {
            const double h = 1e-5;
            Vec scratch;
            Vec p = params;
            p[i] += h;
            const double lp = batch_loss_grad(p, spec, in, tgt, scratch);
            p[i] -= 2 * h;
            const double lm = batch_loss_grad(p, spec, in, tgt, scratch);
            const double fd = (lp - lm) / (2 * h);
            const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
            max_rel = std::max(max_rel, std::abs(grad[i] - fd) / denom);
        }
    }
    report(8, "analytic gradients vs central finite differences", max_rel <= 1e-4,
           "20 triples, max relative error = " + fmt(max_rel));
}

// ---------------------------------------------------------------- 9
void criterion_likelihood() {
    bool pass = true;
    std::string detail;

    // stationary OU: f = b, zero rhs and zero divergence
    {
        const double alpha = 2.0;
        FlowField field;
        field.f = [alpha](double, const Vec& x) {
            Vec v = x;
            for (auto& c : v) c *= -alpha;
            return v;
        };
        field.b = field.f;
        auto sched = make_uniform_schedule(64, 0.01);
        auto log_prior = [alpha](const Vec& x) {
            double s = 0.0;
            for (double c : x)
                s += -0.5 * std::log(2.0 * 3.141592653589793 / alpha) - 0.5 * c * c * alpha;
            return s;
        };
        const Vec x = {0.3, -1.1};
        auto res = log_likelihood(field, sched, x, FlowDirection::FromData, log_prior);
        const double dev = std::abs(res.log_lik - log_prior(x));
        detail += "stationary dev " + fmt(dev) + "; ";
        pass = pass && dev <= 1e-12;
    }

    // closed brownian case at N = 200 within 1e-2, first-order convergence
    {
        FlowField field;
        field.f = [](double, const Vec& x) { return Vec(x.size(), 0.0); };
        field.b = [](double t, const Vec& x) {
            Vec v = x;
            for (auto& c : v) c *= -2.0 / (1.0 + 2.0 * t);
            return v;
        };
        auto log_prior = [](const Vec& x) {
            return -0.5 * std::log(2.0 * 3.141592653589793 * 2.0) - 0.25 * x[0] * x[0];
        };
        const Vec x = {0.8};
        const double want = -0.5 * std::log(2.0 * 3.141592653589793) - 0.5 * 0.64;
        auto r200 = log_likelihood(field, make_uniform_schedule(200, 0.0025), x,
                                   FlowDirection::FromData, log_prior);
        auto r100 = log_likelihood(field, make_uniform_schedule(100, 0.005), x,
                                   FlowDirection::FromData, log_prior);
        const double e200 = std::abs(r200.log_lik - want);
        const double e100 = std::abs(r100.log_lik - want);
        detail += "closed case err " + fmt(e200) + ", halving ratio " + fmt(e100 / e200) + "; ";
        pass = pass && e200 <= 1e-2 && e100 / e200 > 1.5 && e100 / e200 < 2.7;
    }

    // Hutchinson at 1024 probes: linear field and a trained drift-net field
    {
        Mat a(3, 3);
        Rng rng(41);
        for (auto& v : a.data) v = rng.normal();
        VectorField lin = [&a](const Vec& x) { return matvec(a, x); };
        const double trace = a(0, 0) + a(1, 1) + a(2, 2);
        Rng prng(42);
        auto est = divergence_hutchinson(lin, {0.1, 0.2, -0.3}, 1024, prng);
        const bool lin_ok = std::abs(est.estimate - trace) <= 3.0 * est.std_error + 1e-9;
        detail += "linear |err|/se " +
                  fmt(std::abs(est.estimate - trace) / std::max(est.std_error, 1e-12)) + "; ";

        DsbConfig cfg;
        cfg.schedule = make_uniform_schedule(8, 0.02);
        cfg.ref_alpha = 1.0;
        cfg.variant = LossVariant::DriftMatching;
        cfg.half_bridge_steps = 400;
        cfg.batch_size = 64;
        cfg.adam.lr = 1e-3;
        cfg.net.input_dim = 2;
        cfg.net.enc_dim = 8;
        cfg.net.state_widths = {16};
        cfg.net.time_widths = {16};
        cfg.net.head_widths = {32};
        Sampler data = [](Rng& r) {
            Vec x = gaussian_vector(r, 2);
            for (auto& v : x) v += 0.3;
            return x;
        };
        Sampler prior = [](Rng& r) { return gaussian_vector(r, 2); };
        DsbTrainer trainer(cfg, data, prior, 43);
        trainer.train_backward(0);
        trainer.train_forward(0);
        auto field = flow_field_from_drift_nets(cfg.net, trainer.run().forward.ema.shadow,
                                                trainer.run().backward.ema.shadow, cfg.schedule);
        const double t = 0.05;
        const Vec x = {0.4, -0.2};
        VectorField rhs = [&field, t](const Vec& y) { return prob_flow_rhs(field, t, y); };
        const double exact = divergence_exact(rhs, x, 1e-5);
        Rng prng2(44);
        auto vjp = [&field, t](const Vec& y, const Vec& e) { return field.rhs_vjp(t, y, e); };
        auto est2 = divergence_hutchinson(rhs, x, 1024, prng2, vjp);
        const bool net_ok = std::abs(est2.estimate - exact) <= 3.0 * est2.std_error + 1e-9;
        detail += "net field |err| " + fmt(std::abs(est2.estimate - exact)) + " vs 3se " +
                  fmt(3.0 * est2.std_error);
        pass = pass && lin_ok && net_ok;
    }
    report(9, "probability-flow likelihood (Appendix H.3 cases)", pass, detail);
}

// ---------------------------------------------------------------- 10
void criterion_simulation_moments() {
    const double alpha = 1.0, horizon = 1.0;
    auto m = ou_moments(horizon, alpha);
    bool pass = true;
    std::string detail;
    double prev_exact_mean_err = 1e9, prev_exact_var_err = 1e9;
    bool decreasing = true;
    for (double gamma : {0.02, 0.01, 0.005}) {
        const std::size_t n_steps = std::size_t(std::lround(horizon / gamma));
        auto sched = make_uniform_schedule(n_steps, gamma);
        DriftMap fwd = reference_forward_map(ReferenceDrift{alpha}, sched);
        Rng rng(std::uint64_t(1e4 * gamma));
        const std::size_t n = 200000;
        std::vector<Vec> x0(n, Vec{1.0});
        auto trajs = em_forward(x0, fwd, sched, rng);
        double mean = 0.0, var = 0.0;
        for (auto& tr : trajs) mean += tr.states[n_steps][0] / double(n);
        for (auto& tr : trajs) {
            const double c = tr.states[n_steps][0] - mean;
            var += c * c / double(n - 1);
        }
        const double me = std::abs(mean - m.c), ve = std::abs(var - m.sigma2);
        pass = pass && me <= 3.0 * gamma && ve <= 3.0 * gamma;
        detail += "g=" + fmt(gamma) + ": me " + fmt(me) + ", ve " + fmt(ve) + "; ";

        // scheme error measured exactly through the moment recursion
        double em = 1.0, ev = 0.0;
        for (std::size_t k = 0; k < n_steps; ++k) {
            const double c = 1.0 - gamma * alpha;
            em *= c;
            ev = c * c * ev + 2.0 * gamma;
        }
        const double exact_me = std::abs(em - m.c), exact_ve = std::abs(ev - m.sigma2);
        if (!(exact_me < prev_exact_mean_err && exact_ve < prev_exact_var_err))
            decreasing = false;
        prev_exact_mean_err = exact_me;
        prev_exact_var_err = exact_ve;
    }
    pass = pass && decreasing;
    report(10, "EM moments match the OU closed form within 3 gamma", pass,
           detail + (decreasing ? "scheme error decreasing" : "scheme error NOT decreasing"));
}

// ---------------------------------------------------------------- 11
void criterion_mutual_information() {
    bool pass = true;
    std::string detail;
    for (double alpha : {0.3, 0.6}) {
        const double marg_sd = 1.0 / std::sqrt(2.0 * (1.0 - alpha * alpha));
        const double lim = 5.0 * marg_sd;
        const std::size_t n = 100;
        Vec x(n);
        for (std::size_t i = 0; i < n; ++i)
            x[i] = -lim + 2.0 * lim * double(i) / double(n - 1);
        Mat p(n, n);
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                p(i, j) = std::exp(-x[i] * x[i] + 2.0 * alpha * x[i] * x[j] - x[j] * x[j]);
                z += p(i, j);
            }
        for (auto& v : p.data) v /= z;
        Vec p0(n, 0.0), p1(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                p0[i] += p(i, j);
                p1[j] += p(i, j);
            }
        double kl = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (p(i, j) > 0.0) kl += p(i, j) * std::log(p(i, j) / (p0[i] * p1[j]));
        const double exact = mutual_information(alpha, 1);
        const double rel = std::abs(kl - exact) / exact;
        detail += "alpha=" + fmt(alpha) + ": rel err " + fmt(rel) + "; ";
        pass = pass && rel <= 0.02;
    }
    report(11, "mutual information matches the grid KL (Prop 44)", pass, detail);
}

}  // namespace

int main(int argc, char** argv) {
    const bool fast_only = argc > 1 && std::string(argv[1]) == "--fast";
    criterion_gauss_ipf_rate();
    criterion_stationarity();
    criterion_discrete_monotonicity();
    criterion_static_sb();
    criterion_gradient_exactness();
    criterion_likelihood();
    criterion_simulation_moments();
    criterion_mutual_information();
    if (!fast_only) {
        criterion_sgm_oracle();
        criterion_dsb_gaussian_bridge();
        criterion_toy_improvement();
    } else {
        std::printf("[SKIP] criteria 5, 6, 7 (--fast)\n");
    }
    if (failures) std::printf("%d criterion(s) FAILED\n", failures);
    else std::printf("all criteria passed\n");
    return failures == 0 ? 0 : 1;
}
