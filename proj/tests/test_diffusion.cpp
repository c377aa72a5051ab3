#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "dsbridge/diffusion.hpp"

using namespace dsb;

TEST_CASE("em_forward: one identity step is N(x0, 2 gamma I)") {
    auto sched = make_uniform_schedule(1, 0.02);
    DriftMap identity = [](std::size_t, const Vec& x) { return x; };
    Rng rng(4);
    const std::size_t n = 100000;
    std::vector<Vec> x0(n, Vec{1.5});
    auto trajs = em_forward(x0, identity, sched, rng);
    double mean = 0.0, var = 0.0;
    for (auto& tr : trajs) mean += tr.states[1][0] / double(n);
    for (auto& tr : trajs) {
        const double c = tr.states[1][0] - mean;
        var += c * c / double(n - 1);
    }
    const double sigma2 = 2.0 * 0.02;
    REQUIRE(std::abs(mean - 1.5) < 4.0 * std::sqrt(sigma2 / n));
    REQUIRE(std::abs(var - sigma2) < 4.0 * sigma2 * std::sqrt(2.0 / n));
}

TEST_CASE("em chains: zero-noise hook keeps identity chains constant") {
    auto sched = make_uniform_schedule(5, 0.1);
    DriftMap identity = [](std::size_t, const Vec& x) { return x; };
    SimOptions opt;
    opt.noise_scale = 0.0;
    Rng rng(1);
    auto fwd = em_forward({{0.3, -0.7}}, identity, sched, rng, opt);
    for (auto& s : fwd[0].states) REQUIRE(s == Vec{0.3, -0.7});
    auto bwd = em_backward({{0.3, -0.7}}, identity, sched, rng, opt);
    for (auto& s : bwd[0].states) REQUIRE(s == Vec{0.3, -0.7});
}

TEST_CASE("em_forward: OU reference matches closed-form moments within 3 gamma") {
    const double alpha = 1.0, gamma = 0.005;
    const std::size_t n_steps = 200;
    auto sched = make_uniform_schedule(n_steps, gamma);
    ReferenceDrift drift{alpha};
    DriftMap fwd = reference_forward_map(drift, sched);
    Rng rng(6);
    const std::size_t n = 50000;
    std::vector<Vec> x0(n, Vec{1.0});
    auto trajs = em_forward(x0, fwd, sched, rng);
    double mean = 0.0, var = 0.0;
    for (auto& tr : trajs) mean += tr.states[n_steps][0] / double(n);
    for (auto& tr : trajs) {
        const double c = tr.states[n_steps][0] - mean;
        var += c * c / double(n - 1);
    }
    auto m = ou_moments(sched.horizon(), alpha);
    REQUIRE(std::abs(mean - m.c) < 3.0 * gamma);
    REQUIRE(std::abs(var - m.sigma2) < 3.0 * gamma);
}

TEST_CASE("em_backward: identity drift accumulates brownian increments") {
    // B = identity: X_0 - X_N is a sum of N independent N(0, 2 gamma) draws
    auto sched = make_uniform_schedule(20, 0.01);
    DriftMap identity = [](std::size_t, const Vec& x) { return x; };
    Rng rng(7);
    const std::size_t n = 100000;
    std::vector<Vec> xn(n, Vec{0.0});
    auto trajs = em_backward(xn, identity, sched, rng);
    double var = 0.0;
    for (auto& tr : trajs) var += tr.states[0][0] * tr.states[0][0] / double(n);
    const double want = 2.0 * sched.horizon();
    REQUIRE(std::abs(var - want) < 4.0 * want * std::sqrt(2.0 / n));
}

TEST_CASE("em chains: divergence guard aborts with a diagnostic") {
    auto sched = make_uniform_schedule(50, 0.1);
    DriftMap blowup = [](std::size_t, const Vec& x) {
        Vec y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = 3.0 * x[i] + 1.0;
        return y;
    };
    Rng rng(9);
    SimOptions opt;
    opt.max_norm = 1e3;
    REQUIRE_THROWS_AS(em_forward({{1.0}}, blowup, sched, rng, opt), std::runtime_error);
}

TEST_CASE("ou_closed_form_sample") {
    Rng rng(10);
    // t = 0 returns x0 exactly
    Vec x = ou_closed_form_sample({1.0, -2.0}, 0.0, 1.0, rng);
    REQUIRE(x == Vec{1.0, -2.0});
    REQUIRE_THROWS_AS(ou_closed_form_sample({1.0}, -0.5, 1.0, rng), std::invalid_argument);

    // alpha = 1, t = ln 2: mean 0.5 x0, variance 0.75
    const std::size_t n = 100000;
    double mean = 0.0, var = 0.0;
    std::vector<double> draws(n);
    for (auto& v : draws) v = ou_closed_form_sample({2.0}, std::log(2.0), 1.0, rng)[0];
    for (double v : draws) mean += v / double(n);
    for (double v : draws) var += (v - mean) * (v - mean) / double(n - 1);
    REQUIRE(std::abs(mean - 1.0) < 4.0 * std::sqrt(0.75 / n));
    REQUIRE(std::abs(var - 0.75) < 4.0 * 0.75 * std::sqrt(2.0 / n));

    // alpha = 0, t = 0.5: variance 2t = 1
    double var0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = ou_closed_form_sample({0.0}, 0.5, 0.0, rng)[0];
        var0 += v * v / double(n);
    }
    REQUIRE(std::abs(var0 - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("cache: minibatch pairs equal the stored trajectory entries") {
    auto sched = make_uniform_schedule(8, 0.05);
    ReferenceDrift drift{0.5};
    Rng rng(12);
    auto sampler = [&](Rng& stream) {
        std::vector<Vec> x0 = {gaussian_vector(stream, 2)};
        DriftMap fwd = reference_forward_map(drift, sched);
        Rng sub = stream.substream(999);
        return em_forward(x0, fwd, sched, sub)[0];
    };
    auto cache = cache_build(sampler, 16, sched, rng);
    REQUIRE(cache.n_traj == 16);
    REQUIRE(cache.dim == 2);

    Rng mb_rng(13);
    auto batch = cache_minibatch(cache, 64, mb_rng);
    for (auto& p : batch) {
        REQUIRE(p.k < 8);
        REQUIRE(p.j < 16);
        const double* a = cache.state(p.j, p.k);
        REQUIRE(p.x_k == Vec(a, a + 2));
        const double* b = cache.state(p.j, p.k + 1);
        REQUIRE(p.x_k1 == Vec(b, b + 2));
    }
}

TEST_CASE("cache: (k, j) indices are uniform (chi-square)") {
    auto sched = make_uniform_schedule(4, 0.1);
    auto sampler = [&](Rng& stream) {
        Trajectory tr;
        tr.states.assign(5, Vec{0.0});
        (void)stream;
        return tr;
    };
    Rng rng(14);
    auto cache = cache_build(sampler, 5, sched, rng);
    Rng mb_rng(15);
    const std::size_t cells = 4 * 5;
    const std::size_t n = 100000;
    std::map<std::pair<std::size_t, std::size_t>, int> counts;
    auto batch = cache_minibatch(cache, n, mb_rng);
    for (auto& p : batch) counts[{p.k, p.j}]++;
    const double expect = double(n) / cells;
    double chi2 = 0.0;
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t j = 0; j < 5; ++j) {
            const double c = counts[{k, j}];
            chi2 += (c - expect) * (c - expect) / expect;
        }
    // 19 dof; 99.9% quantile ~ 43.8
    REQUIRE(chi2 < 43.8);
}

TEST_CASE("cache: refresh counter semantics") {
    auto sched = make_uniform_schedule(2, 0.1);
    auto sampler = [&](Rng& stream) {
        Trajectory tr;
        tr.states.assign(3, Vec{stream.normal()});
        return tr;
    };
    Rng rng(16);
    auto cache = cache_build(sampler, 3, sched, rng, 10);
    REQUIRE_FALSE(cache.stale());
    for (int i = 0; i < 10; ++i) cache.age++;
    REQUIRE(cache.stale());
    // rebuilding with a fresh stream changes the contents
    Rng rng2 = rng.substream(1);
    auto cache2 = cache_build(sampler, 3, sched, rng2, 10);
    REQUIRE(cache.states != cache2.states);
}
