#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dsbridge/flow.hpp"

using namespace dsb;

namespace {

// closed Brownian case: data N(0,1), f = 0, p_t = N(0, (1+2t) I),
// b_t(x) = 2 grad log p_t(x) = -2x/(1+2t)
FlowField brownian_field() {
    FlowField field;
    field.f = [](double, const Vec& x) { return Vec(x.size(), 0.0); };
    field.b = [](double t, const Vec& x) {
        Vec v = x;
        for (auto& c : v) c *= -2.0 / (1.0 + 2.0 * t);
        return v;
    };
    return field;
}

double log_normal_density(double x, double var) {
    return -0.5 * std::log(2.0 * 3.14159265358979323846 * var) - 0.5 * x * x / var;
}

}  // namespace

TEST_CASE("prob_flow_rhs: stationary, hand-derived, and linear cases") {
    FlowField same;
    same.f = [](double, const Vec& x) { return x; };
    same.b = [](double, const Vec& x) { return x; };
    REQUIRE(prob_flow_rhs(same, 0.3, {1.0, -2.0}) == Vec{0.0, 0.0});

    // f = 0, b = -2x/(1+2t) -> velocity x/(1+2t)
    auto field = brownian_field();
    const Vec v = prob_flow_rhs(field, 0.5, {3.0});
    REQUIRE(v[0] == Catch::Approx(3.0 / 2.0).epsilon(1e-14));

    // linearity in (f, b) pointwise
    FlowField sum;
    sum.f = [](double, const Vec& x) {
        Vec y = x;
        for (auto& c : y) c *= 3.0;
        return y;
    };
    sum.b = [](double, const Vec& x) { return Vec(x.size(), 1.0); };
    const Vec w = prob_flow_rhs(sum, 0.0, {2.0});
    REQUIRE(w[0] == Catch::Approx(0.5 * (6.0 - 1.0)).epsilon(1e-14));
}

TEST_CASE("divergence_exact: linear, quadratic, constant fields") {
    Mat a(2, 2);
    a(0, 0) = 1.5;
    a(0, 1) = -0.3;
    a(1, 0) = 2.0;
    a(1, 1) = 0.25;
    VectorField lin = [&a](const Vec& x) { return matvec(a, x); };
    REQUIRE(divergence_exact(lin, {0.7, -1.1}, 1e-4) == Catch::Approx(1.75).margin(1e-8));

    VectorField quad = [](const Vec& x) { return Vec{x[0] * x[0], 0.0}; };
    REQUIRE(divergence_exact(quad, {1.0, 0.0}, 1e-4) == Catch::Approx(2.0).margin(1e-7));

    VectorField constant = [](const Vec& x) { return Vec(x.size(), 3.0); };
    REQUIRE(divergence_exact(constant, {1.0, 2.0}) == Catch::Approx(0.0).margin(1e-12));

    REQUIRE_THROWS_AS(divergence_exact(constant, {1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("divergence_hutchinson: unbiased on linear fields, exact on diagonal") {
    Mat a(3, 3);
    a(0, 0) = 2.0;
    a(1, 1) = -1.0;
    a(2, 2) = 0.5;
    a(0, 1) = 5.0;
    a(1, 0) = -3.0;
    a(2, 0) = 1.0;
    VectorField lin = [&a](const Vec& x) { return matvec(a, x); };
    Rng rng(1);
    auto est = divergence_hutchinson(lin, {0.2, -0.4, 1.0}, 1024, rng);
    REQUIRE(std::abs(est.estimate - 1.5) <= 3.0 * est.std_error + 1e-9);

    // diagonal Jacobian: every Rademacher probe returns the trace exactly
    Mat d(2, 2);
    d(0, 0) = 4.0;
    d(1, 1) = -1.5;
    VectorField diag = [&d](const Vec& x) { return matvec(d, x); };
    Rng rng2(2);
    auto ed = divergence_hutchinson(diag, {1.0, 1.0}, 64, rng2);
    REQUIRE(ed.estimate == Catch::Approx(2.5).margin(1e-6));
    REQUIRE(ed.std_error <= 1e-6);

    REQUIRE_THROWS_AS(divergence_hutchinson(lin, {0.0, 0.0, 0.0}, 0, rng),
                      std::invalid_argument);
}

TEST_CASE("divergence_hutchinson: exact vjp on a drift net matches finite differences") {
    NetSpec spec;
    spec.input_dim = 2;
    spec.enc_dim = 4;
    spec.state_widths = {8};
    spec.time_widths = {8};
    spec.head_widths = {16};
    spec.zero_init_head = false;
    Rng init(3);
    const Vec pf = init_params(spec, init);
    const Vec pb = init_params(spec, init);
    auto sched = make_uniform_schedule(4, 0.1);
    auto field = flow_field_from_drift_nets(spec, pf, pb, sched);

    const Vec x = {0.4, -0.9};
    const double t = 0.15;
    VectorField rhs = [&](const Vec& y) { return prob_flow_rhs(field, t, y); };
    const double exact = divergence_exact(rhs, x, 1e-5);
    Rng rng(4);
    auto vjp = [&](const Vec& y, const Vec& e) { return field.rhs_vjp(t, y, e); };
    auto est = divergence_hutchinson(rhs, x, 1024, rng, vjp);
    REQUIRE(std::abs(est.estimate - exact) <= 3.0 * est.std_error + 1e-8);
}

TEST_CASE("log_likelihood: stationary OU field reproduces the prior density exactly") {
    const double alpha = 2.0;  // p = N(0, I/alpha), f = b = -alpha x
    FlowField field;
    field.f = [alpha](double, const Vec& x) {
        Vec v = x;
        for (auto& c : v) c *= -alpha;
        return v;
    };
    field.b = field.f;
    auto sched = make_uniform_schedule(50, 0.01);
    auto log_prior = [alpha](const Vec& x) {
        double s = 0.0;
        for (double c : x) s += log_normal_density(c, 1.0 / alpha);
        return s;
    };
    const Vec x = {0.7, -0.2};
    auto res = log_likelihood(field, sched, x, FlowDirection::FromData, log_prior);
    REQUIRE(res.log_lik == Catch::Approx(log_prior(x)).margin(1e-12));
    REQUIRE(res.endpoint[0] == Catch::Approx(x[0]).margin(1e-12));
}

TEST_CASE("log_likelihood: closed brownian case, first-order in the step size") {
    auto field = brownian_field();
    auto log_prior = [](const Vec& x) {
        return log_normal_density(x[0], 2.0);  // p_T = N(0, 1 + 2T), T = 0.5
    };
    const Vec x = {0.8};
    const double want = log_normal_density(0.8, 1.0);

    auto sched200 = make_uniform_schedule(200, 0.5 / 200);
    auto res200 = log_likelihood(field, sched200, x, FlowDirection::FromData, log_prior);
    REQUIRE(std::abs(res200.log_lik - want) <= 1e-2);

    auto sched100 = make_uniform_schedule(100, 0.5 / 100);
    auto res100 = log_likelihood(field, sched100, x, FlowDirection::FromData, log_prior);
    const double ratio = std::abs(res100.log_lik - want) / std::abs(res200.log_lik - want);
    REQUIRE(ratio > 1.5);
    REQUIRE(ratio < 2.7);
}

TEST_CASE("log_likelihood: forward and backward directions agree on the closed case") {
    auto field = brownian_field();
    const double big_var = 2.0;
    auto log_prior = [big_var](const Vec& x) { return log_normal_density(x[0], big_var); };
    auto sched = make_uniform_schedule(400, 0.5 / 400);

    const Vec x = {0.6};
    auto from_data = log_likelihood(field, sched, x, FlowDirection::FromData, log_prior);
    // the deterministic preimage of x under the flow is x sqrt(1 + 2T)
    const Vec y = {0.6 * std::sqrt(2.0)};
    auto from_prior = log_likelihood(field, sched, y, FlowDirection::FromPrior, log_prior);
    REQUIRE(from_prior.endpoint[0] == Catch::Approx(0.6).margin(2e-3));
    REQUIRE(from_prior.log_lik == Catch::Approx(from_data.log_lik).margin(5e-3));
}

TEST_CASE("log_likelihood: recovered density integrates to one") {
    auto field = brownian_field();
    auto log_prior = [](const Vec& x) { return log_normal_density(x[0], 2.0); };
    auto sched = make_uniform_schedule(200, 0.5 / 200);
    double mass = 0.0;
    const int n = 60;
    const double lo = -5.0, hi = 5.0, h = (hi - lo) / n;
    for (int i = 0; i < n; ++i) {
        const Vec x = {lo + (i + 0.5) * h};
        mass += std::exp(log_likelihood(field, sched, x, FlowDirection::FromData, log_prior).log_lik) * h;
    }
    REQUIRE(mass == Catch::Approx(1.0).margin(1e-2));
}

TEST_CASE("log_likelihood: hutchinson probes agree with the exact divergence path") {
    auto field = brownian_field();
    auto log_prior = [](const Vec& x) { return log_normal_density(x[0], 2.0); };
    auto sched = make_uniform_schedule(100, 0.5 / 100);
    const Vec x = {-0.4};
    auto exact = log_likelihood(field, sched, x, FlowDirection::FromData, log_prior);
    Rng rng(9);
    auto noisy = log_likelihood(field, sched, x, FlowDirection::FromData, log_prior, 64, &rng);
    // the 1-d field has a diagonal jacobian, so probes are exact
    REQUIRE(noisy.log_lik == Catch::Approx(exact.log_lik).margin(1e-10));
}

TEST_CASE("flow_field_from_maps: off-range times rejected, drifts recovered") {
    auto sched = make_uniform_schedule(4, 0.25);
    const double alpha = 1.2;
    DriftMap fwd = reference_forward_map(ReferenceDrift{alpha}, sched);
    DriftMap bwd = [&sched](std::size_t k, const Vec& x) {
        Vec y = x;
        for (auto& c : y) c *= 1.0 - 0.1 * sched.gamma_before(k);
        return y;
    };
    auto field = flow_field_from_maps(fwd, bwd, sched);
    // f recovered from the transition mean: (F(k,x) - x)/gamma = -alpha x
    REQUIRE(field.f(0.1, {2.0})[0] == Catch::Approx(-alpha * 2.0).epsilon(1e-12));
    REQUIRE_THROWS_AS(field.f(1.5, {1.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(field.b(-0.2, {1.0}), std::invalid_argument);
}
